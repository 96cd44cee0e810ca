# -*- coding: utf-8 -*-
"""
Command-line tests
通过 main(argv) 端到端运行子命令，检查退出码和输出
"""

import json
import logging

import numpy as np
import pytest

from lagfib.cli import build_parser, config_overrides, main, setup_logging


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


def run(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code


def _error_body(err: str):
    return json.loads(err[err.index("{"):])


def test_alpha_n2(capsys):
    assert run(["alpha", "--family", "hl", "--n", "2", "--b", "1,0"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["schema"] == "lagfib.v1"
    assert body["command"] == "alpha"
    assert body["meta"]["seed"] == 42
    data = body["data"]
    assert data["value"] == pytest.approx(-np.log(1.0 + np.sqrt(2.0)), abs=1e-10)
    assert data["agree"] is True
    assert "closed_form" in data


def test_on_discriminant_exit_code(capsys):
    assert run(["alpha", "--b", "0,1,1"]) == 3
    captured = capsys.readouterr()
    assert captured.out == ""
    assert _error_body(captured.err)["data"]["error"]["name"] == "ON_DISCRIMINANT"


def test_parse_error_exit_code(capsys):
    assert run(["classify", "--family", "ff22", "--H", "b1 +", "--Hp", "0"]) == 2
    error = _error_body(capsys.readouterr().err)["data"]["error"]
    assert error["name"] == "PARSE_ERROR"
    assert error["data"]["position"] == 4


def test_classify_linear_difference(capsys):
    assert run(["classify", "--family", "ff22", "--H", "0", "--Hp", "b1"]) == 0
    data = json.loads(capsys.readouterr().out)["data"]
    assert data["status"] == "not_equivalent"
    assert data["difference"] == "-b1"
    assert data["model"]["kind"] == "ff22"


def test_sweep_csv(capsys):
    code = run(["--threads", "1", "-f", "csv", "sweep", "--quantity", "distance",
                "--b", "0.5,0,0", "--axis", "b2:-1:1:3"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "b1,b2,b3,value,status"
    assert len(lines) == 4
    assert lines[2].startswith("0.5,0.0,0.0,")


def test_output_file(tmp_path, capsys):
    target = tmp_path / "flow.json"
    code = run(["-o", str(target), "flow", "--family", "ff22", "--i", "3", "--t", "0.5",
                "--samples", "5", "--return-time"])
    assert code == 0
    assert capsys.readouterr().out == ""
    data = json.loads(target.read_text(encoding="utf-8"))["data"]
    assert len(data["records"]) == 5
    assert data["return_time"] == pytest.approx(1.0, abs=1e-8)
    assert data["drift"] <= 1e-10


def test_config_file(tmp_path, capsys):
    path = tmp_path / "run.yaml"
    path.write_text("model:\n  family: ff22\nclassify:\n  H: \"0\"\n  Hp: \"s1\"\n",
                    encoding="utf-8")
    assert run(["-c", str(path), "classify"]) == 0
    data = json.loads(capsys.readouterr().out)["data"]
    assert data["Hp"] == "s1"
    assert data["status"] == "not_equivalent"


def test_check_subcommand(capsys):
    assert run(["check", "--only", "sections"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body["data"]["passed"] is True
    assert body["data"]["checks"][0]["status"] == "PASS"


def test_no_command_prints_help(capsys):
    assert run([]) == 1
    assert "lagfib" in capsys.readouterr().out


def test_bad_choice_is_usage_error(capsys):
    assert run(["alpha", "--family", "toric"]) == 2


def test_overrides_only_config_fields():
    args = build_parser().parse_args(["monodromy", "--loop", "leg1", "--radius", "0.2", "--reverse"])
    overrides = config_overrides(args)
    assert overrides == {"loop": "leg1", "radius": 0.2}


def test_setup_logging_file(tmp_path):
    log_file = tmp_path / "run.log"
    setup_logging(False, "info", str(log_file))
    logging.getLogger("lagfib.test").info("hello")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert " - lagfib.test - INFO - hello" in log_file.read_text(encoding="utf-8")
