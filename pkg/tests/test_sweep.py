# -*- coding: utf-8 -*-
"""
Sweep tests
扫描轴解析、格点顺序、单点求值和进程数
"""

import numpy as np
import pytest

from common.errors import ErrorCode, LagfibError
from common.utils import Timer, make_rng, resolve_workers, safe_int
from lagfib.sweep import (
    Axis, columns_for, evaluate_point, grid_points, parse_axis, run_sweep,
)

SETTINGS = {"tol_root": 1e-10, "quad_rel": 1e-10}


def test_parse_axis():
    axis = parse_axis("b2:-1:1:11")
    assert axis == Axis(1, -1.0, 1.0, 11)
    assert axis.name == "b2"
    assert np.allclose(axis.values(), np.linspace(-1.0, 1.0, 11))


@pytest.mark.parametrize("text", ["b2:-1:1", "x2:-1:1:5", "b0:-1:1:5", "b2:a:1:5", "b2:-1:1:0"])
def test_parse_axis_rejects(text):
    with pytest.raises(LagfibError) as exc:
        parse_axis(text)
    assert exc.value.code == ErrorCode.INVALID_PARAMS


def test_grid_first_axis_slowest():
    grid = grid_points((0.5, 0.0, 0.0), [parse_axis("b2:-1:1:3"), parse_axis("b3:0:1:2")])
    assert grid.shape == (6, 3)
    assert grid[:, 1].tolist() == [-1.0, -1.0, 0.0, 0.0, 1.0, 1.0]
    assert grid[:, 2].tolist() == [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]
    assert np.all(grid[:, 0] == 0.5)


def test_grid_rejects_bad_axes():
    with pytest.raises(LagfibError):
        grid_points((0.5, 0.0), [parse_axis("b3:0:1:2")])
    with pytest.raises(LagfibError):
        grid_points((0.5, 0.0, 0.0), [parse_axis("b2:0:1:2"), parse_axis("b2:1:2:2")])


def test_evaluate_point_values():
    record = evaluate_point("alpha", SETTINGS, np.array([1.0, 0.0]))
    assert record["status"] == "ok"
    assert record["value"] == pytest.approx(-np.log(1.0 + np.sqrt(2.0)), abs=1e-10)
    assert evaluate_point("distance", SETTINGS, np.array([0.3, 0.0, -1.0]))["value"] == \
        pytest.approx(0.3)


def test_evaluate_point_on_discriminant():
    record = evaluate_point("alpha", SETTINGS, np.array([0.0, 1.0, 1.0]))
    assert record["status"] == "on_discriminant"
    assert np.isnan(record["value"])
    assert record["b2"] == 1.0


def test_evaluate_point_membership():
    record = evaluate_point("membership", SETTINGS, np.array([1.0, 0.5, -0.5]))
    assert list(record) == columns_for("membership", 3)
    assert record["root_ok"]
    assert not record["on_delta"]
    assert not record["on_legs"]


def test_evaluate_point_unknown_quantity():
    with pytest.raises(LagfibError):
        evaluate_point("volume", SETTINGS, np.array([1.0, 0.0]))


def test_run_sweep_in_process():
    records = run_sweep("distance", (0.5, 0.0, 0.0), [parse_axis("b2:-1:1:3")], threads=1)
    assert [r["b2"] for r in records] == [-1.0, 0.0, 1.0]
    assert all(r["status"] == "ok" for r in records)
    assert list(records[0]) == columns_for("distance", 3)
    with pytest.raises(LagfibError):
        run_sweep("volume", (0.5, 0.0, 0.0), [])


# ============== 工具函数 ==============

def test_resolve_workers(monkeypatch):
    monkeypatch.delenv("LAGFIB_THREADS", raising=False)
    assert resolve_workers(1) == 1
    assert resolve_workers() >= 1
    monkeypatch.setenv("LAGFIB_THREADS", "1")
    assert resolve_workers(8) == 1
    monkeypatch.setenv("LAGFIB_THREADS", "bogus")
    assert resolve_workers(1) == 1


def test_make_rng_is_seeded():
    assert make_rng(7).uniform() == make_rng(7).uniform()
    assert make_rng().uniform() == np.random.default_rng(42).uniform()


def test_safe_int_and_timer():
    assert safe_int("12") == 12
    assert safe_int("x", 3) == 3
    with Timer() as timer:
        pass
    assert timer.elapsed >= 0.0
    assert Timer().elapsed == 0.0
