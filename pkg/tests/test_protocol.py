# -*- coding: utf-8 -*-
"""
Output protocol tests
JSON 信封、CSV 渲染和错误输出
"""

import json

import numpy as np
import pytest

from common.errors import ErrorCode, LagfibError
from common.protocol import SCHEMA, Envelope, build_error, emit, render_csv, to_jsonable


class _Record:
    def to_dict(self):
        return {"value": np.float64(0.25)}


def test_to_jsonable_converts_numpy():
    data = to_jsonable({"a": np.float64(1.5), "b": np.int64(3), "c": np.array([1.0, 2.0]),
                        "d": (np.bool_(True), None), 4: _Record()})
    assert data == {"a": 1.5, "b": 3, "c": [1.0, 2.0], "d": [True, None], "4": {"value": 0.25}}
    assert type(data["b"]) is int
    assert type(data["d"][0]) is bool


def test_to_jsonable_non_finite():
    assert to_jsonable([np.nan, np.inf, -np.inf]) == ["nan", "inf", "-inf"]


def test_envelope_bytes_are_canonical():
    first = Envelope("alpha", {"z": 1, "a": [0.1, 0.2]}, {"seed": 42}).to_bytes()
    second = Envelope("alpha", {"a": [0.1, 0.2], "z": 1}, {"seed": 42}).to_bytes()
    assert first == second
    assert first.endswith(b"\n")
    body = json.loads(first)
    assert body["schema"] == SCHEMA
    assert list(body) == sorted(body)


def test_build_error():
    error = LagfibError(ErrorCode.PARSE_ERROR, "Unexpected end", data={"position": 2})
    body = json.loads(build_error(error, "periods"))
    assert body["command"] == "periods"
    assert body["meta"] == {"status": "error"}
    assert body["data"]["error"] == {"code": 1002, "name": "PARSE_ERROR",
                                     "message": "Unexpected end", "data": {"position": 2}}


def test_render_csv():
    records = [{"b1": 0.1, "value": float("nan"), "status": "on_discriminant"},
               {"b1": 1 / 3, "value": [1, 2], "status": "ok"}]
    lines = render_csv(records).decode("utf-8").splitlines()
    assert lines[0] == "b1,value,status"
    assert lines[1] == "0.1,nan,on_discriminant"
    assert lines[2] == f"{1 / 3!r},\"[1, 2]\",ok"
    assert float(lines[2].split(",")[0]) == 1 / 3
    assert render_csv([], ["b1", "status"]) == b"b1,status\n"


def test_emit_writes_file(tmp_path):
    target = tmp_path / "out.csv"
    payload = emit({"records": [{"b1": 0.5, "status": "ok"}]}, fmt="csv", path=str(target),
                   columns=["status", "b1"])
    assert target.read_bytes() == payload
    assert payload == b"status,b1\nok,0.5\n"


def test_emit_json_meta():
    payload = emit({"value": 1.0}, command="alpha", meta={"seed": 7})
    body = json.loads(payload)
    assert body["meta"] == {"seed": 7}
    assert body["data"] == {"value": 1.0}


def test_emit_errors(tmp_path):
    with pytest.raises(LagfibError) as exc:
        emit({}, fmt="xml")
    assert exc.value.code == ErrorCode.INVALID_PARAMS
    with pytest.raises(LagfibError) as exc:
        emit({}, path=str(tmp_path))
    assert exc.value.code == ErrorCode.IO_ERROR
