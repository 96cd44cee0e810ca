# -*- coding: utf-8 -*-
"""
Router and error tests
"""

import pytest

from common.errors import ERROR_TO_EXIT_CODE, ErrorCode, LagfibError
from lagfib.router import Router


@pytest.fixture
def router():
    r = Router()

    @r.command("alpha", help="alpha at b")
    def alpha(context):
        return "alpha"

    @r.check("alpha_oracles", help="three ways to alpha")
    def oracles(config):
        return "oracles"

    @r.check("alpha_bound")
    def bound(config):
        return "bound"

    @r.check("sections")
    def sections(config):
        return "sections"

    return r


def test_exact_match(router):
    assert router.match("command", "alpha")({}) == "alpha"
    assert router.match("check", "alpha") is None
    assert router.match("command", "missing") is None


def test_select_by_pattern(router):
    assert [r.name for r in router.select("check", ["alpha_*"])] == ["alpha_oracles", "alpha_bound"]
    assert [r.name for r in router.select("check", ["sections", "alpha_b*"])] == ["alpha_bound",
                                                                                  "sections"]
    assert len(router.select("check")) == 3
    assert router.select("check", ["nothing*"]) == []


def test_names_and_describe(router):
    assert router.names("command") == ["alpha"]
    assert router.describe("check")["alpha_oracles"] == "three ways to alpha"


def test_duplicate_route_rejected(router):
    with pytest.raises(ValueError):
        router.add_route("command", "alpha", lambda context: None)
    # 不同分组可以同名
    router.add_route("check", "alpha", lambda config: None)


def test_error_defaults():
    error = LagfibError(ErrorCode.ON_DISCRIMINANT)
    assert error.message == "Base point lies on the discriminant locus"
    assert str(error) == error.message
    assert error.to_dict() == {"code": 2001, "name": "ON_DISCRIMINANT", "message": error.message}


@pytest.mark.parametrize("code, exit_code", [
    (ErrorCode.PARSE_ERROR, 2),
    (ErrorCode.ON_DISCRIMINANT, 3),
    (ErrorCode.QUADRATURE_FAILURE, 4),
    (ErrorCode.NON_INTEGER_MONODROMY, 5),
    (ErrorCode.IO_ERROR, 6),
    (ErrorCode.CHECK_FAILED, 1),
    (ErrorCode.INTERNAL_ERROR, 70),
])
def test_exit_codes(code, exit_code):
    assert LagfibError(code).exit_code == exit_code


def test_every_code_has_exit_code():
    assert set(ERROR_TO_EXIT_CODE) == set(ErrorCode)
