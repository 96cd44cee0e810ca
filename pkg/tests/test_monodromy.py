# -*- coding: utf-8 -*-
"""
Monodromy tests
闭路构造、周期基延拓和整数单值矩阵
"""

import numpy as np
import pytest

from common.errors import ErrorCode, LagfibError
from fibration.models import FocusFocus22, HarveyLawson
from fibration.monodromy import (
    GENERATORS, MonodromyMatrix, as_matrix, build_loop, expected_matrices, identify_word,
    monodromy_for, transport_basis,
)
from fibration.periods import DeformationH

M1 = np.array(GENERATORS["M1"])
M2 = np.array(GENERATORS["M2"])
IDENTITY = np.eye(3, dtype=int)


@pytest.fixture(scope="module")
def hl_legs():
    m = HarveyLawson(3)
    return {kind: monodromy_for(m, kind, 0.3, 64) for kind in ("leg1", "leg2", "leg3", "composite")}


# ============== 闭路 ==============

def test_build_loop_is_closed():
    loop = build_loop("ff22", radius=0.5, K=16)
    points = loop.array
    assert points.shape == (17, 3)
    assert np.allclose(points[0], points[-1])
    assert np.allclose(np.hypot(points[:, 0], points[:, 1]), 0.5)
    assert loop.label == "ff22"
    assert loop.reversed().label == "ff22^-1"


def test_leg_loops_keep_distance():
    m = HarveyLawson(3)
    for kind in ("leg1", "leg2", "leg3"):
        distances = [m.distance(p) for p in build_loop(kind, 0.3, 32).array]
        assert min(distances) == pytest.approx(0.3, abs=1e-9)


def test_build_loop_rejects_bad_input():
    with pytest.raises(LagfibError):
        build_loop("ff22", radius=0.0)
    with pytest.raises(LagfibError):
        build_loop("ff22", K=3)
    with pytest.raises(LagfibError):
        build_loop("figure-eight")


# ============== 矩阵与生成元 ==============

def test_monodromy_matrix_properties():
    M = as_matrix(M1, 0.01, "M1")
    assert M.det == 1
    assert M.is_unipotent()
    assert not as_matrix(2 * IDENTITY).is_unipotent()
    data = M.to_dict()
    assert data["matrix"] == [[1, 0, 0], [1, 1, 0], [0, 0, 1]]
    assert all(isinstance(v, int) for row in data["matrix"] for v in row)


def test_identify_word():
    assert identify_word(as_matrix(IDENTITY)) == "I"
    assert identify_word(as_matrix(M1)) == "M1"
    assert identify_word(as_matrix(np.round(np.linalg.inv(M2)))) == "M2^-1"
    inverse_m2 = np.round(np.linalg.inv(M2)).astype(int)
    assert identify_word(as_matrix(M1 @ inverse_m2)) == "M1*M2^-1"
    assert identify_word(as_matrix(np.linalg.matrix_power(M1, 5))) is None


def test_expected_matrices():
    assert [M.label for M in expected_matrices("hl")] == ["M1", "M2", "M3"]
    assert np.array_equal(expected_matrices("ff22")[0].array, M1)
    with pytest.raises(LagfibError):
        expected_matrices("toric")


# ============== FF22 ==============

def test_ff22_loop():
    M = monodromy_for(FocusFocus22(), "ff22", 0.5, 64)
    assert np.array_equal(M.array, M1)
    assert M.residual <= 0.05
    assert isinstance(M, MonodromyMatrix)


def test_ff22_reverse_loop_inverts():
    M = monodromy_for(FocusFocus22(), "ff22", 0.5, 64, reverse=True)
    assert np.array_equal(M.array, np.round(np.linalg.inv(M1)).astype(int))


def test_ff22_independent_of_radius_and_deformation():
    m = FocusFocus22()
    small = monodromy_for(m, "ff22", 0.3, 48)
    deformed = monodromy_for(m, "ff22", 0.5, 64, H=DeformationH.parse("s1^2 + s2*r", m))
    assert np.array_equal(small.array, M1)
    assert np.array_equal(deformed.array, M1)


def test_ff22_contractible_loop_is_trivial():
    M = monodromy_for(FocusFocus22(), "ff22-contractible", 0.3, 64)
    assert np.array_equal(M.array, IDENTITY)
    assert M.residual < 1e-6


def test_ff22_rejects_hl_loops():
    with pytest.raises(LagfibError) as exc:
        monodromy_for(FocusFocus22(), "leg1")
    assert exc.value.code == ErrorCode.INVALID_PARAMS


def test_loop_too_close_to_discriminant():
    with pytest.raises(LagfibError) as exc:
        monodromy_for(HarveyLawson(3), "leg2", radius=0.04, K=16)
    assert exc.value.code == ErrorCode.ON_DISCRIMINANT


def test_open_loop_rejected():
    from fibration.monodromy import LoopSpec
    loop = LoopSpec(((0.5, 0.0, 0.5), (0.0, 0.5, 0.5)), "open")
    with pytest.raises(LagfibError):
        transport_basis(FocusFocus22(), DeformationH.zero(FocusFocus22()), loop)


# ============== HL ==============

@pytest.mark.slow
def test_hl_leg_matrices(hl_legs):
    for kind in ("leg1", "leg2", "leg3"):
        M = hl_legs[kind]
        assert M.residual <= 0.05
        assert M.det == 1
        assert M.is_unipotent()
        assert not np.array_equal(M.array, IDENTITY)
        assert identify_word(M) is not None


@pytest.mark.slow
def test_hl_leg_relation(hl_legs):
    product = hl_legs["leg1"].array @ hl_legs["leg2"].array @ hl_legs["leg3"].array
    assert np.array_equal(product, IDENTITY)
    assert np.array_equal(hl_legs["composite"].array,
                          hl_legs["leg2"].array @ hl_legs["leg3"].array)


@pytest.mark.slow
def test_hl_radius_independence(hl_legs):
    M = monodromy_for(HarveyLawson(3), "leg2", 0.2, 48)
    assert np.array_equal(M.array, hl_legs["leg2"].array)


@pytest.mark.slow
def test_hl_contractible_loop_is_trivial():
    M = monodromy_for(HarveyLawson(3), "contractible", 0.3, 64)
    assert np.array_equal(M.array, IDENTITY)


@pytest.mark.slow
def test_hl_leg_generators(hl_legs):
    inverse_m1 = np.round(np.linalg.inv(M1)).astype(int)
    inverse_m2 = np.round(np.linalg.inv(M2)).astype(int)
    assert np.array_equal(hl_legs["leg1"].array, inverse_m1 @ M2)
    assert np.array_equal(hl_legs["leg2"].array, M1)
    assert np.array_equal(hl_legs["leg3"].array, inverse_m2)


@pytest.mark.slow
def test_hl_reverse_loop_inverts(hl_legs):
    M = monodromy_for(HarveyLawson(3), "leg2", 0.3, 64, reverse=True)
    assert np.array_equal(M.array @ hl_legs["leg2"].array, IDENTITY)
    assert M.label == "leg2^-1"


@pytest.mark.slow
def test_hl_shooting_matches_quadrature(hl_legs):
    M = monodromy_for(HarveyLawson(3), "leg2", 0.3, 64, method="shooting")
    assert np.array_equal(M.array, hl_legs["leg2"].array)
    assert M.residual <= 0.05
