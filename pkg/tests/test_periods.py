# -*- coding: utf-8 -*-
"""
Period tests
α 的三种求法、多重时间、周期基、闭性和爆破渐近
"""

import numpy as np
import pytest

from common.errors import ErrorCode, LagfibError
from fibration.classify import approach_paths
from fibration.models import FocusFocus22, HarveyLawson
from fibration.periods import (
    DeformationH, alpha_bound, alpha_closed_form, alpha_flow_oracle, alpha_quadrature, blowup_fit,
    closedness_residual, hl_regular_period, multi_indices, multitime_solve, period_basis,
    phase_quadrature, rational_type_check, singular_period,
)

ALPHA_N2 = -np.log(1.0 + np.sqrt(2.0))


def _mod_pi(values):
    return (np.asarray(values) + np.pi / 2.0) % np.pi - np.pi / 2.0


# ============== α ==============

def test_alpha_n2_reference_value():
    assert alpha_quadrature((1.0, 0.0)) == pytest.approx(ALPHA_N2, abs=1e-10)
    assert alpha_closed_form((1.0, 0.0)) == pytest.approx(ALPHA_N2, abs=1e-12)
    assert alpha_flow_oracle((1.0, 0.0)) == pytest.approx(ALPHA_N2, abs=1e-6)


@pytest.mark.parametrize("b, eps", [((0.5, -1.0), 1.0), ((2.0, 3.0), 1.0), ((0.3, 0.2), 0.5)])
def test_alpha_closed_form_matches_quadrature(b, eps):
    assert alpha_quadrature(b, eps) == pytest.approx(alpha_closed_form(b, eps), rel=1e-10)


def test_alpha_closed_form_domain():
    with pytest.raises(LagfibError) as exc:
        alpha_closed_form((1.0, 0.0, 0.0))
    assert exc.value.code == ErrorCode.INVALID_PARAMS
    with pytest.raises(LagfibError) as exc:
        alpha_closed_form((0.0, 0.0))
    assert exc.value.code == ErrorCode.ON_DISCRIMINANT


def test_alpha_oracles_agree(off_discriminant):
    for b in off_discriminant[:10]:
        quad = alpha_quadrature(b)
        assert quad < 0
        assert alpha_flow_oracle(b) == pytest.approx(quad, rel=1e-5)


def test_alpha_on_discriminant_raises():
    with pytest.raises(LagfibError) as exc:
        alpha_quadrature((0.0, 1.0, 1.0))
    assert exc.value.code == ErrorCode.ON_DISCRIMINANT
    with pytest.raises(LagfibError) as exc:
        alpha_bound((0.0, 0.0, -1.0))
    assert exc.value.code == ErrorCode.ON_DISCRIMINANT


def test_alpha_symmetries():
    # P_b 只依赖 b₁² 和 {b₂, …, b_n}
    b = (0.4, 0.3, -0.2)
    reference = alpha_quadrature(b)
    assert alpha_quadrature((0.4, -0.2, 0.3)) == pytest.approx(reference, abs=1e-10)
    assert alpha_quadrature((-0.4, 0.3, -0.2)) == pytest.approx(reference, abs=1e-10)
    assert alpha_quadrature((-0.4, -0.2, 0.3)) == pytest.approx(reference, abs=1e-10)


def test_alpha_bound_n2():
    # ζ₀ = 1，Q(ζ₀) = 2
    assert alpha_bound((1.0, 0.0)) == pytest.approx(-np.sqrt(2.0))


def test_regular_period_is_pi():
    assert hl_regular_period(3) == pytest.approx(np.pi, abs=1e-8)


def test_singular_period_ff22():
    m = FocusFocus22()
    assert singular_period(m, (0.6, 0.8, 0.5)) == pytest.approx(0.0, abs=1e-15)
    assert singular_period(m, (0.3, 0.4, 0.0)) == pytest.approx(np.log(2.0))
    with pytest.raises(LagfibError) as exc:
        singular_period(m, (0.0, 0.0, 0.3))
    assert exc.value.code == ErrorCode.ON_DISCRIMINANT


# ============== 多重时间 ==============

def test_hl_multitime_methods_agree():
    m = HarveyLawson(3)
    b = (0.4, 0.3, -0.2)
    shooting = multitime_solve(m, b, method="shooting")
    quadrature = multitime_solve(m, b, method="quadrature")
    assert shooting.residual <= 1e-8
    assert quadrature.residual <= 1e-8
    assert shooting.T[0] == pytest.approx(alpha_quadrature(b), rel=1e-8)
    assert np.allclose(_mod_pi(shooting.array[1:] - quadrature.array[1:]), 0.0, atol=1e-7)


def test_phase_quadrature_vanishes_for_b1_zero():
    assert phase_quadrature((0.0, 0.5, -0.5), 2) == 0.0
    with pytest.raises(LagfibError):
        phase_quadrature((0.4, 0.3, -0.2), 1)


def test_ff22_multitime_closed_form():
    m = FocusFocus22(eps=0.5)
    b = (0.3, 0.4, 0.2)
    T = multitime_solve(m, b)
    assert T.T[0] == pytest.approx(-np.log(0.5) + 2.0 * np.log(0.5))
    assert T.T[1] == pytest.approx(np.arctan2(0.4, 0.3))
    assert T.T[2] == 0.0
    assert T.residual <= 1e-10


def test_multitime_warm_start_keeps_branch():
    m = FocusFocus22()
    first = multitime_solve(m, (-1.0, 0.1, 0.0), verify=False)
    crossed = multitime_solve(m, (-1.0, -0.1, 0.0), warm_start=first, verify=False)
    # 穿过负实轴后 Arg 延拓超过 π 而不是跳回 −π
    assert crossed.T[1] == pytest.approx(np.pi + np.arctan2(0.1, 1.0), abs=1e-12)
    assert crossed.T[1] > np.pi


def test_multitime_unknown_method():
    with pytest.raises(LagfibError):
        multitime_solve(HarveyLawson(3), (0.4, 0.3, -0.2), method="newton")


# ============== 周期基与闭性 ==============

def test_ff22_period_basis():
    m = FocusFocus22()
    basis = period_basis(m, DeformationH.parse("s1^2", m), (0.6, 0.8, 0.5))
    assert np.allclose(basis[0].comps, [1.2, np.arctan2(0.8, 0.6), 0.0])
    assert np.allclose(basis[1].comps, [0.0, 2.0 * np.pi, 0.0])
    assert np.allclose(basis[2].comps, [0.0, 0.0, 1.0])


def test_hl_period_basis():
    m = HarveyLawson(3)
    b = (0.4, 0.3, -0.2)
    basis = period_basis(m, DeformationH.zero(m), b)
    assert basis[0].comps[0] == pytest.approx(alpha_quadrature(b), rel=1e-10)
    assert np.allclose(basis[1].comps, [0.0, np.pi, 0.0], atol=1e-8)
    assert np.allclose(basis[2].comps, [0.0, 0.0, np.pi], atol=1e-8)


def test_period_basis_ignores_constant_shift():
    for m, b in ((FocusFocus22(), (0.6, 0.8, 0.5)), (HarveyLawson(3), (0.4, 0.3, -0.2))):
        text = "s1^2*s2" if isinstance(m, FocusFocus22) else "b1^2*b2"
        plain = period_basis(m, DeformationH.parse(text, m), b)
        shifted = period_basis(m, DeformationH.parse(f"{text} + 3", m), b)
        assert [tau.comps for tau in plain] == [tau.comps for tau in shifted]


def test_regular_periods_constant_in_b():
    ff22 = FocusFocus22()
    for b in ((0.6, 0.8, 0.5), (-1.0, 0.2, -0.3), (0.05, -0.4, 2.0)):
        basis = period_basis(ff22, DeformationH.zero(ff22), b)
        assert basis[1].comps == (0.0, 2.0 * np.pi, 0.0)
        assert basis[2].comps == (0.0, 0.0, 1.0)
    hl = HarveyLawson(3)
    for b in ((0.4, 0.3, -0.2), (0.5, -0.2, 0.3), (0.3, 0.2, 0.1)):
        basis = period_basis(hl, DeformationH.zero(hl), b)
        assert np.allclose(basis[1].comps, [0.0, np.pi, 0.0], atol=1e-8)
        assert np.allclose(basis[2].comps, [0.0, 0.0, np.pi], atol=1e-8)


def test_closedness_exact_form():
    m = FocusFocus22()
    H = DeformationH.parse("s1^2*s2 + s2*r - 2*s1*r", m)
    residual = closedness_residual(H.gradient, (0.6, 0.8, 0.5), 1e-3)
    assert np.max(np.abs(residual)) <= 1e-8
    assert np.allclose(residual, -residual.T)


def test_closedness_second_order():
    m = FocusFocus22()
    zero = DeformationH.zero(m)

    def tau0(b):
        return period_basis(m, zero, b)[0]

    coarse = np.max(np.abs(closedness_residual(tau0, (0.6, 0.8, 0.5), 1e-2)))
    fine = np.max(np.abs(closedness_residual(tau0, (0.6, 0.8, 0.5), 5e-3)))
    assert 3.5 <= coarse / fine <= 4.5


def test_closedness_detects_branch_cut():
    m = FocusFocus22()
    zero = DeformationH.zero(m)
    with pytest.raises(LagfibError) as exc:
        closedness_residual(lambda b: period_basis(m, zero, b)[0], (-1.0, 0.0, 0.5), 1e-3)
    assert exc.value.code == ErrorCode.BRANCH_CROSSING


# ============== 形变函数 ==============

def test_deformation_gradient():
    m = HarveyLawson(3)
    H = DeformationH.parse("b1*b2 + b3^2", m)
    assert np.allclose(H.gradient((1.0, 2.0, 3.0)), [2.0, 1.0, 6.0])
    assert H.minus(H).is_zero
    assert str(H) == "b1*b2 + b3**2"


def test_deformation_distance_variable():
    m = HarveyLawson(3)
    H = DeformationH.parse("d", m)
    assert H.value((1.0, 0.0, 0.0)) == pytest.approx(1.0)
    # 顶点路径上 d = b₂，∂d/∂b₂ = 1
    assert H.partial(1, (0.0, 0.2, -0.2)) == pytest.approx(1.0, abs=1e-6)


def test_deformation_rejects_unknown_variables():
    with pytest.raises(LagfibError) as exc:
        DeformationH.parse("b4 + 1", HarveyLawson(3))
    assert exc.value.code == ErrorCode.PARSE_ERROR
    # FF22 接受 s1/s2/r 别名
    m = FocusFocus22()
    assert DeformationH.parse("s1 + r", m).value((0.5, 0.0, 0.25)) == pytest.approx(0.75)


# ============== 爆破渐近 ==============

def test_blowup_bound_exponents():
    paths = approach_paths(HarveyLawson(3))
    leg = blowup_fit(paths["leg2"], np.geomspace(1e-4, 1e-1, 9), "bound")
    vertex = blowup_fit(paths["vertex"], np.geomspace(1e-3, 1e-1, 9), "bound")
    assert leg.slope == pytest.approx(-0.5, abs=0.1)
    assert vertex.slope == pytest.approx(-1.0, abs=0.15)
    assert leg.r2 >= 0.98 and vertex.r2 >= 0.98


def test_blowup_alpha_within_bound_order():
    paths = approach_paths(HarveyLawson(3))
    ts = np.geomspace(1e-3, 1e-1, 7)
    alpha = blowup_fit(paths["vertex"], ts, "alpha")
    bound = blowup_fit(paths["vertex"], ts, "bound")
    assert alpha.slope < 0
    assert alpha.slope >= bound.slope - 0.15


def test_blowup_fit_errors():
    paths = approach_paths(HarveyLawson(3))
    with pytest.raises(LagfibError) as exc:
        blowup_fit(paths["leg1"], [1e-2, 1e-3], "bound")
    assert exc.value.code == ErrorCode.INSUFFICIENT_SAMPLES
    with pytest.raises(LagfibError) as exc:
        blowup_fit(lambda t: np.array([1.0, t, t]), [0.1, 0.2, 0.3], "bound")
    assert exc.value.code == ErrorCode.INSUFFICIENT_SAMPLES
    with pytest.raises(LagfibError):
        blowup_fit(paths["leg1"], [1e-1, 1e-2, 1e-3], "gamma")


# ============== 有理型 ==============

def test_multi_indices():
    assert multi_indices(2, 0) == [()]
    assert len(multi_indices(3, 2)) == 10
    assert (0, 2) in multi_indices(3, 2)


def test_rational_type_flat_weight():
    m = HarveyLawson(3)
    path = approach_paths(m)["vertex"]
    ts = [0.3, 0.2, 0.1]
    flat = DeformationH.parse("flatbump(d)", m)
    rows = rational_type_check(1, flat, path, ts)
    assert len(rows) == 4
    assert all(row["tends_to_zero"] for row in rows)
    constant = rational_type_check(0, lambda b: 1.0, path, ts)
    assert not constant[0]["tends_to_zero"]


@pytest.mark.slow
def test_rational_type_exponential_weight_on_leg():
    m = HarveyLawson(3)
    path = approach_paths(m)["leg2"]
    ts = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
    rows = rational_type_check(2, DeformationH.parse("exp(-1/d)", m), path, ts)
    assert len(rows) == 10
    for row in rows:
        assert row["distances"][-1] == pytest.approx(1e-3, rel=1e-6)
        assert abs(row["products"][-1]) < 1e-6, row["J"]
        assert row["tends_to_zero"]


def test_rational_type_zero_weight():
    path = approach_paths(HarveyLawson(3))["leg2"]
    rows = rational_type_check(1, lambda b: 0.0, path, [0.1, 0.01])
    assert all(p == 0.0 for row in rows for p in row["products"])
