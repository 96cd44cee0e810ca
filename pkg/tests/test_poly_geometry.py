# -*- coding: utf-8 -*-
"""
Spectral polynomial and discriminant tests
谱多项式、ζ₀ 和判别轨迹
"""

import logging

import numpy as np
import pytest

from common.errors import ErrorCode, LagfibError
from common.utils import central_difference
from fibration.poly_geometry import (
    BaseParams, SpectralPolynomial, as_base, build_poly, default_tol_disc,
    dist_to_discriminant, leg_distances, max_real_root, on_analytic_legs, on_discriminant,
    q_factor, root_profile, zeta0, zeta0_gradient, zeta_eps,
)


def test_build_poly_coefficients():
    # x(x−2)(x−3) − 1
    p = build_poly((1.0, 2.0, 3.0))
    assert np.allclose(p.coeffs, [1.0, -5.0, 6.0, -1.0])
    assert p.degree == 3


def test_base_params_validation():
    with pytest.raises(LagfibError) as exc:
        BaseParams((1.0,))
    assert exc.value.code == ErrorCode.INVALID_PARAMS
    with pytest.raises(LagfibError):
        BaseParams((1.0, float("nan")))
    assert as_base([1, 2, 3]).b == (1.0, 2.0, 3.0)


def test_non_monic_rejected():
    with pytest.raises(LagfibError):
        SpectralPolynomial(np.array([2.0, 0.0, -1.0]))


def test_zeta0_n2_closed_form():
    for b1, b2 in [(1.0, 0.0), (0.5, -1.0), (2.0, 3.0)]:
        expected = 0.5 * (b2 + np.sqrt(b2 * b2 + 4.0 * b1 * b1))
        assert zeta0((b1, b2)) == pytest.approx(expected, rel=1e-12)


def test_zeta0_is_largest_root(off_discriminant):
    for b in off_discriminant:
        p = build_poly(b)
        root = zeta0(b)
        assert abs(p(root)) <= 1e-10 * p.scale
        # P ≤ 0 在 max(0, b_j) 处，所以最大根不小于它
        assert root >= max(0.0, *b[1:]) - 1e-12


def test_zeta_eps_above_zeta0():
    b = (0.3, -0.2, 0.7)
    assert zeta_eps(b, 1.0) > zeta0(b)
    assert build_poly(b)(zeta_eps(b, 1.0)) == pytest.approx(1.0, abs=1e-9)


def test_negative_shift_rejected():
    with pytest.raises(LagfibError) as exc:
        max_real_root(build_poly((1.0, 0.0)), -1.0)
    assert exc.value.code == ErrorCode.INVALID_PARAMS


def test_q_factor_matches_derivative(off_discriminant):
    for b in off_discriminant:
        profile = root_profile(b)
        q0, q = q_factor(b, profile.zeta0)
        assert q0 == pytest.approx(profile.dP, rel=1e-8)
        assert len(q) == 3


@pytest.mark.parametrize("b", [(0.0, 1.0, 1.0), (0.0, 0.0, -1.0), (0.0, -2.0, 0.0), (0.0, 0.0, 0.0)])
def test_points_on_legs_are_on_discriminant(b):
    assert on_discriminant(b)
    assert on_analytic_legs(b)
    assert dist_to_discriminant(b) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("b", [(1.0, 0.0, 0.0), (0.0, 1.0, 2.0), (0.5, -1.0, 0.3)])
def test_generic_points_off_discriminant(b):
    assert not on_discriminant(b)
    assert not on_analytic_legs(b)
    assert dist_to_discriminant(b) > 0.1


def test_membership_agrees_with_leg_geometry(rng):
    # 腿附近的点：两种判定一致
    for _ in range(30):
        t = rng.uniform(0.2, 2.0)
        b = np.array([0.0, t, t]) if rng.random() < 0.5 else np.array([0.0, 0.0, -t])
        assert on_discriminant(b) == on_analytic_legs(b)
        shifted = b + np.array([0.3, 0.0, 0.0])
        assert on_discriminant(shifted) == on_analytic_legs(shifted) == False  # noqa: E712


def test_leg_distances():
    assert leg_distances((1.0, 0.0, 0.0)) == pytest.approx([1.0, 1.0, 1.0])
    d = leg_distances((0.0, 2.0, 2.0))
    assert d[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(LagfibError):
        leg_distances((1.0, 0.0))


def test_distance_n2_is_norm():
    assert dist_to_discriminant((3.0, 4.0)) == pytest.approx(5.0)


def test_default_tol_disc_scales_with_norm():
    assert default_tol_disc((0.0, 0.0, 0.0)) == pytest.approx(1e-7)
    assert default_tol_disc((0.0, 3.0, 4.0)) == pytest.approx(1e-7 * 26.0)


def test_zeta0_gradient_matches_central_difference(off_discriminant):
    for b in off_discriminant:
        analytic = zeta0_gradient(b)
        numeric = np.array([central_difference(zeta0, np.asarray(b), j, 1e-6) for j in range(3)])
        assert np.allclose(analytic, numeric, rtol=1e-5, atol=1e-7)


def test_zeta0_gradient_singular_on_discriminant():
    with pytest.raises(LagfibError) as exc:
        zeta0_gradient((0.0, 1.0, 1.0))
    assert exc.value.code == ErrorCode.ON_DISCRIMINANT


def test_no_real_root():
    with pytest.raises(LagfibError) as exc:
        max_real_root(SpectralPolynomial(np.array([1.0, 0.0, 1.0])))
    assert exc.value.code == ErrorCode.NO_REAL_ROOT
    assert exc.value.data["coeffs"] == [1.0, 0.0, 1.0]


def test_root_residual_above_tol_root_is_logged(caplog):
    # 没有浮点数的平方恰为 2，残差必不为 0
    p = SpectralPolynomial(np.array([1.0, 0.0, -2.0]))
    with caplog.at_level(logging.WARNING, logger="fibration.poly_geometry"):
        assert max_real_root(p) == pytest.approx(np.sqrt(2.0), rel=1e-15)
    assert not caplog.records
    with caplog.at_level(logging.WARNING, logger="fibration.poly_geometry"):
        max_real_root(p, tol_root=1e-20)
        root_profile((0.3, -0.2, 0.7), tol_root=0.0)
    assert len([r for r in caplog.records if "tol_root" in r.getMessage()]) >= 1


@pytest.mark.parametrize("b", [(0.0, 1.0, 1.0), (0.0, 0.0, -1.0), (0.0, 0.0, 0.0)])
def test_zeta_eps_smooth_across_discriminant(b):
    assert on_discriminant(b)
    center = np.asarray(b, dtype=float)
    # 只依赖 b₁²，b₁ 方向的中心差分精确为 0
    assert central_difference(zeta_eps, center, 0, 1e-3) == 0.0
    for j in (1, 2):
        coarse = central_difference(zeta_eps, center, j, 1e-3)
        fine = central_difference(zeta_eps, center, j, 5e-4)
        assert 0.95 <= coarse / fine <= 1.05
