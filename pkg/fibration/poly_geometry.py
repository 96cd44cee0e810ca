# -*- coding: utf-8 -*-
"""
Harvey-Lawson spectral polynomial geometry
谱多项式 P_b(x)、最大实根 ζ₀、因子 Q_b 以及判别轨迹 Δ 的判定
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from common.errors import ErrorCode, LagfibError

logger = logging.getLogger(__name__)

# 重根在浮点下会分裂成虚部约 sqrt(eps) 的共轭对
CLUSTER_IMAG_TOL = 1e-5
CLUSTER_TOL = 1e-7
NEWTON_STEPS = 5
TOL_ROOT = 1e-10


@dataclass(frozen=True)
class BaseParams:
    """纤维化底空间中的点 b=(b_1,...,b_n)"""
    b: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.b)
        if len(values) < 2:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Base point needs n >= 2 components, got {len(values)}")
        if not all(np.isfinite(values)):
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Base point has non-finite components: {values}")
        object.__setattr__(self, "b", values)

    @property
    def n(self) -> int:
        return len(self.b)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.b, dtype=float)

    def norm(self) -> float:
        return float(np.linalg.norm(self.b))


def as_base(b) -> BaseParams:
    """接受 BaseParams 或数组"""
    if isinstance(b, BaseParams):
        return b
    return BaseParams(tuple(np.asarray(b, dtype=float).ravel()))


@dataclass(frozen=True)
class SpectralPolynomial:
    """首一多项式，系数按降幂排列"""
    coeffs: np.ndarray = field(compare=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs[0] != 1.0:
            raise LagfibError(ErrorCode.INVALID_PARAMS, "Spectral polynomial must be monic")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return np.polyval(self.coeffs, x)

    def derivative(self, x):
        return np.polyval(np.polyder(self.coeffs), x)

    @property
    def scale(self) -> float:
        return 1.0 + float(np.max(np.abs(self.coeffs)))


@dataclass(frozen=True)
class RootProfile:
    """单个底点的根数据"""
    zeta0: float
    dP: float
    q0: float
    zeta_eps: float
    eps: float
    on_delta: bool


def build_poly(b) -> SpectralPolynomial:
    """
    构造谱多项式 x·∏_{j≥2}(x−b_j) − b₁²

    Args:
        b: 底点

    Returns:
        SpectralPolynomial
    """
    base = as_base(b)
    values = base.array
    coeffs = np.append(np.poly(values[1:]), 0.0)
    coeffs[-1] -= values[0] ** 2
    return SpectralPolynomial(coeffs)


def max_real_root(p: SpectralPolynomial, shift: float = 0.0, tol_root: float = TOL_ROOT) -> float:
    """
    求 P(x) − shift 的最大实根

    用伴随矩阵特征值求全部根，筛选实根后做至多5步Newton抛光。
    抛光后残差仍超过 tol_root·scale 时记录告警（Δ 附近的根簇会出现）。
    重根（恰好是 Δ 的情形）会分裂成近实的簇，此时返回簇的均值。

    Args:
        p: 谱多项式
        shift: 非负平移（0 给出 ζ₀，ε² 给出 ζ_ε）
        tol_root: 相对残差容差

    Returns:
        最大实根

    Raises:
        LagfibError: shift为负或不存在实根
    """
    if shift < 0:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"shift must be >= 0, got {shift}")
    coeffs = p.coeffs.copy()
    coeffs[-1] -= shift
    scale = 1.0 + float(np.max(np.abs(coeffs)))

    roots = np.roots(coeffs)
    near_real = roots[np.abs(roots.imag) <= CLUSTER_IMAG_TOL * scale]
    if near_real.size == 0:
        raise LagfibError(ErrorCode.NO_REAL_ROOT, "No real root found",
                          data={"coeffs": coeffs.tolist()})

    top = float(np.max(near_real.real))
    cluster = near_real.real[np.abs(near_real.real - top) <= CLUSTER_TOL * scale]
    x = float(np.mean(cluster))
    if cluster.size > 1:
        logger.debug(f"Root cluster of size {cluster.size} at x={x}")

    # Newton 抛光，只接受使残差下降的步长
    dcoeffs = np.polyder(coeffs)
    value = np.polyval(coeffs, x)
    for _ in range(NEWTON_STEPS):
        slope = np.polyval(dcoeffs, x)
        if slope == 0.0 or value == 0.0:
            break
        candidate = x - value / slope
        candidate_value = np.polyval(coeffs, candidate)
        if abs(candidate_value) >= abs(value):
            break
        x, value = float(candidate), candidate_value
    if abs(value) > tol_root * scale:
        logger.warning(f"Root residual {abs(value):.3e} above tol_root={tol_root} at x={x}")
    return float(x)


def default_tol_disc(b) -> float:
    """尺度相关的判别容差 1e−7·(1+‖b‖ⁿ⁻¹)"""
    base = as_base(b)
    return 1e-7 * (1.0 + base.norm() ** (base.n - 1))


def zeta0(b) -> float:
    """ζ₀(b)，P_b 的最大实根"""
    return max_real_root(build_poly(b), 0.0)


def zeta_eps(b, eps: float = 1.0) -> float:
    """ζ_ε(b)，P_b − ε² 的最大实根"""
    return max_real_root(build_poly(b), eps * eps)


def q_factor(b, z0: Optional[float] = None) -> Tuple[float, np.ndarray]:
    """
    综合除法 P_b = (x−ζ₀)·Q_b

    Args:
        b: 底点
        z0: 已算好的 ζ₀（可选）

    Returns:
        (Q_b(ζ₀), Q 的降幂系数)
    """
    p = build_poly(b)
    root = zeta0(b) if z0 is None else float(z0)
    coeffs = p.coeffs
    q = np.empty(len(coeffs) - 1)
    acc = 0.0
    for k in range(len(coeffs) - 1):
        acc = acc * root + coeffs[k]
        q[k] = acc
    return float(np.polyval(q, root)), q


def root_profile(b, eps: float = 1.0, tol_disc: Optional[float] = None,
                 tol_root: float = TOL_ROOT) -> RootProfile:
    """计算 ζ₀、P′(ζ₀)、Q(ζ₀)、ζ_ε 和 Δ 标记"""
    base = as_base(b)
    p = build_poly(base)
    z0 = max_real_root(p, 0.0, tol_root)
    dP = float(p.derivative(z0))
    q0, _ = q_factor(base, z0)
    tol = default_tol_disc(base) if tol_disc is None else tol_disc
    return RootProfile(
        zeta0=z0,
        dP=dP,
        q0=q0,
        zeta_eps=max_real_root(p, eps * eps, tol_root),
        eps=eps,
        on_delta=abs(dP) <= tol,
    )


def zeta0_gradient(b, tol_disc: Optional[float] = None) -> np.ndarray:
    """
    ζ₀ 的梯度 ∂_{b_j}ζ₀ = −∂_{b_j}P|_{ζ₀} / P′(ζ₀)

    Args:
        b: 底点
        tol_disc: 判别容差

    Returns:
        长度为 n 的梯度向量

    Raises:
        LagfibError: b 在 Δ 上
    """
    base = as_base(b)
    values = base.array
    p = build_poly(base)
    x = max_real_root(p, 0.0)
    dP = float(p.derivative(x))
    tol = default_tol_disc(base) if tol_disc is None else tol_disc
    if abs(dP) <= tol:
        raise LagfibError(ErrorCode.ON_DISCRIMINANT,
                          f"zeta0 gradient is singular at b={base.b}",
                          data={"b": list(base.b), "dP": dP})

    partials = np.empty(base.n)
    partials[0] = -2.0 * values[0]
    factors = x - values[1:]
    for j in range(1, base.n):
        partials[j] = -x * np.prod(np.delete(factors, j - 1))
    return -partials / dP


def on_discriminant(b, tol_disc: Optional[float] = None) -> bool:
    """|P′_b(ζ₀)| ≤ tol_disc 时 b ∈ Δ"""
    return root_profile(b, tol_disc=tol_disc).on_delta


# n=3 时 Δ 的三条腿的单位方向
LEGS_3 = (
    np.array([0.0, 1.0, 1.0]) / np.sqrt(2.0),
    np.array([0.0, 0.0, -1.0]),
    np.array([0.0, -1.0, 0.0]),
)


def leg_distances(b) -> np.ndarray:
    """n=3 时到三条腿（各为从原点出发的射线）的欧氏距离"""
    values = as_base(b).array
    if values.size != 3:
        raise LagfibError(ErrorCode.INVALID_PARAMS, "Leg geometry is defined for n=3 only")
    out = np.empty(3)
    for k, direction in enumerate(LEGS_3):
        s = max(float(values @ direction), 0.0)
        out[k] = np.linalg.norm(values - s * direction)
    return out


def on_analytic_legs(b, tol: float = 1e-9) -> bool:
    """解析腿判定，用于交叉验证 on_discriminant"""
    return bool(np.min(leg_distances(b)) < tol)


def dist_to_discriminant(b) -> float:
    """
    到判别轨迹的距离

    n=3 为到三条腿并顶点的精确欧氏距离；n=2 时 Δ={0}，距离即 ‖b‖；
    一般 n 用 |P′_b(ζ₀)| 作为代理量。
    """
    base = as_base(b)
    if base.n == 3:
        return float(np.min(leg_distances(base)))
    if base.n == 2:
        return base.norm()
    p = build_poly(base)
    return abs(float(p.derivative(max_real_root(p, 0.0))))

