# -*- coding: utf-8 -*-
"""
Period forms
奇异周期 α(b)（积分与流时间两种求法）、多重时间、周期基、闭性残差和爆破渐近
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares
from scipy.stats import linregress

from common.errors import ErrorCode, LagfibError
from common.expr import (
    Expr, ZERO, depends_on, diff, difference, evaluate, parse_expr, to_text, variables,
)
from common.utils import central_difference, nested_difference
from fibration.models import (
    FibrationModel, FocusFocus22, HarveyLawson, MultiTime, ODE_ATOL, ODE_METHOD, ODE_RTOL,
    first_return_time, ham_vector_field, poisson_action, section,
)
from fibration.poly_geometry import (
    BaseParams, as_base, default_tol_disc, dist_to_discriminant, q_factor, zeta0, zeta_eps,
)
from fibration.quadrature import adaptive_gauss_legendre

logger = logging.getLogger(__name__)

QUAD_REL_TOL = 1e-10
SHOOTING_TOL = 1e-8
DISTANCE_STEP = 1e-6
ORACLE_TIME_CAP = 100.0

FF22_ALIASES = {"s1": "b1", "s2": "b2", "r": "b3"}


@dataclass(frozen=True)
class OneFormSample:
    """底空间上一点处的 1-形式，comps 为 db_1..db_n 的系数，branch 记录各分量的绕数"""
    base: BaseParams
    comps: Tuple[float, ...]
    branch: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(float(c) for c in self.comps))
        if not self.branch:
            object.__setattr__(self, "branch", (0,) * len(self.comps))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.comps)


@dataclass(frozen=True)
class AsymptoticFit:
    """log|y| 对 log d 的最小二乘拟合"""
    slope: float
    intercept: float
    r2: float
    window: Tuple[float, float]

    def to_dict(self) -> Dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "window": list(self.window)}


class DeformationH:
    """
    底空间上的光滑函数 H，由表达式给出

    变量 b1..bn 和 d（到 Δ 的距离）；∂d/∂b_j 用中心差分数值提供。
    """

    def __init__(self, expr: Expr, n: int, dist_fn: Callable = dist_to_discriminant,
                 policy: str = "strict"):
        self.expr = expr
        self.n = n
        self.dist_fn = dist_fn
        self.policy = policy
        self.names = tuple(f"b{j + 1}" for j in range(n))
        unknown = variables(expr) - set(self.names) - {"d"}
        if unknown:
            raise LagfibError(ErrorCode.PARSE_ERROR,
                              f"Unknown variables {sorted(unknown)} for n={n}",
                              data={"position": 0, "expected": list(self.names) + ["d"]})
        self._partials = {name: diff(expr, name) for name in self.names}

    @classmethod
    def parse(cls, text: str, m: FibrationModel, policy: str = "strict") -> "DeformationH":
        """按模型解析 H，FF22 接受 s1/s2/r 别名"""
        aliases = FF22_ALIASES if isinstance(m, FocusFocus22) else None
        return cls(parse_expr(text, aliases), m.n, m.distance, policy)

    @classmethod
    def zero(cls, m: FibrationModel) -> "DeformationH":
        return cls(ZERO, m.n, m.distance)

    def minus(self, other: "DeformationH") -> "DeformationH":
        """符号差 self − other"""
        return DeformationH(difference(self.expr, other.expr), self.n, self.dist_fn, self.policy)

    @property
    def is_zero(self) -> bool:
        return self.expr == ZERO

    def _env(self, b: np.ndarray, with_partials: bool) -> Dict[str, float]:
        env = {name: float(v) for name, v in zip(self.names, b)}
        if "d" in variables(self.expr):
            env["d"] = float(self.dist_fn(b))
            if with_partials:
                for j, name in enumerate(self.names):
                    env[f"d_{name}"] = float(central_difference(self.dist_fn, b, j, DISTANCE_STEP))
        return env

    def value(self, b) -> float:
        if self.is_zero:
            return 0.0
        b = as_base(b).array
        return evaluate(self.expr, self._env(b, False), self.policy)

    def partial(self, j: int, b) -> float:
        """∂H/∂b_{j+1}"""
        expr = self._partials[self.names[j]]
        if expr == ZERO:
            return 0.0
        b = as_base(b).array
        return evaluate(expr, self._env(b, depends_on(self.expr, "d")), self.policy)

    def gradient(self, b) -> np.ndarray:
        return np.array([self.partial(j, b) for j in range(self.n)])

    def __str__(self):
        return to_text(self.expr)


# ============== 奇异周期 α ==============

@lru_cache(maxsize=8192)
def _alpha_cached(b: Tuple[float, ...], eps: float, rel_tol: float, tol_disc: float) -> float:
    z0 = zeta0(b)
    q0, q = q_factor(b, z0)
    if q0 <= tol_disc:
        raise LagfibError(ErrorCode.ON_DISCRIMINANT,
                          f"alpha diverges at b={b}", data={"b": list(b), "q0": q0})
    upper = np.sqrt(max(zeta_eps(b, eps) - z0, 0.0))

    def integrand(s):
        return 2.0 / np.sqrt(np.polyval(q, z0 + s * s))

    return -adaptive_gauss_legendre(integrand, 0.0, upper, rel_tol=rel_tol)


def alpha_quadrature(b, eps: float = 1.0, rel_tol: float = QUAD_REL_TOL,
                     tol_disc: Optional[float] = None) -> float:
    """
    α(b) = −∫_{ζ₀}^{ζ₁} dx/√P_b(x)

    代换 x = ζ₀ + s² 消去端点的 (x−ζ₀)^{−1/2} 奇性，被积函数变为 2/√Q_b(ζ₀+s²)。

    Args:
        b: 底点（不在 Δ 上）
        eps: ζ₁ = ζ_ε 的 ε
        rel_tol: 积分相对容差
        tol_disc: 判别容差

    Returns:
        α(b) < 0

    Raises:
        LagfibError: ON_DISCRIMINANT 或 QUADRATURE_FAILURE
    """
    base = as_base(b)
    tol = default_tol_disc(base) if tol_disc is None else tol_disc
    return _alpha_cached(base.b, float(eps), float(rel_tol), float(tol))


def alpha_flow_oracle(b, eps: float = 1.0, t_cap: float = ORACLE_TIME_CAP,
                      rtol: float = ODE_RTOL, atol: float = ODE_ATOL) -> float:
    """
    流时间给出的 α：从 Σ⁺(b) 逆向积分 F₁ 的哈密顿流直到 u = Re∏z 穿过 −ε

    与积分求法完全独立，作为第二个检验。

    Raises:
        LagfibError: 时间上限内未到达（b 过于接近 Δ）
    """
    base = as_base(b)
    m = HarveyLawson(base.n, eps)
    y0 = section(m, "plus", base).coords

    def reached(_, y):
        z = y[0::2] + 1j * y[1::2]
        return np.prod(z).real + eps
    reached.terminal = True
    reached.direction = -1

    sol = solve_ivp(lambda _, y: ham_vector_field(m, 1, y), (0.0, -t_cap), y0,
                    method=ODE_METHOD, rtol=rtol, atol=atol, events=reached)
    if sol.status < 0:
        raise LagfibError(ErrorCode.INTEGRATION_FAILURE, sol.message, data={"b": list(base.b)})
    if not sol.t_events[0].size:
        raise LagfibError(ErrorCode.EVENT_NOT_FOUND,
                          f"Section not reached within t={t_cap}", data={"b": list(base.b)})
    return float(sol.t_events[0][0])


def alpha_closed_form(b, eps: float = 1.0) -> float:
    """
    n = 2 的闭式解

    P_b = (x−r₊)(x−r₋)，α = −2·log((√(ζ_ε−r₊) + √(ζ_ε−r₋)) / √(r₊−r₋))。
    """
    base = as_base(b)
    if base.n != 2:
        raise LagfibError(ErrorCode.INVALID_PARAMS, "Closed-form alpha exists for n=2 only")
    b1, b2 = base.b
    gap = np.sqrt(b2 * b2 + 4.0 * b1 * b1)
    if gap == 0.0:
        raise LagfibError(ErrorCode.ON_DISCRIMINANT, "alpha diverges at b=0")
    upper, lower = 0.5 * (b2 + gap), 0.5 * (b2 - gap)
    top = 0.5 * (b2 + np.sqrt(b2 * b2 + 4.0 * (b1 * b1 + eps * eps)))
    return float(-2.0 * np.log((np.sqrt(top - upper) + np.sqrt(top - lower)) / np.sqrt(gap)))


def alpha_bound(b, tol_disc: Optional[float] = None) -> float:
    """上界 −2/√Q_b(ζ₀)"""
    base = as_base(b)
    q0, _ = q_factor(base)
    tol = default_tol_disc(base) if tol_disc is None else tol_disc
    if q0 <= tol:
        raise LagfibError(ErrorCode.ON_DISCRIMINANT,
                          f"Bound diverges at b={base.b}", data={"b": list(base.b), "q0": q0})
    return -2.0 / np.sqrt(q0)


def phase_quadrature(b, k: int, eps: float = 1.0, rel_tol: float = QUAD_REL_TOL) -> float:
    """
    HL 环面时间的积分公式 T_k = −(b₁/2)∫_{ζ₀}^{ζ₁} dx/((x−b_k)√P_b(x))，模 π 确定

    Args:
        b: 底点
        k: 分量下标（2..n）
    """
    base = as_base(b)
    values = base.array
    if not 2 <= k <= base.n:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Torus index {k} outside 2..{base.n}")
    b1 = values[0]
    if b1 == 0.0:
        return 0.0
    z0 = zeta0(base)
    _, q = q_factor(base, z0)
    shift = z0 - values[k - 1]
    upper = np.sqrt(max(zeta_eps(base, eps) - z0, 0.0))

    def integrand(s):
        x = s * s
        return 2.0 / ((shift + x) * np.sqrt(np.polyval(q, z0 + x)))

    return -0.5 * b1 * adaptive_gauss_legendre(integrand, 0.0, upper, rel_tol=rel_tol)


@lru_cache(maxsize=16)
def hl_regular_period(n: int = 3) -> float:
    """HL 环面流 F₂ 的实测首次回归时间（π）"""
    m = HarveyLawson(n)
    return first_return_time(m, 2, np.tile([1.0, 0.0], n))


def singular_period(m: FibrationModel, b) -> float:
    """τ₀ 的 db₁ 系数：HL 为 α(b)，FF22 为 −log|s|"""
    if isinstance(m, FocusFocus22):
        s = m.distance(b)
        if s == 0.0:
            raise LagfibError(ErrorCode.ON_DISCRIMINANT, "s = 0 lies on the discriminant")
        return -float(np.log(s))
    return alpha_quadrature(b, m.eps)


# ============== 多重时间 ==============

def _nearest_branch(value: float, period: float, reference: Optional[float]) -> Tuple[float, int]:
    if reference is None:
        return value, 0
    shift = int(np.round((reference - value) / period))
    return value + shift * period, shift


def _hl_residual(m: HarveyLawson, T: np.ndarray, start: np.ndarray, target: np.ndarray,
                 rtol: float, atol: float) -> np.ndarray:
    return poisson_action(m, T, start, rtol=rtol, atol=atol).coords - target


def multitime_solve(m: FibrationModel, b, method: str = "shooting",
                    warm_start: Optional[MultiTime] = None, verify: bool = True,
                    rtol: float = ODE_RTOL, atol: float = ODE_ATOL) -> MultiTime:
    """
    求多重时间 T 使 Φ(T, 起始截面) 落在目标截面上

    HL: Φ(T, Σ⁺(b)) = Σ⁻(b)，T₁ = α(b)，T_k 模 π 确定；FF22: Φ(T, Σ₁) = Σ₂，闭式
    α₁ = −log|s| + 2log ε，α₂ = Arg s，α₃ = 0。有 warm_start 时各周期分量取最接近的分支。

    Args:
        m: 模型
        b: 底点
        method: 'shooting'（积分初值加最小二乘打靶）或 'quadrature'（积分公式）
        warm_start: 上一个格点的解
        verify: 是否计算截面残差
        rtol, atol: ODE 容差

    Returns:
        MultiTime

    Raises:
        LagfibError: ON_DISCRIMINANT、SHOOTING_DIVERGED
    """
    base = as_base(b)
    warm = None if warm_start is None else warm_start.array
    if isinstance(m, FocusFocus22):
        s_abs = m.distance(base)
        if s_abs == 0.0:
            raise LagfibError(ErrorCode.ON_DISCRIMINANT, "s = 0 lies on the discriminant")
        arg, _ = _nearest_branch(float(np.arctan2(base.b[1], base.b[0])), 2.0 * np.pi,
                                 None if warm is None else warm[1])
        T = np.array([-np.log(s_abs) + 2.0 * np.log(m.eps), arg, 0.0])
        residual = 0.0
        if verify:
            start = section(m, m.start_section, base).coords
            target = section(m, m.target_section, base).coords
            residual = float(np.max(np.abs(poisson_action(m, T, start).coords - target)))
        return MultiTime(tuple(T), residual)

    if method not in ("shooting", "quadrature"):
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown multitime method {method!r}")
    period = hl_regular_period(m.n)
    T = np.empty(m.n)
    T[0] = alpha_quadrature(base, m.eps)
    start = section(m, m.start_section, base).coords
    target = section(m, m.target_section, base).coords

    if method == "quadrature":
        for k in range(2, m.n + 1):
            T[k - 1] = phase_quadrature(base, k, m.eps)
    else:
        # 先沿 F₁ 流走 T₁，再从落点的相位读出各环面时间
        landed = poisson_action(m, np.append(T[0], np.zeros(m.n - 1)), start,
                                rtol=rtol, atol=atol).z
        T[1:] = -0.5 * np.angle(landed[1:])

    for k in range(1, m.n):
        T[k], _ = _nearest_branch(T[k], period, None if warm is None else warm[k])

    if method == "shooting":
        fit = least_squares(lambda x: _hl_residual(m, x, start, target, rtol, atol), T,
                            xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=50)
        logger.debug(f"Shooting at b={base.b}: nfev={fit.nfev}, cost={fit.cost:.3e}")
        T = fit.x
        residual = float(np.max(np.abs(fit.fun)))
        if not np.isfinite(residual) or residual > SHOOTING_TOL:
            raise LagfibError(ErrorCode.SHOOTING_DIVERGED,
                              f"Shooting residual {residual:.3e} at b={base.b}",
                              data={"b": list(base.b), "residual": residual})
        return MultiTime(tuple(T), residual)

    residual = 0.0
    if verify:
        residual = float(np.max(np.abs(_hl_residual(m, T, start, target, rtol, atol))))
    return MultiTime(tuple(T), residual)


# ============== 周期基 ==============

def period_basis(m: FibrationModel, H: DeformationH, b, multitime: Optional[MultiTime] = None,
                 method: str = "quadrature") -> List[OneFormSample]:
    """
    周期格基 τ₁ = τ₀ + dH，τ_k 为正则周期

    FF22: τ₀ = −log|s|ds₁ + Arg(s)ds₂，τ₂ = 2π ds₂，τ₃ = dr。
    HL: τ₀ = Σ T_i db_i（多重时间），τ_k = P·db_k，P 为实测回归时间。

    Args:
        m: 模型
        H: 形变函数
        b: 底点
        multitime: 已求得的多重时间（用于沿路径保持分支）
        method: HL 多重时间求法

    Returns:
        n 个 OneFormSample
    """
    base = as_base(b)
    n = m.n
    regular = np.eye(n)
    if isinstance(m, FocusFocus22):
        s_abs = m.distance(base)
        if s_abs == 0.0:
            raise LagfibError(ErrorCode.ON_DISCRIMINANT, "s = 0 lies on the discriminant")
        principal = float(np.arctan2(base.b[1], base.b[0]))
        arg = principal if multitime is None else multitime.T[1]
        winding = int(np.round((arg - principal) / (2.0 * np.pi)))
        tau0 = np.array([-np.log(s_abs), arg, 0.0])
        regular[1, 1] = 2.0 * np.pi
        branch = (0, winding, 0)
    else:
        if multitime is None:
            multitime = multitime_solve(m, base, method=method, verify=False)
        tau0 = multitime.array
        period = hl_regular_period(n)
        regular *= period
        branch = (0,) + tuple(int(np.floor(t / period + 0.5)) for t in tau0[1:])

    basis = [OneFormSample(base, tuple(tau0 + H.gradient(base)), branch)]
    for k in range(1, n):
        basis.append(OneFormSample(base, tuple(regular[k])))
    return basis


def closedness_residual(form: Callable, b, h: float, jump_tol: float = np.pi / 2) -> np.ndarray:
    """
    中心差分近似 ∂_iτ_j − ∂_jτ_i

    Args:
        form: b ↦ OneFormSample 或系数数组
        b: 中心点
        h: 步长
        jump_tol: 模板内分量跳变超过此值视为穿过分支切割

    Returns:
        n×n 反对称矩阵

    Raises:
        LagfibError: BRANCH_CROSSING
    """
    center = as_base(b).array
    n = center.size

    def sample(point):
        out = form(point)
        if isinstance(out, OneFormSample):
            return out.array, out.branch
        return np.asarray(out, dtype=float), None

    mid_comps, mid_branch = sample(center)
    partials = np.empty((n, n))
    for i in range(n):
        step = np.zeros(n)
        step[i] = h
        plus, plus_branch = sample(center + step)
        minus, minus_branch = sample(center - step)
        crossed = (plus_branch is not None and plus_branch != mid_branch) or \
                  (minus_branch is not None and minus_branch != mid_branch)
        if crossed or np.max(np.abs(plus - minus)) > jump_tol:
            raise LagfibError(ErrorCode.BRANCH_CROSSING,
                              f"Stencil at b={center.tolist()} with h={h} crosses a branch cut",
                              data={"b": center.tolist(), "h": h, "axis": i})
        partials[i] = (plus - minus) / (2.0 * h)
    return partials - partials.T


# ============== 爆破渐近 ==============

def blowup_fit(path: Callable[[float], Sequence[float]], ts: Sequence[float],
               quantity: str = "alpha", dist_fn: Callable = dist_to_discriminant) -> AsymptoticFit:
    """
    沿趋于 Δ 的路径拟合 log|y| 对 log d 的斜率

    Args:
        path: t ↦ b(t)，b(0) ∈ Δ
        ts: 参数取值
        quantity: 'alpha'（α 本身）或 'bound'（上界 −2/√Q_b(ζ₀)）
        dist_fn: 到 Δ 的距离

    Returns:
        AsymptoticFit

    Raises:
        LagfibError: INSUFFICIENT_SAMPLES
    """
    evaluators = {"alpha": alpha_quadrature, "bound": alpha_bound}
    if quantity not in evaluators:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown blow-up quantity {quantity!r}")
    points = [np.asarray(path(t), dtype=float) for t in ts]
    if len(points) < 3:
        raise LagfibError(ErrorCode.INSUFFICIENT_SAMPLES,
                          f"Need at least 3 samples, got {len(points)}")
    dists = np.array([dist_fn(p) for p in points])
    if np.any(dists <= 0):
        raise LagfibError(ErrorCode.INSUFFICIENT_SAMPLES, "Path touches the discriminant")
    log_d = np.log(dists)
    if np.ptp(log_d) < 1e-9:
        raise LagfibError(ErrorCode.INSUFFICIENT_SAMPLES,
                          "Path keeps a fixed distance to the discriminant",
                          data={"distance": float(dists[0])})
    values = np.array([abs(evaluators[quantity](p)) for p in points])
    fit = linregress(log_d, np.log(values))
    logger.debug(f"Blow-up fit of {quantity}: slope={fit.slope:.4f}, r={fit.rvalue:.5f}")
    return AsymptoticFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2),
                         (float(dists.min()), float(dists.max())))


def multi_indices(n: int, k_max: int) -> List[Tuple[int, ...]]:
    """所有 |J| ≤ k_max 的多重指标（坐标下标从0开始，非降序）"""
    out = []
    for order in range(k_max + 1):
        out.extend(combinations_with_replacement(range(n), order))
    return out


def rational_type_check(k_max: int, flat: Callable, path: Callable[[float], Sequence[float]],
                        ts: Sequence[float], alpha_fn: Callable = alpha_quadrature,
                        dist_fn: Callable = dist_to_discriminant,
                        zero_tol: float = 1e-6) -> List[Dict]:
    """
    有理型检验：沿路径列出 φ(b)·∂_Jα(b)

    导数用嵌套中心差分，步长 d/4 使模板不碰到 Δ。

    Args:
        k_max: 最高阶
        flat: φ，DeformationH 或 b ↦ float
        path: t ↦ b(t)
        ts: 参数取值（按距离从大到小排列更直观）
        alpha_fn: α 的求法
        dist_fn: 到 Δ 的距离
        zero_tol: 判定趋于0的阈值

    Returns:
        每个多重指标一行：J、距离、乘积和 tends_to_zero
    """
    phi = flat.value if isinstance(flat, DeformationH) else flat
    points = [np.asarray(path(t), dtype=float) for t in ts]
    dists = [float(dist_fn(p)) for p in points]
    order = np.argsort(dists)[::-1]
    points = [points[k] for k in order]
    dists = [dists[k] for k in order]
    n = points[0].size

    table = []
    for J in multi_indices(n, k_max):
        products = []
        for p, d in zip(points, dists):
            weight = float(phi(p))
            if weight == 0.0:
                products.append(0.0)
                continue
            products.append(weight * nested_difference(alpha_fn, p, J, d / 4.0))
        first, last = abs(products[0]), abs(products[-1])
        table.append({
            "J": [j + 1 for j in J],
            "distances": dists,
            "products": products,
            "tends_to_zero": bool(last <= zero_tol or last < 1e-3 * first),
        })
    return table
