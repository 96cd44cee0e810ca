# -*- coding: utf-8 -*-
"""
Classification of deformations
判定两个形变 H、H′ 给出的纤维化芽是否等价：H−H′ 的平坦度评分、Moser 同痕构造和周期匹配验证
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.stats import linregress

from common.errors import ErrorCode, LagfibError
from common.utils import nested_difference
from fibration.models import FibrationModel, FocusFocus22, ODE_ATOL, ODE_METHOD, ODE_RTOL
from fibration.periods import (
    DeformationH, multi_indices, period_basis, phase_quadrature, singular_period,
)
from fibration.poly_geometry import as_base

logger = logging.getLogger(__name__)

DEFAULT_K_MAX = 3
DENOM_FLOOR = 1e-3
VALUE_FLOOR = 1e-12
VANISH_EXPONENT = 0.5
ISOTOPY_MAX_STEP = 1.0 / 40.0
JACOBIAN_STEP = 1e-5
PULLBACK_TOL = 1e-4
PATH_SAMPLES = 13
DISTANCE_RANGE = (1e-4, 1e-1)

STATUS_EQUIVALENT = "equivalent"
STATUS_NOT_EQUIVALENT = "not_equivalent"
STATUS_INCONCLUSIVE = "inconclusive"


def approach_paths(m: FibrationModel) -> Dict[str, Callable[[float], np.ndarray]]:
    """横截 Δ 的趋近路径，参数即到 Δ 的距离"""
    if isinstance(m, FocusFocus22):
        return {"s1": lambda d: np.array([d, 0.0, 0.5])}
    if m.n == 3:
        return {
            "leg1": lambda d: np.array([d, 1.0, 1.0]),
            "leg2": lambda d: np.array([d, 0.0, -1.0]),
            "leg3": lambda d: np.array([d, -1.0, 0.0]),
            "vertex": lambda d: np.array([0.0, d, -d]),
        }
    # 一般 n：沿 b₁ 方向趋近 b₂=1 处的 Δ
    return {"b1": lambda d: np.concatenate([[d], np.ones(m.n - 1)])}


def default_grid(m: FibrationModel, distances: Sequence[float] = (0.05, 0.08, 0.12)) -> np.ndarray:
    """验证用格点：b₁ > 0 的趋近路径上到 Δ 距离为给定值的点"""
    # 顶点路径在 b₁ = 0 上，环面时间的主值在那里跳变
    return np.array([path(d) for name, path in approach_paths(m).items() if name != "vertex"
                     for d in distances])


@dataclass
class FlatnessRow:
    """单个 (路径, 多重指标) 的衰减记录"""
    path: str
    J: Tuple[int, ...]
    distances: List[float]
    values: List[float]
    exponent: Optional[float]
    vanishes: bool
    superpoly: bool

    @property
    def order(self) -> int:
        return len(self.J)

    def to_dict(self) -> Dict:
        return {"path": self.path, "J": [j + 1 for j in self.J], "exponent": self.exponent,
                "vanishes": self.vanishes, "pass": self.superpoly,
                "max_abs": max(abs(v) for v in self.values)}


@dataclass
class FlatnessTable:
    k_max: int
    rows: List[FlatnessRow]

    @property
    def passed(self) -> bool:
        return all(row.superpoly for row in self.rows)

    @property
    def first_failing_order(self) -> Optional[int]:
        """导数不在 Δ 上消失的最低阶"""
        orders = [row.order for row in self.rows if not row.vanishes]
        return min(orders) if orders else None

    def to_dict(self) -> Dict:
        return {"k_max": self.k_max, "pass": self.passed,
                "first_failing_order": self.first_failing_order,
                "rows": [row.to_dict() for row in self.rows]}


def _decay_exponent(dists: np.ndarray, values: np.ndarray) -> Optional[float]:
    mask = np.abs(values) > VALUE_FLOOR
    if np.count_nonzero(mask) < 3:
        return None
    fit = linregress(np.log(dists[mask]), np.log(np.abs(values[mask])))
    return float(fit.slope)


def flatness_score(g: Callable, m: FibrationModel, k_max: int = DEFAULT_K_MAX,
                   paths: Optional[Dict[str, Callable]] = None,
                   d_range: Tuple[float, float] = DISTANCE_RANGE,
                   samples: int = PATH_SAMPLES) -> FlatnessTable:
    """
    沿趋近路径对 g 的各阶偏导做衰减评分

    d 在 d_range 内对数均匀取样，偏导用步长 d/4 的嵌套中心差分。
    一行 vanishes 当衰减指数 > 0.5 或数值低于 1e−12；
    pass 当指数 > k_max − |J| + 2（超多项式衰减的代理）或低于 1e−12。

    Args:
        g: DeformationH 或 b ↦ float
        m: 模型（决定路径）
        k_max: 最高阶
        paths: 自定义路径
        d_range: 距离范围
        samples: 每条路径的取样数

    Returns:
        FlatnessTable
    """
    fn = g.value if isinstance(g, DeformationH) else g
    paths = paths or approach_paths(m)
    dists = np.geomspace(d_range[0], d_range[1], samples)
    rows = []
    for name, path in paths.items():
        points = [path(d) for d in dists]
        for J in multi_indices(m.n, k_max):
            values = np.array([nested_difference(fn, p, J, d / 4.0) for p, d in zip(points, dists)])
            exponent = _decay_exponent(dists, values)
            below = exponent is None
            rows.append(FlatnessRow(
                path=name,
                J=tuple(J),
                distances=dists.tolist(),
                values=values.tolist(),
                exponent=exponent,
                vanishes=below or exponent > VANISH_EXPONENT,
                superpoly=below or exponent > k_max - len(J) + 2,
            ))
    return FlatnessTable(k_max, rows)


@dataclass
class DeformationPair:
    """待比较的两个形变 H、H′"""
    H: DeformationH
    Hp: DeformationH
    family: FibrationModel
    diff: DeformationH = field(init=False)
    back: DeformationH = field(init=False)

    def __post_init__(self):
        # H − H′ 和 H′ − H 都做符号对消，公共项不引入舍入
        self.diff = self.H.minus(self.Hp)
        self.back = self.Hp.minus(self.H)

    @classmethod
    def parse(cls, H: str, Hp: str, m: FibrationModel, policy: str = "strict") -> "DeformationPair":
        return cls(DeformationH.parse(H, m, policy), DeformationH.parse(Hp, m, policy), m)

    def reversed(self) -> "DeformationPair":
        return DeformationPair(self.Hp, self.H, self.family)


class BaseDiffeo:
    """
    底空间微分同胚 b ↦ (φ₁(b), b₂, …, b_n)

    以位移 δ(b) = φ₁(b) − b₁ 表示，δ 恒为 0 时雅可比精确为单位阵。
    """

    def __init__(self, displacement: Callable[[np.ndarray], float], n: int,
                 h: float = JACOBIAN_STEP, label: str = ""):
        self.displacement = displacement
        self.n = n
        self.h = h
        self.label = label

    @classmethod
    def from_map(cls, phi1: Callable[[np.ndarray], float], n: int,
                 h: float = JACOBIAN_STEP) -> "BaseDiffeo":
        """由显式的 φ₁ 构造（反例检验用）"""
        return cls(lambda b: float(phi1(b)) - float(b[0]), n, h, "explicit")

    @classmethod
    def identity(cls, n: int) -> "BaseDiffeo":
        return cls(lambda b: 0.0, n, label="identity")

    def __call__(self, b) -> np.ndarray:
        b = as_base(b).array
        out = b.copy()
        out[0] = b[0] + self.displacement(b)
        return out

    def jacobian(self, b) -> np.ndarray:
        """Dφ：第2行起精确为单位阵，只对 δ 做中心差分"""
        b = as_base(b).array
        jac = np.eye(self.n)
        for j in range(self.n):
            step = np.zeros(self.n)
            step[j] = self.h
            jac[0, j] += (self.displacement(b + step) - self.displacement(b - step)) / (2.0 * self.h)
        return jac

    def orientation_preserving(self, grid) -> bool:
        return all(self.jacobian(b)[0, 0] > 0 for b in np.atleast_2d(grid))


def moser_field(b, t: float, pair: DeformationPair, denom_floor: float = DENOM_FLOOR) -> float:
    """
    Moser 向量场 V_t = g_t ∂_{b₁} 的系数 g_t = (H−H′)/(α+ψ)

    ψ = ∂_{b₁}H + t·∂_{b₁}(H′−H)。分子恰为 0 时直接返回 0。

    Raises:
        LagfibError: DENOMINATOR_VANISHES，data 带 b 和 t
    """
    base = as_base(b)
    numerator = pair.diff.value(base)
    if numerator == 0.0:
        return 0.0
    psi = pair.H.partial(0, base) + t * pair.back.partial(0, base)
    denominator = singular_period(pair.family, base) + psi
    if abs(denominator) < denom_floor:
        raise LagfibError(ErrorCode.DENOMINATOR_VANISHES,
                          f"|alpha + psi| = {abs(denominator):.3e} at b={base.b}, t={t}",
                          data={"b": list(base.b), "t": t, "denominator": denominator})
    return numerator / denominator


def _isotopy_displacement(pair: DeformationPair, denom_floor: float,
                          rtol: float, atol: float) -> Callable[[np.ndarray], float]:
    cache: Dict[Tuple[float, ...], float] = {}

    def displacement(b: np.ndarray) -> float:
        b = np.asarray(b, dtype=float)
        key = tuple(b)
        if key in cache:
            return cache[key]

        def rhs(t, y):
            moved = b.copy()
            moved[0] += y[0]
            return [moser_field(moved, t, pair, denom_floor)]

        sol = solve_ivp(rhs, (0.0, 1.0), [0.0], method=ODE_METHOD, rtol=rtol, atol=atol,
                        max_step=ISOTOPY_MAX_STEP)
        if sol.status < 0:
            raise LagfibError(ErrorCode.INTEGRATION_FAILURE, sol.message, data={"b": b.tolist()})
        cache[key] = float(sol.y[0, -1])
        return cache[key]
    return displacement


def integrate_isotopy(pair: DeformationPair, grid=None, denom_floor: float = DENOM_FLOOR,
                      rtol: float = ODE_RTOL, atol: float = ODE_ATOL) -> BaseDiffeo:
    """
    积分 Moser 场 t ∈ [0,1] 得到时间1映射 φ = G₁

    Args:
        pair: 形变对
        grid: 预先采样并检查分母的格点（可选）
        denom_floor: 分母下限

    Returns:
        BaseDiffeo，按需在任意点积分

    Raises:
        LagfibError: INTEGRATION_FAILURE、DENOMINATOR_VANISHES
    """
    n = pair.family.n
    if pair.diff.is_zero:
        return BaseDiffeo.identity(n)
    phi = BaseDiffeo(_isotopy_displacement(pair, denom_floor, rtol, atol), n, label="moser")
    if grid is not None:
        for b in np.atleast_2d(grid):
            phi(b)
    return phi


def _period_matrix(m: FibrationModel, H: DeformationH, b) -> np.ndarray:
    return np.column_stack([tau.array for tau in period_basis(m, H, b)])


def pullback_residual(phi: BaseDiffeo, pair: DeformationPair, grid) -> float:
    """
    sup_b max_i ‖Dφ(b)ᵀ τ′_i(φ(b)) − τ_i(b)‖

    Raises:
        LagfibError: 传递 BRANCH_CROSSING 等
    """
    m = pair.family
    worst = 0.0
    for b in np.atleast_2d(grid):
        image = phi(b)
        pulled = phi.jacobian(b).T @ _period_matrix(m, pair.Hp, image)
        original = _period_matrix(m, pair.H, b)
        worst = max(worst, float(np.max(np.linalg.norm(pulled - original, axis=0))))
    return worst


def tau0_component(m: FibrationModel, b, i: int) -> float:
    """τ₀ 的第 i 个系数（下标从0开始）"""
    if i == 0:
        return singular_period(m, b)
    base = as_base(b)
    if isinstance(m, FocusFocus22):
        return float(np.arctan2(base.b[1], base.b[0])) if i == 1 else 0.0
    return phase_quadrature(base, i + 1, m.eps)


def tees_components(phi: BaseDiffeo, m: FibrationModel) -> List[Callable[[np.ndarray], float]]:
    """
    T = φ*τ₀ − τ₀ 的各分量

    φ 只改变 b₁，故 T_i = (α∘φ)·∂_iφ₁ + τ₀,i(φ(b)) − τ₀,i(b)，i=1 时后两项合并为 −α(b)。
    """
    def component(i: int):
        def value(b):
            b = np.asarray(b, dtype=float)
            jac = phi.jacobian(b)
            if phi.displacement(b) == 0.0 and jac[0, i] == (1.0 if i == 0 else 0.0):
                return 0.0
            image = phi(b)
            out = tau0_component(m, image, 0) * jac[0, i]
            if i == 0:
                return out - tau0_component(m, b, 0)
            return out + tau0_component(m, image, i) - tau0_component(m, b, i)
        return value
    return [component(i) for i in range(m.n)]


def tees_residual(phi: BaseDiffeo, m: FibrationModel, k_max: int = 2,
                  paths: Optional[Dict[str, Callable]] = None,
                  d_range: Tuple[float, float] = DISTANCE_RANGE,
                  samples: int = PATH_SAMPLES) -> List[FlatnessTable]:
    """对 T_i 逐个做平坦度评分"""
    return [flatness_score(T, m, k_max, paths, d_range, samples) for T in tees_components(phi, m)]


@dataclass
class Verdict:
    """分类结论；equivalent 要求平坦度和周期匹配都通过"""
    status: str
    flatness: Optional[FlatnessTable] = None
    period_residual: Optional[float] = None
    notes: List[str] = field(default_factory=list)
    phi: Optional[BaseDiffeo] = None

    def to_dict(self) -> Dict:
        return {
            "status": self.status,
            "flatness": None if self.flatness is None else self.flatness.to_dict(),
            "period_residual": self.period_residual,
            "notes": list(self.notes),
        }


def _shrink_grid(m: FibrationModel, grid: np.ndarray, offending) -> np.ndarray:
    limit = m.distance(offending)
    return np.array([b for b in grid if m.distance(b) < limit])


def equivalence_verdict(pair: DeformationPair, k_max: int = DEFAULT_K_MAX, grid=None,
                        denom_floor: float = DENOM_FLOOR, tol: float = PULLBACK_TOL,
                        samples: int = PATH_SAMPLES) -> Verdict:
    """
    分类流程：H−H′ 不平坦则不等价；平坦则构造 φ 并验证 φ*τ′ = τ

    有限阶、有限格点上的判定，数值失败归为 inconclusive。
    """
    m = pair.family
    notes = [f"flatness checked up to order {k_max} on {samples} samples per path"]
    table = flatness_score(pair.diff, m, k_max, samples=samples)
    if not table.passed:
        notes.append(f"H - H' fails to vanish at order {table.first_failing_order}")
        return Verdict(STATUS_NOT_EQUIVALENT, table, None, notes)

    grid = default_grid(m) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    while True:
        try:
            phi = integrate_isotopy(pair, grid, denom_floor)
            residual = pullback_residual(phi, pair, grid)
            break
        except LagfibError as e:
            if e.code == ErrorCode.DENOMINATOR_VANISHES and grid.size:
                grid = _shrink_grid(m, grid, e.data["b"])
                logger.warning(f"Shrinking working ball to {len(grid)} grid points")
                notes.append(f"working ball shrunk below distance {m.distance(e.data['b']):.3g}")
                if grid.size:
                    continue
            notes.append(f"{e.code.name}: {e.message}")
            return Verdict(STATUS_INCONCLUSIVE, table, None, notes)

    if not phi.orientation_preserving(grid):
        notes.append("phi reverses orientation on the working grid")
        return Verdict(STATUS_INCONCLUSIVE, table, residual, notes, phi)
    if residual <= tol:
        return Verdict(STATUS_EQUIVALENT, table, residual, notes, phi)
    notes.append(f"pullback residual {residual:.3e} exceeds {tol:.1e}")
    return Verdict(STATUS_INCONCLUSIVE, table, residual, notes, phi)
