# -*- coding: utf-8 -*-
"""
Numerical monodromy
沿 B∖Δ 中的闭路延拓周期基，把回归映射表示为整数矩阵
"""

import logging
from dataclasses import dataclass
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from common.errors import ErrorCode, LagfibError
from fibration.models import FibrationModel, FocusFocus22
from fibration.periods import DeformationH, multitime_solve, period_basis

logger = logging.getLogger(__name__)

ROUNDING_TOL = 0.1
DEFAULT_RADIUS = 0.3
DEFAULT_POINTS = 64
DEFAULT_MARGIN = 0.05

# 腿的中心与法平面内右手系基 (e_a, e_b)，沿腿向外看为逆时针
HL_LEG_FRAMES = {
    "leg1": ((0.0, 1.0, 1.0), (1.0, 0.0, 0.0), (0.0, 1.0 / np.sqrt(2.0), -1.0 / np.sqrt(2.0))),
    "leg2": ((0.0, 0.0, -1.0), (1.0, 0.0, 0.0), (0.0, -1.0, 0.0)),
    "leg3": ((0.0, -1.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    "contractible": ((0.8, 0.5, 0.5), (1.0, 0.0, 0.0),
                     (0.0, 1.0 / np.sqrt(2.0), -1.0 / np.sqrt(2.0))),
}

GENERATORS = {
    "M1": ((1, 0, 0), (1, 1, 0), (0, 0, 1)),
    "M2": ((1, 0, 0), (0, 1, 0), (1, 0, 1)),
    "M3": ((1, 0, 0), (1, 1, 0), (1, 0, 1)),
}


@dataclass(frozen=True)
class MonodromyMatrix:
    """整数单值矩阵（列约定 B′ = B·M），residual 为取整前的偏差"""
    entries: Tuple[Tuple[int, ...], ...]
    residual: float = 0.0
    label: str = ""

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=int)

    @property
    def det(self) -> int:
        return int(round(np.linalg.det(self.array)))

    def is_unipotent(self) -> bool:
        shifted = self.array - np.eye(len(self.entries), dtype=int)
        return not np.any(np.linalg.matrix_power(shifted, len(self.entries)))

    def to_dict(self) -> Dict:
        return {"label": self.label, "matrix": [list(row) for row in self.entries],
                "residual": self.residual, "det": self.det}


def as_matrix(values, residual: float = 0.0, label: str = "") -> MonodromyMatrix:
    rows = tuple(tuple(int(v) for v in row) for row in np.asarray(values))
    return MonodromyMatrix(rows, residual, label)


@dataclass(frozen=True)
class LoopSpec:
    """闭路：首尾相同的 K+1 个底点"""
    points: Tuple[Tuple[float, ...], ...]
    label: str = ""
    margin: float = DEFAULT_MARGIN

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points)

    def reversed(self) -> "LoopSpec":
        return LoopSpec(tuple(reversed(self.points)), f"{self.label}^-1", self.margin)


def _circle(center, e_a, e_b, radius: float, K: int) -> np.ndarray:
    # 半步角度，使采样点不落在 b₁ = 0 或负实轴上
    phases = 2.0 * np.pi * (np.arange(K) + 0.5) / K
    center, e_a, e_b = (np.asarray(v, dtype=float) for v in (center, e_a, e_b))
    return center + radius * (np.outer(np.cos(phases), e_a) + np.outer(np.sin(phases), e_b))


def _segment(start, end, steps: int) -> np.ndarray:
    weights = np.linspace(0.0, 1.0, steps + 1)[:, None]
    return (1.0 - weights) * np.asarray(start) + weights * np.asarray(end)


def build_loop(kind: str, radius: float = DEFAULT_RADIUS, K: int = DEFAULT_POINTS,
               r: float = 0.5, margin: float = DEFAULT_MARGIN) -> LoopSpec:
    """
    构造标准闭路

    Args:
        kind: 'ff22'、'ff22-contractible'、'leg1'、'leg2'、'leg3'、'contractible'
              或 'composite'（绕 leg2 再绕 leg3，中间用线段连接）
        radius: 圆半径
        K: 每个圆的采样点数
        r: FF22 的 r 坐标
        margin: 到 Δ 的最小距离

    Returns:
        LoopSpec
    """
    if K < 4 or radius <= 0:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Bad loop parameters radius={radius}, K={K}")
    if kind == "ff22":
        points = _circle((0.0, 0.0, r), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), radius, K)
    elif kind == "ff22-contractible":
        points = _circle((1.0, 0.0, r), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), radius, K)
    elif kind in HL_LEG_FRAMES:
        points = _circle(*HL_LEG_FRAMES[kind], radius, K)
    elif kind == "composite":
        c2, a2, b2 = (np.asarray(v) for v in HL_LEG_FRAMES["leg2"])
        c3, a3, b3 = (np.asarray(v) for v in HL_LEG_FRAMES["leg3"])
        p2, p3 = c2 + radius * a2, c3 + radius * a3
        steps = max(K // 2, 2)
        points = np.vstack([
            p2[None, :],
            _circle(c2, a2, b2, radius, K),
            _segment(p2, p3, steps),
            _circle(c3, a3, b3, radius, K),
            _segment(p3, p2, steps)[1:-1],
        ])
    else:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown loop kind {kind!r}")
    closed = np.vstack([points, points[:1]])
    return LoopSpec(tuple(tuple(float(v) for v in p) for p in closed), kind, margin)


def _basis_matrix(basis) -> np.ndarray:
    return np.column_stack([tau.array for tau in basis])


def transport_basis(m: FibrationModel, H: DeformationH, loop: LoopSpec,
                    method: str = "quadrature", step_tol: float = np.pi / 4) -> MonodromyMatrix:
    """
    沿闭路延拓周期基并求单值矩阵 M = B⁻¹B′

    HL 的环面时间和 FF22 的 Arg 分量都取与上一点最接近的分支，
    相邻两点间连续分量的变化超过 step_tol 视为采样过粗。
    HL 默认用积分公式求环面时间：沿闭路逐点暖启动，与打靶法给出相同的矩阵，
    但每点不需要求解 ODE 最小二乘；method="shooting" 走打靶。

    Args:
        m: 模型
        H: 形变函数（dH 单值，不影响 M）
        loop: 闭路
        method: HL 多重时间求法，'quadrature'（默认）或 'shooting'
        step_tol: 相邻点分量变化上限

    Returns:
        MonodromyMatrix

    Raises:
        LagfibError: ON_DISCRIMINANT、BRANCH_CROSSING、NON_INTEGER_MONODROMY
    """
    points = loop.array
    if not np.allclose(points[0], points[-1]):
        raise LagfibError(ErrorCode.INVALID_PARAMS, "Loop must be closed")
    for p in points:
        if m.distance(p) < loop.margin:
            raise LagfibError(ErrorCode.ON_DISCRIMINANT,
                              f"Loop point {p.tolist()} is within {loop.margin} of the discriminant",
                              data={"b": p.tolist(), "margin": loop.margin})

    previous = None
    initial = None
    basis = None
    for k, p in enumerate(points):
        multitime = multitime_solve(m, p, method=method, warm_start=previous, verify=False)
        if previous is not None:
            jump = float(np.max(np.abs(multitime.array[1:] - previous.array[1:])))
            if jump > step_tol:
                raise LagfibError(ErrorCode.BRANCH_CROSSING,
                                  f"Periods jump by {jump:.3f} at step {k}; refine the loop",
                                  data={"step": k, "b": p.tolist()})
        previous = multitime
        basis = period_basis(m, H, p, multitime=multitime)
        if initial is None:
            initial = basis
    logger.debug(f"Transported basis around {loop.label} ({len(points)} points)")

    start = _basis_matrix(initial)
    end = _basis_matrix(basis)
    solution, *_ = np.linalg.lstsq(start, end, rcond=None)
    rounded = np.round(solution)
    residual = float(np.max(np.abs(solution - rounded)))
    if residual > ROUNDING_TOL:
        raise LagfibError(ErrorCode.NON_INTEGER_MONODROMY,
                          f"Monodromy around {loop.label} is {residual:.3f} from integral",
                          data={"matrix": solution.tolist(), "residual": residual})
    return as_matrix(rounded, residual, loop.label)


def expected_matrices(family: str) -> List[MonodromyMatrix]:
    """已知的生成元矩阵"""
    family = family.lower()
    if family in ("hl", "hl3"):
        return [MonodromyMatrix(entries, 0.0, name) for name, entries in GENERATORS.items()]
    if family == "ff22":
        return [MonodromyMatrix(GENERATORS["M1"], 0.0, "ff22")]
    raise LagfibError(ErrorCode.INVALID_PARAMS, f"No reference matrices for {family!r}")


def identify_word(M: MonodromyMatrix, generators: Optional[Dict[str, Sequence]] = None,
                  max_len: int = 2) -> Optional[str]:
    """
    把 M 写成生成元及其逆的乘积（长度不超过 max_len）

    Returns:
        例如 'M1'、'M2^-1'、'M1*M2^-1'，单位阵为 'I'；找不到返回 None
    """
    generators = generators or GENERATORS
    target = M.array
    n = target.shape[0]
    if np.array_equal(target, np.eye(n, dtype=int)):
        return "I"
    letters = []
    for name, entries in generators.items():
        matrix = np.array(entries, dtype=int)
        inverse = np.round(np.linalg.inv(matrix)).astype(int)
        letters.append((name, matrix))
        letters.append((f"{name}^-1", inverse))
    for length in range(1, max_len + 1):
        for word in product(letters, repeat=length):
            value = np.eye(n, dtype=int)
            for _, matrix in word:
                value = value @ matrix
            if np.array_equal(value, target):
                return "*".join(name for name, _ in word)
    return None


def monodromy_for(m: FibrationModel, kind: str, radius: float = DEFAULT_RADIUS,
                  K: int = DEFAULT_POINTS, H: Optional[DeformationH] = None,
                  reverse: bool = False, method: str = "quadrature") -> MonodromyMatrix:
    """构造闭路并延拓，供命令行和检查套件使用；method 含义同 transport_basis"""
    loop = build_loop(kind, radius, K)
    if reverse:
        loop = loop.reversed()
    H = H or DeformationH.zero(m)
    if isinstance(m, FocusFocus22) and not kind.startswith("ff22"):
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Loop {kind!r} is not an FF22 loop")
    return transport_basis(m, H, loop, method=method)
