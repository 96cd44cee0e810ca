# -*- coding: utf-8 -*-
"""
Parameter sweeps
把底空间格点分发到进程池上求值，结果按格点顺序收集
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from common.errors import ErrorCode, LagfibError
from common.utils import Timer, resolve_workers
from fibration.periods import alpha_bound, alpha_quadrature
from fibration.poly_geometry import (
    as_base, build_poly, dist_to_discriminant, on_analytic_legs, root_profile,
)

logger = logging.getLogger(__name__)

QUANTITIES = ("membership", "alpha", "bound", "zeta0", "distance")


@dataclass(frozen=True)
class Axis:
    """扫描轴 b_index ∈ linspace(lo, hi, num)"""
    index: int
    lo: float
    hi: float
    num: int

    @property
    def name(self) -> str:
        return f"b{self.index + 1}"

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.num)


def parse_axis(text: str) -> Axis:
    """
    解析 'b2:-1:1:11'

    Raises:
        LagfibError: 格式错误
    """
    parts = text.split(":")
    if len(parts) != 4 or not parts[0].startswith("b"):
        raise LagfibError(ErrorCode.INVALID_PARAMS,
                          f"Axis must look like b2:-1:1:11, got {text!r}")
    try:
        index = int(parts[0][1:]) - 1
        lo, hi, num = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Bad axis {text!r}")
    if index < 0 or num < 1:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Bad axis {text!r}")
    return Axis(index, lo, hi, num)


def grid_points(base: Sequence[float], axes: Sequence[Axis]) -> np.ndarray:
    """
    以 base 为底、沿各轴展开的格点，第一条轴变化最慢

    Returns:
        形状 (∏num, n) 的数组
    """
    base = np.asarray(base, dtype=float)
    for axis in axes:
        if axis.index >= base.size:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Axis {axis.name} outside n={base.size}")
    if len({axis.index for axis in axes}) != len(axes):
        raise LagfibError(ErrorCode.INVALID_PARAMS, "Sweep axes must be distinct")
    rows = []
    for combo in product(*(axis.values() for axis in axes)):
        point = base.copy()
        for axis, value in zip(axes, combo):
            point[axis.index] = value
        rows.append(point)
    return np.array(rows)


def evaluate_point(quantity: str, settings: Dict[str, Any], b: np.ndarray) -> Dict[str, Any]:
    """
    单个格点的求值（进程池任务，必须可 pickle）

    Δ 上或数值失败的点不中断扫描，记录 status 和 nan。
    """
    record: Dict[str, Any] = {f"b{j + 1}": float(v) for j, v in enumerate(b)}
    try:
        if quantity == "membership":
            profile = root_profile(b, tol_disc=settings.get("tol_disc"), tol_root=settings["tol_root"])
            p = build_poly(b)
            record.update({
                "zeta0": profile.zeta0,
                "dP": profile.dP,
                "q0": profile.q0,
                "root_ok": bool(abs(p(profile.zeta0)) <= settings["tol_root"] * p.scale),
                "on_delta": profile.on_delta,
                "distance": dist_to_discriminant(b),
            })
            if len(b) == 3:
                record["on_legs"] = on_analytic_legs(b, settings.get("leg_tol", 1e-9))
        elif quantity == "alpha":
            record["value"] = alpha_quadrature(b, settings.get("eps", 1.0), settings["quad_rel"],
                                               settings.get("tol_disc"))
        elif quantity == "bound":
            record["value"] = alpha_bound(b, settings.get("tol_disc"))
        elif quantity == "zeta0":
            record["value"] = root_profile(b).zeta0
        elif quantity == "distance":
            record["value"] = dist_to_discriminant(b)
        else:
            raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown sweep quantity {quantity!r}")
        record["status"] = "ok"
    except LagfibError as e:
        if e.code == ErrorCode.INVALID_PARAMS:
            raise
        if quantity != "membership":
            record["value"] = float("nan")
        record["status"] = e.code.name.lower()
    return record


def run_parallel(fn: Callable[[np.ndarray], Dict], points: Sequence[np.ndarray],
                 workers: int = 1) -> List[Dict]:
    """
    有序并行 map

    Args:
        fn: 可 pickle 的单点函数
        points: 格点
        workers: 进程数，1 时在当前进程内执行

    Returns:
        与 points 同序的结果
    """
    points = list(points)
    if workers <= 1 or len(points) <= 1:
        return [fn(p) for p in points]
    chunksize = max(1, len(points) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points, chunksize=chunksize))


def run_sweep(quantity: str, base: Sequence[float], axes: Sequence[Axis],
              settings: Optional[Dict[str, Any]] = None,
              threads: Optional[int] = None) -> List[Dict]:
    """
    在格点上扫描某个量

    Args:
        quantity: QUANTITIES 之一
        base: 未扫描坐标的取值
        axes: 扫描轴
        settings: 容差等（tol_root、tol_disc、quad_rel、eps）
        threads: 请求的进程数

    Returns:
        每个格点一条记录
    """
    if quantity not in QUANTITIES:
        raise LagfibError(ErrorCode.INVALID_PARAMS,
                          f"Unknown sweep quantity {quantity!r}, expected one of {QUANTITIES}")
    as_base(base)
    settings = {"tol_root": 1e-10, "quad_rel": 1e-10, **(settings or {})}
    points = grid_points(base, axes)
    workers = resolve_workers(threads)
    with Timer() as timer:
        records = run_parallel(partial(evaluate_point, quantity, settings), points, workers)
    logger.info(f"Swept {quantity} over {len(points)} points with {workers} workers "
                f"in {timer.elapsed:.2f}s")
    return records


def membership_columns(n: int) -> List[str]:
    columns = [f"b{j + 1}" for j in range(n)]
    columns += ["zeta0", "dP", "q0", "root_ok", "on_delta", "distance"]
    if n == 3:
        columns.append("on_legs")
    return columns + ["status"]


def value_columns(n: int) -> List[str]:
    return [f"b{j + 1}" for j in range(n)] + ["value", "status"]


def columns_for(quantity: str, n: int) -> List[str]:
    return membership_columns(n) if quantity == "membership" else value_columns(n)
