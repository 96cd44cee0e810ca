# -*- coding: utf-8 -*-
"""
Adaptive Gauss-Legendre quadrature
自适应 Gauss–Legendre 积分（区间二分）
"""

import logging
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from common.errors import ErrorCode, LagfibError

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 64
MAX_INTERVALS = 10_000
ROUNDING_FLOOR = 50 * np.finfo(float).eps


@lru_cache(maxsize=8)
def _nodes(order: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(order)


def _fixed(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, order: int) -> float:
    x, w = _nodes(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return float(half * np.dot(w, f(mid + half * x)))


def adaptive_gauss_legendre(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                            rel_tol: float = 1e-10, order: int = DEFAULT_ORDER,
                            max_intervals: int = MAX_INTERVALS) -> float:
    """
    自适应积分 ∫_a^b f(x) dx

    每个区间与其两半的估计值之差超过容差时继续二分，容差按
    当前总估计量分配到区间长度上。

    Args:
        f: 向量化被积函数
        a, b: 积分区间
        rel_tol: 相对容差
        order: 每个区间的节点数
        max_intervals: 子区间数上限

    Returns:
        积分值

    Raises:
        LagfibError: 子区间数超过上限或出现非有限值
    """
    if a == b:
        return 0.0
    whole = _fixed(f, a, b, order)
    if not np.isfinite(whole):
        raise LagfibError(ErrorCode.QUADRATURE_FAILURE,
                          f"Non-finite integrand on [{a}, {b}]")
    length = abs(b - a)
    stack = [(a, b, whole)]
    total = 0.0
    intervals = 1
    scale = abs(whole)
    while stack:
        lo, hi, estimate = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _fixed(f, lo, mid, order)
        right = _fixed(f, mid, hi, order)
        refined = left + right
        if not np.isfinite(refined):
            raise LagfibError(ErrorCode.QUADRATURE_FAILURE,
                              f"Non-finite integrand on [{lo}, {hi}]")
        share = abs(hi - lo) / length
        # 舍入噪声下限保证二分终止
        allowed = max(rel_tol * max(scale, abs(refined)) * share,
                      ROUNDING_FLOOR * (abs(left) + abs(right)))
        if abs(refined - estimate) <= allowed or mid in (lo, hi):
            total += refined
            continue
        intervals += 1
        if intervals > max_intervals:
            raise LagfibError(ErrorCode.QUADRATURE_FAILURE,
                              f"Exceeded {max_intervals} subintervals",
                              data={"a": a, "b": b})
        stack.append((lo, mid, left))
        stack.append((mid, hi, right))
    logger.debug(f"Quadrature on [{a}, {b}] used {intervals} subintervals")
    return total
