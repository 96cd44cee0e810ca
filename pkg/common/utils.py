# -*- coding: utf-8 -*-
"""
工具函数模块
提供计时、随机数和工作进程数等通用工具
"""

import os
import time
import logging
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42
THREADS_ENV = "LAGFIB_THREADS"


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    """
    创建带种子的随机数生成器

    Args:
        seed: 随机种子（默认42）

    Returns:
        numpy Generator
    """
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def safe_int(value, default: int = 0) -> int:
    """
    安全地将值转换为整数

    Args:
        value: 要转换的值
        default: 转换失败时的默认值

    Returns:
        整数值
    """
    try:
        return int(value)
    except (ValueError, TypeError):
        return default


def cpu_count() -> int:
    """物理核心数，psutil不可用时退回 os.cpu_count()"""
    try:
        import psutil
        count = psutil.cpu_count(logical=False)
    except ImportError:
        count = None
    return count or os.cpu_count() or 1


def resolve_workers(requested: Optional[int] = None) -> int:
    """
    计算工作进程池大小

    环境变量 LAGFIB_THREADS 是上限，配置值只能更小。

    Args:
        requested: 配置中请求的进程数

    Returns:
        至少为1的进程数
    """
    workers = cpu_count()
    if requested:
        workers = min(workers, max(1, safe_int(requested, workers)))
    cap = os.environ.get(THREADS_ENV)
    if cap is not None:
        cap_value = safe_int(cap, 0)
        if cap_value > 0:
            workers = min(workers, cap_value)
        else:
            logger.warning(f"Ignoring invalid {THREADS_ENV}={cap!r}")
    return max(1, workers)


def central_difference(f, x: np.ndarray, j: int, h: float) -> float:
    """f 在 x 处沿第 j 个坐标的中心差分"""
    step = np.zeros_like(x, dtype=float)
    step[j] = h
    return (f(x + step) - f(x - step)) / (2.0 * h)


def nested_difference(f, x: np.ndarray, J, h: float) -> float:
    """
    嵌套中心差分近似混合偏导 ∂_J f

    Args:
        f: 标量函数
        x: 求值点
        J: 坐标下标序列（可重复），空序列返回 f(x)
        h: 步长，模板最远偏离 len(J)·h

    Returns:
        差分值
    """
    x = np.asarray(x, dtype=float)
    if not J:
        return float(f(x))
    j, rest = J[0], tuple(J[1:])
    return central_difference(lambda y: nested_difference(f, y, rest, h), x, j, h)


class Timer:
    """计时器类，用于测量代码执行时间"""

    def __init__(self):
        self.start_time: Optional[float] = None
        self.end_time: Optional[float] = None

    def start(self):
        """开始计时"""
        self.start_time = time.perf_counter()
        self.end_time = None

    def stop(self) -> float:
        """
        停止计时

        Returns:
            耗时（秒）
        """
        self.end_time = time.perf_counter()
        return self.elapsed

    @property
    def elapsed(self) -> float:
        """获取已耗时间（秒）"""
        if self.start_time is None:
            return 0.0
        end = self.end_time if self.end_time is not None else time.perf_counter()
        return end - self.start_time

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.stop()
        return False
