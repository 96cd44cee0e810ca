# -*- coding: utf-8 -*-
"""
Geometry handlers
判别轨迹成员图、参数扫描和哈密顿流轨迹
"""

import logging
from typing import Any, Dict, List

import numpy as np

from common.errors import ErrorCode, LagfibError
from fibration.models import (
    FocusFocus22, PhasePoint, eval_F, first_return_time, section, trajectory,
)
from lagfib.config import RunConfig, parse_vector
from lagfib.sweep import columns_for, parse_axis, run_sweep

logger = logging.getLogger(__name__)


def default_axes(n: int) -> List[str]:
    """n=3 时扫描 (b2, b3) 平面，n=2 时扫描整个底空间"""
    if n == 2:
        return ["b1:-1:1:11", "b2:-1:1:11"]
    return ["b2:-2:2:11", "b3:-2:2:11"]


def _sweep(context: Dict[str, Any], quantity: str) -> Dict[str, Any]:
    config: RunConfig = context["config"]
    if config.family != "hl":
        raise LagfibError(ErrorCode.INVALID_PARAMS,
                          f"{quantity} sweeps are defined on the Harvey-Lawson base")
    axes = [parse_axis(text) for text in (context.get("axes") or default_axes(config.n))]
    base = config.base_point((0.0,) * config.n)
    records = run_sweep(quantity, base, axes, config.numeric_settings(), config.threads)
    return {
        "quantity": quantity,
        "n": config.n,
        "base": list(base),
        "axes": [{"name": a.name, "lo": a.lo, "hi": a.hi, "num": a.num} for a in axes],
        "columns": columns_for(quantity, config.n),
        "records": records,
    }


def handle_discriminant(context: Dict[str, Any]) -> Dict[str, Any]:
    """
    网格上的 Δ 成员图

    Args:
        context: config 以及 axes（如 ['b2:-2:2:11', 'b3:-2:2:11']）

    Returns:
        每个格点一条记录，附 on_delta 计数
    """
    result = _sweep(context, "membership")
    result["on_delta_count"] = sum(1 for r in result["records"] if r.get("on_delta"))
    return result


def handle_sweep(context: Dict[str, Any]) -> Dict[str, Any]:
    """在格点上扫描 alpha、bound、zeta0 或 distance"""
    return _sweep(context, context.get("quantity") or "alpha")


def coordinate_names(m) -> List[str]:
    if isinstance(m, FocusFocus22):
        return ["x1", "y1", "x2", "y2", "r", "theta"]
    return [f"{axis}{k + 1}" for k in range(m.n) for axis in ("x", "y")]


def handle_flow(context: Dict[str, Any]) -> Dict[str, Any]:
    """
    导出 F_i 流的轨迹

    起点为 --z 给出的相点，否则为 --b 处的截面（默认起始截面）。
    每个样本记录坐标和 F 的取值，drift 为 F 沿轨迹的最大偏离。
    """
    config: RunConfig = context["config"]
    m = config.model()
    i = int(context.get("i") or 1)
    m.check_index(i)
    t = float(context.get("t") if context.get("t") is not None else 1.0)
    method = context.get("method") or "auto"

    if context.get("z") is not None:
        coords = np.array(parse_vector(context["z"]))
        if coords.size != m.dim:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Phase point needs {m.dim} coordinates, got {coords.size}")
        start = PhasePoint(coords)
    else:
        default = (1.0, 0.0, 0.5) if isinstance(m, FocusFocus22) else (1.0,) + (0.0,) * (m.n - 1)
        start = section(m, context.get("section") or m.start_section, config.base_point(default))

    times, states = trajectory(m, i, t, start, config.samples, method,
                               rtol=config.ode_rel, atol=config.ode_atol)
    names = coordinate_names(m)
    initial = np.array(eval_F(m, start).b)
    records = []
    drift = 0.0
    for s, y in zip(times, states):
        values = np.array(eval_F(m, y).b)
        drift = max(drift, float(np.max(np.abs(values - initial))))
        record = {"t": float(s)}
        record.update({name: float(v) for name, v in zip(names, y)})
        record.update({f"F{k + 1}": float(v) for k, v in enumerate(values)})
        records.append(record)

    result = {
        "model": m.describe(),
        "i": i,
        "t": t,
        "method": method,
        "start": start.coords.tolist(),
        "drift": drift,
        "columns": ["t"] + names + [f"F{k + 1}" for k in range(m.n)],
        "records": records,
    }
    if context.get("return_time"):
        result["return_time"] = first_return_time(m, i, start, rtol=config.ode_rel,
                                                  atol=config.ode_atol)
    logger.debug(f"Flow {i} of {m.kind}: {len(records)} samples, drift={drift:.3e}")
    return result
