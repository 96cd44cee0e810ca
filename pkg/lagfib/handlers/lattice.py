# -*- coding: utf-8 -*-
"""
Period lattice handlers
奇异周期 α、周期基表和单值矩阵
"""

import logging
from typing import Any, Dict, List

import numpy as np

from common.errors import ErrorCode, LagfibError
from fibration.classify import approach_paths
from fibration.models import FocusFocus22, HarveyLawson
from fibration.monodromy import (
    expected_matrices, identify_word, monodromy_for,
)
from fibration.periods import (
    DeformationH, alpha_bound, alpha_closed_form, alpha_flow_oracle, alpha_quadrature,
    blowup_fit, closedness_residual, multitime_solve, period_basis, singular_period,
)
from fibration.poly_geometry import dist_to_discriminant, root_profile
from lagfib.config import RunConfig, parse_vector

logger = logging.getLogger(__name__)

ORACLE_REL_TOL = 1e-5


# ============== alpha ==============

def _alpha_point(config: RunConfig, m) -> Dict[str, Any]:
    if isinstance(m, FocusFocus22):
        b = config.base_point((1.0, 0.0, 0.5))
        return {"b": list(b), "value": singular_period(m, b), "distance": m.distance(b)}

    b = config.base_point((1.0,) + (0.0,) * (m.n - 1))
    profile = root_profile(b, m.eps, config.tol_disc)
    value = alpha_quadrature(b, m.eps, config.quad_rel, config.tol_disc)
    oracle = alpha_flow_oracle(b, m.eps, rtol=config.ode_rel, atol=config.ode_atol)
    gap = abs(value - oracle) / abs(value)
    result = {
        "b": list(b),
        "value": value,
        "oracle": oracle,
        "bound": alpha_bound(b, config.tol_disc),
        "relative_gap": gap,
        "agree": bool(gap <= ORACLE_REL_TOL),
        "zeta0": profile.zeta0,
        "q0": profile.q0,
        "distance": dist_to_discriminant(b),
    }
    if m.n == 2:
        closed = alpha_closed_form(b, m.eps)
        result["closed_form"] = closed
        result["agree"] = bool(result["agree"] and abs(value - closed) <= ORACLE_REL_TOL * abs(closed))
    return result


def _alpha_path(config: RunConfig, m) -> Dict[str, Any]:
    paths = approach_paths(m)
    if config.path not in paths:
        raise LagfibError(ErrorCode.INVALID_PARAMS,
                          f"Unknown path {config.path!r}, expected one of {sorted(paths)}")
    path = paths[config.path]
    ts = np.geomspace(config.t_min, config.t_max, config.samples)
    records = []
    for t in ts:
        b = path(t)
        record = {"t": float(t), "distance": float(m.distance(b))}
        try:
            value = alpha_quadrature(b, m.eps, config.quad_rel, config.tol_disc)
            bound = alpha_bound(b, config.tol_disc)
            record.update({"alpha": value, "bound": bound, "ratio": value / bound, "status": "ok"})
        except LagfibError as e:
            record.update({"alpha": float("nan"), "bound": float("nan"), "ratio": float("nan"),
                           "status": e.code.name.lower()})
        records.append(record)

    fits = {}
    for quantity in ("alpha", "bound"):
        try:
            fits[quantity] = blowup_fit(path, ts, quantity, m.distance).to_dict()
        except LagfibError as e:
            fits[quantity] = {"error": e.to_dict()}
    return {
        "path": config.path,
        "fits": fits,
        "columns": ["t", "distance", "alpha", "bound", "ratio", "status"],
        "records": records,
    }


def handle_alpha(context: Dict[str, Any]) -> Dict[str, Any]:
    """
    α(b) 的两种求法、上界和一致性标记；给出 --path 时沿趋近路径拟合爆破指数

    Args:
        context: 请求上下文（config）

    Returns:
        单点结果或路径表
    """
    config: RunConfig = context["config"]
    m = config.model()
    if config.path:
        if not isinstance(m, HarveyLawson):
            raise LagfibError(ErrorCode.INVALID_PARAMS, "Blow-up paths are defined for hl")
        return _alpha_path(config, m)
    return _alpha_point(config, m)


# ============== periods ==============

def _basis_record(step: int, b, basis, residual: float) -> Dict[str, Any]:
    record: Dict[str, Any] = {"step": step}
    record.update({f"b{j + 1}": float(v) for j, v in enumerate(b)})
    for i, tau in enumerate(basis):
        record.update({f"tau{i + 1}_{j + 1}": c for j, c in enumerate(tau.comps)})
    record["branch"] = list(basis[0].branch)
    record["residual"] = residual
    return record


def _closedness(m, H: DeformationH, b, h: float) -> Dict[str, Any]:
    def tau1(point):
        return period_basis(m, H, point)[0]
    coarse = float(np.max(np.abs(closedness_residual(tau1, b, h))))
    fine = float(np.max(np.abs(closedness_residual(tau1, b, h / 2.0))))
    return {"h": h, "residual": coarse, "residual_half": fine,
            "ratio": coarse / fine if fine > 0 else None}


def handle_periods(context: Dict[str, Any]) -> Dict[str, Any]:
    """
    周期基表

    --b 为起点；给出 --to 时沿线段取 --steps 段，多重时间沿路径暖启动以保持分支。
    HL 环面时间默认用积分公式，--method shooting 改用打靶。
    给出 --closedness h 时附加 τ₁ 在起点的闭性残差（h 和 h/2）。
    """
    config: RunConfig = context["config"]
    m = config.model()
    H = DeformationH.parse(config.H, m, config.eval_policy)
    default = (1.0, 0.0, 0.5) if isinstance(m, FocusFocus22) else (1.0,) + (0.0,) * (m.n - 1)
    start = np.array(config.base_point(default))
    method = context.get("method") or "quadrature"

    if context.get("to") is not None:
        end = np.array(parse_vector(context["to"]))
        if end.size != m.n:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"End point has {end.size} components, n={m.n}")
        steps = int(context.get("steps") or 10)
        weights = np.linspace(0.0, 1.0, steps + 1)[:, None]
        points = (1.0 - weights) * start + weights * end
    else:
        points = start[None, :]

    records = []
    multitime = None
    for step, b in enumerate(points):
        multitime = multitime_solve(m, b, method=method, warm_start=multitime,
                                    rtol=config.ode_rel, atol=config.ode_atol)
        basis = period_basis(m, H, b, multitime=multitime)
        records.append(_basis_record(step, b, basis, multitime.residual))

    result = {
        "model": m.describe(),
        "H": str(H),
        "method": method,
        "records": records,
    }
    if context.get("closedness"):
        result["closedness"] = _closedness(m, H, start, float(context["closedness"]))
    return result


# ============== monodromy ==============

def default_loops(m) -> List[str]:
    if isinstance(m, FocusFocus22):
        return ["ff22"]
    return ["leg1", "leg2", "leg3", "composite"]


def handle_monodromy(context: Dict[str, Any]) -> Dict[str, Any]:
    """
    沿闭路延拓周期基，输出整数矩阵、取整残差和生成元写法

    HL 三条腿都算时附带 M_leg1·M_leg2·M_leg3 = I 的检验。
    """
    config: RunConfig = context["config"]
    m = config.model()
    if isinstance(m, HarveyLawson) and m.n != 3:
        raise LagfibError(ErrorCode.INVALID_PARAMS, "Monodromy loops are defined for n=3")
    H = DeformationH.parse(config.H, m, config.eval_policy)
    kinds = [k for k in (config.loop or "").split(",") if k] or default_loops(m)
    reverse = bool(context.get("reverse"))
    method = context.get("method") or "quadrature"

    loops = []
    matrices: Dict[str, np.ndarray] = {}
    for kind in kinds:
        M = monodromy_for(m, kind, config.radius, config.points, H, reverse, method)
        matrices[kind] = M.array
        entry = M.to_dict()
        entry.update({"loop": kind, "unipotent": M.is_unipotent(), "word": identify_word(M)})
        loops.append(entry)
        logger.info(f"Monodromy around {kind}: {entry['matrix']} ({entry['word']})")

    result: Dict[str, Any] = {
        "family": m.kind,
        "radius": config.radius,
        "points": config.points,
        "reverse": reverse,
        "loops": loops,
        "expected": [M.to_dict() for M in expected_matrices(m.kind)],
    }
    if all(k in matrices for k in ("leg1", "leg2", "leg3")):
        product = matrices["leg1"] @ matrices["leg2"] @ matrices["leg3"]
        result["leg_product"] = product.tolist()
        result["relation_holds"] = bool(np.array_equal(product, np.eye(3, dtype=int)))
    return result
