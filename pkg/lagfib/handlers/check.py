# -*- coding: utf-8 -*-
"""
Invariant suite
check 子命令：每条验收判据一个检查项，报告实测值、阈值和 PASS/FAIL
"""

import logging
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Any, Dict, List, Optional

import numpy as np

from common.errors import ErrorCode, LagfibError
from common.expr import diff, evaluate, parse_expr, to_text, variables
from common.protocol import emit
from common.utils import Timer, central_difference, make_rng
from fibration.classify import DeformationPair, approach_paths, equivalence_verdict
from fibration.models import (
    FocusFocus22, HarveyLawson, PhasePoint, bracket_from_gradients, eval_F, first_return_time,
    flow, involution_A, poisson_bracket, project_pi, section, special_lagrangian_residual,
)
from fibration.monodromy import GENERATORS, identify_word, monodromy_for
from fibration.periods import (
    DeformationH, alpha_bound, alpha_closed_form, alpha_flow_oracle, alpha_quadrature, blowup_fit,
    closedness_residual, period_basis,
)
from fibration.poly_geometry import dist_to_discriminant, zeta0, zeta0_gradient
from lagfib.config import RunConfig
from lagfib.handlers.geometry import handle_discriminant
from lagfib.handlers.lattice import handle_alpha
from lagfib.router import Router

logger = logging.getLogger(__name__)

checks = Router()

# 名称到验收判据编号
CRITERIA: Dict[str, int] = {}

FF22_FLOW_START = PhasePoint.ff22(0.3 + 0.2j, 0.4 - 0.1j, 0.5, 0.1)
HL_FLOW_START = PhasePoint.from_complex([0.8 + 0.3j, 0.5 - 0.6j, 1.1 + 0.2j])

CLOSEDNESS_POINT = (0.6, 0.8, 0.5)
EXACT_FORM_H = "s1^2*s2 + s2*r - 2*s1*r"
FLAT_H = "flatbump(d)"
COMMON_SHIFT = "s1^2 + s2"

# 解析/打印往返和导数检验的表达式语料
EXPRESSION_CORPUS = (
    "b1",
    "b1 + b2",
    "b1 - b2 - b3",
    "b1 * b2 + b3",
    "b1 / b2",
    "b1^2 + b2^2",
    "2^b1",
    "b1^b2",
    "-b1^2",
    "(-b1)^2",
    "exp(b1)",
    "exp(-b1*b2)",
    "log(b1)",
    "log(b1^2 + b2^2)",
    "sqrt(b1)",
    "sqrt(b1^2 + b2^2 + b3^2)",
    "sin(b1)",
    "cos(b2 * b3)",
    "sin(b1)^2 + cos(b1)^2",
    "atan2(b2, b1)",
    "atan2(b1 - 2, b3)",
    "abs(b1 - 2)",
    "sign(b1) * b2",
    "b1 * b2 * b3",
    "b1 / (1 + b2^2)",
    "1 / (b1 * b2)",
    "(b1 + b2) / (b1 - 3)",
    "b1^3 - 3*b1*b2^2",
    "exp(sin(b1)) * cos(b3)",
    "log(1 + exp(b2))",
    "sqrt(1 + b1^2) - b1",
    "b1^0.5 * b2^1.5",
    "2.5e-1 * b3",
    "-(b1 + b2)",
    "+b1",
    "b1 - -b2",
    "b1 * -b2",
    "((b1))",
    "b1^2^0.5",
    "1 - b1 + b2 * b3 / 4",
    "cos(b1 + b2 + b3)",
    "exp(-1/b1^2)",
    "flatbump(b1)",
    "flatbump(b1 - 2) * b2",
    "b1 * flatbump(b2)",
    "atan2(b1, b2) * b3",
    "sin(b1) / cos(b2)",
    "abs(sin(b1))",
    "exp(b1) - exp(-b1)",
    "sqrt(abs(b2 - 3))",
    "log(sqrt(b1))",
    "b3^b1 + b1^b3",
    "flatbump(d)",
    "exp(-1/d^2)",
    "b1^2 + flatbump(d)",
    "d * b1",
    "flatbump(d) * b1",
    "exp(-1/d)",
    "0",
    "3.25",
)

# 导数检验的取样区域，语料中的函数在此处都光滑
DERIVATIVE_BOX = (0.5, 1.4)


@dataclass
class CheckResult:
    """单个检查项的结论"""
    name: str
    criterion: int
    value: Optional[float]
    threshold: Any
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)
    label: str = ""

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "name": self.name,
            "criterion": self.criterion,
            "value": self.value,
            "threshold": self.threshold,
            "status": "PASS" if self.passed else "FAIL",
            "details": self.details,
        }
        if self.label:
            out["label"] = self.label
        return out


def register(name: str, criterion: int, help: str = ""):
    """注册检查项并记下判据编号"""
    CRITERIA[name] = criterion
    return checks.check(name, help)


def _ball(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    """半径为 radius 的球内均匀分布"""
    directions = rng.standard_normal((count, dim))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    radii = radius * rng.random(count) ** (1.0 / dim)
    return directions * radii[:, None]


def _off_discriminant(rng: np.random.Generator, count: int, margin: float,
                      box: float = 1.5) -> List[np.ndarray]:
    points = []
    while len(points) < count:
        b = rng.uniform(-box, box, 3)
        if dist_to_discriminant(b) > margin:
            points.append(b)
    return points


# ============== 1. 对合性 ==============

@register("involutivity", 1, "max |{F_i,F_j}| at 100 seeded points, both families")
def check_involutivity(config: RunConfig) -> CheckResult:
    rng = make_rng(config.seed)
    threshold = 1e-9
    hl = HarveyLawson(3)
    ff = FocusFocus22(config.ff_eps, config.theta0)
    pairs = list(combinations(range(1, 4), 2))

    hl_points = _ball(rng, 100, 6, 2.0)
    ff_points = np.column_stack([_ball(rng, 100, 4, 2.0), rng.uniform(0.05, 0.95, 100),
                                 rng.uniform(0.0, 2.0 * np.pi, 100)])
    worst = {
        "hl": max(abs(poisson_bracket(hl, i, j, z)) for z in hl_points for i, j in pairs),
        "ff22": max(abs(poisson_bracket(ff, i, j, z)) for z in ff_points for i, j in pairs),
    }
    # 正则对 (x₁, y₁) 的括号为 ±1，确认检测器本身有效
    canonical = abs(bracket_from_gradients(np.eye(6)[0], np.eye(6)[1]))
    value = max(worst.values())
    return CheckResult("involutivity", 1, value, threshold,
                       value <= threshold and abs(canonical - 1.0) <= threshold,
                       {**worst, "canonical_pair": canonical})


# ============== 2. 流的精确性 ==============

def _relative_flow_error(m, i: int, t: float, z, config: RunConfig) -> float:
    ode = flow(m, i, t, z, method="ode", rtol=config.ode_rel, atol=config.ode_atol).coords
    exact = flow(m, i, t, z, method="closed").coords
    return float(np.linalg.norm(ode - exact) / np.linalg.norm(exact))


@register("flow_exactness", 2, "ODE flows vs closed forms, HL first-return time vs pi")
def check_flow_exactness(config: RunConfig) -> CheckResult:
    threshold = 1e-8
    times = np.linspace(-5.0, 5.0, 20)
    ff = FocusFocus22(config.ff_eps, config.theta0)
    hl = HarveyLawson(3)
    ff_error = max(_relative_flow_error(ff, i, t, FF22_FLOW_START, config)
                   for i in (1, 2, 3) for t in times)
    hl_error = max(_relative_flow_error(hl, i, t, HL_FLOW_START, config)
                   for i in (2, 3) for t in times)
    returns = [first_return_time(hl, i, HL_FLOW_START, rtol=config.ode_rel, atol=config.ode_atol)
               for i in (2, 3)]
    return_error = max(abs(t - np.pi) for t in returns)
    value = max(ff_error, hl_error, return_error)
    return CheckResult("flow_exactness", 2, value, threshold, value <= threshold, {
        "ff22_relative_error": ff_error,
        "hl_relative_error": hl_error,
        "hl_return_times": returns,
    })


# ============== 3. α 的双重求法 ==============

@register("alpha_oracles", 3, "quadrature vs flow-time alpha; n=2 closed form")
def check_alpha_oracles(config: RunConfig) -> CheckResult:
    rng = make_rng(config.seed)
    threshold = 1e-5
    gaps = []
    for b in _off_discriminant(rng, 50, 0.1):
        quad = alpha_quadrature(b, 1.0, config.quad_rel)
        oracle = alpha_flow_oracle(b, 1.0, rtol=config.ode_rel, atol=config.ode_atol)
        gaps.append(abs(quad - oracle) / abs(quad))

    exact = -np.log(1.0 + np.sqrt(2.0))
    b2 = (1.0, 0.0)
    quad_error = abs(alpha_quadrature(b2, 1.0, config.quad_rel) - exact)
    flow_error = abs(alpha_flow_oracle(b2, 1.0, rtol=config.ode_rel, atol=config.ode_atol) - exact)
    closed_error = abs(alpha_closed_form(b2, 1.0) - exact)
    value = max(gaps)
    passed = value <= threshold and quad_error <= 1e-10 and flow_error <= 1e-6 \
        and closed_error <= 1e-12
    return CheckResult("alpha_oracles", 3, value, threshold, passed, {
        "samples": len(gaps),
        "n2_quadrature_error": quad_error,
        "n2_flow_error": flow_error,
        "n2_closed_form_error": closed_error,
    })


# ============== 4. 爆破指数 ==============

BLOWUP_TARGETS = {
    # 路径: (期望斜率, 容差, 距离窗口)
    "leg1": (-0.5, 0.1, (1e-4, 1e-1)),
    "leg2": (-0.5, 0.1, (1e-4, 1e-1)),
    "leg3": (-0.5, 0.1, (1e-4, 1e-1)),
    # 顶点附近 Q(ζ₀) ≈ 2d²，d 太小会落进判别容差
    "vertex": (-1.0, 0.15, (1e-3, 1e-1)),
}


@register("blowup_exponents", 4, "fitted blow-up slopes on leg and vertex approaches")
def check_blowup_exponents(config: RunConfig) -> CheckResult:
    paths = approach_paths(HarveyLawson(3))
    details = {}
    worst = 0.0
    passed = True
    for name, (expected, tolerance, window) in BLOWUP_TARGETS.items():
        ts = np.geomspace(window[0], window[1], config.samples)
        bound = blowup_fit(paths[name], ts, "bound")
        alpha = blowup_fit(paths[name], ts, "alpha")
        deviation = abs(bound.slope - expected) / tolerance
        worst = max(worst, deviation)
        ok = deviation <= 1.0 and bound.r2 >= 0.98 and alpha.slope >= bound.slope - tolerance
        passed = passed and ok
        details[name] = {"expected": expected, "tolerance": tolerance,
                         "bound": bound.to_dict(), "alpha": alpha.to_dict()}
    vertex = paths["vertex"]
    details["vertex_ratio"] = [
        alpha_quadrature(vertex(t), 1.0, config.quad_rel) / alpha_bound(vertex(t))
        for t in (1e-3, 1e-2, 1e-1)
    ]
    return CheckResult("blowup_exponents", 4, worst, 1.0, passed, details)


# ============== 5. ζ₀ 梯度 ==============

@register("zeta0_gradient", 5, "implicit-function gradient of zeta0 vs central differences")
def check_zeta0_gradient(config: RunConfig) -> CheckResult:
    rng = make_rng(config.seed)
    threshold = 1e-5
    worst = 0.0
    for b in _off_discriminant(rng, 100, 0.1):
        analytic = zeta0_gradient(b)
        numeric = np.array([central_difference(zeta0, b, j, 1e-6) for j in range(3)])
        error = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), 1.0)
        worst = max(worst, float(error))
    return CheckResult("zeta0_gradient", 5, worst, threshold, worst <= threshold,
                       {"samples": 100, "step": 1e-6})


# ============== 6. 单值性 ==============

@register("monodromy", 6, "integer monodromy of FF22 and HL loops")
def check_monodromy(config: RunConfig) -> CheckResult:
    threshold = 0.05
    ff = FocusFocus22(config.ff_eps, config.theta0)
    hl = HarveyLawson(3)
    identity = np.eye(3, dtype=int)
    M1 = np.array(GENERATORS["M1"])

    ff_loop = monodromy_for(ff, "ff22", 0.5, 64)
    ff_small = monodromy_for(ff, "ff22", 0.3, 48)
    ff_trivial = monodromy_for(ff, "ff22-contractible", 0.3, 64)

    legs = {kind: monodromy_for(hl, kind, 0.3, 64) for kind in ("leg1", "leg2", "leg3")}
    composite = monodromy_for(hl, "composite", 0.3, 64)
    trivial = monodromy_for(hl, "contractible", 0.3, 64)
    leg2_small = monodromy_for(hl, "leg2", 0.2, 48)

    product = legs["leg1"].array @ legs["leg2"].array @ legs["leg3"].array
    words = {kind: identify_word(M) for kind, M in legs.items()}
    all_matrices = [ff_loop, ff_small, ff_trivial, composite, trivial, leg2_small, *legs.values()]
    value = max(M.residual for M in all_matrices)

    conditions = {
        "ff22_matches": bool(np.array_equal(ff_loop.array, M1)),
        "ff22_radius_independent": bool(np.array_equal(ff_small.array, ff_loop.array)),
        "ff22_contractible_trivial": bool(np.array_equal(ff_trivial.array, identity)),
        "hl_legs_unipotent": all(M.is_unipotent() and M.det == 1 for M in legs.values()),
        "hl_legs_in_generated_group": all(word is not None for word in words.values()),
        "hl_leg_relation": bool(np.array_equal(product, identity)),
        "hl_composite_product": bool(np.array_equal(
            composite.array, legs["leg2"].array @ legs["leg3"].array)),
        "hl_contractible_trivial": bool(np.array_equal(trivial.array, identity)),
        "hl_radius_independent": bool(np.array_equal(leg2_small.array, legs["leg2"].array)),
    }
    details = {
        "ff22": ff_loop.to_dict(),
        "legs": {kind: {**M.to_dict(), "word": words[kind]} for kind, M in legs.items()},
        "composite": {**composite.to_dict(), "word": identify_word(composite)},
        "conditions": conditions,
    }
    return CheckResult("monodromy", 6, value, threshold,
                       value <= threshold and all(conditions.values()), details)


# ============== 7. 闭性 ==============

@register("closedness", 7, "curl of tau_1 = tau_0 + dH: h-halving ratio and exact part")
def check_closedness(config: RunConfig) -> CheckResult:
    m = FocusFocus22(config.ff_eps, config.theta0)
    H = DeformationH.parse(EXACT_FORM_H, m)
    zero = DeformationH.zero(m)

    def tau0(point):
        return period_basis(m, zero, point)[0]

    coarse = float(np.max(np.abs(closedness_residual(tau0, CLOSEDNESS_POINT, 1e-2))))
    fine = float(np.max(np.abs(closedness_residual(tau0, CLOSEDNESS_POINT, 5e-3))))
    ratio = coarse / fine
    exact = float(np.max(np.abs(closedness_residual(H.gradient, CLOSEDNESS_POINT, 1e-3))))
    passed = 3.5 <= ratio <= 4.5 and exact <= 1e-8
    return CheckResult("closedness", 7, ratio, [3.5, 4.5], passed, {
        "residual_h": coarse,
        "residual_half": fine,
        "exact_dH_residual": exact,
        "H": EXACT_FORM_H,
    })


# ============== 8. 分类流程 ==============

@register("classification", 8, "equivalence verdicts, symmetry and common-shift invariance")
def check_classification(config: RunConfig) -> CheckResult:
    threshold = 1e-4
    m = FocusFocus22(config.ff_eps, config.theta0)

    def verdict(H: str, Hp: str):
        return equivalence_verdict(DeformationPair.parse(H, Hp, m), config.k_max,
                                   denom_floor=config.denom_floor, samples=config.samples)

    same = verdict(COMMON_SHIFT, COMMON_SHIFT)
    linear = verdict("0", "b1")
    flat = verdict("0", FLAT_H)
    linear_back = verdict("b1", "0")
    flat_back = verdict(FLAT_H, "0")
    shifted_pair = DeformationPair.parse(COMMON_SHIFT, f"{FLAT_H} + {COMMON_SHIFT}", m)
    shifted = verdict(COMMON_SHIFT, f"{FLAT_H} + {COMMON_SHIFT}")

    tangency = None
    if flat.phi is not None:
        tangency = max(abs(flat.phi(b)[0] - b[0]) for b in ([1e-2, 0.0, 0.5], [5e-3, 0.0, 0.5]))
    conditions = {
        "self_equivalent": same.status == "equivalent",
        "linear_not_equivalent": linear.status == "not_equivalent",
        "flat_equivalent": flat.status == "equivalent",
        "tangent_to_identity": tangency is not None and tangency <= 1e-8,
        "symmetric": linear_back.status == linear.status and flat_back.status == flat.status,
        "common_shift_exact": shifted_pair.diff.expr == DeformationPair.parse("0", FLAT_H, m).diff.expr,
        "common_shift_invariant": shifted.status == flat.status,
    }
    value = flat.period_residual
    passed = value is not None and value <= threshold and all(conditions.values())
    return CheckResult("classification", 8, value, threshold, passed, {
        "statuses": {"(H,H)": same.status, "(0,b1)": linear.status, f"(0,{FLAT_H})": flat.status},
        "tangency": tangency,
        "conditions": conditions,
    }, label="finite-order, finite-grid operationalization of the germ classification")


# ============== 9. 特殊拉格朗日 ==============

@register("special_lagrangian", 9, "Re det of the Wirtinger matrix, with a negative control")
def check_special_lagrangian(config: RunConfig) -> CheckResult:
    rng = make_rng(config.seed)
    threshold = 1e-9
    points = [PhasePoint(y) for y in _ball(rng, 100, 6, 2.0)]
    value = max(special_lagrangian_residual(z) for z in points)
    # F₁ ← F₁ + x₁ 使 ∂F₁/∂z̄₁ 增加 1/2
    extra = np.zeros((3, 3), dtype=complex)
    extra[0, 0] = 0.5
    control = max(special_lagrangian_residual(z, extra) for z in points)
    return CheckResult("special_lagrangian", 9, value, threshold,
                       value <= threshold and control > 1e-3,
                       {"negative_control": control})


# ============== 10. 截面 ==============

@register("sections", 10, "F(Sigma+-) = b, pi(Sigma+-) = +-1 + i b1, A(Sigma-) = Sigma+")
def check_sections(config: RunConfig) -> CheckResult:
    rng = make_rng(config.seed)
    threshold = 1e-10
    m = HarveyLawson(3, 1.0)
    errors = {"F": 0.0, "pi": 0.0, "involution": 0.0}
    for b in rng.uniform(-2.0, 2.0, (100, 3)):
        plus = section(m, "plus", b)
        minus = section(m, "minus", b)
        for sign, point in ((1.0, plus), (-1.0, minus)):
            errors["F"] = max(errors["F"], float(np.max(np.abs(np.array(eval_F(m, point).b) - b))))
            u, image = project_pi(point)
            errors["pi"] = max(errors["pi"], abs(u - sign),
                               float(np.max(np.abs(np.array(image.b) - b))))
        errors["involution"] = max(errors["involution"],
                                   float(np.max(np.abs(involution_A(minus).coords - plus.coords))))
    value = max(errors.values())
    return CheckResult("sections", 10, value, threshold, value <= threshold, errors)


# ============== 11. 确定性与解析器 ==============

def _rerun_bytes(config: RunConfig) -> bytes:
    alpha_config = replace(config, family="hl", n=2, b=(1.0, 0.0), path=None, threads=1)
    sweep_config = replace(config, family="hl", n=3, b=None, threads=1)
    alpha = handle_alpha({"config": alpha_config})
    sweep = handle_discriminant({"config": sweep_config,
                                "axes": ["b2:-1:1:5", "b3:-1:1:5"]})
    meta = {"seed": config.seed}
    return emit(alpha, "json", command="alpha", meta=meta) + \
        emit(sweep, "csv", columns=sweep["columns"])


def _derivative_error(rng: np.random.Generator) -> float:
    names = ("b1", "b2", "b3")
    worst = 0.0
    for text in EXPRESSION_CORPUS:
        expr = parse_expr(text)
        if "d" in variables(expr):
            continue
        b = rng.uniform(*DERIVATIVE_BOX, 3)

        def value(x):
            return evaluate(expr, dict(zip(names, x)))

        for j, name in enumerate(names):
            analytic = evaluate(diff(expr, name), dict(zip(names, b)))
            numeric = central_difference(value, b, j, 1e-5)
            worst = max(worst, abs(analytic - numeric) / max(1.0, abs(analytic)))
    return worst


@register("determinism_parser", 11, "byte-identical reruns, parser round trip, derivatives")
def check_determinism_parser(config: RunConfig) -> CheckResult:
    threshold = 1e-6
    identical = _rerun_bytes(config) == _rerun_bytes(config)
    failures = [text for text in EXPRESSION_CORPUS
                if parse_expr(to_text(parse_expr(text))) != parse_expr(text)]
    value = _derivative_error(make_rng(config.seed))
    passed = identical and not failures and value <= threshold
    return CheckResult("determinism_parser", 11, value, threshold, passed, {
        "byte_identical": identical,
        "corpus_size": len(EXPRESSION_CORPUS),
        "round_trip_failures": failures,
    })


# ============== 入口 ==============

def run_checks(config: RunConfig, patterns: Optional[List[str]] = None) -> Dict[str, Any]:
    """
    运行选中的检查项

    Args:
        config: 运行配置（种子、容差）
        patterns: 名称通配符，空时运行全部

    Returns:
        报告：各项结果和总体 passed
    """
    routes = checks.select("check", patterns)
    if not routes:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"No checks match {patterns}",
                          data={"available": checks.names("check")})
    results = []
    for route in routes:
        with Timer() as timer:
            try:
                result = route.handler(config)
            except LagfibError as e:
                logger.error(f"Check {route.name} raised {e.code.name}: {e.message}")
                result = CheckResult(route.name, CRITERIA[route.name], None, None, False,
                                     {"error": e.to_dict()})
        logger.info(f"Check {route.name}: {'PASS' if result.passed else 'FAIL'} "
                    f"({timer.elapsed:.2f}s)")
        results.append(result)
    passed = all(r.passed for r in results)
    return {
        "checks": [r.to_dict() for r in results],
        "passed": passed,
        "summary": f"{sum(r.passed for r in results)}/{len(results)} passed",
    }


def handle_check(context: Dict[str, Any]) -> Dict[str, Any]:
    """check 子命令"""
    return run_checks(context["config"], context.get("only"))
