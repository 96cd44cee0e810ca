# -*- coding: utf-8 -*-
"""
Classification handler
判定两个形变给出的纤维化芽是否等价
"""

import logging
from typing import Any, Dict

from fibration.classify import (
    DeformationPair, default_grid, equivalence_verdict, tees_residual,
)
from lagfib.config import RunConfig

logger = logging.getLogger(__name__)

# 有限阶、有限格点上的判定，不是芽层面的定理
VERDICT_SCOPE = "finite-order, finite-grid operationalization of germ equivalence"


def handle_classify(context: Dict[str, Any]) -> Dict[str, Any]:
    """
    分类 (H, H′)

    Args:
        context: config（H、Hp、k_max、samples、denom_floor、eval_policy）以及
                 tees（为真时对构造出的 φ 做 φ*τ₀ − τ₀ 的平坦度评分）

    Returns:
        Verdict 字典，附 φ 在格点上的最大位移
    """
    config: RunConfig = context["config"]
    m = config.model()
    pair = DeformationPair.parse(config.H, config.Hp, m, config.eval_policy)
    verdict = equivalence_verdict(pair, config.k_max, denom_floor=config.denom_floor,
                                  samples=config.samples)
    logger.info(f"classify({config.H!r}, {config.Hp!r}) -> {verdict.status}")

    result = verdict.to_dict()
    result.update({
        "H": config.H,
        "Hp": config.Hp,
        "difference": str(pair.diff),
        "model": m.describe(),
        "scope": VERDICT_SCOPE,
    })
    if verdict.phi is not None:
        grid = default_grid(m)
        result["max_displacement"] = max(float(abs(verdict.phi(b)[0] - b[0])) for b in grid)
        if context.get("tees"):
            tables = tees_residual(verdict.phi, m, k_max=min(config.k_max, 2),
                                   samples=config.samples)
            result["tees"] = [table.to_dict() for table in tables]
            result["tees_pass"] = all(table.passed for table in tables)
    return result
