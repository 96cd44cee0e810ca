# -*- coding: utf-8 -*-
"""
pytest fixtures
测试公共夹具
"""

import os
import sys

import numpy as np
import pytest

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from common.utils import DEFAULT_SEED


@pytest.fixture
def rng():
    """固定种子的随机数生成器"""
    return np.random.default_rng(DEFAULT_SEED)


@pytest.fixture
def off_discriminant(rng):
    """到 Δ 距离大于 0.1 的 n=3 底点"""
    from fibration.poly_geometry import dist_to_discriminant

    points = []
    while len(points) < 20:
        b = rng.uniform(-1.5, 1.5, 3)
        if dist_to_discriminant(b) > 0.1:
            points.append(b)
    return points
