# -*- coding: utf-8 -*-
"""
Singular Lagrangian T³-fibration engines
数值引擎：谱多项式几何、纤维化模型、周期、单值性和分类
"""
