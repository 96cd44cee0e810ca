# -*- coding: utf-8 -*-
"""
lagfib handlers module
子命令处理器模块
"""

from . import geometry
from . import lattice
from . import classification
from . import check

__all__ = ['geometry', 'lattice', 'classification', 'check']
