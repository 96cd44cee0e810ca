# -*- coding: utf-8 -*-
"""
Common module for lagfib
共用模块，包含错误码、输出协议、表达式语言和工具函数
"""

from .errors import ErrorCode, LagfibError
from .protocol import Envelope, emit, render_csv, to_jsonable
from .utils import Timer, make_rng, resolve_workers

__all__ = [
    'ErrorCode',
    'LagfibError',
    'Envelope',
    'emit',
    'render_csv',
    'to_jsonable',
    'Timer',
    'make_rng',
    'resolve_workers',
]
