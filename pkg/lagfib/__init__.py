# -*- coding: utf-8 -*-
"""
lagfib command-line package
命令行、运行配置、参数扫描和不变量检查
"""

__version__ = "1.0.0"
