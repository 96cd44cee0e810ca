# -*- coding: utf-8 -*-
"""
lagfib entry point
允许通过 python -m lagfib 运行命令行
"""

from lagfib.cli import main

if __name__ == '__main__':
    main()
