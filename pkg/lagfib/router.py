# -*- coding: utf-8 -*-
"""
Command registry
把子命令名和检查项名映射到处理函数，支持通配符选择
"""

import fnmatch
import logging
from typing import Callable, Dict, List, Optional

logger = logging.getLogger(__name__)


class Route:
    """注册项"""

    def __init__(self, group: str, name: str, handler: Callable, help: str = ""):
        """
        初始化注册项

        Args:
            group: 分组（'command' 或 'check'）
            name: 名称
            handler: 处理函数
            help: 说明文字
        """
        self.group = group
        self.name = name
        self.handler = handler
        self.help = help

    def match(self, group: str, pattern: str) -> bool:
        """名称按 shell 通配符匹配"""
        return group == self.group and fnmatch.fnmatchcase(self.name, pattern)


class Router:
    """处理函数注册表，保持注册顺序"""

    def __init__(self):
        self.routes: List[Route] = []

    def add_route(self, group: str, name: str, handler: Callable, help: str = ""):
        """
        添加注册项

        Args:
            group: 分组
            name: 名称（同组内唯一）
            handler: 处理函数
            help: 说明文字
        """
        if self.lookup(group, name) is not None:
            raise ValueError(f"Duplicate {group} {name!r}")
        self.routes.append(Route(group, name, handler, help))
        logger.debug(f"Added {group}: {name}")

    def command(self, name: str, help: str = ""):
        """子命令装饰器"""
        def decorator(handler: Callable):
            self.add_route("command", name, handler, help)
            return handler
        return decorator

    def check(self, name: str, help: str = ""):
        """检查项装饰器"""
        def decorator(handler: Callable):
            self.add_route("check", name, handler, help)
            return handler
        return decorator

    def lookup(self, group: str, name: str) -> Optional[Route]:
        for route in self.routes:
            if route.group == group and route.name == name:
                return route
        return None

    def match(self, group: str, name: str) -> Optional[Callable]:
        """
        按精确名称查找

        Returns:
            处理函数，未找到返回 None
        """
        route = self.lookup(group, name)
        return route.handler if route else None

    def select(self, group: str, patterns: Optional[List[str]] = None) -> List[Route]:
        """按通配符列表选择，空列表选择全部"""
        patterns = patterns or ["*"]
        return [route for route in self.routes
                if any(route.match(group, pattern) for pattern in patterns)]

    def names(self, group: str) -> List[str]:
        return [route.name for route in self.routes if route.group == group]

    def describe(self, group: str) -> Dict[str, str]:
        return {route.name: route.help for route in self.routes if route.group == group}
