# -*- coding: utf-8 -*-
"""
错误码定义模块
定义所有数值计算和命令行的错误码和异常类
"""

from enum import IntEnum
from typing import Optional, Any


class ErrorCode(IntEnum):
    """错误码枚举"""
    # 成功
    SUCCESS = 0

    # 1XXX - 输入/解析错误
    INVALID_PARAMS = 1001
    PARSE_ERROR = 1002
    EVAL_ERROR = 1003

    # 2XXX - 几何错误
    ON_DISCRIMINANT = 2001
    NO_REAL_ROOT = 2002

    # 3XXX - 数值计算错误
    QUADRATURE_FAILURE = 3001
    INTEGRATION_FAILURE = 3002
    EVENT_NOT_FOUND = 3003
    SHOOTING_DIVERGED = 3004
    DENOMINATOR_VANISHES = 3005
    INSUFFICIENT_SAMPLES = 3006

    # 4XXX - 延拓/单值性错误
    BRANCH_CROSSING = 4001
    NON_INTEGER_MONODROMY = 4002

    # 5XXX - IO/内部错误
    IO_ERROR = 5001
    CHECK_FAILED = 5002
    INTERNAL_ERROR = 5003


# 错误码对应的进程退出码
ERROR_TO_EXIT_CODE = {
    ErrorCode.SUCCESS: 0,
    ErrorCode.INVALID_PARAMS: 2,
    ErrorCode.PARSE_ERROR: 2,
    ErrorCode.EVAL_ERROR: 2,
    ErrorCode.ON_DISCRIMINANT: 3,
    ErrorCode.NO_REAL_ROOT: 70,
    ErrorCode.QUADRATURE_FAILURE: 4,
    ErrorCode.INTEGRATION_FAILURE: 4,
    ErrorCode.EVENT_NOT_FOUND: 4,
    ErrorCode.SHOOTING_DIVERGED: 4,
    ErrorCode.DENOMINATOR_VANISHES: 4,
    ErrorCode.INSUFFICIENT_SAMPLES: 4,
    ErrorCode.BRANCH_CROSSING: 5,
    ErrorCode.NON_INTEGER_MONODROMY: 5,
    ErrorCode.IO_ERROR: 6,
    ErrorCode.CHECK_FAILED: 1,
    ErrorCode.INTERNAL_ERROR: 70,
}


# 错误码对应的默认消息
ERROR_MESSAGES = {
    ErrorCode.SUCCESS: "success",
    ErrorCode.INVALID_PARAMS: "Invalid parameters",
    ErrorCode.PARSE_ERROR: "Expression parse error",
    ErrorCode.EVAL_ERROR: "Expression evaluation error",
    ErrorCode.ON_DISCRIMINANT: "Base point lies on the discriminant locus",
    ErrorCode.NO_REAL_ROOT: "Spectral polynomial has no real root",
    ErrorCode.QUADRATURE_FAILURE: "Quadrature did not converge",
    ErrorCode.INTEGRATION_FAILURE: "ODE integration failed",
    ErrorCode.EVENT_NOT_FOUND: "Integration event not reached",
    ErrorCode.SHOOTING_DIVERGED: "Shooting iteration diverged",
    ErrorCode.DENOMINATOR_VANISHES: "Moser field denominator vanishes",
    ErrorCode.INSUFFICIENT_SAMPLES: "Insufficient samples for fit",
    ErrorCode.BRANCH_CROSSING: "Stencil or path crosses a branch cut",
    ErrorCode.NON_INTEGER_MONODROMY: "Monodromy matrix is not integral",
    ErrorCode.IO_ERROR: "I/O error",
    ErrorCode.CHECK_FAILED: "Invariant check failed",
    ErrorCode.INTERNAL_ERROR: "Internal error",
}


class LagfibError(Exception):
    """计算错误异常类"""

    def __init__(self, code: ErrorCode, message: Optional[str] = None,
                 data: Optional[Any] = None):
        self.code = code
        self.message = message or ERROR_MESSAGES.get(code, "Unknown error")
        self.data = data
        super().__init__(self.message)

    def to_dict(self) -> dict:
        """转换为字典格式"""
        result = {
            "code": int(self.code),
            "name": self.code.name,
            "message": self.message,
        }
        if self.data is not None:
            result["data"] = self.data
        return result

    @property
    def exit_code(self) -> int:
        """获取对应的进程退出码"""
        return ERROR_TO_EXIT_CODE.get(self.code, 70)
