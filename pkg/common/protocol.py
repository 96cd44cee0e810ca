# -*- coding: utf-8 -*-
"""
Output protocol
结果输出格式：带版本号的 JSON 信封（lagfib.v1）和 CSV 记录
"""

import csv
import io
import json
import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .errors import ErrorCode, LagfibError

logger = logging.getLogger(__name__)

SCHEMA = "lagfib.v1"
FORMATS = ("json", "csv")


def to_jsonable(obj: Any) -> Any:
    """
    转换为可序列化的纯 Python 对象

    numpy 标量和数组转为内置类型，整数保持整数，非有限浮点数写成字符串。
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


@dataclass
class Envelope:
    """JSON 输出信封"""
    command: str
    data: Any = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": SCHEMA,
            "command": self.command,
            "meta": to_jsonable(self.meta),
            "data": to_jsonable(self.data),
        }

    def to_bytes(self) -> bytes:
        """排序键、无时间戳，相同输入逐字节相同"""
        text = json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2)
        return (text + "\n").encode("utf-8")


def build_error(error: LagfibError, command: str = "") -> bytes:
    """错误信封，写到 stderr"""
    return Envelope(command, meta={"status": "error"},
                    data={"error": error.to_dict()}).to_bytes()


def _csv_cell(value: Any) -> str:
    value = to_jsonable(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True)
    return "" if value is None else str(value)


def render_csv(records: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> bytes:
    """
    渲染 CSV：首行表头，每个样本一行，浮点数用 repr 保证往返精确

    Args:
        records: 记录列表
        columns: 列顺序（默认取第一条记录的键）
    """
    if columns is None:
        columns = list(records[0].keys()) if records else []
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for record in records:
        writer.writerow([_csv_cell(record.get(c)) for c in columns])
    return buffer.getvalue().encode("utf-8")


def emit(results: Any, fmt: str = "json", path: Optional[str] = None, command: str = "",
         meta: Optional[Dict[str, Any]] = None, columns: Optional[List[str]] = None) -> bytes:
    """
    输出结果

    Args:
        results: JSON 时为任意数据；CSV 时为记录列表，或带 'records' 键的字典
        fmt: 'json' 或 'csv'
        path: 输出文件（None 时只返回字节）
        command: 子命令名
        meta: 元数据（种子、配置等）
        columns: CSV 列顺序

    Returns:
        写出的字节

    Raises:
        LagfibError: 格式未知或写文件失败
    """
    if fmt not in FORMATS:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown output format {fmt!r}")
    if fmt == "json":
        payload = Envelope(command, results, meta or {}).to_bytes()
    else:
        records = results.get("records", []) if isinstance(results, dict) else list(results)
        payload = render_csv(records, columns)

    if path:
        try:
            with open(path, "wb") as f:
                f.write(payload)
        except OSError as e:
            raise LagfibError(ErrorCode.IO_ERROR, f"Failed to write {path}: {e}")
        logger.info(f"Wrote {len(payload)} bytes to {path}")
    return payload
