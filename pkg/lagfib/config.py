# -*- coding: utf-8 -*-
"""
Run configuration
RunConfig：默认值 < 配置文件 < 环境变量 < 命令行参数
"""

import os
import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from common.errors import ErrorCode, LagfibError
from common.expr import EVAL_POLICIES
from common.protocol import FORMATS
from common.utils import DEFAULT_SEED, THREADS_ENV, safe_int
from fibration.models import FibrationModel, make_model

logger = logging.getLogger(__name__)

FAMILIES = ("hl", "ff22")
POSITIVE_FIELDS = ("tol_root", "quad_rel", "ode_rel", "ode_atol", "radius", "denom_floor")

# 分节 YAML 中与字段名不同的键
SECTION_ALIASES = {
    "logging.level": "log_level",
    "logging.file": "log_file",
    "model.eps": "eps",
    "ff22.eps": "ff_eps",
    "ff22.theta0": "theta0",
}


@dataclass
class RunConfig:
    """一次运行的全部参数"""
    # 模型
    family: str = "hl"
    n: int = 3
    b: Optional[Tuple[float, ...]] = None
    eps: float = 1.0
    ff_eps: float = 0.5
    theta0: float = 0.0

    # 容差
    tol_root: float = 1e-10
    tol_disc: Optional[float] = None
    quad_rel: float = 1e-10
    ode_rel: float = 1e-10
    ode_atol: float = 1e-12

    # 运行
    seed: int = DEFAULT_SEED
    format: str = "json"
    output: Optional[str] = None
    threads: Optional[int] = None

    # 闭路与路径
    loop: Optional[str] = None
    radius: float = 0.3
    points: int = 64
    path: Optional[str] = None
    t_min: float = 1e-4
    t_max: float = 1e-1
    samples: int = 13

    # 形变与分类
    H: str = "0"
    Hp: str = "0"
    k_max: int = 3
    denom_floor: float = 1e-3
    eval_policy: str = "strict"

    # 日志
    log_level: str = "WARNING"
    log_file: Optional[str] = None

    @classmethod
    def from_sources(cls, path: Optional[str] = None,
                     overrides: Optional[Mapping[str, Any]] = None,
                     environ: Optional[Mapping[str, str]] = None) -> "RunConfig":
        """
        按优先级合并各来源

        Args:
            path: 配置文件（key=value 文本或 .yaml/.yml）
            overrides: 命令行中显式给出的参数，值为 None 的键忽略
            environ: 环境变量（默认 os.environ）

        Returns:
            校验过的 RunConfig

        Raises:
            LagfibError: INVALID_PARAMS 或 IO_ERROR
        """
        config = cls()
        if path:
            config.update(load_config_file(path))
        config.apply_environment(os.environ if environ is None else environ)
        if overrides:
            config.update({k: v for k, v in overrides.items() if v is not None})
        config.validate()
        return config

    def update(self, values: Mapping[str, Any]):
        known = {f.name: f for f in fields(self)}
        for key, value in values.items():
            if key not in known:
                raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown configuration key {key!r}")
            setattr(self, key, _coerce(key, known[key].default, value))

    def apply_environment(self, environ: Mapping[str, str]):
        """LAGFIB_THREADS 给出进程数上限"""
        raw = environ.get(THREADS_ENV)
        if raw is None:
            return
        cap = safe_int(raw, 0)
        if cap <= 0:
            logger.warning(f"Ignoring invalid {THREADS_ENV}={raw!r}")
            return
        self.threads = cap if self.threads is None else min(self.threads, cap)

    def validate(self):
        self.family = self.family.lower()
        if self.family not in FAMILIES:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Unknown family {self.family!r}, expected one of {FAMILIES}")
        if self.family == "ff22" and self.n != 3:
            logger.info(f"FF22 base is (s1, s2, r); using n=3 instead of {self.n}")
            self.n = 3
        if self.n < 2:
            raise LagfibError(ErrorCode.INVALID_PARAMS, f"n must be >= 2, got {self.n}")
        for name in POSITIVE_FIELDS:
            if not getattr(self, name) > 0:
                raise LagfibError(ErrorCode.INVALID_PARAMS,
                                  f"{name} must be positive, got {getattr(self, name)}")
        if self.tol_disc is not None and not self.tol_disc > 0:
            raise LagfibError(ErrorCode.INVALID_PARAMS, "tol_disc must be positive")
        if self.eps <= 0 or self.ff_eps <= 0:
            raise LagfibError(ErrorCode.INVALID_PARAMS, "eps must be positive")
        if self.format not in FORMATS:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Unknown format {self.format!r}, expected one of {FORMATS}")
        if self.eval_policy not in EVAL_POLICIES:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Unknown eval policy {self.eval_policy!r}")
        if self.b is not None and len(self.b) != self.n:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Base point has {len(self.b)} components, n={self.n}")
        if self.points < 4 or self.samples < 3 or self.k_max < 0:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Bad sampling: points={self.points}, samples={self.samples}, "
                              f"k_max={self.k_max}")
        if not 0 < self.t_min < self.t_max:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Need 0 < t_min < t_max, got {self.t_min}, {self.t_max}")
        if self.threads is not None and self.threads < 1:
            raise LagfibError(ErrorCode.INVALID_PARAMS, "threads must be >= 1")

    @property
    def model_eps(self) -> float:
        return self.ff_eps if self.family == "ff22" else self.eps

    def model(self) -> FibrationModel:
        return make_model(self.family, self.n, self.model_eps, self.theta0)

    def numeric_settings(self) -> Dict[str, Any]:
        """传给扫描进程的容差"""
        return {"tol_root": self.tol_root, "tol_disc": self.tol_disc,
                "quad_rel": self.quad_rel, "eps": self.eps}

    def base_point(self, default: Optional[Tuple[float, ...]] = None) -> Tuple[float, ...]:
        """--b 给出的底点，未给出时用 default"""
        point = self.b if self.b is not None else default
        if point is None:
            raise LagfibError(ErrorCode.INVALID_PARAMS, "A base point (--b) is required")
        return tuple(point)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        # 输出路径和日志设置不影响数值结果
        for key in ("output", "log_level", "log_file", "threads"):
            out.pop(key)
        return out


def parse_vector(text) -> Tuple[float, ...]:
    """'1,0,0' 或序列转为浮点元组"""
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [item for item in str(text).replace(" ", "").split(",") if item]
    try:
        return tuple(float(v) for v in items)
    except ValueError:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Bad vector {text!r}")


def _coerce(key: str, default: Any, value: Any) -> Any:
    if key == "b":
        return None if value is None else parse_vector(value)
    if value is None:
        return None
    if key in ("tol_disc",) or isinstance(default, float):
        kind = float
    elif key in ("threads",) or isinstance(default, int):
        kind = int
    else:
        return str(value)
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Bad value for {key}: {value!r}")


def _flatten(section: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    out = {}
    for key, value in section.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, f"{dotted}."))
        else:
            out[SECTION_ALIASES.get(dotted, str(key))] = value
    return out


def _parse_key_values(text: str, path: str) -> Dict[str, Any]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[SECTION_ALIASES.get(key, key.rsplit(".", 1)[-1])] = value
    return out


def load_config_file(path: str) -> Dict[str, Any]:
    """
    读取配置文件

    .yaml/.yml 用 yaml.safe_load 并展开分节，其他扩展名按 key=value 逐行解析。

    Raises:
        LagfibError: 文件不可读或格式错误
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise LagfibError(ErrorCode.IO_ERROR, f"Cannot read config {path}: {e}")
    if path.endswith((".yaml", ".yml")):
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise LagfibError(ErrorCode.INVALID_PARAMS, f"Bad YAML in {path}: {e}")
        if not isinstance(data, dict):
            raise LagfibError(ErrorCode.INVALID_PARAMS, f"{path} must hold a mapping")
        values = _flatten(data)
    else:
        values = _parse_key_values(text, path)
    logger.debug(f"Loaded {len(values)} settings from {path}")
    return values
