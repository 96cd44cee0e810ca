# -*- coding: utf-8 -*-
"""
Fibration models
Harvey–Lawson 映射与 focus-focus×S¹ 正规形：哈密顿向量场、流、截面和几何残差
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from common.errors import ErrorCode, LagfibError
from fibration.poly_geometry import BaseParams, as_base, zeta0, zeta_eps

logger = logging.getLogger(__name__)

ODE_RTOL = 1e-10
ODE_ATOL = 1e-12
ODE_METHOD = "DOP853"


@dataclass(frozen=True)
class PhasePoint:
    """
    全空间坐标图中的点，2n 个实数按正则对 (q_k, p_k) 排列

    HL 模型为 (x_1, y_1, ..., x_n, y_n)，z_j = x_j + i·y_j；
    FF22 模型为 (x_1, y_1, x_2, y_2, r, θ)，ζ₁ = x₁ + i·x₂，ζ₂ = y₁ + i·y₂。
    """
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).ravel()
        if coords.size % 2 or not np.all(np.isfinite(coords)):
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Phase point needs an even number of finite reals, got {coords}")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_complex(cls, z: Sequence[complex]) -> "PhasePoint":
        z = np.asarray(z, dtype=complex)
        coords = np.empty(2 * z.size)
        coords[0::2] = z.real
        coords[1::2] = z.imag
        return cls(coords)

    @classmethod
    def ff22(cls, zeta1: complex, zeta2: complex, r: float, theta: float = 0.0) -> "PhasePoint":
        return cls([zeta1.real, zeta2.real, zeta1.imag, zeta2.imag, r, theta])

    @property
    def z(self) -> np.ndarray:
        return self.coords[0::2] + 1j * self.coords[1::2]

    @property
    def zeta(self) -> Tuple[complex, complex]:
        c = self.coords
        return complex(c[0], c[2]), complex(c[1], c[3])

    def __len__(self) -> int:
        return self.coords.size


@dataclass(frozen=True)
class MultiTime:
    """多重时间 T=(t_1,...,t_n)，residual 为截面匹配残差"""
    T: Tuple[float, ...]
    residual: float = 0.0

    def __post_init__(self):
        values = tuple(float(t) for t in self.T)
        if not all(np.isfinite(values)):
            raise LagfibError(ErrorCode.INVALID_PARAMS, f"Multitime must be finite, got {values}")
        object.__setattr__(self, "T", values)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.T)


def _coords(z) -> np.ndarray:
    if isinstance(z, PhasePoint):
        return np.array(z.coords)
    return np.asarray(z, dtype=float)


def hamiltonian_vector(grad: np.ndarray) -> np.ndarray:
    """由梯度求满足 ι(v)ω₀ = dF 的向量场，ω₀ = Σ dq_k∧dp_k"""
    v = np.empty_like(grad)
    v[0::2] = grad[1::2]
    v[1::2] = -grad[0::2]
    return v


def symplectic_pairing(u: np.ndarray, v: np.ndarray) -> float:
    """ω₀(u, v)"""
    return float(np.dot(u[0::2], v[1::2]) - np.dot(u[1::2], v[0::2]))


def bracket_from_gradients(grad_f: np.ndarray, grad_g: np.ndarray) -> float:
    """{f, g} = ω₀(v_f, v_g)"""
    return symplectic_pairing(hamiltonian_vector(grad_f), hamiltonian_vector(grad_g))


def symplectic_matrix(dim: int) -> np.ndarray:
    """标准辛矩阵 Ω₀"""
    omega = np.zeros((dim, dim))
    for k in range(0, dim, 2):
        omega[k, k + 1] = 1.0
        omega[k + 1, k] = -1.0
    return omega


class FibrationModel:
    """纤维化模型基类，分量下标 i 从 1 开始"""

    kind = "abstract"
    start_section = "plus"
    target_section = "minus"

    def __init__(self, n: int):
        self.n = n

    @property
    def dim(self) -> int:
        return 2 * self.n

    def values(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, i: int, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def closed_flow(self, i: int, t: float, y: np.ndarray) -> Optional[np.ndarray]:
        """闭式流，没有时返回 None"""
        return None

    def phase_rate(self, i: int, y0: np.ndarray) -> Tuple[Callable[[np.ndarray], float], float]:
        """返回 (相位速度函数, 一整圈的相位)，用于首次回归时间"""
        raise LagfibError(ErrorCode.INVALID_PARAMS,
                          f"Flow {i} of {self.kind} is not periodic")

    def section(self, which: str, b) -> np.ndarray:
        raise NotImplementedError

    def distance(self, b) -> float:
        raise NotImplementedError

    def check_index(self, i: int):
        if not 1 <= i <= self.n:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Component index {i} outside 1..{self.n}")

    def describe(self) -> Dict:
        return {"kind": self.kind, "n": self.n}


def _rotation_rate(index: int) -> Callable[[np.ndarray], Callable]:
    """坐标 w=q_index+i·p_index 的相位速度 Im(w̄ẇ)/|w|²"""
    def make(field: Callable[[np.ndarray], np.ndarray]):
        def rate(y: np.ndarray) -> float:
            v = field(y)
            w = complex(y[2 * index], y[2 * index + 1])
            dw = complex(v[2 * index], v[2 * index + 1])
            return float((w.conjugate() * dw).imag / abs(w) ** 2)
        return rate
    return make


class HarveyLawson(FibrationModel):
    """
    Harvey–Lawson 映射 F₁ = Im∏z_i，F_k = |z₁|² − |z_k|²

    eps 给出截面 Σ± 的位置：π(Σ±) = ±eps + i·b₁。
    """

    kind = "hl"
    start_section = "plus"
    target_section = "minus"

    def __init__(self, n: int = 3, eps: float = 1.0):
        if n < 2:
            raise LagfibError(ErrorCode.INVALID_PARAMS, f"Harvey-Lawson needs n >= 2, got {n}")
        if eps <= 0:
            raise LagfibError(ErrorCode.INVALID_PARAMS, f"eps must be positive, got {eps}")
        super().__init__(n)
        self.eps = float(eps)

    @staticmethod
    def _partial_products(z: np.ndarray) -> np.ndarray:
        return np.array([np.prod(np.delete(z, j)) for j in range(z.size)])

    def values(self, y: np.ndarray) -> np.ndarray:
        z = y[0::2] + 1j * y[1::2]
        out = np.empty(self.n)
        out[0] = np.prod(z).imag
        modulus = np.abs(z) ** 2
        out[1:] = modulus[0] - modulus[1:]
        return out

    def gradient(self, i: int, y: np.ndarray) -> np.ndarray:
        self.check_index(i)
        grad = np.zeros(self.dim)
        if i == 1:
            z = y[0::2] + 1j * y[1::2]
            partial = self._partial_products(z)
            grad[0::2] = partial.imag
            grad[1::2] = partial.real
        else:
            k = i - 1
            grad[0:2] = 2.0 * y[0:2]
            grad[2 * k:2 * k + 2] = -2.0 * y[2 * k:2 * k + 2]
        return grad

    def closed_flow(self, i: int, t: float, y: np.ndarray) -> Optional[np.ndarray]:
        self.check_index(i)
        if i == 1:
            return None
        z = y[0::2] + 1j * y[1::2]
        z[0] *= np.exp(-2j * t)
        z[i - 1] *= np.exp(2j * t)
        out = np.array(y, dtype=float)
        out[0::2] = z.real
        out[1::2] = z.imag
        return out

    def phase_rate(self, i: int, y0: np.ndarray):
        self.check_index(i)
        if i == 1:
            return super().phase_rate(i, y0)
        z = y0[0::2] + 1j * y0[1::2]
        # 选模较大的转动坐标，避免相位未定义
        index = i - 1 if abs(z[i - 1]) >= abs(z[0]) else 0
        if abs(z[index]) == 0.0:
            raise LagfibError(ErrorCode.INVALID_PARAMS, "Orbit is a fixed point")
        rate = _rotation_rate(index)(lambda y: ham_vector_field(self, i, y))
        return rate, 2.0 * np.pi

    def section(self, which: str, b) -> np.ndarray:
        base = as_base(b)
        if base.n != self.n:
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Base point has {base.n} components, model has {self.n}")
        values = base.array
        b1 = values[0]
        if which in ("plus", "minus"):
            sign = 1.0 if which == "plus" else -1.0
            root = zeta_eps(base, self.eps)
            first = np.sqrt(root) * complex(sign * self.eps, b1) / np.hypot(self.eps, b1)
        elif which == "zero":
            root = zeta0(base)
            first = np.sqrt(max(root, 0.0)) * (1j * np.sign(b1) if b1 != 0 else 1.0)
        else:
            raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown HL section {which!r}")
        z = np.empty(self.n, dtype=complex)
        z[0] = first
        z[1:] = np.sqrt(np.maximum(root - values[1:], 0.0))
        return PhasePoint.from_complex(z).coords

    def distance(self, b) -> float:
        from fibration.poly_geometry import dist_to_discriminant
        return dist_to_discriminant(b)

    def describe(self) -> Dict:
        return {"kind": self.kind, "n": self.n, "eps": self.eps}


class FocusFocus22(FibrationModel):
    """
    focus-focus×S¹ 正规形 q₁ + i·q₂ = ζ̄₁ζ₂，q₃ = r，θ ∈ ℝ mod 1

    底坐标 (s₁, s₂, r)，s = s₁ + i·s₂，Δ = {s = 0}。
    """

    kind = "ff22"
    start_section = "sigma1"
    target_section = "sigma2"

    def __init__(self, eps: float = 0.5, theta0: float = 0.0):
        if eps <= 0:
            raise LagfibError(ErrorCode.INVALID_PARAMS, f"eps must be positive, got {eps}")
        super().__init__(3)
        self.eps = float(eps)
        self.theta0 = float(theta0)

    def values(self, y: np.ndarray) -> np.ndarray:
        x1, y1, x2, y2, r, _ = y
        return np.array([x1 * y1 + x2 * y2, x1 * y2 - x2 * y1, r])

    def gradient(self, i: int, y: np.ndarray) -> np.ndarray:
        self.check_index(i)
        x1, y1, x2, y2, _, _ = y
        if i == 1:
            return np.array([y1, x1, y2, x2, 0.0, 0.0])
        if i == 2:
            return np.array([y2, -x2, -y1, x1, 0.0, 0.0])
        return np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])

    def closed_flow(self, i: int, t: float, y: np.ndarray) -> Optional[np.ndarray]:
        self.check_index(i)
        out = np.array(y, dtype=float)
        if i == 1:
            out[[0, 2]] *= np.exp(t)
            out[[1, 3]] *= np.exp(-t)
        elif i == 2:
            zeta1 = complex(y[0], y[2]) * np.exp(1j * t)
            zeta2 = complex(y[1], y[3]) * np.exp(1j * t)
            out[:4] = [zeta1.real, zeta2.real, zeta1.imag, zeta2.imag]
        else:
            out[5] -= t
        return out

    def phase_rate(self, i: int, y0: np.ndarray):
        self.check_index(i)
        if i == 2:
            zeta1, zeta2 = complex(y0[0], y0[2]), complex(y0[1], y0[3])
            w = (0, 2) if abs(zeta1) >= abs(zeta2) else (1, 3)
            if max(abs(zeta1), abs(zeta2)) == 0.0:
                raise LagfibError(ErrorCode.INVALID_PARAMS, "Orbit is a fixed point")

            def rate(y: np.ndarray) -> float:
                v = ham_vector_field(self, 2, y)
                c = complex(y[w[0]], y[w[1]])
                dc = complex(v[w[0]], v[w[1]])
                return float((c.conjugate() * dc).imag / abs(c) ** 2)
            return rate, 2.0 * np.pi
        if i == 3:
            return (lambda y: float(ham_vector_field(self, 3, y)[5])), 1.0
        return super().phase_rate(i, y0)

    def section(self, which: str, b) -> np.ndarray:
        base = as_base(b)
        if base.n != 3:
            raise LagfibError(ErrorCode.INVALID_PARAMS, "FF22 base points are (s1, s2, r)")
        s = complex(base.b[0], base.b[1])
        r = base.b[2]
        eps = self.eps
        if which in ("sigma1", "minus"):
            return PhasePoint.ff22(s.conjugate() / eps, complex(eps, 0.0), r, self.theta0).coords
        if which in ("sigma2", "plus"):
            return PhasePoint.ff22(complex(eps, 0.0), s / eps, r, self.theta0).coords
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown FF22 section {which!r}")

    def distance(self, b) -> float:
        base = as_base(b)
        return float(np.hypot(base.b[0], base.b[1]))

    def describe(self) -> Dict:
        return {"kind": self.kind, "n": self.n, "eps": self.eps, "theta0": self.theta0}


def make_model(family: str, n: int = 3, eps: Optional[float] = None,
               theta0: float = 0.0) -> FibrationModel:
    """按名字构造模型"""
    family = family.lower()
    if family in ("hl", "harvey-lawson", "hl3"):
        return HarveyLawson(n, 1.0 if eps is None else eps)
    if family in ("ff22", "focus-focus"):
        return FocusFocus22(0.5 if eps is None else eps, theta0)
    raise LagfibError(ErrorCode.INVALID_PARAMS, f"Unknown family {family!r}")


def eval_F(m: FibrationModel, z) -> BaseParams:
    """纤维化取值 b = F(z)"""
    return BaseParams(tuple(m.values(_coords(z))))


def ham_vector_field(m: FibrationModel, i: int, z) -> np.ndarray:
    """F_i 的哈密顿向量场，ι(v)ω₀ = dF_i"""
    return hamiltonian_vector(m.gradient(i, _coords(z)))


def poisson_bracket(m: FibrationModel, i: int, j: int, z) -> float:
    """{F_i, F_j}(z) = ω₀(v_i, v_j)"""
    y = _coords(z)
    return bracket_from_gradients(m.gradient(i, y), m.gradient(j, y))


def _integrate(m: FibrationModel, i: int, t: float, y0: np.ndarray,
               rtol: float, atol: float, **kwargs):
    sol = solve_ivp(lambda _, y: ham_vector_field(m, i, y), (0.0, t), y0,
                    method=ODE_METHOD, rtol=rtol, atol=atol, **kwargs)
    if sol.status < 0:
        raise LagfibError(ErrorCode.INTEGRATION_FAILURE,
                          f"Flow {i} of {m.kind} failed: {sol.message}",
                          data={"t": t, "z": y0.tolist()})
    return sol


def flow(m: FibrationModel, i: int, t: float, z, method: str = "auto",
         rtol: float = ODE_RTOL, atol: float = ODE_ATOL) -> PhasePoint:
    """
    F_i 的时间 t 哈密顿流

    Args:
        m: 模型
        i: 分量下标（从1开始）
        t: 时间
        z: 起点
        method: 'closed'（闭式）、'ode'（自适应 Runge–Kutta）或 'auto'
        rtol, atol: ODE 容差

    Returns:
        终点

    Raises:
        LagfibError: 无闭式解或积分失败
    """
    y0 = _coords(z)
    if not np.isfinite(t):
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Flow time must be finite, got {t}")
    if t == 0:
        return PhasePoint(y0)
    if method in ("closed", "auto"):
        closed = m.closed_flow(i, t, y0)
        if closed is not None:
            return PhasePoint(closed)
        if method == "closed":
            raise LagfibError(ErrorCode.INVALID_PARAMS,
                              f"Flow {i} of {m.kind} has no closed form")
    sol = _integrate(m, i, t, y0, rtol, atol)
    return PhasePoint(sol.y[:, -1])


def poisson_action(m: FibrationModel, T: Sequence[float], z, reverse: bool = False,
                   method: str = "auto", rtol: float = ODE_RTOL,
                   atol: float = ODE_ATOL) -> PhasePoint:
    """
    Φ(t₁,…,t_n; z) = φ₁^{t₁}∘⋯∘φ_n^{t_n}(z)

    reverse=True 时按相反顺序复合，用于检验对合性。
    """
    times = np.asarray(T, dtype=float)
    if times.size != m.n:
        raise LagfibError(ErrorCode.INVALID_PARAMS,
                          f"Multitime needs {m.n} components, got {times.size}")
    order = range(1, m.n + 1) if reverse else range(m.n, 0, -1)
    point = PhasePoint(_coords(z))
    for i in order:
        point = flow(m, i, times[i - 1], point, method=method, rtol=rtol, atol=atol)
    return point


def trajectory(m: FibrationModel, i: int, t: float, z, samples: int = 101,
               method: str = "auto", rtol: float = ODE_RTOL,
               atol: float = ODE_ATOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    在 [0, t] 上等距采样 F_i 的流

    Args:
        m: 模型
        i: 分量下标
        t: 终止时间
        z: 起点
        samples: 采样点数（含两端）
        method: 'closed'、'ode' 或 'auto'

    Returns:
        (时间数组, 每行一个相点的坐标矩阵)
    """
    if samples < 2:
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Need at least 2 samples, got {samples}")
    y0 = _coords(z)
    times = np.linspace(0.0, t, samples)
    if t == 0:
        return times, np.tile(y0, (samples, 1))
    if method in ("closed", "auto") and m.closed_flow(i, t, y0) is not None:
        return times, np.array([m.closed_flow(i, s, y0) for s in times])
    if method == "closed":
        raise LagfibError(ErrorCode.INVALID_PARAMS, f"Flow {i} of {m.kind} has no closed form")
    sol = _integrate(m, i, t, y0, rtol, atol, t_eval=times)
    return times, sol.y.T


def first_return_time(m: FibrationModel, i: int, z, t_max: float = 100.0,
                      rtol: float = ODE_RTOL, atol: float = ODE_ATOL) -> float:
    """
    周期流的首次回归时间

    把累计相位作为附加状态一起积分，在其绝对值达到一整圈时停止。
    """
    y0 = _coords(z)
    rate, turn = m.phase_rate(i, y0)

    def rhs(_, state):
        y = state[:-1]
        return np.append(ham_vector_field(m, i, y), rate(y))

    def full_turn(_, state):
        return abs(state[-1]) - turn
    full_turn.terminal = True

    sol = solve_ivp(rhs, (0.0, t_max), np.append(y0, 0.0), method=ODE_METHOD,
                    rtol=rtol, atol=atol, events=full_turn)
    if sol.status < 0:
        raise LagfibError(ErrorCode.INTEGRATION_FAILURE, sol.message)
    if not sol.t_events[0].size:
        raise LagfibError(ErrorCode.EVENT_NOT_FOUND,
                          f"No return of flow {i} within t={t_max}")
    return float(sol.t_events[0][0])


def flow_symplectic_defect(m: FibrationModel, i: int, t: float, z, h: float = 1e-5,
                           method: str = "auto", rtol: float = 1e-12,
                           atol: float = 1e-14) -> float:
    """有限差分雅可比 J 的 ‖JᵀΩ₀J − Ω₀‖_max"""
    y0 = _coords(z)
    dim = y0.size
    jac = np.empty((dim, dim))
    for k in range(dim):
        step = np.zeros(dim)
        step[k] = h
        forward = flow(m, i, t, y0 + step, method=method, rtol=rtol, atol=atol).coords
        backward = flow(m, i, t, y0 - step, method=method, rtol=rtol, atol=atol).coords
        jac[:, k] = (forward - backward) / (2.0 * h)
    omega = symplectic_matrix(dim)
    return float(np.max(np.abs(jac.T @ omega @ jac - omega)))


def section(m: FibrationModel, which: str, b) -> PhasePoint:
    """
    纤维化的截面

    HL: which ∈ {plus, minus, zero}，Σ±(b) = (√ζ₁·e^{iθ±}, √(ζ₁−b₂), …)，
    θ± = Arg(±1 + i·b₁)；Σ⁰ 用 ζ₀ 和 Arg(i·b₁)，仅连续。
    FF22: which ∈ {sigma1, sigma2}（minus/plus 为别名），
    Σ₁ = (s̄/ε, ε, r, θ₀)，Σ₂ = (ε, s/ε, r, θ₀)。
    """
    return PhasePoint(m.section(which, b))


def project_pi(z) -> Tuple[float, BaseParams]:
    """π(z) = (∏z_i, b₂, …, b_n)，∏z_i = u + i·b₁"""
    w = PhasePoint(_coords(z)).z
    product = np.prod(w)
    modulus = np.abs(w) ** 2
    b = np.empty(w.size)
    b[0] = product.imag
    b[1:] = modulus[0] - modulus[1:]
    return float(product.real), BaseParams(tuple(b))


def hl_wirtinger_matrix(z) -> np.ndarray:
    """∂F_i/∂z̄_j 的解析 Wirtinger 矩阵"""
    w = PhasePoint(_coords(z)).z
    n = w.size
    matrix = np.zeros((n, n), dtype=complex)
    matrix[0] = 0.5j * np.conj(HarveyLawson._partial_products(w))
    for k in range(1, n):
        matrix[k, 0] = w[0]
        matrix[k, k] = -w[k]
    return matrix


def special_lagrangian_residual(z, extra: Optional[np.ndarray] = None) -> float:
    """
    |Re det(∂_{z̄_j}F_i)|，HL 纤维为特殊拉格朗日时为 0

    Args:
        z: 相点
        extra: 加到 Wirtinger 矩阵上的扰动（检测灵敏度用）
    """
    matrix = hl_wirtinger_matrix(z)
    if extra is not None:
        matrix = matrix + extra
    return float(abs(np.linalg.det(matrix).real))


def involution_A(z) -> PhasePoint:
    """A(z₁, z₂, …) = (−z̄₁, z₂, …)"""
    coords = _coords(z).copy()
    coords[0] = -coords[0]
    return PhasePoint(coords)


def critical_distance(z) -> float:
    """到 Crit(F) = ∪{z_i = z_j = 0} 的距离"""
    modulus = np.abs(PhasePoint(_coords(z)).z) ** 2
    n = modulus.size
    return float(min(np.sqrt(modulus[i] + modulus[j])
                     for i in range(n) for j in range(i + 1, n)))
