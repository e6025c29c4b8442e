"""Agent dynamics, leader inputs and nonlinearity families.

Every agent is an integrator chain of length l >= 3::

    x_m' = x_{m+1} + f_m(x_1, ..., x_m)     m = 1..l-1
    x_l' = u       + f_l(x_1, ..., x_l)

with f == 0 in the linear case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DimensionMismatch, NonFiniteInput, OutOfHorizon, ScenarioValidationError

MIN_ORDER = 3
LIPSCHITZ_SAMPLES = 10_000
LIPSCHITZ_SLACK = 1e-12


def check_order(l: int) -> int:
    if int(l) != l or l < MIN_ORDER:
        raise ValueError(f"agent order must be an integer >= {MIN_ORDER}, got {l!r}")
    return int(l)


# --------------------------------------------------------------------------
# leader input


@dataclass(frozen=True)
class LeaderInput:
    """The leader's maneuver input u0(t).

    ``kind`` is one of ``"zero"``, ``"sinusoid"``, ``"polynomial"`` or
    ``"table"``. Polynomial coefficients are highest degree first. Tables are
    interpolated with a cubic spline so that u0 stays continuously
    differentiable.
    """

    kind: str = "zero"
    amplitude: float = 1.0
    angular_frequency: float = 0.0
    phase: float = 0.0
    coefficients: tuple[float, ...] = ()
    table_t: tuple[float, ...] = ()
    table_u: tuple[float, ...] = ()
    derivative_bound: float | None = None
    _spline: CubicSpline | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "sinusoid", "polynomial", "table"):
            raise ValueError(f"unknown leader input kind {self.kind!r}")
        if self.kind == "table":
            if len(self.table_t) != len(self.table_u) or len(self.table_t) < 2:
                raise ValueError("table leader input needs >= 2 matching (t, u) samples")
            if np.any(np.diff(self.table_t) <= 0):
                raise ValueError("table times must be strictly increasing")
            object.__setattr__(self, "_spline", CubicSpline(self.table_t, self.table_u))

    @classmethod
    def sinusoid(cls, amplitude: float = 1.0, angular_frequency: float = 0.2 * math.pi,
                 phase: float = 0.0, derivative_bound: float | None = None) -> "LeaderInput":
        return cls("sinusoid", amplitude=amplitude, angular_frequency=angular_frequency,
                   phase=phase, derivative_bound=derivative_bound)

    def __call__(self, t: float) -> float:
        return leader_input_eval(self, t)

    def derivative(self, t: float) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "sinusoid":
            w = self.angular_frequency
            return self.amplitude * w * math.cos(w * t + self.phase)
        if self.kind == "polynomial":
            if len(self.coefficients) < 2:
                return 0.0
            return float(np.polyval(np.polyder(self.coefficients), t))
        self._check_horizon(t)
        return float(self._spline(t, 1))

    def _check_horizon(self, t: float) -> None:
        if not self.table_t[0] - 1e-12 <= t <= self.table_t[-1] + 1e-12:
            raise OutOfHorizon(f"t={t} outside table range [{self.table_t[0]}, {self.table_t[-1]}]")


def leader_input_eval(u0: LeaderInput, t: float) -> float:
    if u0.kind == "zero":
        return 0.0
    if u0.kind == "sinusoid":
        return u0.amplitude * math.sin(u0.angular_frequency * t + u0.phase)
    if u0.kind == "polynomial":
        return float(np.polyval(u0.coefficients, t)) if u0.coefficients else 0.0
    u0._check_horizon(t)
    return float(u0._spline(t))


def max_input_rate(u0: LeaderInput, horizon: float, samples: int = 4001) -> float:
    """Largest |du0/dt| on a uniform grid over [0, horizon]."""
    ts = np.linspace(0.0, horizon, samples)
    return max(abs(u0.derivative(t)) for t in ts)


def audit_leader_input(u0: LeaderInput, horizon: float) -> tuple[bool, float]:
    """Spot-check the declared rate bound. Returns (ok, observed max rate)."""
    rate = max_input_rate(u0, horizon)
    if not np.isfinite(rate):
        return False, rate
    if u0.derivative_bound is None:
        return True, rate
    return rate <= u0.derivative_bound + 1e-12, rate


# --------------------------------------------------------------------------
# nonlinearities

# f(m, X) with X of shape (..., m) -> shape (...)
NonlinearFn = Callable[[int, np.ndarray], np.ndarray]


def _cosine_sum(m: int, xbar: np.ndarray) -> np.ndarray:
    return np.cos(xbar[..., :m]).sum(axis=-1)


def _zero(m: int, xbar: np.ndarray) -> np.ndarray:
    return np.zeros(np.shape(xbar)[:-1])


@dataclass(frozen=True)
class Nonlinearity:
    """The family f_1..f_l together with declared Lipschitz constants rho.

    ``kind`` is ``"none"``, ``"cosine_sum"`` (f_m = sum_k cos x_k) or
    ``"custom"``. Custom families carry a callable ``fn(m, xbar)`` and, when
    loaded from a scenario file, the source expressions.
    """

    kind: str
    lipschitz_constants: tuple[float, ...]
    fn: NonlinearFn | None = field(default=None, compare=False, repr=False)
    expressions: tuple[str, ...] = ()

    @property
    def order(self) -> int:
        return len(self.lipschitz_constants)

    @property
    def is_zero(self) -> bool:
        return self.kind == "none"

    def evaluate_chain(self, chain: np.ndarray) -> np.ndarray:
        """All of f_1..f_l at once: column m-1 holds f_m(chain[..., :m])."""
        if self.kind == "cosine_sum":
            return np.cumsum(np.cos(chain), axis=-1)
        if self.kind == "none":
            return np.zeros(np.shape(chain))
        l = np.shape(chain)[-1]
        return np.stack([self.evaluate(m, chain) for m in range(1, l + 1)], axis=-1)

    def evaluate(self, m: int, xbar: np.ndarray) -> np.ndarray:
        """f_m on the first m entries of the trailing axis of ``xbar``."""
        xbar = np.asarray(xbar, dtype=float)
        if xbar.shape[-1] < m:
            raise DimensionMismatch(f"f_{m} needs {m} arguments, got {xbar.shape[-1]}")
        if self.kind == "none":
            return _zero(m, xbar)
        if self.kind == "cosine_sum":
            return _cosine_sum(m, xbar)
        return np.asarray(self.fn(m, xbar[..., :m]), dtype=float)


def no_nonlinearity(l: int) -> Nonlinearity:
    return Nonlinearity("none", (0.0,) * l)


def lipschitz_for_cosine_sum(l: int) -> np.ndarray:
    """rho_m = sqrt(m): each cosine is 1-Lipschitz, Cauchy-Schwarz does the rest."""
    if l < 1:
        raise ValueError("l must be >= 1")
    return np.sqrt(np.arange(1, l + 1, dtype=float))


def cosine_sum(l: int) -> Nonlinearity:
    return Nonlinearity("cosine_sum", tuple(lipschitz_for_cosine_sum(l)))


def custom_nonlinearity(expressions: Sequence[str], rho: Sequence[float]) -> Nonlinearity:
    """Build f_m from sympy-parsable expressions in variables x1..xm."""
    import sympy

    if len(expressions) != len(rho):
        raise DimensionMismatch("need one Lipschitz constant per expression")
    funcs = []
    for m, text in enumerate(expressions, start=1):
        syms = sympy.symbols(f"x1:{m + 1}")
        expr = sympy.sympify(text, locals={str(s): s for s in syms})
        extra = expr.free_symbols - set(syms)
        if extra:
            raise ValueError(f"f_{m} uses unknown symbols {sorted(map(str, extra))}")
        funcs.append(sympy.lambdify(syms, expr, "numpy"))

    def fn(m: int, xbar: np.ndarray) -> np.ndarray:
        cols = [xbar[..., k] for k in range(m)]
        return np.broadcast_to(funcs[m - 1](*cols), xbar.shape[:-1]).astype(float)

    return Nonlinearity("custom", tuple(float(r) for r in rho), fn, tuple(expressions))


def lipschitz_violations(
    f: Nonlinearity,
    samples: int = LIPSCHITZ_SAMPLES,
    box: float = 10.0,
    seed: int = 0,
) -> list[tuple[int, float]]:
    """Sample random pairs and return (m, worst ratio) for every broken bound.

    Finding nothing does not prove the declared constants; finding something
    does disprove them.
    """
    rng = np.random.default_rng(seed)
    bad = []
    for m in range(1, f.order + 1):
        xi = rng.uniform(-box, box, size=(samples, m))
        eps = rng.uniform(-box, box, size=(samples, m))
        num = np.abs(f.evaluate(m, xi) - f.evaluate(m, eps))
        den = np.linalg.norm(xi - eps, axis=-1)
        ratio = float(np.max(num / den))
        if ratio > f.lipschitz_constants[m - 1] + LIPSCHITZ_SLACK:
            bad.append((m, ratio))
    return bad


def audit_nonlinearity(f: Nonlinearity) -> None:
    bad = lipschitz_violations(f)
    if bad:
        raise ScenarioValidationError(
            [f"nonlinearity: f_{m} has sampled Lipschitz ratio {r:.6g} above declared "
             f"rho_{m}={f.lipschitz_constants[m - 1]:.6g}" for m, r in bad]
        )


# --------------------------------------------------------------------------
# drifts


def _check_finite(x: np.ndarray, u) -> None:
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise NonFiniteInput("non-finite state or input")


def linear_drift(x: np.ndarray, u) -> np.ndarray:
    """(x_2, ..., x_l, u). Works row-wise on stacked agents of shape (n, l)."""
    x = np.asarray(x, dtype=float)
    _check_finite(x, u)
    out = np.empty_like(x)
    out[..., :-1] = x[..., 1:]
    out[..., -1] = u
    return out


def nonlinear_drift(x: np.ndarray, u, f: Nonlinearity) -> np.ndarray:
    out = linear_drift(x, u)
    if f.is_zero:
        return out
    return out + f.evaluate_chain(np.asarray(x, dtype=float))
