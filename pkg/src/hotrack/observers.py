"""Distributed and local observers run by each follower.

All functions are vectorised over the N followers: per-follower quantities
are arrays of length N and per-order quantities are (N, l-1) matrices whose
column ``m - 2`` holds order ``m`` (m = 2..l). Leading batch axes (e.g. time)
are allowed on every argument; scalars such as x_{0,1} then carry the batch
shape.

The observers keep internal states ``z``; the estimates ("hats") are always
recomputed from them, never integrated separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch
from .graph import Topology
from .models import Nonlinearity


@dataclass(frozen=True)
class GainSet:
    """Controller and observer gains.

    Attributes:
        k: controller gains k_1..k_l.
        c0: leader-state observer gains c_{0,1}..c_{0,l}; c_{0,1} is only
            used by the nonlinear observer.
        r: self-state observer gains r_2..r_l.
        tau: adaptation rates, one per follower.
        d0: initial adaptive gains, one per follower.
    """

    k: tuple[float, ...]
    c0: tuple[float, ...]
    r: tuple[float, ...]
    tau: tuple[float, ...]
    d0: tuple[float, ...]

    @classmethod
    def create(
        cls,
        k: Sequence[float],
        c0: Sequence[float],
        r: Sequence[float],
        n_followers: int,
        tau: float | Sequence[float] = 1.0,
        d0: float | Sequence[float] = 0.1,
    ) -> "GainSet":
        def per_agent(v):
            if np.ndim(v) == 0:
                return (float(v),) * n_followers
            return tuple(float(x) for x in v)

        g = cls(tuple(map(float, k)), tuple(map(float, c0)), tuple(map(float, r)),
                per_agent(tau), per_agent(d0))
        problems = g.problems(len(g.k), n_followers)
        if problems:
            raise DimensionMismatch("; ".join(problems))
        return g

    @property
    def order(self) -> int:
        return len(self.k)

    def problems(self, l: int, n: int) -> list[str]:
        out = []
        for name, vals, want in (("k", self.k, l), ("c0", self.c0, l), ("r", self.r, l - 1),
                                 ("tau", self.tau, n), ("d0", self.d0, n)):
            if len(vals) != want:
                out.append(f"gains.{name}: expected {want} values, got {len(vals)}")
            if not all(np.isfinite(v) and v > 0 for v in vals):
                out.append(f"gains.{name}: all values must be finite and > 0")
        return out

    def replace(self, **changes) -> "GainSet":
        from dataclasses import replace

        return replace(self, **{k: tuple(map(float, v)) for k, v in changes.items()})


def signum(x: np.ndarray, epsilon: float | None = None) -> np.ndarray:
    """sgn with sgn(0) = 0, or tanh(x / epsilon) when a boundary layer is set."""
    if epsilon is None:
        return np.sign(x)
    return np.tanh(np.asarray(x) / epsilon)


def _laplacian_apply(topo: Topology, v: np.ndarray) -> np.ndarray:
    """sum_j a_ij (v_i - v_j) for every i (last axis)."""
    return v @ topo.laplacian.T


def _col(v) -> np.ndarray:
    # per-snapshot scalar -> broadcastable against the follower axis
    return np.asarray(v, dtype=float)[..., None]


def _check_rows(n: int, **arrays: np.ndarray) -> None:
    for name, arr in arrays.items():
        if np.shape(arr)[-1] != n:
            raise DimensionMismatch(f"{name} covers {np.shape(arr)[-1]} followers, expected {n}")


def _check_orders(n: int, **arrays: np.ndarray) -> None:
    for name, arr in arrays.items():
        shape = np.shape(arr)
        if len(shape) < 2 or shape[-2] != n:
            raise DimensionMismatch(f"{name} has shape {shape}, expected (..., {n}, l-1)")


# --------------------------------------------------------------------------
# leader-input observer


def input_disagreement(u_hat: np.ndarray, topo: Topology, u0) -> np.ndarray:
    """sum_j a_ij (u_hat_i - u_hat_j) + b_i (u_hat_i - u0)."""
    return _laplacian_apply(topo, u_hat) + topo.leader_weights * (u_hat - _col(u0))


def input_observer_derivative(
    u_hat: np.ndarray,
    d: np.ndarray,
    topo: Topology,
    u0: float,
    tau: Sequence[float],
    epsilon: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive estimator of the leader input. Returns (du_hat, dd)."""
    u_hat = np.asarray(u_hat, dtype=float)
    d = np.asarray(d, dtype=float)
    _check_rows(topo.n_followers, u_hat=u_hat, d=d, tau=tau)
    s = input_disagreement(u_hat, topo, u0)
    du = -s - d * signum(s, epsilon)
    dd = np.asarray(tau) * np.abs(s)
    return du, dd


# --------------------------------------------------------------------------
# leader-state observer


def leader_state_estimates(
    z0: np.ndarray, topo: Topology, x01, c0: Sequence[float],
) -> np.ndarray:
    """Estimates of the leader's states 2..l as an (N, l-1) matrix.

    Order 2 is ``z + b_i c_{0,2} x_{0,1}``; higher orders cascade as
    ``z_m + c_{0,m} * hat_{m-1}``.
    """
    z0 = np.asarray(z0, dtype=float)
    l = z0.shape[-1] + 1
    if len(c0) != l:
        raise DimensionMismatch(f"need {l} leader observer gains, got {len(c0)}")
    _check_orders(topo.n_followers, z0=z0)
    hat = np.empty_like(z0)
    hat[..., 0] = z0[..., 0] + topo.leader_weights * c0[1] * _col(x01)
    for m in range(3, l + 1):
        hat[..., m - 2] = z0[..., m - 2] + c0[m - 1] * hat[..., m - 3]
    return hat


def leader_state_observer_derivative_linear(
    z0: np.ndarray, topo: Topology, x01: float, u_hat: np.ndarray, c0: Sequence[float],
) -> np.ndarray:
    z0 = np.asarray(z0, dtype=float)
    l = z0.shape[-1] + 1
    _check_rows(topo.n_followers, u_hat=u_hat)
    hat = leader_state_estimates(z0, topo, x01, c0)
    b = topo.leader_weights
    x01 = _col(x01)
    c2 = c0[1]
    dz = np.empty_like(z0)
    dz[..., 0] = (-b * c2 * z0[..., 0] - b**2 * c2**2 * x01
                  - c2 * _laplacian_apply(topo, hat[..., 0]) + hat[..., 1])
    for m in range(3, l + 1):
        cm = c0[m - 1]
        nxt = hat[..., m - 1] if m < l else u_hat
        dz[..., m - 2] = -cm * z0[..., m - 2] - cm**2 * hat[..., m - 3] + nxt
    return dz


def leader_state_observer_derivative_nonlinear(
    x01_hat: np.ndarray, z0: np.ndarray, topo: Topology, x01: float,
    u_hat: np.ndarray, c0: Sequence[float], f: Nonlinearity,
) -> tuple[np.ndarray, np.ndarray]:
    """Nonlinear leader-state observer, which also estimates x_{0,1}.

    The nonlinearity is evaluated on the follower's own estimate chain
    (x01_hat, hat_2, ..., hat_m). The measured x_{0,1} only enters through
    b_i-weighted terms, so uninformed followers never see it.

    Returns (d x01_hat, dz0).
    """
    x01_hat = np.asarray(x01_hat, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    l = z0.shape[-1] + 1
    _check_rows(topo.n_followers, x01_hat=x01_hat, u_hat=u_hat)
    hat = leader_state_estimates(z0, topo, x01, c0)
    chain = np.concatenate([x01_hat[..., None], hat], axis=-1)  # orders 1..l
    fm = f.evaluate_chain(chain)  # fm[..., m-1] = f_m
    b = topo.leader_weights
    x01 = _col(x01)
    f1_true = f.evaluate(1, x01)[..., None]

    c1, c2 = c0[0], c0[1]
    dx1 = (-c1 * (_laplacian_apply(topo, x01_hat) + b * (x01_hat - x01))
           + hat[..., 0] + fm[..., 0])
    dz = np.empty_like(z0)
    dz[..., 0] = (-b * c2 * z0[..., 0] - b**2 * c2**2 * x01 + hat[..., 1] + fm[..., 1]
                  - c2 * _laplacian_apply(topo, hat[..., 0]) - b * c2 * f1_true)
    for m in range(3, l + 1):
        cm = c0[m - 1]
        nxt = hat[..., m - 1] if m < l else u_hat
        dz[..., m - 2] = (-cm * z0[..., m - 2] - cm**2 * hat[..., m - 3] + nxt
                          + fm[..., m - 1] - cm * fm[..., m - 2])
    return dx1, dz


# --------------------------------------------------------------------------
# self-state observer


def self_state_estimates(z: np.ndarray, x1: np.ndarray, r: Sequence[float]) -> np.ndarray:
    """Each follower's estimates of its own states 2..l, shape (N, l-1)."""
    z = np.asarray(z, dtype=float)
    l = z.shape[-1] + 1
    if len(r) != l - 1:
        raise DimensionMismatch(f"need {l - 1} self observer gains, got {len(r)}")
    _check_orders(np.shape(x1)[-1], z=z)
    hat = np.empty_like(z)
    hat[..., 0] = z[..., 0] + r[0] * x1
    for m in range(3, l + 1):
        hat[..., m - 2] = z[..., m - 2] + r[m - 2] * hat[..., m - 3]
    return hat


def self_state_observer_derivative_linear(
    z: np.ndarray, x1: np.ndarray, u: np.ndarray, r: Sequence[float],
) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    l = z.shape[-1] + 1
    _check_rows(z.shape[-2], u=u)
    hat = self_state_estimates(z, x1, r)
    dz = np.empty_like(z)
    r2 = r[0]
    dz[..., 0] = -r2 * z[..., 0] - r2**2 * x1 + hat[..., 1]
    for m in range(3, l + 1):
        rm = r[m - 2]
        nxt = hat[..., m - 1] if m < l else u
        dz[..., m - 2] = -rm * z[..., m - 2] - rm**2 * hat[..., m - 3] + nxt
    return dz


def self_state_observer_derivative_nonlinear(
    z: np.ndarray, x1: np.ndarray, u: np.ndarray, r: Sequence[float], f: Nonlinearity,
) -> np.ndarray:
    """Self-state observer with f evaluated on (x_1 measured, hat_2, ..., hat_m)."""
    z = np.asarray(z, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    l = z.shape[-1] + 1
    _check_rows(z.shape[-2], u=u)
    hat = self_state_estimates(z, x1, r)
    fm = f.evaluate_chain(np.concatenate([x1[..., None], hat], axis=-1))
    dz = np.empty_like(z)
    r2 = r[0]
    dz[..., 0] = -r2 * z[..., 0] - r2**2 * x1 + hat[..., 1] + fm[..., 1] - r2 * fm[..., 0]
    for m in range(3, l + 1):
        rm = r[m - 2]
        nxt = hat[..., m - 1] if m < l else u
        dz[..., m - 2] = (-rm * z[..., m - 2] - rm**2 * hat[..., m - 3] + nxt
                          + fm[..., m - 1] - rm * fm[..., m - 2])
    return dz
