"""Observer-based tracking control laws."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionMismatch
from .graph import Topology


def _tracking_terms(x_hat: np.ndarray, x0_hat: np.ndarray, k: Sequence[float]) -> np.ndarray:
    x_hat = np.asarray(x_hat, dtype=float)
    x0_hat = np.asarray(x0_hat, dtype=float)
    if x_hat.shape != x0_hat.shape or x_hat.shape[-1] != len(k) - 1:
        raise DimensionMismatch(
            f"estimate shapes {x_hat.shape}/{x0_hat.shape} do not fit {len(k)} gains")
    return (x_hat - x0_hat) @ np.asarray(k[1:], dtype=float)


def linear_control(
    topo: Topology,
    x1: np.ndarray,
    x_hat: np.ndarray,
    x0_hat: np.ndarray,
    u0_hat: np.ndarray,
    k: Sequence[float],
) -> np.ndarray:
    """Control for linear agents.

    ``x1`` holds the measured first states of all N + 1 agents, leader first.
    The first-state error is the weighted disagreement with neighbours and,
    for informed followers, with the leader.
    """
    x1 = np.asarray(x1, dtype=float)
    n = topo.n_followers
    if x1.shape[-1] != n + 1 or np.shape(u0_hat)[-1] != n:
        raise DimensionMismatch(f"expected {n + 1} first states and {n} input estimates")
    xf = x1[..., 1:]
    position = xf @ topo.laplacian.T + topo.leader_weights * (xf - x1[..., :1])
    return -k[0] * position - _tracking_terms(x_hat, x0_hat, k) + u0_hat


def nonlinear_control(
    x1: np.ndarray,
    x01_hat: np.ndarray,
    x_hat: np.ndarray,
    x0_hat: np.ndarray,
    u0_hat: np.ndarray,
    k: Sequence[float],
) -> np.ndarray:
    """Control for nonlinear agents; compares against the own leader estimate.

    ``x1`` holds the N followers' first states only.
    """
    x1 = np.asarray(x1, dtype=float)
    if x1.shape != np.shape(x01_hat) or x1.shape != np.shape(u0_hat):
        raise DimensionMismatch("first-state, leader-estimate and input-estimate lengths differ")
    return -k[0] * (x1 - x01_hat) - _tracking_terms(x_hat, x0_hat, k) + u0_hat
