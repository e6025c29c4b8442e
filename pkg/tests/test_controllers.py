from __future__ import annotations

import numpy as np
import pytest

from hotrack.controllers import linear_control, nonlinear_control
from hotrack.errors import DimensionMismatch
from hotrack.graph import build_topology, chain_topology

SINGLE = build_topology(1, [], [(1, 1.0)])


def test_linear_control_perfect_tracking_returns_leader_input():
    topo = chain_topology(4)
    x1 = np.full(5, 0.7)
    est = np.tile([1.0, -2.0], (4, 1))
    u = linear_control(topo, x1, est, est.copy(), np.full(4, 0.25), (3, 3, 3))
    assert np.allclose(u, 0.25)


def test_linear_control_single_term():
    u = linear_control(SINGLE, np.array([0.0, 1.0]), np.zeros((1, 2)), np.zeros((1, 2)), np.zeros(1), (3, 3, 3))
    assert u.tolist() == [-3.0]


def test_linear_control_zero_gains_is_feedforward():
    rng = np.random.default_rng(0)
    topo = chain_topology(3)
    u_hat = rng.normal(size=3)
    u = linear_control(topo, rng.normal(size=4), rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), u_hat, (0, 0, 0))
    assert np.array_equal(u, u_hat)


def test_linear_control_uses_neighbour_disagreement():
    topo = build_topology(2, [(1, 2, 2.0)], [(1, 1.0)])
    x1 = np.array([0.0, 1.0, 3.0])
    u = linear_control(topo, x1, np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2), (1, 0, 0))
    # follower 1: 2*(1-3) + 1*(1-0) = -3; follower 2: 2*(3-1) = 4
    assert u.tolist() == [3.0, -4.0]


def test_nonlinear_control_perfect_tracking():
    est = np.array([[0.2, 0.4]])
    u = nonlinear_control(np.array([1.0]), np.array([1.0]), est, est.copy(), np.array([-0.5]), (3, 3, 3))
    assert u.tolist() == [-0.5]


def test_nonlinear_control_direct_substitution():
    u = nonlinear_control(np.array([1.0]), np.array([0.0]), np.zeros((1, 2)), np.zeros((1, 2)), np.array([2.0]), (3, 3, 3))
    assert u.tolist() == [-1.0]


def test_nonlinear_control_k1_irrelevant_without_position_error():
    rng = np.random.default_rng(1)
    x1 = rng.normal(size=3)
    args = (x1, x1.copy(), rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), rng.normal(size=3))
    assert np.array_equal(nonlinear_control(*args, (3, 3, 3)), nonlinear_control(*args, (6, 3, 3)))


def test_control_dimension_checks():
    with pytest.raises(DimensionMismatch):
        linear_control(SINGLE, np.zeros(3), np.zeros((1, 2)), np.zeros((1, 2)), np.zeros(1), (1, 1, 1))
    with pytest.raises(DimensionMismatch):
        linear_control(SINGLE, np.zeros(2), np.zeros((1, 3)), np.zeros((1, 3)), np.zeros(1), (1, 1, 1))
    with pytest.raises(DimensionMismatch):
        nonlinear_control(np.zeros(2), np.zeros(3), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2), (1, 1, 1))
