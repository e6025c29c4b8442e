"""Closed-loop simulation of leader, followers, observers and controllers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import controllers, observers
from .errors import DimensionMismatch, Diverged, EmptyLog, ScenarioValidationError, StepTooLarge
from .graph import Topology, chain_topology, leader_globally_reachable
from .models import LeaderInput, Nonlinearity, cosine_sum, linear_drift, no_nonlinearity, nonlinear_drift
from .observers import GainSet

DIVERGENCE_LIMIT = 1e6
ERROR_THRESHOLDS = (1e-1, 1e-2, 1e-3)
DEFAULT_FIRST_STATES = (1.0, -1.0, 2.0, -2.0, 3.0)


def default_initial_agents(n: int, l: int) -> tuple[tuple[float, ...], ...]:
    """Leader at rest at the origin; followers spread over 1, -1, 2, -2, 3, ...

    Only first states are nonzero. Beyond five followers the pattern repeats.
    """
    rows = [(0.0,) * l]
    for i in range(n):
        rows.append((DEFAULT_FIRST_STATES[i % 5],) + (0.0,) * (l - 1))
    return tuple(rows)


@dataclass(frozen=True)
class ObserverInit:
    """Initial observer internals.

    ``exact=True`` starts every estimate at the true value (input estimate at
    u0(0)); otherwise unspecified fields are zero and ``d`` falls back to the
    gains' ``d0``.
    """

    exact: bool = False
    u_hat: tuple[float, ...] | None = None
    d: tuple[float, ...] | None = None
    x01_hat: tuple[float, ...] | None = None
    z0: tuple[tuple[float, ...], ...] | None = None
    z: tuple[tuple[float, ...], ...] | None = None


def integration_problems(dt: float, horizon: float, sgn_mode: str, epsilon: float) -> list[str]:
    """Violations among the integration settings alone."""
    out = []
    if not (math.isfinite(dt) and dt > 0):
        out.append(f"integration.dt: must be > 0, got {dt!r}")
    if not (math.isfinite(horizon) and horizon >= dt):
        out.append(f"integration.T: must be finite and >= dt, got {horizon!r}")
    if sgn_mode not in ("hard", "boundary_layer"):
        out.append(f"integration.sgn_mode: must be 'hard' or 'boundary_layer', got {sgn_mode!r}")
    if not (math.isfinite(epsilon) and epsilon > 0):
        out.append(f"integration.epsilon: must be > 0, got {epsilon!r}")
    return out


@dataclass(frozen=True)
class Scenario:
    mode: str
    order: int
    topology: Topology
    gains: GainSet
    leader_input: LeaderInput = LeaderInput()
    nonlinearity: Nonlinearity | None = None
    initial_agents: tuple[tuple[float, ...], ...] | None = None
    initial_observers: ObserverInit = ObserverInit()
    horizon: float = 40.0
    dt: float = 1e-3
    sgn_mode: str = "hard"
    epsilon: float = 1e-2

    def __post_init__(self) -> None:
        if self.nonlinearity is None:
            object.__setattr__(self, "nonlinearity", no_nonlinearity(self.order))
        if self.initial_agents is None:
            object.__setattr__(self, "initial_agents",
                               default_initial_agents(self.topology.n_followers, self.order))

    @property
    def n_followers(self) -> int:
        return self.topology.n_followers

    @property
    def nonlinear(self) -> bool:
        return self.mode == "nonlinear"

    @property
    def boundary_layer(self) -> float | None:
        return self.epsilon if self.sgn_mode == "boundary_layer" else None

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def problems(self) -> list[str]:
        """Every consistency violation, empty when the scenario is usable."""
        out = []
        l, n = self.order, self.n_followers
        if self.mode not in ("linear", "nonlinear"):
            out.append(f"system.mode: must be 'linear' or 'nonlinear', got {self.mode!r}")
        if int(l) != l or l < 3:
            out.append(f"system.order: must be an integer >= 3, got {l!r}")
            return out
        out.extend(self.gains.problems(l, n))
        if self.nonlinearity.order != l:
            out.append(f"nonlinearity: {self.nonlinearity.order} Lipschitz constants for order {l}")
        if any(r < 0 or not math.isfinite(r) for r in self.nonlinearity.lipschitz_constants):
            out.append("nonlinearity.rho: constants must be finite and >= 0")
        if self.mode == "linear" and not self.nonlinearity.is_zero:
            out.append("nonlinearity: linear mode requires kind 'none'")
        if not self.topology.leader_links:
            out.append("topology.leader_links: the leader must inform at least one follower")
        elif not leader_globally_reachable(self.topology):
            out.append("topology: some follower has no path to the leader")
        ia = np.asarray(self.initial_agents, dtype=float)
        if ia.shape != (n + 1, l):
            out.append(f"initial_conditions.agents: expected shape {(n + 1, l)}, got {ia.shape}")
        elif not np.all(np.isfinite(ia)):
            out.append("initial_conditions.agents: values must be finite")
        ob = self.initial_observers
        for name, want in (("u_hat", (n,)), ("d", (n,)), ("x01_hat", (n,)),
                           ("z0", (n, l - 1)), ("z", (n, l - 1))):
            v = getattr(ob, name)
            if v is None:
                continue
            a = np.asarray(v, dtype=float)
            if a.shape != want:
                out.append(f"initial_conditions.observers.{name}: expected shape {want}, got {a.shape}")
            elif not np.all(np.isfinite(a)):
                out.append(f"initial_conditions.observers.{name}: values must be finite")
        if ob.d is not None and np.any(np.asarray(ob.d) < 0):
            out.append("initial_conditions.observers.d: adaptive gains must be >= 0")
        out.extend(integration_problems(self.dt, self.horizon, self.sgn_mode, self.epsilon))
        u0 = self.leader_input
        if u0.kind == "table" and (u0.table_t[0] > 0 or u0.table_t[-1] < self.horizon):
            out.append(f"leader_input.t: table covers [{u0.table_t[0]:g}, {u0.table_t[-1]:g}], "
                       f"not the horizon [0, {self.horizon:g}]")
        return out


#: Initial adaptive gain of the reference study: just above max |du0/dt| = 0.2 pi.
REFERENCE_D0 = 0.65


def reference_scenario(mode: str = "nonlinear", n: int = 5, **overrides) -> Scenario:
    """Third-order, five-follower study: c0 = 5, r = 4, k = 3, u0 = sin(0.2 pi t).

    The adaptive gains start at :data:`REFERENCE_D0` with tau = 1. With the
    generic default d(0) = 0.1 the input estimate is still converging at t = 40.
    """
    l = 3
    base = dict(
        mode=mode,
        order=l,
        topology=chain_topology(n),
        gains=GainSet.create(k=(3, 3, 3), c0=(5, 5, 5), r=(4, 4), n_followers=n, d0=REFERENCE_D0),
        leader_input=LeaderInput.sinusoid(1.0, 0.2 * math.pi),
        nonlinearity=cosine_sum(l) if mode == "nonlinear" else no_nonlinearity(l),
    )
    base.update(overrides)
    return Scenario(**base)


# --------------------------------------------------------------------------
# state packing


@dataclass
class SystemState:
    """Everything that is integrated: agents plus every follower's observers."""

    x: np.ndarray  # (N+1, l), leader in row 0
    u_hat: np.ndarray  # (N,)
    d: np.ndarray  # (N,)
    z0: np.ndarray  # (N, l-1)
    z: np.ndarray  # (N, l-1)
    x01_hat: np.ndarray | None = None  # (N,), nonlinear only


@dataclass(frozen=True)
class StateLayout:
    n: int
    l: int
    nonlinear: bool
    slices: dict[str, slice] = field(init=False, compare=False)

    def __post_init__(self) -> None:
        n, l = self.n, self.l
        sizes = [("x", (n + 1) * l), ("u_hat", n), ("d", n)]
        if self.nonlinear:
            sizes.append(("x01_hat", n))
        sizes += [("z0", n * (l - 1)), ("z", n * (l - 1))]
        out, pos = {}, 0
        for name, size in sizes:
            out[name] = slice(pos, pos + size)
            pos += size
        object.__setattr__(self, "slices", out)

    @property
    def size(self) -> int:
        return max(s.stop for s in self.slices.values())

    def pack(self, s: SystemState) -> np.ndarray:
        y = np.empty(self.size)
        y[self.slices["x"]] = np.ravel(s.x)
        y[self.slices["u_hat"]] = s.u_hat
        y[self.slices["d"]] = s.d
        if self.nonlinear:
            y[self.slices["x01_hat"]] = s.x01_hat
        y[self.slices["z0"]] = np.ravel(s.z0)
        y[self.slices["z"]] = np.ravel(s.z)
        return y

    def unpack(self, y: np.ndarray) -> SystemState:
        n, l = self.n, self.l
        if y.shape[-1] != self.size:
            raise DimensionMismatch(f"state vector has {y.shape[-1]} entries, expected {self.size}")
        sl = self.slices
        return SystemState(
            x=y[sl["x"]].reshape(n + 1, l),
            u_hat=y[sl["u_hat"]],
            d=y[sl["d"]],
            z0=y[sl["z0"]].reshape(n, l - 1),
            z=y[sl["z"]].reshape(n, l - 1),
            x01_hat=y[sl["x01_hat"]] if self.nonlinear else None,
        )

    def labels(self) -> list[str]:
        """Column names in packing order, 1-based follower/order indices."""
        n, l = self.n, self.l
        out = [f"x_{i}_{m}" for i in range(n + 1) for m in range(1, l + 1)]
        out += [f"u0hat_{i}" for i in range(1, n + 1)]
        out += [f"d_{i}" for i in range(1, n + 1)]
        if self.nonlinear:
            out += [f"x0hat_{i}_1" for i in range(1, n + 1)]
        out += [f"z0_{i}_{m}" for i in range(1, n + 1) for m in range(2, l + 1)]
        out += [f"z_{i}_{m}" for i in range(1, n + 1) for m in range(2, l + 1)]
        return out


def exact_observer_state(scenario: Scenario, x: np.ndarray, t: float = 0.0) -> SystemState:
    """Observer internals whose estimates equal the true values at time t."""
    x = np.asarray(x, dtype=float)
    g = scenario.gains
    n, l = scenario.n_followers, scenario.order
    b = scenario.topology.leader_weights
    leader = x[0]
    z0 = np.empty((n, l - 1))
    z0[:, 0] = leader[1] - b * g.c0[1] * leader[0]
    for m in range(3, l + 1):
        z0[:, m - 2] = leader[m - 1] - g.c0[m - 1] * leader[m - 2]
    z = np.empty((n, l - 1))
    z[:, 0] = x[1:, 1] - g.r[0] * x[1:, 0]
    for m in range(3, l + 1):
        z[:, m - 2] = x[1:, m - 1] - g.r[m - 2] * x[1:, m - 2]
    return SystemState(
        x=x.copy(),
        u_hat=np.full(n, scenario.leader_input(t)),
        d=np.asarray(g.d0, dtype=float).copy(),
        z0=z0,
        z=z,
        x01_hat=np.full(n, leader[0]) if scenario.nonlinear else None,
    )


def initial_state(scenario: Scenario) -> SystemState:
    n, l = scenario.n_followers, scenario.order
    x = np.asarray(scenario.initial_agents, dtype=float)
    ob = scenario.initial_observers
    if ob.exact:
        s = exact_observer_state(scenario, x)
    else:
        s = SystemState(
            x=x.copy(), u_hat=np.zeros(n), d=np.asarray(scenario.gains.d0, dtype=float).copy(),
            z0=np.zeros((n, l - 1)), z=np.zeros((n, l - 1)),
            x01_hat=np.zeros(n) if scenario.nonlinear else None,
        )
    for name in ("u_hat", "d", "x01_hat", "z0", "z"):
        v = getattr(ob, name)
        if v is not None and (name != "x01_hat" or scenario.nonlinear):
            setattr(s, name, np.array(v, dtype=float))
    return s


# --------------------------------------------------------------------------
# closed loop


@dataclass
class Outputs:
    """Quantities derived from a state snapshot (never integrated)."""

    u0: float
    u: np.ndarray  # follower controls (N,)
    x0_hat: np.ndarray  # (N, l-1), orders 2..l
    x_hat: np.ndarray  # (N, l-1), orders 2..l
    x01_hat: np.ndarray | None


class ClosedLoop:
    """Right-hand side of the coupled ODE for one scenario."""

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.layout = StateLayout(scenario.n_followers, scenario.order, scenario.nonlinear)
        self.topo = scenario.topology
        g = scenario.gains
        self.k = np.asarray(g.k)
        self.c0 = np.asarray(g.c0)
        self.r = np.asarray(g.r)
        self.tau = np.asarray(g.tau)
        self.f = scenario.nonlinearity
        self.u0 = scenario.leader_input
        self.eps = scenario.boundary_layer
        self._nonlinear = scenario.nonlinear
        self._L = np.array(self.topo.laplacian)
        self._b = np.array(self.topo.leader_weights)

    def outputs(self, t: float, s: SystemState) -> Outputs:
        x1 = s.x[:, 0]
        x0_hat = observers.leader_state_estimates(s.z0, self.topo, x1[0], self.c0)
        x_hat = observers.self_state_estimates(s.z, x1[1:], self.r)
        if self.scenario.nonlinear:
            u = controllers.nonlinear_control(x1[1:], s.x01_hat, x_hat, x0_hat, s.u_hat, self.k)
        else:
            u = controllers.linear_control(self.topo, x1, x_hat, x0_hat, s.u_hat, self.k)
        return Outputs(self.u0(t), u, x0_hat, x_hat, s.x01_hat)

    def derivative(self, t: float, s: SystemState) -> SystemState:
        out = self.outputs(t, s)
        x01 = s.x[0, 0]
        controls = np.concatenate(([out.u0], out.u))
        du, dd = observers.input_observer_derivative(s.u_hat, s.d, self.topo, out.u0, self.tau, self.eps)
        if self.scenario.nonlinear:
            dx = nonlinear_drift(s.x, controls, self.f)
            dx01, dz0 = observers.leader_state_observer_derivative_nonlinear(
                s.x01_hat, s.z0, self.topo, x01, s.u_hat, self.c0, self.f)
            dz = observers.self_state_observer_derivative_nonlinear(s.z, s.x[1:, 0], out.u, self.r, self.f)
        else:
            dx = linear_drift(s.x, controls)
            dx01 = None
            dz0 = observers.leader_state_observer_derivative_linear(s.z0, self.topo, x01, s.u_hat, self.c0)
            dz = observers.self_state_observer_derivative_linear(s.z, s.x[1:, 0], out.u, self.r)
        return SystemState(dx, du, dd, dz0, dz, dx01)

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        """Flat-vector right-hand side used by the integrator.

        Same arithmetic as :meth:`derivative`, fused to keep per-call overhead
        low; the two are checked against each other in the tests.
        """
        n, l = self.layout.n, self.layout.l
        sl = self.layout.slices
        L, b, c0, r, k = self._L, self._b, self.c0, self.r, self.k
        x = y[sl["x"]].reshape(n + 1, l)
        uh, d = y[sl["u_hat"]], y[sl["d"]]
        z0 = y[sl["z0"]].reshape(n, l - 1)
        z = y[sl["z"]].reshape(n, l - 1)
        u0 = self.u0(t)
        x01 = x[0, 0]
        xf1 = x[1:, 0]

        hat0 = z0.copy()
        hat0[:, 0] += b * (c0[1] * x01)
        hat = z.copy()
        hat[:, 0] += r[0] * xf1
        for m in range(1, l - 1):
            hat0[:, m] += c0[m + 1] * hat0[:, m - 1]
            hat[:, m] += r[m] * hat[:, m - 1]

        track = (hat - hat0) @ k[1:]
        if self._nonlinear:
            x01_hat = y[sl["x01_hat"]]
            u = -k[0] * (xf1 - x01_hat) - track + uh
        else:
            xf = x[1:, 0]
            u = -k[0] * (L @ xf + b * (xf - x01)) - track + uh

        dy = np.empty_like(y)
        dx = dy[sl["x"]].reshape(n + 1, l)
        dx[:, :-1] = x[:, 1:]
        dx[0, -1] = u0
        dx[1:, -1] = u

        s = L @ uh + b * (uh - u0)
        sg = np.sign(s) if self.eps is None else np.tanh(s / self.eps)
        dy[sl["u_hat"]] = -s - d * sg
        dy[sl["d"]] = self.tau * np.abs(s)

        dz0 = dy[sl["z0"]].reshape(n, l - 1)
        dz = dy[sl["z"]].reshape(n, l - 1)
        c2, r2 = c0[1], r[0]
        dz0[:, 0] = -b * c2 * z0[:, 0] - (b * b) * (c2 * c2 * x01) - c2 * (L @ hat0[:, 0]) + hat0[:, 1]
        dz[:, 0] = -r2 * z[:, 0] - r2 * r2 * xf1 + hat[:, 1]
        for m in range(1, l - 1):
            cm, rm = c0[m + 1], r[m]
            nxt0 = hat0[:, m + 1] if m < l - 2 else uh
            nxt = hat[:, m + 1] if m < l - 2 else u
            dz0[:, m] = -cm * z0[:, m] - cm * cm * hat0[:, m - 1] + nxt0
            dz[:, m] = -rm * z[:, m] - rm * rm * hat[:, m - 1] + nxt

        if self._nonlinear:
            f = self.f
            if not f.is_zero:
                dx += f.evaluate_chain(x)
                f0 = f.evaluate_chain(np.concatenate([x01_hat[:, None], hat0], axis=1))
                fs = f.evaluate_chain(np.concatenate([xf1[:, None], hat], axis=1))
                f1_true = float(f.evaluate(1, np.array([x01])))
                dz0[:, 0] += f0[:, 1] - b * c2 * f1_true
                dz[:, 0] += fs[:, 1] - r2 * fs[:, 0]
                dz0[:, 1:] += f0[:, 2:] - c0[2:] * f0[:, 1:-1]
                dz[:, 1:] += fs[:, 2:] - r[1:] * fs[:, 1:-1]
            else:
                f0 = None
            dx01 = -c0[0] * (L @ x01_hat + b * (x01_hat - x01)) + hat0[:, 0]
            if f0 is not None:
                dx01 += f0[:, 0]
            dy[sl["x01_hat"]] = dx01
        return dy


def closed_loop_derivative(state: SystemState, t: float, scenario: Scenario) -> SystemState:
    """Single evaluation of the coupled dynamics at (t, state)."""
    return ClosedLoop(scenario).derivative(t, state)


# --------------------------------------------------------------------------
# integration


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def n_steps(horizon: float, dt: float) -> int:
    return int(math.floor(horizon / dt + 1e-9))


def rk4(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    dt: float,
    steps: int,
    t0: float = 0.0,
    limit: float = DIVERGENCE_LIMIT,
) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step Runge-Kutta. Returns (times, states), one row per step.

    Raises:
        Diverged: on a non-finite state or sup-norm above ``limit``.
        StepTooLarge: when the sup-norm grows by more than ``limit`` in one step.
    """
    y = np.asarray(y0, dtype=float).copy()
    ys = np.empty((steps + 1, y.size))
    ts = t0 + dt * np.arange(steps + 1)
    ys[0] = y
    prev = float(np.max(np.abs(y))) if y.size else 0.0
    for i in range(steps):
        y = rk4_step(f, ts[i], y, dt)
        size = float(np.max(np.abs(y)))
        if not math.isfinite(size):
            raise Diverged(ts[i + 1], f"non-finite state at t={ts[i + 1]:.6g}")
        if prev > 1.0 and size > limit * prev:
            raise StepTooLarge(ts[i + 1], f"state norm grew by {size / prev:.3g}x in one step at t={ts[i + 1]:.6g}")
        if size > limit:
            raise Diverged(ts[i + 1], f"state sup-norm {size:.3g} exceeded {limit:g} at t={ts[i + 1]:.6g}")
        ys[i + 1] = y
        prev = size
    return ts, ys


@dataclass
class TraceLog:
    """Uniform-grid record of one run plus derived signals.

    Error signals (all shape (steps+1, N, ...)):
        e_u  = u_hat - u0
        e_0x = leader-state estimate - leader state (orders 1..l when
               nonlinear, 2..l when linear)
        e_x  = own-state estimate - own state, orders 2..l
        e    = follower state - leader state, orders 1..l
    """

    scenario: Scenario
    layout: StateLayout
    t: np.ndarray
    states: np.ndarray
    u0: np.ndarray
    u: np.ndarray
    x0_hat: np.ndarray
    x_hat: np.ndarray
    e_u: np.ndarray
    e_0x: np.ndarray
    e_x: np.ndarray
    e: np.ndarray

    @property
    def x(self) -> np.ndarray:
        n, l = self.layout.n, self.layout.l
        return self.states[:, self.layout.slices["x"]].reshape(-1, n + 1, l)

    @property
    def d(self) -> np.ndarray:
        return self.states[:, self.layout.slices["d"]]

    @property
    def u_hat(self) -> np.ndarray:
        return self.states[:, self.layout.slices["u_hat"]]

    def sup_norms(self) -> dict[str, np.ndarray]:
        return {name: _sup(getattr(self, name)) for name in ("e_u", "e_0x", "e_x", "e")}


def _sup(a: np.ndarray) -> np.ndarray:
    if a.shape[0] == 0:
        return np.zeros(0)
    return np.max(np.abs(a.reshape(a.shape[0], -1)), axis=1)


def trace_from_states(scenario: Scenario, ts: np.ndarray, ys: np.ndarray) -> TraceLog:
    """Recompute estimates, controls and error signals for every record."""
    loop = ClosedLoop(scenario)
    lay = loop.layout
    n, l = lay.n, lay.l
    steps = len(ts)
    sl = lay.slices
    x = ys[:, sl["x"]].reshape(steps, n + 1, l)
    u_hat = ys[:, sl["u_hat"]]
    z0 = ys[:, sl["z0"]].reshape(steps, n, l - 1)
    z = ys[:, sl["z"]].reshape(steps, n, l - 1)
    x01_hat = ys[:, sl["x01_hat"]] if scenario.nonlinear else None
    u0 = np.array([scenario.leader_input(t) for t in ts])
    k = loop.k
    x0_hat = observers.leader_state_estimates(z0, loop.topo, x[:, 0, 0], loop.c0)
    x_hat = observers.self_state_estimates(z, x[:, 1:, 0], loop.r)
    if scenario.nonlinear:
        u = controllers.nonlinear_control(x[:, 1:, 0], x01_hat, x_hat, x0_hat, u_hat, k)
    else:
        u = controllers.linear_control(loop.topo, x[:, :, 0], x_hat, x0_hat, u_hat, k)
    leader = x[:, :1, :]
    followers = x[:, 1:, :]
    e_u = u_hat - u0[:, None]
    if scenario.nonlinear:
        e_0x = np.concatenate([x01_hat[:, :, None], x0_hat], axis=2) - leader
    else:
        e_0x = x0_hat - leader[:, :, 1:]
    e_x = x_hat - followers[:, :, 1:]
    e = followers - leader
    return TraceLog(scenario, lay, ts, ys, u0, u, x0_hat, x_hat, e_u, e_0x, e_x, e)


def integrate(scenario: Scenario, initial: SystemState | None = None) -> TraceLog:
    """Run the scenario over [0, T] with fixed-step RK4."""
    problems = scenario.problems()
    if problems:
        raise ScenarioValidationError(problems)
    loop = ClosedLoop(scenario)
    y0 = loop.layout.pack(initial if initial is not None else initial_state(scenario))
    ts, ys = rk4(loop, y0, scenario.dt, n_steps(scenario.horizon, scenario.dt))
    return trace_from_states(scenario, ts, ys)


# --------------------------------------------------------------------------
# metrics


@dataclass
class ErrorSummary:
    t: np.ndarray
    sup: dict[str, np.ndarray]
    final: dict[str, float]
    first_crossing: dict[str, dict[float, float | None]]
    settled: dict[str, dict[float, float | None]]


def error_metrics(log: TraceLog, thresholds: Sequence[float] = ERROR_THRESHOLDS) -> ErrorSummary:
    """Sup-norm series, final values and threshold crossing times.

    ``first_crossing`` is the first grid time with norm below the threshold;
    ``settled`` is the first time after which it stays below.
    """
    if len(log.t) == 0:
        raise EmptyLog("trace has no records")
    sup = log.sup_norms()
    first, settled = {}, {}
    for name, series in sup.items():
        first[name], settled[name] = {}, {}
        for thr in thresholds:
            below = series < thr
            idx = np.flatnonzero(below)
            first[name][thr] = float(log.t[idx[0]]) if idx.size else None
            above = np.flatnonzero(~below)
            if above.size == 0:
                settled[name][thr] = float(log.t[0])
            elif above[-1] + 1 < len(series):
                settled[name][thr] = float(log.t[above[-1] + 1])
            else:
                settled[name][thr] = None
    final = {name: float(series[-1]) for name, series in sup.items()}
    return ErrorSummary(log.t, sup, final, first, settled)
