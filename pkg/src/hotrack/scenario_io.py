"""YAML scenario files: loading with full validation, and dumping.

A scenario file has the top-level sections ``system``, ``topology``,
``gains``, ``leader_input``, ``nonlinearity``, ``initial_conditions`` and
``integration``. Only ``system``, ``topology`` and ``gains`` are required.
Every problem found is reported at once, prefixed with its source line when
it can be located.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ParseError, ScenarioValidationError, TopologyError
from .graph import build_topology
from .models import (
    LeaderInput,
    Nonlinearity,
    audit_leader_input,
    custom_nonlinearity,
    lipschitz_for_cosine_sum,
    lipschitz_violations,
)
from .observers import GainSet
from .sim import ObserverInit, Scenario, integration_problems

SECTIONS = {
    "system": {"mode", "order", "n_followers"},
    "topology": {"edges", "leader_links"},
    "gains": {"k", "c0", "r", "tau", "d0"},
    "leader_input": {"kind", "amplitude", "angular_frequency", "phase", "coefficients",
                     "t", "u", "derivative_bound"},
    "nonlinearity": {"kind", "rho", "expressions"},
    "initial_conditions": {"agents", "observers"},
    "integration": {"dt", "T", "sgn_mode", "epsilon"},
}
REQUIRED = ("system", "topology", "gains")
OBSERVER_KEYS = {"exact", "u_hat", "d", "x01_hat", "z0", "z"}
DEFAULT_TAU = 1.0
DEFAULT_D0 = 0.1


def _line_map(node: yaml.Node, path: tuple = (), out: dict | None = None) -> dict[tuple, int]:
    """Map key paths to 1-based source lines."""
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            sub = path + (key.value,)
            out[sub] = key.start_mark.line + 1
            _line_map(value, sub, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, value in enumerate(node.value):
            _line_map(value, path + (i,), out)
    return out


class _Collector:
    """Accumulates messages, tagging each with the closest known line."""

    def __init__(self, lines: dict[tuple, int]) -> None:
        self.lines = lines
        self.problems: list[str] = []

    def add(self, path: tuple, message: str) -> None:
        p = path
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p)
        name = ".".join(str(s) for s in path)
        where = f"line {line}: " if line is not None else ""
        self.problems.append(f"{where}{name}: {message}")

    @staticmethod
    def _path(section: str | tuple, key: str) -> tuple:
        return (section if isinstance(section, tuple) else (section,)) + (key,)

    def number(self, data: dict, section: str | tuple, key: str, default=None):
        path = self._path(section, key)
        v = data.get(key, default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.add(path, f"must be a finite number, got {v!r}")
            return None
        return float(v)

    def vector(self, data: dict, section: str | tuple, key: str, default=None, allow_scalar=False):
        path = self._path(section, key)
        v = data.get(key, default)
        if v is None:
            return None
        if allow_scalar and not isinstance(v, (list, tuple)):
            v = [v]
            scalar = True
        else:
            scalar = False
        if not isinstance(v, (list, tuple)):
            self.add(path, f"must be a list of numbers, got {v!r}")
            return None
        bad = [x for x in v if isinstance(x, bool) or not isinstance(x, (int, float))
               or not math.isfinite(x)]
        if bad:
            self.add(path, f"all entries must be finite numbers, got {bad[0]!r}")
            return None
        out = tuple(float(x) for x in v)
        return (out[0] if scalar else out)

    def matrix(self, v, path: tuple):
        try:
            a = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            self.add(path, "must be a rectangular numeric matrix")
            return None
        if a.ndim != 2 or not np.all(np.isfinite(a)):
            self.add(path, "must be a rectangular matrix of finite numbers")
            return None
        return tuple(tuple(map(float, row)) for row in a)


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file.

    Raises:
        ParseError: malformed YAML or a non-mapping document.
        ScenarioValidationError: every semantic violation in the file.
    """
    return parse_scenario(Path(path).read_text())


def parse_scenario(text: str) -> Scenario:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ParseError(mark.line + 1 if mark else None, str(exc.problem or exc)) from None
    except yaml.YAMLError as exc:
        raise ParseError(None, str(exc)) from None
    if not isinstance(data, dict):
        raise ParseError(1, "scenario file must be a mapping of sections")
    col = _Collector(_line_map(node))
    scenario = _build(data, col)
    if col.problems:
        raise ScenarioValidationError(col.problems)
    return scenario


def _section(data: dict, name: str, col: _Collector) -> dict:
    sec = data.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        col.add((name,), "must be a mapping")
        return {}
    for key in sorted(set(map(str, sec)) - SECTIONS[name]):
        col.add((name, key), "unknown key")
    return sec


def _build(data: dict, col: _Collector) -> Scenario | None:
    for key in sorted(set(map(str, data)) - set(SECTIONS)):
        col.add((key,), "unknown section")
    for key in REQUIRED:
        if key not in data:
            col.add((key,), "missing required section")
    secs = {name: _section(data, name, col) for name in SECTIONS}

    system = secs["system"]
    mode = system.get("mode", "nonlinear")
    if mode not in ("linear", "nonlinear"):
        col.add(("system", "mode"), f"must be 'linear' or 'nonlinear', got {mode!r}")
        mode = "nonlinear"
    order = system.get("order")
    n = system.get("n_followers")
    for key, v in (("order", order), ("n_followers", n)):
        if isinstance(v, bool) or not isinstance(v, int):
            col.add(("system", key), f"must be an integer, got {v!r}")
    if not isinstance(order, int) or order < 3:
        if isinstance(order, int):
            col.add(("system", "order"), f"must be >= 3, got {order}")
        return None
    if not isinstance(n, int) or n < 1:
        if isinstance(n, int):
            col.add(("system", "n_followers"), f"must be >= 1, got {n}")
        return None
    l = order

    topo_sec = secs["topology"]
    topology = None
    try:
        topology = build_topology(n, topo_sec.get("edges") or (), topo_sec.get("leader_links") or ())
    except (TopologyError, TypeError, IndexError) as exc:
        col.add(("topology",), str(exc))

    g = secs["gains"]
    k = col.vector(g, "gains", "k")
    c0 = col.vector(g, "gains", "c0")
    r = col.vector(g, "gains", "r")
    tau = col.vector(g, "gains", "tau", DEFAULT_TAU, allow_scalar=True)
    d0 = col.vector(g, "gains", "d0", DEFAULT_D0, allow_scalar=True)
    for key, v in (("k", k), ("c0", c0), ("r", r)):
        if v is None and key not in g:
            col.add(("gains", key), "missing required key")
    gains = None
    if None not in (k, c0, r, tau, d0):
        per = lambda v: (v,) * n if isinstance(v, float) else v  # noqa: E731
        gains = GainSet(k, c0, r, per(tau), per(d0))

    leader_input = _leader_input(secs["leader_input"], col)
    nonlinearity = _nonlinearity(secs["nonlinearity"], l, col)

    ic = secs["initial_conditions"]
    agents = col.matrix(ic["agents"], ("initial_conditions", "agents")) if "agents" in ic else None
    observers = _observer_init(ic.get("observers", "zero"), col)

    integ = secs["integration"]
    dt = col.number(integ, "integration", "dt", 1e-3)
    horizon = col.number(integ, "integration", "T", 40.0)
    epsilon = col.number(integ, "integration", "epsilon", 1e-2)
    sgn_mode = integ.get("sgn_mode", "hard")

    if None in (topology, gains, leader_input, nonlinearity, observers, dt, horizon, epsilon):
        if None not in (dt, horizon, epsilon):
            for message in integration_problems(dt, horizon, sgn_mode, epsilon):
                name, _, rest = message.partition(": ")
                col.add(tuple(name.split(".")), rest)
        return None
    if agents is None and "agents" in ic:
        return None
    scenario = Scenario(
        mode=mode, order=l, topology=topology, gains=gains, leader_input=leader_input,
        nonlinearity=nonlinearity, initial_agents=agents, initial_observers=observers,
        horizon=horizon, dt=dt, sgn_mode=sgn_mode, epsilon=epsilon,
    )
    for message in scenario.problems():
        name, _, rest = message.partition(": ")
        col.add(tuple(name.split(".")), rest)
    if not col.problems:
        ok, rate = audit_leader_input(leader_input, horizon)
        if not ok:
            col.add(("leader_input", "derivative_bound"),
                    f"observed max |du0/dt| = {rate:.6g} exceeds the declared bound")
        for m, ratio in lipschitz_violations(nonlinearity):
            col.add(("nonlinearity", "rho"),
                    f"f_{m} has sampled Lipschitz ratio {ratio:.6g} above declared "
                    f"{nonlinearity.lipschitz_constants[m - 1]:.6g}")
    return scenario


def _leader_input(sec: dict, col: _Collector) -> LeaderInput | None:
    kind = sec.get("kind", "zero")
    num = lambda key, default=None: col.number(sec, "leader_input", key, default)  # noqa: E731
    bound = num("derivative_bound")
    if kind == "zero":
        return LeaderInput(derivative_bound=bound)
    if kind == "sinusoid":
        a, w, p = num("amplitude", 1.0), num("angular_frequency", 0.0), num("phase", 0.0)
        if None in (a, w, p):
            return None
        return LeaderInput.sinusoid(a, w, p, derivative_bound=bound)
    if kind == "polynomial":
        coeffs = col.vector(sec, "leader_input", "coefficients", ())
        return None if coeffs is None else LeaderInput("polynomial", coefficients=coeffs,
                                                       derivative_bound=bound)
    if kind == "table":
        ts = col.vector(sec, "leader_input", "t")
        us = col.vector(sec, "leader_input", "u")
        if ts is None or us is None:
            if "t" not in sec or "u" not in sec:
                col.add(("leader_input",), "table input needs both 't' and 'u'")
            return None
        try:
            return LeaderInput("table", table_t=ts, table_u=us, derivative_bound=bound)
        except ValueError as exc:
            col.add(("leader_input",), str(exc))
            return None
    col.add(("leader_input", "kind"), f"unknown kind {kind!r}")
    return None


def _nonlinearity(sec: dict, l: int, col: _Collector) -> Nonlinearity | None:
    kind = sec.get("kind", "none")
    rho = col.vector(sec, "nonlinearity", "rho")
    if rho is not None and len(rho) != l:
        col.add(("nonlinearity", "rho"), f"expected {l} values, got {len(rho)}")
        return None
    if kind == "none":
        return Nonlinearity("none", rho if rho is not None else (0.0,) * l)
    if kind == "cosine_sum":
        default = tuple(float(v) for v in lipschitz_for_cosine_sum(l))
        return Nonlinearity("cosine_sum", rho if rho is not None else default)
    if kind == "custom":
        exprs = sec.get("expressions")
        if not isinstance(exprs, list) or not all(isinstance(e, str) for e in exprs):
            col.add(("nonlinearity", "expressions"), "custom kind needs a list of expressions")
            return None
        if len(exprs) != l:
            col.add(("nonlinearity", "expressions"), f"expected {l} expressions, got {len(exprs)}")
            return None
        if rho is None:
            col.add(("nonlinearity", "rho"), "custom kind needs declared Lipschitz constants")
            return None
        try:
            return custom_nonlinearity(exprs, rho)
        except Exception as exc:  # sympy raises a variety of parse errors
            col.add(("nonlinearity", "expressions"), f"cannot parse: {exc}")
            return None
    col.add(("nonlinearity", "kind"), f"unknown kind {kind!r}")
    return None


def _observer_init(v: Any, col: _Collector) -> ObserverInit | None:
    path = ("initial_conditions", "observers")
    if v == "zero":
        return ObserverInit()
    if v == "exact":
        return ObserverInit(exact=True)
    if not isinstance(v, dict):
        col.add(path, f"must be 'zero', 'exact' or a mapping, got {v!r}")
        return None
    for key in sorted(set(map(str, v)) - OBSERVER_KEYS):
        col.add(path + (key,), "unknown key")
    fields: dict[str, Any] = {"exact": bool(v.get("exact", False))}
    for key in ("u_hat", "d", "x01_hat"):
        if key in v:
            fields[key] = col.vector(v, path, key)
    for key in ("z0", "z"):
        if key in v:
            fields[key] = col.matrix(v[key], path + (key,))
    if any(val is None for val in fields.values()):
        return None
    return ObserverInit(**fields)


# --------------------------------------------------------------------------
# dumping


def _nums(v) -> list:
    return [float(x) for x in v]


def scenario_to_dict(s: Scenario) -> dict:
    """Plain-data form of a scenario, the inverse of :func:`parse_scenario`."""
    t = s.topology
    li = s.leader_input
    leader: dict[str, Any] = {"kind": li.kind}
    if li.kind == "sinusoid":
        leader.update(amplitude=li.amplitude, angular_frequency=li.angular_frequency, phase=li.phase)
    elif li.kind == "polynomial":
        leader["coefficients"] = _nums(li.coefficients)
    elif li.kind == "table":
        leader.update(t=_nums(li.table_t), u=_nums(li.table_u))
    if li.derivative_bound is not None:
        leader["derivative_bound"] = li.derivative_bound
    f = s.nonlinearity
    nl: dict[str, Any] = {"kind": f.kind, "rho": _nums(f.lipschitz_constants)}
    if f.kind == "custom":
        nl["expressions"] = list(f.expressions)
    ob = s.initial_observers
    if ob == ObserverInit():
        observers: Any = "zero"
    elif ob == ObserverInit(exact=True):
        observers = "exact"
    else:
        observers = {"exact": ob.exact}
        for key in ("u_hat", "d", "x01_hat"):
            if getattr(ob, key) is not None:
                observers[key] = _nums(getattr(ob, key))
        for key in ("z0", "z"):
            if getattr(ob, key) is not None:
                observers[key] = [_nums(row) for row in getattr(ob, key)]
    g = s.gains
    return {
        "system": {"mode": s.mode, "order": s.order, "n_followers": s.n_followers},
        "topology": {
            "edges": [[i, j, w] for (i, j), w in sorted(t.edges.items())],
            "leader_links": [[i, w] for i, w in sorted(t.leader_links.items())],
        },
        "gains": {"k": _nums(g.k), "c0": _nums(g.c0), "r": _nums(g.r),
                  "tau": _nums(g.tau), "d0": _nums(g.d0)},
        "leader_input": leader,
        "nonlinearity": nl,
        "initial_conditions": {
            "agents": [_nums(row) for row in s.initial_agents],
            "observers": observers,
        },
        "integration": {"dt": s.dt, "T": s.horizon, "sgn_mode": s.sgn_mode, "epsilon": s.epsilon},
    }


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None)


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario file shipped with the package (without extension)."""
    path = Path(__file__).parent / "scenarios" / f"{name}.yaml"
    if not path.exists():
        raise FileNotFoundError(f"no bundled scenario named {name!r}")
    return path
