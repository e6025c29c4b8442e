"""Convergence certificates for the observer-based tracking design.

Linear agents are certified by Hurwitz tests on three polynomial families
(leader-state observer, self-state observer, tracking loop), one per
eigenvalue of H where the graph enters. Nonlinear agents additionally need
Lyapunov solutions for the observer/tracking error matrices and a small-gain
type inequality between the Lipschitz constants and those solutions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .errors import DegenerateDegree, DimensionMismatch, NotHurwitz
from .graph import graph_matrices, leader_globally_reachable
from .models import audit_leader_input, lipschitz_violations

HURWITZ_MARGIN = 1e-9
LYAPUNOV_RTOL = 1e-8


@dataclass(frozen=True)
class RealPolynomial:
    """Monic real polynomial, coefficients highest degree first."""

    coefficients: tuple[float, ...]

    def __post_init__(self) -> None:
        c = tuple(float(v) for v in self.coefficients)
        if not c or c[0] != 1.0:
            raise ValueError("polynomial must be monic (leading coefficient 1)")
        if not all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def companion(self) -> np.ndarray:
        n = self.degree
        if n < 1:
            raise DegenerateDegree("degree-0 polynomial has no roots")
        c = np.zeros((n, n))
        c[0, :] = -np.asarray(self.coefficients[1:])
        c[1:, :-1] = np.eye(n - 1)
        return c

    def roots(self) -> np.ndarray:
        return np.linalg.eigvals(self.companion())

    def __str__(self) -> str:
        terms = []
        n = self.degree
        for p, c in zip(range(n, -1, -1), self.coefficients):
            if c == 0:
                continue
            mono = "" if p == 0 else ("s" if p == 1 else f"s^{p}")
            coef = f"{c:g}" if (c != 1 or p == 0) else ""
            terms.append(f"{coef}{'*' if coef and mono else ''}{mono}")
        return " + ".join(terms).replace("+ -", "- ")


class HurwitzResult(NamedTuple):
    stable: bool
    roots: np.ndarray


def hurwitz(p: RealPolynomial, margin: float = HURWITZ_MARGIN) -> HurwitzResult:
    """All roots strictly left of -margin? Roots come from the companion matrix."""
    roots = p.roots()
    return HurwitzResult(bool(np.all(roots.real < -margin)), roots)


# --------------------------------------------------------------------------
# polynomial families


def leader_observer_polynomial(c0: Sequence[float], lam: float) -> RealPolynomial:
    """s^{l-1} + c2*lam*s^{l-2} + c2*lam*(c3 s^{l-3} + ... + c_l)."""
    c2 = c0[1]
    return RealPolynomial((1.0, c2 * lam, *(c2 * lam * c for c in c0[2:])))


def self_observer_polynomial(r: Sequence[float]) -> RealPolynomial:
    """s^{l-1} + r2*s^{l-2} + r2*(r3 s^{l-3} + ... + r_l)."""
    r2 = r[0]
    return RealPolynomial((1.0, r2, *(r2 * v for v in r[1:])))


def tracking_polynomial(k: Sequence[float], lam: float) -> RealPolynomial:
    """s^l + k_l s^{l-1} + ... + k_2 s + k_1*lam."""
    return RealPolynomial((1.0, *reversed(k[1:]), k[0] * lam))


def tracking_base_polynomial(l: int, k: Sequence[float]) -> RealPolynomial:
    """s^l + sum_z k_z s^{z-1}.

    The nonlinear tracking condition raises this to the N-th power; the power
    has the same roots, so this base factor decides Hurwitz stability.
    """
    if len(k) != l:
        raise DimensionMismatch(f"need {l} controller gains, got {len(k)}")
    return RealPolynomial((1.0, *reversed(k)))


@dataclass(frozen=True)
class LinearPolynomials:
    leader_observer: list[RealPolynomial]
    self_observer: RealPolynomial
    tracking: list[RealPolynomial]


def linear_certificate_polynomials(l: int, gains, lambdas: Iterable[float]) -> LinearPolynomials:
    lambdas = list(lambdas)
    if len(gains.k) != l or len(gains.c0) != l or len(gains.r) != l - 1:
        raise DimensionMismatch(f"gain lengths do not match order {l}")
    return LinearPolynomials(
        [leader_observer_polynomial(gains.c0, lam) for lam in lambdas],
        self_observer_polynomial(gains.r),
        [tracking_polynomial(gains.k, lam) for lam in lambdas],
    )


# --------------------------------------------------------------------------
# error-system matrices


def _cascade_coefficients(g: Sequence[float], realized: bool) -> list[float]:
    # g = (g_2, ..., g_l)
    out = [g[0]]
    for gm in g[1:]:
        out.append(gm * (out[-1] if realized else g[0]))
    return out


def _cascade_matrix(coefs: Sequence[float], first: np.ndarray, n: int) -> np.ndarray:
    """Block matrix with -coef*first in the first block column and I above the diagonal."""
    k = len(coefs)
    m = np.zeros((k * n, k * n))
    for p, c in enumerate(coefs):
        m[p * n:(p + 1) * n, :n] = -c * first
        if p + 1 < k:
            m[p * n:(p + 1) * n, (p + 1) * n:(p + 2) * n] = np.eye(n)
    return m


def _chain_matrix(k: Sequence[float], first: np.ndarray, n: int) -> np.ndarray:
    l = len(k)
    m = np.zeros((l * n, l * n))
    for p in range(l - 1):
        m[p * n:(p + 1) * n, (p + 1) * n:(p + 2) * n] = np.eye(n)
    last = slice((l - 1) * n, l * n)
    m[last, :n] = -k[0] * first
    for p in range(1, l):
        m[last, p * n:(p + 1) * n] = -k[p] * np.eye(n)
    return m


@dataclass(frozen=True)
class ErrorSystemMatrices:
    """Linear parts of the estimation and tracking error dynamics.

    Attributes:
        leader_observer: leader-state estimation errors, orders 2..l (linear agents).
        self_observer: own-state estimation errors, orders 2..l.
        tracking: tracking errors under the linear law (graph enters via H).
        leader_observer_nl: leader-state estimation errors, orders 1..l (nonlinear agents).
        tracking_nl: tracking errors under the nonlinear law (no graph coupling).
    """

    leader_observer: np.ndarray
    self_observer: np.ndarray
    tracking: np.ndarray
    leader_observer_nl: np.ndarray
    tracking_nl: np.ndarray


def build_error_matrices(l: int, gains, H: np.ndarray, realized: bool = False) -> ErrorSystemMatrices:
    """Assemble the block error matrices.

    With ``realized=False`` (default) order m of each observer block couples
    back to order 2 through c_{0,m} c_{0,2} (resp. r_m r_2), which is the
    form the certificate polynomials factor. ``realized=True`` uses the
    cumulative products c_{0,m} ... c_{0,2} that the observer recursions
    actually produce. The two agree for l = 3 and differ from l = 4 on.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionMismatch("H must be square")
    if len(gains.k) != l or len(gains.c0) != l or len(gains.r) != l - 1:
        raise DimensionMismatch(f"gain lengths do not match order {l}")
    n = H.shape[0]
    eye = np.eye(n)
    lo = _cascade_matrix(_cascade_coefficients(gains.c0[1:], realized), H, n)
    so = _cascade_matrix(_cascade_coefficients(gains.r, realized), eye, n)
    lo_nl = np.zeros((l * n, l * n))
    lo_nl[:n, :n] = -gains.c0[0] * H
    lo_nl[:n, n:2 * n] = eye
    lo_nl[n:, n:] = lo
    return ErrorSystemMatrices(
        leader_observer=lo,
        self_observer=so,
        tracking=_chain_matrix(gains.k, H, n),
        leader_observer_nl=lo_nl,
        tracking_nl=_chain_matrix(gains.k, eye, n),
    )


# --------------------------------------------------------------------------
# Lyapunov equation


def lyapunov_residual(F: np.ndarray, Q: np.ndarray, eta: float) -> float:
    return float(np.linalg.norm(F.T @ Q + Q @ F + eta * np.eye(F.shape[0]), "fro"))


def lyapunov_solve(F: np.ndarray, eta: float = 1.0) -> np.ndarray:
    """Solve F^T Q + Q F = -eta I for symmetric positive definite Q.

    Raises:
        NotHurwitz: if F has an eigenvalue with nonnegative real part, or the
            computed Q is not positive definite.
    """
    F = np.asarray(F, dtype=float)
    if eta <= 0:
        raise ValueError("eta must be positive")
    eig = np.linalg.eigvals(F)
    if np.any(eig.real >= -HURWITZ_MARGIN):
        raise NotHurwitz(f"matrix is not Hurwitz (max real part {eig.real.max():.3g})")
    rhs = -eta * np.eye(F.shape[0])
    Q = solve_continuous_lyapunov(F.T, rhs)
    Q = 0.5 * (Q + Q.T)
    # one refinement sweep on the residual
    R = F.T @ Q + Q @ F - rhs
    if np.linalg.norm(R, "fro") > 0.1 * LYAPUNOV_RTOL * np.linalg.norm(Q, "fro"):
        dQ = solve_continuous_lyapunov(F.T, -R)
        Q = Q + 0.5 * (dQ + dQ.T)
    if np.linalg.eigvalsh(Q)[0] <= 0:
        raise NotHurwitz("Lyapunov solution is not positive definite")
    return Q


# --------------------------------------------------------------------------
# Lipschitz small-gain inequalities


@dataclass(frozen=True)
class NormConditions:
    leader_observer_ok: bool | None
    self_observer_ok: bool | None
    leader_observer_sum: float
    self_observer_sum: float
    leader_observer_threshold: float | None
    self_observer_threshold: float | None
    leader_observer_norms: tuple[float, ...]
    self_observer_norms: tuple[float, ...]


def lipschitz_weight_matrices(rho: Sequence[float], n: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Block-diagonal weights built from the Lipschitz constants.

    The i-th leader-side matrix is diag(rho_1 I, ..., rho_i I, 0, ..., 0) of
    size n*l; the self-side ones are diag(rho_2 I, ..., rho_i I, 0, ...) of
    size n*(l-1), for i = 2..l.
    """
    l = len(rho)
    lead = []
    for i in range(1, l + 1):
        w = np.zeros(l)
        w[:i] = rho[:i]
        lead.append(np.kron(np.diag(w), np.eye(n)))
    own = []
    for i in range(2, l + 1):
        w = np.zeros(l - 1)
        w[:i - 1] = rho[1:i]
        own.append(np.kron(np.diag(w), np.eye(n)))
    return lead, own


def lipschitz_norm_conditions(
    rho: Sequence[float],
    n: int,
    Q1: np.ndarray | None, eta1: float,
    Q2: np.ndarray | None, eta2: float,
    Q3: np.ndarray | None, eta3: float,
) -> NormConditions:
    """Compare summed weight norms against eta / (2 ||Q||), spectral norms throughout.

    Any Q may be None when its matrix is not Hurwitz; the verdicts that need
    it are then None.
    """
    l = len(rho)
    if Q2 is not None and Q2.shape != (n * (l - 1),) * 2:
        raise DimensionMismatch(f"Q2 has shape {Q2.shape}, expected {(n * (l - 1),) * 2}")
    for name, Q in (("Q1", Q1), ("Q3", Q3)):
        if Q is not None and Q.shape != (n * l,) * 2:
            raise DimensionMismatch(f"{name} has shape {Q.shape}, expected {(n * l,) * 2}")
    lead, own = lipschitz_weight_matrices(rho, n)
    lead_norms = tuple(float(np.linalg.norm(P, 2)) for P in lead)
    own_norms = tuple(float(np.linalg.norm(P, 2)) for P in own)
    lead_sum, own_sum = sum(lead_norms), sum(own_norms)
    if Q2 is None:
        own_thr, own_ok = None, None
    else:
        own_thr = float(eta2 / (2 * np.linalg.norm(Q2, 2)))
        own_ok = bool(own_sum < own_thr)
    if Q1 is None or Q3 is None:
        lead_thr, lead_ok = None, None
    else:
        lead_thr = min(eta1 / (2 * np.linalg.norm(Q1, 2)), eta3 / (2 * np.linalg.norm(Q3, 2)))
        lead_ok = bool(lead_sum < lead_thr)
    return NormConditions(lead_ok, own_ok, lead_sum, own_sum,
                          None if lead_thr is None else float(lead_thr), own_thr,
                          lead_norms, own_norms)


# --------------------------------------------------------------------------
# reports


@dataclass
class Clause:
    name: str
    satisfied: bool | None
    witness: dict[str, Any] = field(default_factory=dict)

    @property
    def status(self) -> str:
        return {True: "PASS", False: "FAIL", None: "SKIP"}[self.satisfied]


@dataclass
class StabilityReport:
    """One record per certificate clause.

    A clause is SKIP (``satisfied is None``) when it cannot be evaluated
    because a prerequisite clause already failed, e.g. a Lyapunov equation
    for a matrix that is not Hurwitz. Only PASS everywhere counts as passed.
    """

    kind: str
    clauses: list[Clause] = field(default_factory=list)

    def add(self, name: str, satisfied: bool | None, **witness: Any) -> None:
        if any(c.name == name for c in self.clauses):
            raise ValueError(f"duplicate clause {name}")
        self.clauses.append(Clause(name, satisfied, witness))

    def __getitem__(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.satisfied is True for c in self.clauses)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.clauses if c.satisfied is False]

    @property
    def skipped(self) -> list[str]:
        return [c.name for c in self.clauses if c.satisfied is None]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "clauses": [{"name": c.name, "status": c.status, "witness": _plain(c.witness)}
                        for c in self.clauses],
        }

    def to_text(self) -> str:
        lines = [f"{self.kind} certificate: {'PASS' if self.passed else 'FAIL'}"]
        width = max(len(c.name) for c in self.clauses) if self.clauses else 0
        for c in self.clauses:
            summary = ", ".join(f"{k}={_short(v)}" for k, v in c.witness.items())
            lines.append(f"  [{c.status}] {c.name:<{width}}  {summary}")
        return "\n".join(lines)

    def to_kv(self) -> str:
        lines = [f"kind={self.kind}", f"passed={str(self.passed).lower()}"]
        for c in self.clauses:
            lines.append(f"{c.name}.status={c.status}")
            for k, v in _plain(c.witness).items():
                lines.append(f"{c.name}.{k}={_kv(v)}")
        return "\n".join(lines)


def _plain(v: Any) -> Any:
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, complex):
        return [v.real, v.imag] if v.imag else v.real
    if isinstance(v, np.generic):
        return v.item()
    return v


def _short(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    if isinstance(v, complex):
        return f"{v.real:.4g}{v.imag:+.4g}j"
    return str(v)


def _kv(v: Any) -> str:
    if isinstance(v, list):
        return ",".join(_kv(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "null"
    if isinstance(v, bool):
        return str(v).lower()
    return str(v)


def _roots_witness(roots: np.ndarray) -> list[complex]:
    return [complex(r) for r in np.sort_complex(roots)]


def _add_poly(report: StabilityReport, name: str, p: RealPolynomial, **extra: Any) -> None:
    res = hurwitz(p)
    report.add(name, res.stable, **extra, polynomial=str(p), roots=_roots_witness(res.roots),
               max_real_part=float(res.roots.real.max()))


def _add_common(report: StabilityReport, scenario) -> None:
    topo = scenario.topology
    gm = graph_matrices(topo)
    reach = leader_globally_reachable(topo)
    report.add("leader_reachable", bool(reach and gm.positive_definite),
               reachable=reach, min_h_eigenvalue=float(gm.h_eigenvalues[0]))


def _add_input_audit(report: StabilityReport, scenario) -> None:
    ok, rate = audit_leader_input(scenario.leader_input, scenario.horizon)
    report.add("input_regularity", ok, max_rate=rate, declared_bound=scenario.leader_input.derivative_bound)


def certify_linear(scenario) -> StabilityReport:
    """Hurwitz certificate for linear agents."""
    report = StabilityReport("linear")
    l = scenario.order
    gm = graph_matrices(scenario.topology)
    lams = gm.h_eigenvalues
    polys = linear_certificate_polynomials(l, scenario.gains, lams)
    _add_common(report, scenario)
    for i, (lam, p) in enumerate(zip(lams, polys.leader_observer), start=1):
        _add_poly(report, f"leader_observer_poly[{i}]", p, h_eigenvalue=float(lam))
    _add_poly(report, "self_observer_poly", polys.self_observer)
    for i, (lam, p) in enumerate(zip(lams, polys.tracking), start=1):
        _add_poly(report, f"tracking_poly[{i}]", p, h_eigenvalue=float(lam))
    _add_input_audit(report, scenario)
    return report


def _lyapunov_clause(report: StabilityReport, name: str, F: np.ndarray, eta: float,
                     eta_search: bool) -> np.ndarray | None:
    try:
        Q = lyapunov_solve(F, eta)
    except NotHurwitz as exc:
        report.add(name, None, reason=str(exc),
                   max_real_part=float(np.linalg.eigvals(F).real.max()))
        return None
    witness: dict[str, Any] = {}
    if eta_search:
        eta, Q, witness = _search_eta(F, eta, Q)
    report.add(name, True, eta=eta, q_norm=float(np.linalg.norm(Q, 2)),
               q_min_eigenvalue=float(np.linalg.eigvalsh(Q)[0]),
               residual=lyapunov_residual(F, Q, eta), ratio=float(eta / (2 * np.linalg.norm(Q, 2))),
               **witness)
    return Q


def _search_eta(F: np.ndarray, eta: float, Q: np.ndarray) -> tuple[float, np.ndarray, dict[str, Any]]:
    # eta/(2||Q||) is invariant under (Q, eta) -> (aQ, a eta); the scan only
    # picks the best-conditioned solve on a log grid and reports it.
    best = (np.linalg.cond(Q), eta, Q)
    for cand in np.logspace(-3, 3, 13):
        Qc = lyapunov_solve(F, float(cand))
        cond = np.linalg.cond(Qc)
        if cond < best[0]:
            best = (cond, float(cand), Qc)
    return best[1], best[2], {"eta_searched": True, "q_condition": float(best[0])}


def certify_nonlinear(scenario, eta: float = 1.0, eta_search: bool = False) -> StabilityReport:
    """Full certificate for nonlinear agents with declared Lipschitz constants."""
    report = StabilityReport("nonlinear")
    l = scenario.order
    n = scenario.topology.n_followers
    gains = scenario.gains
    gm = graph_matrices(scenario.topology)
    lams = gm.h_eigenvalues
    polys = linear_certificate_polynomials(l, gains, lams)
    _add_common(report, scenario)
    for i, (lam, p) in enumerate(zip(lams, polys.leader_observer), start=1):
        _add_poly(report, f"leader_observer_poly[{i}]", p, h_eigenvalue=float(lam))
    _add_poly(report, "self_observer_poly", polys.self_observer)
    _add_poly(report, "tracking_base_poly", tracking_base_polynomial(l, gains.k), power=n)

    mats = build_error_matrices(l, gains, gm.H)
    Q1 = _lyapunov_clause(report, "lyapunov_leader_observer", mats.leader_observer_nl, eta, eta_search)
    Q2 = _lyapunov_clause(report, "lyapunov_self_observer", mats.self_observer, eta, eta_search)
    Q3 = _lyapunov_clause(report, "lyapunov_tracking", mats.tracking_nl, eta, eta_search)

    rho = scenario.nonlinearity.lipschitz_constants
    e1, e2, e3 = (report[name].witness.get("eta", eta) for name in
                  ("lyapunov_leader_observer", "lyapunov_self_observer", "lyapunov_tracking"))
    nc = lipschitz_norm_conditions(rho, n, Q1, e1, Q2, e2, Q3, e3)
    if nc.leader_observer_ok is None:
        report.add("lipschitz_leader_observer", None, reason="a Lyapunov solution is unavailable",
                   norm_sum=nc.leader_observer_sum)
    else:
        report.add("lipschitz_leader_observer", nc.leader_observer_ok,
                   norm_sum=nc.leader_observer_sum, threshold=nc.leader_observer_threshold,
                   norms=list(nc.leader_observer_norms))
    if nc.self_observer_ok is None:
        report.add("lipschitz_self_observer", None, reason="a Lyapunov solution is unavailable",
                   norm_sum=nc.self_observer_sum)
    else:
        report.add("lipschitz_self_observer", nc.self_observer_ok,
                   norm_sum=nc.self_observer_sum, threshold=nc.self_observer_threshold,
                   norms=list(nc.self_observer_norms))
    _add_input_audit(report, scenario)
    bad = lipschitz_violations(scenario.nonlinearity)
    report.add("lipschitz_declared", not bad, rho=list(rho),
               violations=[[m, r] for m, r in bad])
    return report


def certify(scenario, eta: float = 1.0, eta_search: bool = False) -> StabilityReport:
    if scenario.mode == "linear":
        return certify_linear(scenario)
    return certify_nonlinear(scenario, eta=eta, eta_search=eta_search)
