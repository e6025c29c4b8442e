"""Command-line entry point: ``hotrack simulate | certify | sweep``.

Exit codes: 0 success, 2 invalid input, 3 divergence, 4 certification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import Diverged, ParseError, ScenarioValidationError
from .scenario_io import bundled_scenario_path, load_scenario
from .sim import Scenario, error_metrics, integrate
from .stability import certify

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3
EXIT_UNCERTIFIED = 4

OUT_ENV = "HOTRACK_OUT"
DEFAULT_OUT = "hotrack_out"
ERROR_COLUMNS = ("t", "e_u", "e_0x", "e_x", "e")


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        # mkstemp creates 0600; give the usual umask-derived mode instead
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def resolve_scenario(spec: str) -> Path:
    """A file path, or the name of a bundled scenario such as ``reference_nonlinear``."""
    p = Path(spec)
    if p.exists():
        return p
    try:
        return bundled_scenario_path(spec)
    except FileNotFoundError:
        raise FileNotFoundError(f"no scenario file or bundled scenario named {spec!r}") from None


def _load(args: argparse.Namespace) -> Scenario:
    s = load_scenario(resolve_scenario(args.scenario))
    changes = {}
    if getattr(args, "dt", None) is not None:
        changes["dt"] = args.dt
    if getattr(args, "horizon", None) is not None:
        changes["horizon"] = args.horizon
    if getattr(args, "sgn_mode", None) is not None:
        changes["sgn_mode"] = args.sgn_mode
    if getattr(args, "epsilon", None) is not None:
        changes["epsilon"] = args.epsilon
    if changes:
        s = s.with_(**changes)
        problems = s.problems()
        if problems:
            raise ScenarioValidationError(problems)
    return s


# --------------------------------------------------------------------------
# simulate


def trace_table(log) -> tuple[list[str], np.ndarray]:
    """Column names and values of ``trace.csv``.

    Columns: t; agent states x_i_m (leader is i = 0); leader-state estimates
    x0hat_i_m; own-state estimates xhat_i_m; input estimates u0hat_i; observer
    internals z0_i_m and z_i_m; adaptive gains d_i; leader input u0; controls u_i.
    """
    s = log.scenario
    n, l = s.n_followers, s.order
    lay = log.layout
    labels = lay.labels()
    pick = lambda prefix: [j for j, name in enumerate(labels) if name.startswith(prefix)]  # noqa: E731
    cols = [log.t[:, None], log.states[:, pick("x_")]]
    header = ["t"] + [labels[j] for j in pick("x_")]
    orders0 = range(1 if s.nonlinear else 2, l + 1)
    x0_hat = log.x0_hat
    if s.nonlinear:
        x0_hat = np.concatenate([log.states[:, lay.slices["x01_hat"]][:, :, None], x0_hat], axis=2)
    header += [f"x0hat_{i}_{m}" for i in range(1, n + 1) for m in orders0]
    cols.append(x0_hat.reshape(len(log.t), -1))
    header += [f"xhat_{i}_{m}" for i in range(1, n + 1) for m in range(2, l + 1)]
    cols.append(log.x_hat.reshape(len(log.t), -1))
    for prefix in ("u0hat_", "z0_", "z_", "d_"):
        header += [labels[j] for j in pick(prefix)]
        cols.append(log.states[:, pick(prefix)])
    header += ["u0"] + [f"u_{i}" for i in range(1, n + 1)]
    cols += [log.u0[:, None], log.u]
    return header, np.hstack(cols)


def summary_text(scenario: Scenario, log, elapsed: float) -> str:
    m = error_metrics(log)
    lines = [
        f"mode: {scenario.mode}",
        f"order: {scenario.order}",
        f"followers: {scenario.n_followers}",
        f"dt: {scenario.dt:g}",
        f"horizon: {scenario.horizon:g}",
        f"steps: {len(log.t) - 1}",
        f"runtime_s: {elapsed:.3f}",
        "",
        "signal  final         max_over_run     " + "  ".join(f"settled_{t:g}" for t in m.settled["e"]),
    ]
    for name in ("e_u", "e_0x", "e_x", "e"):
        times = "  ".join("never" if v is None else f"{v:.3f}" for v in m.settled[name].values())
        lines.append(f"{name:<6}  {m.final[name]:.6e}  {m.sup[name].max():.6e}     {times}")
    lines += ["", f"final adaptive gains: {' '.join(f'{v:.6g}' for v in log.d[-1])}"]
    return "\n".join(lines) + "\n"


def run_simulate(path: str, out_dir: str | Path | None = None, **overrides) -> int:
    """Programmatic form of ``hotrack simulate``."""
    args = argparse.Namespace(scenario=str(path), **overrides)
    return _simulate(args, Path(out_dir) if out_dir else default_out_dir())


def _simulate(args: argparse.Namespace, out: Path) -> int:
    scenario = _load(args)
    start = time.perf_counter()
    try:
        log = integrate(scenario)
    except Diverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        write_atomic(out / "summary.txt", f"diverged at t={exc.t:.6g}: {exc}\n")
        return EXIT_DIVERGED
    elapsed = time.perf_counter() - start
    header, table = trace_table(log)
    write_atomic(out / "trace.csv", _csv_text(header, (map(repr, row) for row in table.tolist())))
    sup = log.sup_norms()
    errors = np.column_stack([log.t] + [sup[name] for name in ERROR_COLUMNS[1:]])
    write_atomic(out / "errors.csv", _csv_text(ERROR_COLUMNS, (map(repr, row) for row in errors.tolist())))
    summary = summary_text(scenario, log, elapsed)
    write_atomic(out / "summary.txt", summary)
    print(summary, end="")
    return EXIT_OK


# --------------------------------------------------------------------------
# certify


def run_certify(path: str, eta_search: bool = False, fmt: str = "text") -> int:
    args = argparse.Namespace(scenario=str(path), eta_search=eta_search, format=fmt)
    return _certify(args)


def _certify(args: argparse.Namespace) -> int:
    scenario = _load(args)
    report = certify(scenario, eta_search=args.eta_search)
    print(report.to_kv() if args.format == "kv" else report.to_text())
    return EXIT_OK if report.passed else EXIT_UNCERTIFIED


# --------------------------------------------------------------------------
# sweep


def parse_grid(specs: Sequence[str], l: int) -> dict[str, list[float]]:
    """``name=start:stop:num`` (inclusive linspace) or ``name=v1,v2,...``.

    Names: k1..kl, c0_1..c0_l, r2..rl, tau, d0 (tau and d0 apply to every
    follower).
    """
    valid = ({f"k{m}" for m in range(1, l + 1)} | {f"c0_{m}" for m in range(1, l + 1)}
             | {f"r{m}" for m in range(2, l + 1)} | {"tau", "d0"})
    grid: dict[str, list[float]] = {}
    for spec in specs:
        name, sep, values = spec.partition("=")
        name = name.strip()
        if not sep or name not in valid:
            raise ValueError(f"bad grid entry {spec!r}; names are {sorted(valid)}")
        if name in grid:
            raise ValueError(f"grid parameter {name!r} given twice")
        try:
            if ":" in values:
                a, b, num = values.split(":")
                pts = np.linspace(float(a), float(b), int(num)).tolist()
            else:
                pts = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise ValueError(f"bad values in grid entry {spec!r}") from None
        if not pts:
            raise ValueError(f"grid entry {spec!r} has no points")
        grid[name] = pts
    if not grid:
        raise ValueError("empty grid")
    return grid


def apply_point(scenario: Scenario, point: dict[str, float]) -> Scenario:
    g = scenario.gains
    k, c0, r = list(g.k), list(g.c0), list(g.r)
    tau, d0 = g.tau, g.d0
    for name, v in point.items():
        if name.startswith("c0_"):
            c0[int(name[3:]) - 1] = v
        elif name.startswith("k"):
            k[int(name[1:]) - 1] = v
        elif name == "tau":
            tau = (v,) * scenario.n_followers
        elif name == "d0":
            d0 = (v,) * scenario.n_followers
        elif name.startswith("r"):
            r[int(name[1:]) - 2] = v
    return scenario.with_(gains=g.replace(k=k, c0=c0, r=r, tau=tau, d0=d0))


def sweep_rows(scenario: Scenario, grid: dict[str, list[float]], sim_horizon: float | None = None,
               eta_search: bool = False) -> tuple[list[str], list[list]]:
    """One row per grid point: parameters, overall verdict, clause statuses, final errors."""
    names = list(grid)
    header: list[str] | None = None
    rows = []
    for values in itertools.product(*(grid[n] for n in names)):
        point = dict(zip(names, values))
        s = apply_point(scenario, point)
        problems = s.problems()
        if problems:
            raise ScenarioValidationError(problems)
        report = certify(s, eta_search=eta_search)
        clauses = [c.name for c in report.clauses]
        if header is None:
            header = names + ["certified"] + clauses
            if sim_horizon is not None:
                header += ["diverged", "final_e_u", "final_e_0x", "final_e_x", "final_e"]
        row = list(values) + [report.passed] + [report[c].status for c in clauses]
        if sim_horizon is not None:
            try:
                final = error_metrics(integrate(s.with_(horizon=sim_horizon))).final
                row += [False] + [final[k] for k in ("e_u", "e_0x", "e_x", "e")]
            except Diverged:
                row += [True] + [float("nan")] * 4
        rows.append(row)
    return header, rows


def run_sweep(path: str, grid_specs: Sequence[str], out_dir: str | Path | None = None,
              sim_horizon: float | None = None, eta_search: bool = False) -> int:
    args = argparse.Namespace(scenario=str(path), grid=list(grid_specs), sim_horizon=sim_horizon,
                              eta_search=eta_search)
    return _sweep(args, Path(out_dir) if out_dir else default_out_dir())


def _sweep(args: argparse.Namespace, out: Path) -> int:
    scenario = _load(args)
    grid = parse_grid(args.grid or [], scenario.order)
    header, rows = sweep_rows(scenario, grid, args.sim_horizon, args.eta_search)
    write_atomic(out / "sweep.csv", _csv_text(header, rows))
    print(f"{len(rows)} points written to {out / 'sweep.csv'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hotrack",
        description="Simulate and certify observer-based leader-follower tracking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_arg(p: argparse.ArgumentParser) -> None:
        p.add_argument("scenario", help="scenario YAML file or bundled scenario name")

    def overrides(p: argparse.ArgumentParser) -> None:
        p.add_argument("--dt", type=float, help="integration step (s)")
        p.add_argument("--horizon", type=float, help="simulated time T (s)")
        p.add_argument("--sgn-mode", choices=("hard", "boundary_layer"))
        p.add_argument("--epsilon", type=float, help="boundary-layer width")

    out_help = f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})"

    p = sub.add_parser("simulate", help="integrate a scenario and write CSV traces")
    scenario_arg(p)
    overrides(p)
    p.add_argument("--out", type=Path, help=out_help)

    p = sub.add_parser("certify", help="evaluate the stability conditions")
    scenario_arg(p)
    p.add_argument("--eta-search", action="store_true",
                   help="scan the Lyapunov right-hand-side scale for best conditioning")
    p.add_argument("--format", choices=("text", "kv"), default="text")

    p = sub.add_parser("sweep", help="certify every point of a gain grid")
    scenario_arg(p)
    p.add_argument("--grid", action="append", metavar="NAME=SPEC",
                   help="start:stop:num or v1,v2,...; repeat for more axes")
    p.add_argument("--sim-horizon", type=float,
                   help="also run a short simulation of this length per point")
    p.add_argument("--eta-search", action="store_true")
    p.add_argument("--out", type=Path, help=out_help)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args, args.out or default_out_dir())
        if args.command == "certify":
            return _certify(args)
        return _sweep(args, args.out or default_out_dir())
    except ScenarioValidationError as exc:
        print(exc, file=sys.stderr)
    except (ParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
