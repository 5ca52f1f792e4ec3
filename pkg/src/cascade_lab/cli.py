"""Command-line front end: sweeps, figure data tables and oracle cross-checks.

Exit codes: 0 success, 1 oracle-check residual above tolerance, 2 bad
configuration (including an unwritable output path), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import COMMANDS, SWEEP_VARS, RunConfig, SweepSpec, build_config
from .errors import (
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    InvalidParameterError,
    PreconditionError,
)
from .oracle import OracleParams, eta_pair_for_ratio, run_pme, run_swap, run_teleport
from .protocol import (
    DetectorModel,
    SwapConfig,
    TeleportInput,
    multipair_weight,
    pme_closed_form,
    swap_closed_form,
    swap_metrics,
    pme_success,
    teleport_closed_form,
    teleport_conditional_density_metrics,
    teleport_success,
    vacuum_coefficient,
)
from .schmidt import SchmidtDecomposition, entropy_bits, schmidt_from_params
from .spectral import CylinderGeometry, EnsembleParams, amplitude_values, geometric_factor
from .grids import graded_grid

THREADS_ENV = "CASCADE_LAB_THREADS"
ORACLE_ETA_R = (0.25, 0.5, 1.0)
ORACLE_ETA_T = (0.5, 0.8, 1.0)
ORACLE_LAMBDAS = (0.8, 0.2)


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)
    summaries: list = field(default_factory=list)
    failed: bool = False


# -- helpers -------------------------------------------------------------------


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def sweep_points(cfg: RunConfig):
    """Cartesian product of the sweeps, first sweep outermost."""
    if not cfg.sweep:
        return [{}]
    names = [s.var for s in cfg.sweep]
    return [dict(zip(names, combo)) for combo in itertools.product(*(s.values() for s in cfg.sweep))]


def parallel_map(fn, items):
    """Evaluate concurrently; results come back in input order."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _value(cfg, point, name):
    return point.get(name, getattr(cfg, name))


def ensemble(cfg, point=None) -> EnsembleParams:
    point = point or {}
    return EnsembleParams(
        tau=_value(cfg, point, "tau"), superradiant_factor=_value(cfg, point, "srfactor"), gamma3=cfg.gamma3
    )


def decomposition(cfg, point=None) -> SchmidtDecomposition:
    if cfg.lambdas is not None:
        return SchmidtDecomposition.from_eigenvalues(cfg.lambdas)
    return schmidt_from_params(
        ensemble(cfg, point), extent=cfg.grid_extent, core_panels=cfg.grid_panels, order=cfg.grid_order
    )


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _json_value(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def render(table: Table, cfg: RunConfig, fmt: str | None = None) -> str:
    fmt = fmt or cfg.format
    lines = []
    if fmt == "csv":
        lines.append("# config: " + cfg.resolved_json())
        lines.append(",".join(table.columns))
        lines.extend(",".join(_fmt(v) for v in row) for row in table.rows)
        lines.extend("# summary: " + json.dumps(s, sort_keys=True) for s in table.summaries)
    else:
        lines.append(json.dumps({"config": cfg.resolved()}, sort_keys=True))
        for row in table.rows:
            lines.append(json.dumps({c: _json_value(v) for c, v in zip(table.columns, row)}))
        lines.extend(json.dumps({"summary": s}, sort_keys=True) for s in table.summaries)
    return "\n".join(lines) + "\n"


# -- commands --------------------------------------------------------------------


def cmd_spectrum(cfg: RunConfig) -> Table:
    """|f| on a uniform display grid, normalized on the quadrature grid."""
    params = ensemble(cfg)
    grid = graded_grid(params.tau, params.rate, cfg.grid_extent, core_panels=cfg.grid_panels, order=cfg.grid_order)
    f = amplitude_values(params, grid.nodes, grid.nodes)
    norm = float(np.sqrt(np.sum(np.outer(grid.weights, grid.weights) * np.abs(f) ** 2)))
    axis = np.linspace(-cfg.window, cfg.window, cfg.points)
    vals = np.abs(amplitude_values(params, axis, axis)) / norm
    table = Table(["omega_s", "omega_i", "abs_f"])
    for i, ws in enumerate(axis):
        for j, wi in enumerate(axis):
            table.rows.append([float(ws), float(wi), float(vals[i, j])])
    table.summaries.append({"normalization": norm, "grid_nodes": len(grid)})
    return table


def cmd_schmidt(cfg: RunConfig) -> Table:
    points = sweep_points(cfg)
    prefix = [s.var for s in cfg.sweep]
    decomps = parallel_map(lambda p: decomposition(cfg, p), points)
    table = Table(prefix + ["n", "lambda_n"])
    for point, d in zip(points, decomps):
        lam = d.eigenvalues
        for n in range(1, min(cfg.rows, lam.size) + 1):
            table.rows.append([point[v] for v in prefix] + [n, float(lam[n - 1])])
        summary = {v: point[v] for v in prefix}
        summary.update(
            lambda1=d.lambda1,
            purity=d.purity,
            entropy_bits=entropy_bits(d),
            schmidt_number=d.schmidt_number,
            truncation_rank=int(d.truncation_rank),
        )
        table.summaries.append(summary)
    return table


def mode_table(decomp: SchmidtDecomposition, count: int) -> Table:
    table = Table(["omega", "re", "im", "n", "side"])
    count = min(count, decomp.truncation_rank)
    for side, grid, modes in (
        ("signal", decomp.signal_grid, decomp.signal_modes),
        ("idler", decomp.idler_grid, decomp.idler_modes),
    ):
        for n in range(1, count + 1):
            col = modes[:, n - 1]
            for w, v in zip(grid.nodes, col):
                table.rows.append([float(w), float(v.real), float(v.imag), n, side])
    return table


def cmd_gfactor(cfg: RunConfig) -> Table:
    points = sweep_points(cfg)

    def one(p):
        geom = CylinderGeometry(H=_value(cfg, p, "H"), A=_value(cfg, p, "A"), N=cfg.N)
        mu, info = geometric_factor(geom, return_info=True)
        return [geom.H, geom.A, geom.N, mu, geom.N * mu + 1.0, info["rel_change"]]

    return Table(["H", "A", "N", "mu", "srfactor", "rel_change"], parallel_map(one, points))


def _protocol_rows(cfg, metric_fn, columns):
    decomp = decomposition(cfg)
    points = sweep_points(cfg)

    def one(p):
        out = []
        for kind in cfg.detectors():
            det = DetectorModel(kind, eta_t=_value(cfg, p, "eta_t"), eta_eff=cfg.eta_eff)
            scfg = SwapConfig(eta_r=_value(cfg, p, "eta_r"))
            out.append(metric_fn(p, det, scfg, decomp))
        return out

    table = Table(columns)
    for rows in parallel_map(one, points):
        table.rows.extend(rows)
    table.summaries.append({"lambda1": decomp.lambda1, "purity": decomp.purity})
    return table


def cmd_swap(cfg: RunConfig) -> Table:
    def metric(p, det, scfg, decomp):
        m = swap_metrics(decomp, det, scfg)
        return [scfg.eta_r, det.eta_t, det.kind.value, m.fidelity, m.heralding, m.success]

    return _protocol_rows(cfg, metric, ["eta_r", "eta_t", "detector", "F", "P_H", "P_S"])


def cmd_pme(cfg: RunConfig) -> Table:
    def metric(p, det, scfg, decomp):
        return [
            scfg.eta_r, det.eta_t, det.kind.value,
            pme_success(decomp, det, scfg), vacuum_coefficient(det, scfg, decomp),
        ]

    return _protocol_rows(cfg, metric, ["eta_r", "eta_t", "detector", "P_S_PME", "c0"])


def cmd_teleport(cfg: RunConfig) -> Table:
    def metric(p, det, scfg, decomp):
        d0 = _value(cfg, p, "d0")
        q = TeleportInput.from_abs(d0)
        f1, p1 = teleport_conditional_density_metrics(decomp, det, scfg, q)
        return [d0, scfg.eta_r, det.eta_t, det.kind.value, teleport_success(decomp, det, scfg, q), f1, p1]

    return _protocol_rows(cfg, metric, ["d0", "eta_r", "eta_t", "detector", "P_S_QT", "F1", "P1"])


def oracle_residuals(eta_r, eta_t, detector, lambdas, eta_eff=1.0, eta2=0.01, d0=2**-0.5):
    """Rows (network, eta_r, eta_t, detector, quantity, closed_form, oracle, abs_diff)."""
    eta1, eta2 = eta_pair_for_ratio(eta_r, eta2)
    q = TeleportInput.from_abs(d0)
    params = OracleParams(eta1, eta2, tuple(lambdas), eta_t=eta_t, eta_eff=eta_eff,
                          detector=detector, d0=q.d0, d1=q.d1)
    lam = np.asarray(lambdas, dtype=float)
    o, purity = float(lam.max()), float(np.sum(lam**2))
    closed = swap_closed_form(o, purity, eta_r, eta_t, detector)
    swap = run_swap(params)
    checks = [
        ("swap", "F", closed.fidelity, swap.fidelity),
        ("swap", "P_H", closed.heralding, swap.heralding),
        ("swap", "P_S", closed.success, swap.success),
        ("swap", "a", multipair_weight(detector, eta_r, eta_t, purity), swap.vacuum_weight()),
        ("pme", "P_S_PME", pme_closed_form(o, purity, eta_r, eta_t, detector), run_pme(params).success),
        ("teleport", "P_S_QT", teleport_closed_form(closed.fidelity, o, q.d0, q.d1), run_teleport(params).success),
    ]
    return [
        [net, eta_r, eta_t, detector, name, float(c), float(v), abs(float(c) - float(v))]
        for net, name, c, v in checks
    ]


def cmd_oracle_check(cfg: RunConfig) -> Table:
    lambdas = cfg.lambdas if cfg.lambdas is not None else ORACLE_LAMBDAS
    grid = list(itertools.product(ORACLE_ETA_R, ORACLE_ETA_T, ("nrpd", "pnrd")))

    def one(p):
        return oracle_residuals(*p, lambdas, eta_eff=cfg.eta_eff, eta2=cfg.eta2, d0=cfg.d0)

    table = Table(["network", "eta_r", "eta_t", "detector", "quantity", "closed_form", "oracle", "abs_diff"])
    for rows in parallel_map(one, grid):
        table.rows.extend(rows)
    worst = max(r[-1] for r in table.rows)
    table.failed = not worst < cfg.tol
    table.summaries.append({"max_abs_diff": worst, "tol": cfg.tol, "passed": not table.failed})
    return table


HANDLERS = {
    "spectrum": cmd_spectrum,
    "schmidt": cmd_schmidt,
    "gfactor": cmd_gfactor,
    "swap": cmd_swap,
    "pme": cmd_pme,
    "teleport": cmd_teleport,
    "oracle-check": cmd_oracle_check,
}


# -- entry points ------------------------------------------------------------------


def _modes_path(cfg):
    if cfg.modes_out:
        return cfg.modes_out
    if cfg.out == "-":
        raise ConfigError("--modes with stdout output needs --modes-out")
    root, ext = os.path.splitext(cfg.out)
    return f"{root}_modes{ext or '.csv'}"


def _open_out(path):
    if path == "-":
        return None
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one configured command; returns the process exit status."""
    stdout = stdout or sys.stdout
    try:
        cfg.validate()
        modes_path = None
        if cfg.modes:
            if cfg.command != "schmidt" or cfg.sweep or cfg.lambdas is not None:
                raise ConfigError("--modes applies to a single schmidt run on a computed spectrum")
            modes_path = _modes_path(cfg)
        fh = _open_out(cfg.out)
        mh = _open_out(modes_path) if modes_path else None
        try:
            table = HANDLERS[cfg.command](cfg)
            (fh or stdout).write(render(table, cfg))
            if mh is not None:
                mh.write(render(mode_table(decomposition(cfg), cfg.modes), cfg))
        finally:
            for h in (fh, mh):
                if h is not None:
                    h.close()
    except (ConfigError, InvalidParameterError, PreconditionError) as exc:
        print(f"cascade-lab: error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ConsistencyError) as exc:
        print(f"cascade-lab: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 1 if table.failed else 0


CONFIG_KEYS_HELP = """\
config file keys (INI, sections [common] and [<command>]; flags override):
  tau, srfactor, gamma3          ensemble: pump duration, N*mu+1, Gamma_3
  grid_extent, grid_panels,      quadrature grid: half width, core panel count
  grid_order                     (default: automatic), Gauss-Legendre order
  eta_r, eta_t, eta_eff          efficiency ratio, telecom and infrared efficiency
  detector                       nrpd | pnrd | both
  d0                             |d0| of the teleported qubit
  lambdas                        pure-source override, e.g. "1" or "0.8 0.2"
  sweep                          var:start:stop:points[:lin|log], space separated
  rows, modes, modes_out         schmidt table length, mode count, mode file
  H, A, N                        cylinder geometry for gfactor
  window, points                 spectrum display grid
  tol, eta2                      oracle-check tolerance and Raman efficiency
  out, format                    output path ("-" = stdout), csv | jsonl
env: CASCADE_LAB_THREADS caps worker threads for sweeps.
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascade-lab",
        description="Cascade-emission photon pair spectra, Schmidt analysis and repeater metrics.",
        epilog=CONFIG_KEYS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    blurbs = {
        "spectrum": "|f| on a uniform display grid",
        "schmidt": "Schmidt numbers, entropy and optional mode samples",
        "gfactor": "geometric factor mu versus H, A",
        "swap": "swapping F, P_H, P_S",
        "pme": "PME projection success and vacuum weight",
        "teleport": "teleportation success versus |d0|",
        "oracle-check": "closed forms against the Fock-space oracle",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=blurbs[name], epilog=CONFIG_KEYS_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        a = p.add_argument
        a("--config", help="INI config file")
        a("--out", help="output path, '-' for stdout")
        a("--format", choices=("csv", "jsonl"))
        a("--tau", type=float)
        a("--srfactor", type=float, help="superradiant factor N*mu+1")
        a("--gamma3", type=float)
        a("--grid-extent", type=float)
        a("--grid-panels", type=int, help="core panel count per half axis")
        a("--grid-order", type=int)
        a("--eta-r", type=float)
        a("--eta-t", type=float)
        a("--eta-eff", type=float)
        a("--detector", choices=("nrpd", "pnrd", "both"))
        a("--d0", type=float)
        a("--lambdas", help="pure-source spectrum override, e.g. '1' or '0.8,0.2'")
        a("--sweep", action="append", metavar="VAR:START:STOP:POINTS[:lin|log]",
          help=f"sweepable: {', '.join(v for v in SWEEP_VARS[name]) or 'none'}")
        a("--rows", type=int)
        a("--modes", type=int, help="write the first K mode pairs")
        a("--modes-out")
        a("--H", dest="H", type=float)
        a("--A", dest="A", type=float)
        a("--N", dest="N", type=int)
        a("--window", type=float)
        a("--points", type=int)
        a("--tol", type=float)
        a("--eta2", type=float)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    if "sweep" in overrides:
        overrides["sweep"] = [SweepSpec.parse(s) for s in overrides["sweep"]]
    return build_config(args.command, args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"cascade-lab: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
