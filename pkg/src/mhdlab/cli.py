"""Command-line surface: config parsing, subcommand dispatch, artifact emission.

Configuration is a TOML file; every artifact embeds the fully resolved
configuration so runs are reproducible from their outputs alone.  Logs
go to standard error; standard output carries only the paths of the
artifacts written.  Exit codes: 0 success, 1 configuration or
compatibility error, 2 solver failure, 3 rate-gate failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import composer, lab, prandtl, viscous
from .errors import CompatibilityError, ConfigError, SolverError
from .fields import TimeLattice, build_bl_grid, build_channel_grid
from .ideal import solve_outer
from .scenarios import DIRICHLET, Numerics, get_scenario, scenario_names

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "scenario": str,
    "epsilons": list,
    "orders": list,
    "horizon": (int, float),
    "outdir": str,
    "jobs": int,
    "slope_tol": (int, float),
    "assemble_eps": (int, float),
}
_NUM_KEYS = {
    "nx": int,
    "nz": int,
    "stretch": (int, float),
    "dt": (int, float),
    "snap_dt": (int, float),
    "z_max": (int, float),
    "nzb": int,
}

DEFAULTS = {
    "scenario": "layered-conducting",
    "epsilons": [1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4],
    "orders": [0],
    "outdir": "out",
    "jobs": 1,
    "slope_tol": lab.SLOPE_TOL,
    "assemble_eps": 1e-3,
    "numerics": {k: getattr(Numerics(), k) for k in _NUM_KEYS},
}


@dataclasses.dataclass
class RunConfig:
    scenario: str
    epsilons: list
    orders: list
    outdir: str
    jobs: int
    slope_tol: float
    assemble_eps: float
    numerics: dict
    horizon: float | None = None

    def resolved(self) -> dict:
        d = dataclasses.asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def build_scenario(self):
        sc = get_scenario(self.scenario).with_numerics(**self.numerics)
        if self.horizon is not None:
            sc = dataclasses.replace(sc, T=float(self.horizon))
        return sc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML configuration; collects every error."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from None
    errors = []
    merged = json.loads(json.dumps(DEFAULTS))  # deep copy

    for key, val in raw.items():
        if key == "numerics":
            if not isinstance(val, dict):
                errors.append("numerics: expected a table")
                continue
            for nk, nv in val.items():
                if nk not in _NUM_KEYS:
                    errors.append(f"numerics.{nk}: unknown key")
                elif not isinstance(nv, _NUM_KEYS[nk]) or isinstance(nv, bool):
                    errors.append(f"numerics.{nk}: expected {_NUM_KEYS[nk]}")
                else:
                    merged["numerics"][nk] = nv
        elif key not in _TOP_KEYS:
            errors.append(f"{key}: unknown key")
        elif not isinstance(val, _TOP_KEYS[key]) or isinstance(val, bool):
            errors.append(f"{key}: expected {_TOP_KEYS[key]}")
        else:
            merged[key] = val

    if merged["scenario"] not in scenario_names():
        errors.append(
            f"scenario: unknown name {merged['scenario']!r} (have: {', '.join(scenario_names())})"
        )
    if not all(isinstance(e, (int, float)) and e > 0 for e in merged["epsilons"]):
        errors.append("epsilons: expected positive numbers")
    if not all(o in (0, 1) for o in merged["orders"]):
        errors.append("orders: entries must be 0 or 1")
    num = merged["numerics"]
    if not (0 <= num["stretch"] < 1):
        errors.append("numerics.stretch: must lie in [0, 1)")
    if num["nx"] < 4 or num["nx"] % 2:
        errors.append("numerics.nx: must be even and >= 4")
    if num["nz"] < 33 or num["nz"] % 2 == 0:
        errors.append("numerics.nz: must be odd and >= 33")
    if merged["jobs"] < 1:
        errors.append("jobs: must be >= 1")
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return RunConfig(**merged)


def _log(msg: str):
    print(msg, file=sys.stderr)


def _emit(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(str(path))


def _emit_json(path: Path, payload: dict):
    _emit(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_text(header, rows) -> str:
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ------------------------------------------------------------ subcommands


def cmd_defaults(cfg: RunConfig, outdir: Path) -> int:
    _emit_json(outdir / "defaults.json", {**DEFAULTS, "schema_version": SCHEMA_VERSION})
    return 0


def cmd_check(cfg: RunConfig, outdir: Path) -> int:
    sc = cfg.build_scenario()
    worst = 0
    payload = {"config": cfg.resolved(), "reports": []}
    for order in cfg.orders:
        for eps in cfg.epsilons:
            rep = viscous.check_compatibility(sc, order, eps)
            payload["reports"].append(
                {
                    "order": order,
                    "eps": eps,
                    "passed": rep.passed,
                    "rows": [
                        {"name": r.name, "wall": r.wall, "residual": r.residual, "tol": r.tol,
                         "passed": r.passed}
                        for r in rep.rows
                    ],
                }
            )
            if not rep.passed:
                worst = 1
                for r in rep.failures():
                    _log(f"matching condition failed: {r.name} wall {r.wall}: {r.residual:.3e}")
    _emit_json(outdir / "compatibility.json", payload)
    return worst


def _setup(sc):
    num = sc.numerics
    grid = build_channel_grid(num.nx, num.nz, num.stretch, sc.L)
    tl = TimeLattice.build(sc.T, num.dt, num.snap_dt)
    bl = build_bl_grid(num.z_max, num.nzb)
    return grid, tl, bl


def cmd_ideal(cfg: RunConfig, outdir: Path) -> int:
    sc = cfg.build_scenario()
    grid, tl, _ = _setup(sc)
    out = solve_outer(sc, grid, tl)
    idx = out.fine_index(tl.snap_times)
    rows = []
    for w in (0, 1):
        for i, t in enumerate(tl.snap_times):
            for k in range(grid.nkr):
                tr = out.u2_tr[w, idx[i], k]
                trh = out.h2_tr[w, idx[i], k]
                dzh = out.dzh2_tr[w, idx[i], k]
                rows.append(
                    (f"{t:.6g}", w, k, f"{out.u1_tr[w, idx[i]]:.12e}", f"{tr.real:.12e}",
                     f"{tr.imag:.12e}", f"{trh.real:.12e}", f"{trh.imag:.12e}",
                     f"{dzh.real:.12e}", f"{dzh.imag:.12e}")
                )
    _emit(
        outdir / "outer_traces.csv",
        f"# config: {json.dumps(cfg.resolved(), sort_keys=True)}\n"
        + _csv_text(
            ["t", "wall", "k", "u1", "u2_re", "u2_im", "h2_re", "h2_im", "dzh2_re", "dzh2_im"],
            rows,
        ),
    )
    return 0


def cmd_correctors(cfg: RunConfig, outdir: Path) -> int:
    sc = cfg.build_scenario()
    grid, tl, bl = _setup(sc)
    outer = solve_outer(sc, grid, tl)
    eps = float(cfg.epsilons[0])
    order = max(cfg.orders)
    cs = prandtl.solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, order, eps)
    rows = []
    for wname, wc in (("lower", cs.lower), ("upper", cs.upper)):
        for comp in ("theta1", "h1", "theta2", "h2"):
            arr = getattr(wc, comp)
            vals = np.abs(arr) if arr.ndim == 3 else arr[:, None, :]
            for l in (0, 1, 2):
                sup, l2 = prandtl.weighted_decay_report(
                    vals.reshape(vals.shape[0], -1, vals.shape[-1]).max(axis=1), bl, l
                )
                for t, s_, q_ in zip(cs.times, np.atleast_1d(sup), np.atleast_1d(l2)):
                    rows.append((f"{t:.6g}", wname, comp, l, f"{s_:.12e}", f"{q_:.12e}"))
    for w in cs.warnings:
        _log(f"decay warning: {w}")
    _emit(
        outdir / "corrector_decay.csv",
        f"# config: {json.dumps(cfg.resolved(), sort_keys=True)}\n"
        + _csv_text(["t", "wall", "component", "weight_power", "sup_weighted", "l2_weighted_dz"], rows),
    )
    return 0


def cmd_assemble(cfg: RunConfig, outdir: Path, emit_remainders: bool) -> int:
    sc = cfg.build_scenario()
    grid, tl, bl = _setup(sc)
    outer = solve_outer(sc, grid, tl)
    eps = float(cfg.assemble_eps)
    order = max(cfg.orders)
    cs = prandtl.solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, order, eps)
    eta = composer.eta_corrector(outer, bl, tl) if sc.bc_mode != DIRICHLET else None
    ap = composer.assemble(order, sc.bc_mode, eps, outer, cs, eta, grid, scenario=sc)
    rep = composer.remainder_terms(ap, sc)
    rows = [(f"{t:.6g}", name, f"{v:.12e}") for t, name, v in rep.rows()]
    for eq in sorted(rep.gap):
        _log(f"equation {eq}: printed-terms vs substitution relative gap {rep.gap[eq]:.3e}")
    payload = {
        "config": cfg.resolved(),
        "eps": eps,
        "order": order,
        "gap": rep.gap,
        "flagged_discrepancies": rep.flagged,
        "warnings": ap.warnings,
    }
    _emit_json(outdir / "assembly_report.json", payload)
    if emit_remainders:
        extra = [
            (f"{t:.6g}", f"residual_{eq}", f"{v:.12e}")
            for eq, vals in sorted(rep.residual_norms.items())
            for t, v in zip(rep.times, vals)
        ]
        _emit(
            outdir / "remainders.csv",
            f"# config: {json.dumps(cfg.resolved(), sort_keys=True)}\n"
            + _csv_text(["t", "term", "L2"], rows + extra),
        )
    return 0


def _table_rows(table):
    rows = []
    for r in sorted(table.rows, key=lambda r: (-r.epsilon, r.target, r.component)):
        rows.append(
            (
                f"{r.epsilon:.6e}",
                r.target,
                r.component,
                f"{r.norm_triple.l2:.12e}",
                f"{r.norm_triple.h1:.12e}",
                f"{r.norm_triple.linf:.12e}",
                ";".join(r.warnings),
            )
        )
    return rows


def cmd_solve(cfg: RunConfig, outdir: Path) -> int:
    sc = cfg.build_scenario()
    eps = float(cfg.epsilons[0])
    order = max(cfg.orders)
    _, _, rows = lab.run_case(sc, eps, order)
    table = lab.ErrorTable(rows=rows)
    _emit(
        outdir / "error_rows.csv",
        f"# config: {json.dumps(cfg.resolved(), sort_keys=True)}\n"
        + _csv_text(["epsilon", "target", "component", "l2", "h1", "linf", "warnings"], _table_rows(table)),
    )
    return 0


def cmd_rates(cfg: RunConfig, outdir: Path) -> int:
    sc = cfg.build_scenario()
    status = 0
    all_fits = []
    for order in cfg.orders:
        rep = lab.sweep(sc, cfg.epsilons, order=order, jobs=cfg.jobs, slope_tol=cfg.slope_tol)
        _emit(
            outdir / f"error_table_order{order}.csv",
            f"# config: {json.dumps(cfg.resolved(), sort_keys=True)}\n"
            + _csv_text(
                ["epsilon", "target", "component", "l2", "h1", "linf", "warnings"],
                _table_rows(rep.table),
            ),
        )
        for f in rep.fits:
            all_fits.append(
                {
                    "order": order,
                    "target": f.target,
                    "component": f.component,
                    "norm": f.norm,
                    "slope": f.slope,
                    "intercept": f.intercept,
                    "r2": f.r2,
                    "theory": f.theory,
                    "tol": f.tol,
                    "passed": f.passed,
                    "n_points": f.n_points,
                }
            )
            if f.theory is not None:
                sel = rep.table.select(f.target, f.component)
                pts = _csv_text(
                    ["epsilon", f.norm],
                    [(f"{r.epsilon:.6e}", f"{r.value(f.norm):.12e}") for r in sel],
                )
                head = (
                    f"# fit: slope={f.slope:.6f} intercept={f.intercept:.6f} r2={f.r2:.6f} "
                    f"theory={f.theory} tol={f.tol}\n"
                )
                _emit(outdir / f"fit_order{order}_{f.target}_{f.component}_{f.norm}.dat", head + pts)
        if not rep.passed:
            status = 3
            for f in rep.gated:
                if not f.passed:
                    _log(
                        f"rate gate failed: order {order} {f.target}/{f.component}/{f.norm}: "
                        f"slope {f.slope:.3f} vs theory {f.theory} (tol {f.tol}), R2 {f.r2:.4f}"
                    )
    _emit_json(
        outdir / "rate_report.json",
        {"schema_version": SCHEMA_VERSION, "config": cfg.resolved(), "fits": all_fits},
    )
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mhdlab", description=__doc__)
    parser.add_argument("command", choices=["check", "ideal", "correctors", "assemble", "solve", "rates", "defaults"])
    parser.add_argument("-c", "--config", type=Path, default=None, help="TOML configuration file")
    parser.add_argument("--emit-remainders", action="store_true", help="assemble: write per-term norms CSV")
    parser.add_argument("--outdir", type=Path, default=None, help="override output directory")
    args = parser.parse_args(argv)

    try:
        text = args.config.read_text() if args.config else ""
        cfg = parse_config(text)
    except (OSError, ConfigError) as exc:
        _log(f"configuration error: {exc}")
        return 1

    if args.command == "rates" and len(cfg.epsilons) < 4:
        _log("configuration error: epsilons: need >= 4 diffusivities for a rate study")
        return 1

    outdir = args.outdir if args.outdir is not None else Path(cfg.outdir)
    try:
        if args.command == "defaults":
            return cmd_defaults(cfg, outdir)
        if args.command == "check":
            return cmd_check(cfg, outdir)
        if args.command == "ideal":
            return cmd_ideal(cfg, outdir)
        if args.command == "correctors":
            return cmd_correctors(cfg, outdir)
        if args.command == "assemble":
            return cmd_assemble(cfg, outdir, args.emit_remainders)
        if args.command == "solve":
            return cmd_solve(cfg, outdir)
        if args.command == "rates":
            return cmd_rates(cfg, outdir)
    except (ConfigError, CompatibilityError) as exc:
        _log(f"validation error: {exc}")
        return 1
    except SolverError as exc:
        _log(f"solver failure: {exc}")
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
