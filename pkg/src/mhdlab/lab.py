"""Diffusivity sweeps: error tables, log-log rate fits, theory comparison.

For each swept diffusivity the full chain runs (outer solve, wall-layer
correctors, composite assembly, viscous solve), errors are formed in
coefficient space on the shared grid at shared snapshot times, and the
time-uniform norms are tabulated per comparison target and component.
Rates are ordinary least squares on (ln eps, ln error); each fitted
slope is compared against its theoretical exponent with a tolerance
and an R^2 quality gate.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .composer import assemble, eta_corrector
from .errors import ConfigError, SolverError
from .fields import (
    ModalField,
    NormTriple,
    Profile1D,
    TimeLattice,
    build_bl_grid,
    build_channel_grid,
    norms,
)
from .ideal import solve_outer
from .prandtl import solve_corrector_set
from .scenarios import CONDUCTING, DIRICHLET, Scenario, boundary_tables
from .viscous import resolution_warnings, solve_viscous

SLOPE_TOL = 0.12
IDEAL_SLOPE_TOL = 0.05
R2_MIN = 0.98

TARGETS = ("approx0", "approx1", "ideal", "ideal+bl")
COMPONENTS = ("u1", "h1", "u2", "h2", "all")

# theoretical exponents per (target, component, norm); components not
# listed inherit the 'all' row of their target
THEORY = {
    ("approx0", "all"): {"l2": 0.75, "h1": 0.25, "linf": 0.50},
    ("approx0", "u1"): {"l2": 1.00, "h1": 0.50, "linf": 0.75},
    ("approx0", "h1"): {"l2": 1.00, "h1": 0.50, "linf": 0.75},
    ("approx1", "all"): {"h1": 0.50, "linf": 0.75},
    ("ideal", "all"): {"l2": 0.25},
    ("ideal+bl", "all"): {"h1": 0.50},
}


@dataclass(frozen=True)
class ErrorRow:
    epsilon: float
    target: str
    component: str
    norm_triple: NormTriple
    warnings: tuple = ()

    def value(self, norm: str) -> float:
        return getattr(self.norm_triple, norm)


@dataclass
class ErrorTable:
    rows: list

    def select(self, target: str, component: str):
        got = [r for r in self.rows if r.target == target and r.component == component]
        got.sort(key=lambda r: -r.epsilon)
        return got

    def targets(self):
        return sorted({r.target for r in self.rows})


@dataclass(frozen=True)
class RateFit:
    target: str
    component: str
    norm: str
    slope: float
    intercept: float
    r2: float
    theory: float | None
    tol: float
    n_points: int

    @property
    def passed(self) -> bool:
        if self.theory is None:
            return True
        return abs(self.slope - self.theory) <= self.tol and self.r2 >= R2_MIN


@dataclass
class RateReport:
    scenario: str
    bc_mode: str
    epsilons: list
    fits: list
    table: ErrorTable
    notes: list = field(default_factory=list)

    @property
    def gated(self):
        return [f for f in self.fits if f.theory is not None]

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.gated)

    def find(self, target, component, norm) -> RateFit:
        for f in self.fits:
            if (f.target, f.component, f.norm) == (target, component, norm):
                return f
        raise KeyError((target, component, norm))


def fit_rate(eps_vals, err_vals):
    """Least squares of ln(err) on ln(eps): returns (slope, intercept, r2).

    Zero (or non-finite) error values are excluded; at least three
    usable points are required.
    """
    eps_vals = np.asarray(eps_vals, float)
    err_vals = np.asarray(err_vals, float)
    keep = np.isfinite(err_vals) & (err_vals > 0)
    if keep.sum() < 3:
        raise SolverError("need at least 3 positive error values to fit a rate")
    x = np.log(eps_vals[keep])
    y = np.log(err_vals[keep])
    n = x.size
    sx, sy = x.sum(), y.sum()
    sxx = (x * x).sum()
    sxy = (x * y).sum()
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    intercept = (sy - slope * sx) / n
    resid = y - (slope * x + intercept)
    sst = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 if sst == 0 else 1.0 - (resid**2).sum() / sst
    return float(slope), float(intercept), float(r2), int(n)


def _error_rows(vs, target, fields, grid, warnings):
    """Norm rows of (viscous - target fields) for every component split."""
    u1, h1, u2, h2 = fields
    nsnap = len(vs.times)
    comps = {
        "u1": [[Profile1D(values=vs.u1[i] - u1[i])] for i in range(nsnap)],
        "h1": [[Profile1D(values=vs.h1[i] - h1[i])] for i in range(nsnap)],
        "u2": [[ModalField(coeffs=vs.u2[i] - u2[i], nx=grid.nx)] for i in range(nsnap)],
        "h2": [[ModalField(coeffs=vs.h2[i] - h2[i], nx=grid.nx)] for i in range(nsnap)],
    }
    comps["all"] = [
        comps["u1"][i] + comps["h1"][i] + comps["u2"][i] + comps["h2"][i] for i in range(nsnap)
    ]
    rows = []
    for name, snaps in comps.items():
        rows.append(
            ErrorRow(
                epsilon=vs.eps,
                target=target,
                component=name,
                norm_triple=norms(snaps, grid),
                warnings=tuple(warnings),
            )
        )
    return rows


def run_case(
    scenario: Scenario,
    eps: float,
    order: int,
    grid=None,
    tl=None,
    blgrid=None,
    outer=None,
    targets=("approx0", "ideal", "ideal+bl"),
):
    """Solve one diffusivity and tabulate error rows for the requested targets."""
    num = scenario.numerics
    if grid is None:
        grid = build_channel_grid(num.nx, num.nz, num.stretch, scenario.L)
    if tl is None:
        tl = TimeLattice.build(scenario.T, num.dt, num.snap_dt)
    if blgrid is None:
        blgrid = build_bl_grid(num.z_max, num.nzb)
    if outer is None:
        outer = solve_outer(scenario, grid, tl)
    if order >= 1 and "approx1" not in targets:
        targets = tuple(targets) + ("approx1",)

    cs = solve_corrector_set(scenario, outer, grid, blgrid, tl, scenario.bc_mode, order, eps)
    eta = eta_corrector(outer, blgrid, tl) if scenario.bc_mode == CONDUCTING else None
    vs = solve_viscous(scenario, eps, grid=grid, tl=tl, order=order)
    warns = list(vs.warnings) + list(cs.warnings)

    approx = {}
    if "approx0" in targets:
        approx["approx0"] = assemble(0, scenario.bc_mode, eps, outer, cs, eta, grid, scenario)
    if "approx1" in targets:
        approx["approx1"] = assemble(1, scenario.bc_mode, eps, outer, cs, eta, grid, scenario)
    if "ideal+bl" in targets:
        approx["ideal+bl"] = assemble(
            0, scenario.bc_mode, eps, outer, cs, None, grid, scenario, variant="plain"
        )

    rows = []
    h1_out = np.broadcast_to(outer.h1, outer.u1.shape)
    if "ideal" in targets:
        rows += _error_rows(vs, "ideal", (outer.u1, h1_out, outer.u2, outer.h2), grid, warns)
    for name, ap in approx.items():
        rows += _error_rows(vs, name, (ap.u1, ap.h1, ap.u2, ap.h2), grid, warns + ap.warnings)
    return vs, approx, rows


def _case_job(args):
    # workers rebuild library scenarios by name: closures do not pickle
    import dataclasses

    from .scenarios import get_scenario

    name, numerics, T, eps, order, targets = args
    scenario = dataclasses.replace(get_scenario(name), numerics=numerics, T=T)
    _, _, rows = run_case(scenario, eps, order, targets=targets)
    return rows


def sweep(
    scenario: Scenario,
    epsilons,
    order: int = 0,
    targets=("approx0", "ideal", "ideal+bl"),
    jobs: int = 1,
    slope_tol: float = SLOPE_TOL,
) -> RateReport:
    """Run the diffusivity sweep and fit every tracked rate.

    Requires at least four diffusivities spanning one and a half decades.
    Cases are independent; with jobs > 1 they run in separate processes
    and are merged in descending-eps order, so results are identical to
    the sequential run.
    """
    epsilons = sorted({float(e) for e in epsilons}, reverse=True)
    if len(epsilons) < 4:
        raise ConfigError("need at least 4 diffusivities for a rate study")
    if np.log10(epsilons[0] / epsilons[-1]) < 1.5:
        raise ConfigError("diffusivity sweep must span at least 1.5 decades")
    if order >= 1:
        targets = tuple(dict.fromkeys(tuple(targets) + ("approx1",)))

    rows = []
    from .scenarios import scenario_names

    if jobs > 1 and scenario.name in scenario_names():
        args = [(scenario.name, scenario.numerics, scenario.T, e, order, targets) for e in epsilons]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for got in ex.map(_case_job, args):
                rows += got
    else:
        num = scenario.numerics
        grid = build_channel_grid(num.nx, num.nz, num.stretch, scenario.L)
        tl = TimeLattice.build(scenario.T, num.dt, num.snap_dt)
        blgrid = build_bl_grid(num.z_max, num.nzb)
        outer = solve_outer(scenario, grid, tl)
        for e in epsilons:
            _, _, got = run_case(
                scenario, e, order, grid=grid, tl=tl, blgrid=blgrid, outer=outer, targets=targets
            )
            rows += got

    table = ErrorTable(rows=rows)
    fits = []
    notes = []
    for target in table.targets():
        for comp in COMPONENTS:
            sel = table.select(target, comp)
            if not sel:
                continue
            theory_row = THEORY.get((target, comp), {})
            for norm in ("l2", "h1", "linf"):
                vals = [r.value(norm) for r in sel]
                try:
                    slope, intercept, r2, n = fit_rate([r.epsilon for r in sel], vals)
                except SolverError as exc:
                    notes.append(f"{target}/{comp}/{norm}: {exc}")
                    continue
                theory = theory_row.get(norm)
                tol = IDEAL_SLOPE_TOL if target == "ideal" else slope_tol
                fits.append(
                    RateFit(
                        target=target,
                        component=comp,
                        norm=norm,
                        slope=slope,
                        intercept=intercept,
                        r2=r2,
                        theory=theory,
                        tol=tol,
                        n_points=n,
                    )
                )
    return RateReport(
        scenario=scenario.name,
        bc_mode=scenario.bc_mode,
        epsilons=list(epsilons),
        fits=fits,
        table=table,
        notes=notes,
    )
