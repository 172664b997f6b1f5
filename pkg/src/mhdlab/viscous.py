"""Production solver for the diffusive plane-parallel channel system.

The axial pair (u1, h1) obeys decoupled heat equations; the tangential
pair (u2, h2) is advected by the axial fields and coupled through the
swap term, linear per Fourier mode.  Everything marches with
Crank-Nicolson on the shared wall-graded mesh, coefficients frozen at
half steps, Dirichlet rows pinned to the prescribed wall data and
zero-flux magnetic walls closed by ghost mirroring (conducting mode).

Scenario validation evaluates the t=0 matching conditions between
initial and boundary data numerically (high-order differencing of the
supplied closures); first-order matching is additionally required for
runs that request the higher-order expansion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CompatibilityError, SolverError
from .fields import ChannelGrid, ModalField, Profile1D, TimeLattice, build_channel_grid
from .scenarios import CONDUCTING, DIRICHLET, Numerics, Scenario, boundary_tables
from .stepping import NEUMANN0, PairStepper, ScalarStepper
from .stepping import DIRICHLET as BC_DIRICHLET

ZERO_ORDER_TOL = 1e-10
FIRST_ORDER_TOL = 1e-8
LAYER_NODE_MIN = 8


# ------------------------------------------------------------ derivative stencils

from ._fd import dnt0 as _dt0_vec, dnz as _dz_n_vec


def _dz_n(f, z0: float, m: int) -> float:
    return float(_dz_n_vec(f, z0, m))


def _dt0(f) -> float:
    return float(_dt0_vec(f))


def _dxx(vals: np.ndarray, L: float) -> np.ndarray:
    nx = vals.size
    kx = 2 * np.pi * np.arange(nx // 2 + 1) / L
    return np.fft.irfft(-(kx**2) * np.fft.rfft(vals), n=nx)


def _dx(vals: np.ndarray, L: float) -> np.ndarray:
    nx = vals.size
    kx = 2 * np.pi * np.arange(nx // 2 + 1) / L
    return np.fft.irfft(1j * kx * np.fft.rfft(vals), n=nx)


# ------------------------------------------------------------ compatibility


@dataclass(frozen=True)
class CompatRow:
    name: str
    wall: int
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


@dataclass
class CompatReport:
    scenario: str
    order: int
    eps: float
    rows: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r.passed]


def check_compatibility(scenario: Scenario, order: int, eps: float, nx: int = 64) -> CompatReport:
    """Numeric residuals of the t=0 matching conditions at both walls."""
    x = scenario.L * np.arange(nx) / nx
    rows = []

    def add(name, wall, res, tol):
        rows.append(CompatRow(name=name, wall=wall, residual=float(abs(res)), tol=tol))

    for i in (0, 1):
        zi = float(i)
        add("alpha1(0)=a(i)", i, scenario.alpha1(0.0, i) - scenario.a(zi), ZERO_ORDER_TOL)
        r2 = np.abs(np.asarray(scenario.alpha2(0.0, x, i)) - np.asarray(scenario.b(x, zi))).max()
        add("alpha2(0)=b(.,i)", i, r2, ZERO_ORDER_TOL)
        if scenario.bc_mode == CONDUCTING:
            add("dz c(i)=0", i, _dz_n(scenario.c, zi, 1), ZERO_ORDER_TOL)
            dzd = _dz_n_vec(lambda z: scenario.d(x, z), zi, 1)
            add("dz d(.,i)=0", i, np.abs(dzd).max(), ZERO_ORDER_TOL)
        else:
            add("gamma1(0)=c(i)", i, scenario.gamma1(0.0, i, eps) - scenario.c(zi), ZERO_ORDER_TOL)
            rg = np.abs(
                np.asarray(scenario.gamma2(0.0, x, i, eps)) - np.asarray(scenario.d(x, zi))
            ).max()
            add("gamma2(0)=d(.,i)", i, rg, ZERO_ORDER_TOL)

    if order >= 1:
        for i in (0, 1):
            zi = float(i)
            f1_0 = float(scenario.f1(0.0, zi))
            b1 = _dt0(lambda t: scenario.alpha1(t, i)) - eps * _dz_n(scenario.a, zi, 2) - f1_0
            add("dt alpha1(0) balance", i, b1, FIRST_ORDER_TOL)

            dta2 = _dt0_vec(lambda t: scenario.alpha2(t, x, i))
            lap_b = _dxx(np.asarray(scenario.b(x, zi)), scenario.L) + _dz_n_vec(
                lambda z: scenario.b(x, z), zi, 2
            )
            adv = scenario.a(zi) * _dx(np.asarray(scenario.b(x, zi)), scenario.L)
            mag = scenario.c(zi) * _dx(np.asarray(scenario.d(x, zi)), scenario.L)
            f2_0 = np.asarray(scenario.f2(0.0, x, zi)) if scenario.f2 is not None else 0.0
            b2 = np.abs(dta2 - eps * lap_b + adv - mag - f2_0).max()
            add("dt alpha2(0) balance", i, b2, FIRST_ORDER_TOL)

            if scenario.bc_mode == CONDUCTING:
                add("eps dzzz c(i)=0", i, eps * _dz_n(scenario.c, zi, 3), FIRST_ORDER_TOL)
                lap_dzd = _dxx(_dz_n_vec(lambda z: scenario.d(x, z), zi, 1), scenario.L) + _dz_n_vec(
                    lambda z: scenario.d(x, z), zi, 3
                )
                cross = (
                    _dz_n(scenario.a, zi, 1) * _dx(np.asarray(scenario.d(x, zi)), scenario.L)
                    + scenario.a(zi) * _dx(_dz_n_vec(lambda z: scenario.d(x, z), zi, 1), scenario.L)
                    - _dz_n(scenario.c, zi, 1) * _dx(np.asarray(scenario.b(x, zi)), scenario.L)
                    - scenario.c(zi) * _dx(_dz_n_vec(lambda z: scenario.b(x, z), zi, 1), scenario.L)
                )
                b4 = np.abs(-eps * lap_dzd + cross).max()
                add("dz tangential balance", i, b4, FIRST_ORDER_TOL)
            else:
                b3 = _dt0(lambda t: scenario.gamma1(t, i, eps)) - eps * _dz_n(scenario.c, zi, 2)
                add("dt gamma1(0) balance", i, b3, FIRST_ORDER_TOL)
                dtg2 = _dt0_vec(lambda t: scenario.gamma2(t, x, i, eps))
                lap_d = _dxx(np.asarray(scenario.d(x, zi)), scenario.L) + _dz_n_vec(
                    lambda z: scenario.d(x, z), zi, 2
                )
                advd = scenario.a(zi) * _dx(np.asarray(scenario.d(x, zi)), scenario.L)
                magb = scenario.c(zi) * _dx(np.asarray(scenario.b(x, zi)), scenario.L)
                b4 = np.abs(dtg2 - eps * lap_d + advd - magb).max()
                add("dt gamma2(0) balance", i, b4, FIRST_ORDER_TOL)

    return CompatReport(scenario=scenario.name, order=order, eps=eps, rows=rows)


# ------------------------------------------------------------ axial solves


def solve_axial(
    eps: float,
    init_vals: np.ndarray,
    bc_kind: str,
    bc_tab,
    f1,
    grid: ChannelGrid,
    tl: TimeLattice,
):
    """March one axial field; returns (snapshots, full step history).

    bc_tab gives Dirichlet wall values on the half-step lattice, indexed
    (wall, fine index); ignored for zero-flux walls.  The full history
    (n_steps+1, nz) feeds the tangential coefficients at half steps.
    """
    if tl.dt <= 0:
        raise SolverError("dt must be positive")
    stepper = ScalarStepper(grid.z, nu=eps, dt=tl.dt, bc_lo=bc_kind, bc_hi=bc_kind)
    u = np.array(init_vals, float, copy=True)
    hist = np.empty((tl.n_steps + 1, grid.nz))
    hist[0] = u
    snaps = np.empty((tl.n_snaps, grid.nz))
    snaps[0] = u
    isnap = 1
    for n in range(tl.n_steps):
        t_half = (n + 0.5) * tl.dt
        src = np.asarray(f1(t_half, grid.z), float) if f1 is not None else None
        if bc_kind == BC_DIRICHLET:
            lo, hi = bc_tab[0, 2 * n + 2], bc_tab[1, 2 * n + 2]
        else:
            lo = hi = 0.0
        u = stepper.step(u, source=src, bc_lo_val=lo, bc_hi_val=hi)
        hist[n + 1] = u
        if (n + 1) % tl.snap_every == 0:
            snaps[isnap] = u
            isnap += 1
    return snaps, hist


# ------------------------------------------------------------ tangential solve


def solve_tangential_viscous(
    eps: float,
    grid: ChannelGrid,
    tl: TimeLattice,
    u1_hist: np.ndarray,
    h1_hist: np.ndarray,
    u2_0: np.ndarray,
    h2_0: np.ndarray,
    bc_mode: str,
    alpha2_tab: np.ndarray,
    gamma2_tab: np.ndarray | None,
    f2=None,
    mag_source=None,
    energy_log: list | None = None,
):
    """March the coupled tangential pair; returns (u2, h2) snapshot stacks.

    u1_hist / h1_hist are full step histories from solve_axial on the
    same lattice.  `mag_source` is a verification-only source term in
    the magnetic equation (manufactured-solution runs); the physical
    system has none.
    """
    if u1_hist.shape != (tl.n_steps + 1, grid.nz):
        raise SolverError("axial history does not match the time lattice")
    if not (np.all(np.isfinite(u1_hist)) and np.all(np.isfinite(h1_hist))):
        raise SolverError("non-finite axial coefficients")
    h_bc = NEUMANN0 if bc_mode == CONDUCTING else BC_DIRICHLET
    pair = PairStepper(
        grid.z,
        grid.kx,
        nu=eps,
        dt=tl.dt,
        with_kx2=True,
        bc_kind={"u_lo": BC_DIRICHLET, "h_lo": h_bc, "u_hi": BC_DIRICHLET, "h_hi": h_bc},
    )
    nkr, nz = grid.nkr, grid.nz
    y = np.zeros((nkr, 2 * nz), complex)
    y[:, 0::2] = u2_0
    y[:, 1::2] = h2_0
    nsnap = tl.n_snaps
    u2 = np.empty((nsnap, nkr, nz), complex)
    h2 = np.empty((nsnap, nkr, nz), complex)
    u2[0], h2[0] = y[:, 0::2], y[:, 1::2]
    if energy_log is not None:
        energy_log.append(_pair_energy(y, grid))
    isnap = 1
    xz = (grid.x[:, None], grid.z[None, :])
    for n in range(tl.n_steps):
        t_half = (n + 0.5) * tl.dt
        P = 0.5 * (u1_hist[n] + u1_hist[n + 1])
        Q = 0.5 * (h1_hist[n] + h1_hist[n + 1])
        su = sh = None
        if f2 is not None:
            su = np.fft.rfft(np.asarray(f2(t_half, *xz), float), axis=0) / grid.nx
        if mag_source is not None:
            sh = np.fft.rfft(np.asarray(mag_source(t_half, *xz), float), axis=0) / grid.nx
        bc_vals = {"u_lo": alpha2_tab[0, 2 * n + 2], "u_hi": alpha2_tab[1, 2 * n + 2]}
        if bc_mode == DIRICHLET:
            bc_vals["h_lo"] = gamma2_tab[0, 2 * n + 2]
            bc_vals["h_hi"] = gamma2_tab[1, 2 * n + 2]
        y = pair.step(y, P, Q, su=su, sh=sh, bc_vals=bc_vals)
        if energy_log is not None:
            energy_log.append(_pair_energy(y, grid))
        if (n + 1) % tl.snap_every == 0:
            u2[isnap], h2[isnap] = y[:, 0::2], y[:, 1::2]
            isnap += 1
    return u2, h2


def _pair_energy(y: np.ndarray, grid: ChannelGrid) -> float:
    m = np.full(grid.nkr, 2.0)
    m[0] = 1.0
    if grid.nx % 2 == 0:
        m[-1] = 1.0
    dens = (np.abs(y[:, 0::2]) ** 2 + np.abs(y[:, 1::2]) ** 2) * grid.weights[None, :]
    return float(grid.length_L * (m[:, None] * dens).sum())


# ------------------------------------------------------------ orchestration


@dataclass
class ViscousSeries:
    """Snapshot series of the full viscous solution."""

    grid: ChannelGrid
    times: np.ndarray
    eps: float
    bc_mode: str
    u1: np.ndarray  # (nsnap, nz)
    h1: np.ndarray
    u2: np.ndarray  # (nsnap, nkr, nz) complex
    h2: np.ndarray
    warnings: list = field(default_factory=list)

    def state(self, i: int):
        """Component containers at snapshot i."""
        t = float(self.times[i])
        return (
            Profile1D(values=self.u1[i], time_tag=t),
            Profile1D(values=self.h1[i], time_tag=t),
            ModalField(coeffs=self.u2[i], nx=self.grid.nx, time_tag=t),
            ModalField(coeffs=self.h2[i], nx=self.grid.nx, time_tag=t),
        )


def resolution_warnings(grid: ChannelGrid, eps: float) -> list:
    warns = []
    depth = np.sqrt(eps)
    got = grid.nodes_within(depth)
    if got < LAYER_NODE_MIN:
        warns.append(
            f"under-resolved layer: {got} nodes within sqrt(eps)={depth:.3g} of a wall "
            f"(need >= {LAYER_NODE_MIN})"
        )
    return warns


def solve_viscous(
    scenario: Scenario,
    eps: float,
    grid: ChannelGrid | None = None,
    tl: TimeLattice | None = None,
    order: int = 0,
    check_compat: bool = True,
    tabs=None,
) -> ViscousSeries:
    """Run the full viscous solve for one diffusivity."""
    num = scenario.numerics
    if grid is None:
        grid = build_channel_grid(num.nx, num.nz, num.stretch, scenario.L)
    if tl is None:
        tl = TimeLattice.build(scenario.T, num.dt, num.snap_dt)
    if check_compat:
        rep = check_compatibility(scenario, order, eps)
        if not rep.passed:
            bad = ", ".join(f"{r.name}@wall{r.wall}={r.residual:.2e}" for r in rep.failures())
            raise CompatibilityError(f"scenario {scenario.name} fails matching conditions: {bad}")
    t_fine = 0.5 * tl.dt * np.arange(2 * tl.n_steps + 1)
    if tabs is None:
        tabs = boundary_tables(scenario, grid, t_fine, eps)
    a1_tab, a2_tab, g1_tab, g2_tab = tabs

    a_vals = np.asarray(scenario.a(grid.z), float)
    c_vals = np.asarray(scenario.c(grid.z), float)
    u1_snap, u1_hist = solve_axial(eps, a_vals, BC_DIRICHLET, a1_tab, scenario.f1, grid, tl)
    h_bc = NEUMANN0 if scenario.bc_mode == CONDUCTING else BC_DIRICHLET
    h1_snap, h1_hist = solve_axial(eps, c_vals, h_bc, g1_tab, None, grid, tl)

    x, z = grid.x[:, None], grid.z[None, :]
    u2_0 = np.fft.rfft(np.asarray(scenario.b(x, z), float), axis=0) / grid.nx
    h2_0 = np.fft.rfft(np.asarray(scenario.d(x, z), float), axis=0) / grid.nx
    u2, h2 = solve_tangential_viscous(
        eps,
        grid,
        tl,
        u1_hist,
        h1_hist,
        u2_0,
        h2_0,
        scenario.bc_mode,
        a2_tab,
        g2_tab if scenario.bc_mode == DIRICHLET else None,
        f2=scenario.f2,
    )
    return ViscousSeries(
        grid=grid,
        times=tl.snap_times,
        eps=eps,
        bc_mode=scenario.bc_mode,
        u1=u1_snap,
        h1=h1_snap,
        u2=u2,
        h2=h2,
        warnings=resolution_warnings(grid, eps),
    )
