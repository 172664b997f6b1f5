"""Cutoffs, boundary corrector, assembly, substitution residual, defect terms."""

import dataclasses

import numpy as np
import pytest

from mhdlab.composer import (
    ApproxSolution,
    assemble,
    eta_corrector,
    psi,
    psi_d1,
    psi_d2,
    remainder_terms,
    residual,
    rho,
    zrho,
)
from mhdlab.fields import TimeLattice, build_bl_grid, build_channel_grid, ddz_values
from mhdlab.ideal import solve_outer
from mhdlab.prandtl import solve_corrector_set
from mhdlab.scenarios import get_scenario
from mhdlab.viscous import solve_viscous


# ---------------------------------------------------------------- cutoffs


def test_psi_plateaus_and_midpoint():
    assert psi(0.2) == 1.0
    assert psi(0.7) == 0.0
    assert psi(5 / 12) == pytest.approx(0.5, abs=1e-14)  # transition midpoint


def test_psi_disjoint_supports():
    z = np.linspace(0, 1, 10_000)
    assert np.max(np.abs(psi(z) * psi(1 - z))) == 0.0


def test_psi_derivatives_match_fd():
    z = np.linspace(0.34, 0.49, 301)
    h = 1e-6
    d1_fd = (psi(z + h) - psi(z - h)) / (2 * h)
    d2_fd = (psi(z + h) - 2 * psi(z) + psi(z - h)) / h**2
    assert np.abs(psi_d1(z) - d1_fd).max() < 1e-5 * np.abs(d1_fd).max()
    assert np.abs(psi_d2(z) - d2_fd).max() < 1e-4 * np.abs(d2_fd).max()


def test_rho_plateaus():
    assert rho(np.array([0.0, 0.5, 1.0])).min() == 1.0
    assert rho(np.array([2.0, 5.0, 100.0])).max() == 0.0
    assert zrho(0.0) == 0.0


# ---------------------------------------------------------------- shared setup


@pytest.fixture(scope="module")
def setup_conducting():
    sc = get_scenario("layered-conducting")
    sc = dataclasses.replace(sc, T=0.5)
    grid = build_channel_grid(nx=8, nz=257, stretch=0.95, length_L=sc.L)
    tl = TimeLattice.build(0.5, 2e-3, 0.1)
    bl = build_bl_grid()
    outer = solve_outer(sc, grid, tl)
    return sc, grid, tl, bl, outer


# ---------------------------------------------------------------- eta


def test_eta_zero_for_flat_magnetic_field(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    quiet = get_scenario("quiet-conducting")
    quiet = dataclasses.replace(quiet, T=0.5)
    out_q = solve_outer(quiet, grid, tl)
    # zero-derivative traces: d(x, z) has flat walls and stays flat
    eta = eta_corrector(out_q, bl, tl)
    assert np.abs(eta.s1).max() < 1e-9
    # axial factor vanishes for every conducting-compatible scenario
    eta2 = eta_corrector(outer, bl, tl)
    assert np.abs(eta2.s1).max() < 1e-8
    assert np.abs(eta2.profile1(0)).max() < 1e-7


def test_eta_wall_slope_identity(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    eta = eta_corrector(outer, bl, tl)
    assert np.abs(eta.s2).max() > 1e-3  # the trace machinery is alive
    for w in (0, 1):
        assert eta.wall_slope_identity_error(w, len(tl.snap_times) - 1) <= 1e-8


# ---------------------------------------------------------------- assembly


def test_assemble_zero_correctors_equals_outer(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    quiet = dataclasses.replace(get_scenario("quiet-conducting"), T=0.5)
    out_q = solve_outer(quiet, grid, tl)
    cs = solve_corrector_set(quiet, out_q, grid, bl, tl, quiet.bc_mode, 0, 1e-2)
    eta = eta_corrector(out_q, bl, tl)
    ap = assemble(0, quiet.bc_mode, 1e-2, out_q, cs, eta, grid, scenario=quiet)
    assert np.abs(ap.u1 - out_q.u1).max() < 1e-9
    assert np.abs(ap.u2 - out_q.u2).max() < 1e-9
    assert np.abs(ap.h2 - out_q.h2).max() < 1e-9


def test_assemble_cutoff_plateaus(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    eps = 1e-2
    cs = solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, 0, eps)
    eta = eta_corrector(outer, bl, tl)
    ap = assemble(0, sc.bc_mode, eps, outer, cs, eta, grid, scenario=sc)
    from mhdlab.fields import interp_halfline

    i = -1
    for zq in (0.25, 0.6):
        j = int(np.abs(grid.z - zq).argmin())
        zj = grid.z[j]
        lower, _ = interp_halfline(cs.lower.theta2[i], bl, np.array([zj / np.sqrt(eps)]))
        upper, _ = interp_halfline(cs.upper.theta2[i], bl, np.array([(1 - zj) / np.sqrt(eps)]))
        expect = (
            outer.u2[i, :, j]
            + psi(zj) * lower[:, 0]
            + psi(1 - zj) * upper[:, 0]
        )
        assert np.abs(ap.u2[i, :, j] - expect).max() < 1e-12
        if zq == 0.25:
            assert psi(zj) == 1.0 and psi(1 - zj) == 0.0  # only outer + lower survive


def test_assemble_velocity_traces_exact(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    eps = 3.16e-3
    cs = solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, 0, eps)
    eta = eta_corrector(outer, bl, tl)
    ap = assemble(0, sc.bc_mode, eps, outer, cs, eta, grid, scenario=sc)
    from mhdlab.scenarios import boundary_tables

    a1, a2, _, _ = boundary_tables(sc, grid, ap.times, eps)
    assert np.array_equal(ap.u1[:, 0], a1[0])
    assert np.array_equal(ap.u1[:, -1], a1[1])
    assert np.array_equal(ap.u2[:, :, 0], a2[0])
    assert np.array_equal(ap.u2[:, :, -1], a2[1])


def test_conducting_wall_slope_cancellation():
    # production-grade wall clustering so the one-sided stencil resolves the
    # assembled magnetic layer slope
    sc = dataclasses.replace(get_scenario("layered-conducting"), T=0.5)
    grid = build_channel_grid(nx=8, nz=2049, stretch=0.995, length_L=sc.L)
    tl = TimeLattice.build(0.5, 2e-3, 0.1)
    bl = build_bl_grid()
    outer = solve_outer(sc, grid, tl)
    eps = 1e-3
    cs = solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, 0, eps)
    eta = eta_corrector(outer, bl, tl)
    ap = assemble(0, sc.bc_mode, eps, outer, cs, eta, grid, scenario=sc)
    for it in range(1, len(ap.times)):
        d = ddz_values(ap.h2[it], grid.z)
        scale = np.abs(d).max()
        assert np.abs(d[:, 0]).max() <= 1e-6 * scale
        assert np.abs(d[:, -1]).max() <= 1e-6 * scale
        d1 = ddz_values(ap.h1[it], grid.z)
        scale1 = max(np.abs(d1).max(), 1e-12)
        assert abs(d1[0]) <= 1e-6 * scale1 and abs(d1[-1]) <= 1e-6 * scale1


def test_order1_shrinks_toward_order0():
    sc = dataclasses.replace(get_scenario("layered-dirichlet"), T=0.5)
    grid = build_channel_grid(nx=8, nz=257, stretch=0.95, length_L=sc.L)
    tl = TimeLattice.build(0.5, 2e-3, 0.1)
    bl = build_bl_grid()
    outer = solve_outer(sc, grid, tl)
    from mhdlab.fields import ModalField, norms

    diffs = []
    eps_vals = (1e-2, 1e-3, 1e-4)
    for eps in eps_vals:
        cs = solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, 1, eps)
        ap0 = assemble(0, sc.bc_mode, eps, outer, cs, None, grid, scenario=sc)
        ap1 = assemble(1, sc.bc_mode, eps, outer, cs, None, grid, scenario=sc)
        snaps = [
            [ModalField(coeffs=ap1.u2[i] - ap0.u2[i], nx=grid.nx),
             ModalField(coeffs=ap1.h2[i] - ap0.h2[i], nx=grid.nx)]
            for i in range(len(ap0.times))
        ]
        diffs.append(norms(snaps, grid).l2)
    slope = np.polyfit(np.log(eps_vals), np.log(diffs), 1)[0]
    assert slope >= 0.65  # added terms carry sqrt(eps) times the layer mass


# ---------------------------------------------------------------- residual


def _manual_approx(grid, times, eps, u1, h1, u2, h2):
    return ApproxSolution(
        eps=eps, bc_mode="conducting", order=0, variant="full", grid=grid,
        times=times, u1=u1, h1=h1, u2=u2, h2=h2,
    )


def test_residual_zero_fields():
    grid = build_channel_grid(nx=8, nz=65, stretch=0.0, length_L=2 * np.pi)
    times = np.linspace(0, 1, 11)
    shape_p = (11, grid.nz)
    shape_m = (11, grid.nkr, grid.nz)
    ap = _manual_approx(grid, times, 1e-2, np.zeros(shape_p), np.zeros(shape_p),
                        np.zeros(shape_m, complex), np.zeros(shape_m, complex))
    sc = dataclasses.replace(get_scenario("quiet-conducting"), T=1.0)
    res = residual(ap, sc)
    assert np.abs(res.r_u1).max() == 0.0
    assert np.abs(res.r_u2).max() == 0.0


def test_residual_manufactured_second_order():
    # exact fields satisfying the system with an implied tangential forcing:
    # substituting them must leave only discretization error, shrinking 4x
    # when snapshot spacing and mesh are refined together
    U, eps = 2.0, 0.05

    def fields(grid, times):
        x, z = grid.x[:, None], grid.z[None, :]
        u1 = np.broadcast_to(np.full(grid.nz, U), (len(times), grid.nz)).copy()
        h1 = np.zeros((len(times), grid.nz))
        u2 = np.empty((len(times), grid.nkr, grid.nz), complex)
        for i, t in enumerate(times):
            u2[i] = np.fft.rfft(np.exp(-t) * np.sin(x) * np.sin(np.pi * z), axis=0) / grid.nx
        h2 = np.zeros_like(u2)
        return u1, h1, u2, h2

    def f2(t, x, z):
        s = np.sin(np.pi * z)
        return np.exp(-t) * s * (-np.sin(x) + eps * (1 + np.pi**2) * np.sin(x) + U * np.cos(x))

    sc = dataclasses.replace(
        get_scenario("quiet-conducting"), f2=f2, f1=lambda t, z: 0.0 * np.asarray(z), T=1.0
    )
    errs = []
    for nz, nsnap in ((129, 11), (257, 21)):
        grid = build_channel_grid(nx=8, nz=nz, stretch=0.0, length_L=2 * np.pi)
        times = np.linspace(0, 1, nsnap)
        ap = _manual_approx(grid, times, eps, *fields(grid, times))
        res = residual(ap, sc)
        errs.append(max(np.abs(res.r_u2).max(), np.abs(res.r_u1).max(), np.abs(res.r_h2).max()))
    assert errs[0] < 0.05
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_residual_outer_solves_ideal_system(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    h1 = np.broadcast_to(outer.h1, outer.u1.shape).copy()
    ap = _manual_approx(grid, outer.times, 0.0, outer.u1, h1, outer.u2, outer.h2)
    res = residual(ap, sc)
    # axial equations hold up to snapshot time-differencing error
    assert np.abs(res.r_u1).max() < 2e-3
    assert np.abs(res.r_h1).max() < 1e-12
    # tangential phases oscillate at rate k*c ~ 3.5: cadence-squared error
    assert np.abs(res.r_u2).max() < 0.1
    assert np.abs(res.r_h2).max() < 0.1


# ---------------------------------------------------------------- defect terms


def test_remainder_eta_reductions(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    eps = 1e-3
    cs = solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, 0, eps)
    eta = eta_corrector(outer, bl, tl)
    ap = assemble(0, sc.bc_mode, eps, outer, cs, eta, grid, scenario=sc)
    rep = remainder_terms(ap, sc)
    # axial boundary-corrector factors vanish, so F1 = F and G1 = G, G2 = 0
    assert np.abs(rep.term_norms["F1"] - rep.term_norms["F"]).max() < 1e-12
    assert np.abs(rep.term_norms["G1"] - rep.term_norms["G"]).max() < 1e-12
    assert rep.term_norms["G2"].max() < 1e-12
    # the tangential factors do not vanish: D1 differs from D
    assert np.abs(rep.term_norms["D1"] - rep.term_norms["D"]).max() > 0


def test_remainder_band_terms_vanish_at_small_eps(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    eps = 1e-4  # psi' band sits at Z >= 33, beyond the truncated layer
    cs = solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, 0, eps)
    eta = eta_corrector(outer, bl, tl)
    ap = assemble(0, sc.bc_mode, eps, outer, cs, eta, grid, scenario=sc)
    rep = remainder_terms(ap, sc)
    assert rep.term_norms["A"].max() <= 1e-8 * np.sqrt(eps)
    assert rep.term_norms["C"].max() <= 1e-8


def test_remainder_g_term_interior_part(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    eps = 1e-3
    cs = solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, 0, eps)
    eta = eta_corrector(outer, bl, tl)
    ap = assemble(0, sc.bc_mode, eps, outer, cs, eta, grid, scenario=sc)
    rep = remainder_terms(ap, sc)
    # axial magnetic defect is -eps d2z c(z) up to layer tails: for the
    # c = 1 + sin(pi z)/2 profile that is eps (pi^2/2) sin(pi z)
    from mhdlab.composer import _l2_profile

    expect = np.sqrt(grid.length_L * ((eps * np.pi**2 / 2 * np.sin(np.pi * grid.z)) ** 2 @ grid.weights))
    got = rep.term_norms["G"][-1]
    assert got == pytest.approx(expect, rel=1e-2)


def test_remainder_cross_check_gap(setup_conducting):
    sc, grid, tl, bl, outer = setup_conducting
    eps = 1e-3
    cs = solve_corrector_set(sc, outer, grid, bl, tl, sc.bc_mode, 0, eps)
    eta = eta_corrector(outer, bl, tl)
    ap = assemble(0, sc.bc_mode, eps, outer, cs, eta, grid, scenario=sc)
    rep = remainder_terms(ap, sc)
    assert set(rep.gap) == {"u1", "u2", "h1", "h2"}
    assert all(np.isfinite(v) for v in rep.gap.values())
    assert "H" in rep.flagged and "J1" in rep.flagged
