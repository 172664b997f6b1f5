"""Crank-Nicolson marchers shared by the channel and half-line solvers.

Both marchers freeze coefficients at the half step (midpoint rule) and
solve banded systems per step.  Zero-flux walls use the ghost-mirror
closure: the PDE is applied at the wall node with the second difference
mirrored across the wall, which keeps the operator symmetric negative
semidefinite in the trapezoid inner product, so discrete energy decay
is exact for unforced homogeneous problems.

The tangential pair (u, h) couples only pointwise through the swap term
i*k*Q; interleaving the two fields gives pentadiagonal systems, and
independent Fourier modes are stacked block-diagonally into one banded
solve per step.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from .errors import SolverError

DIRICHLET = "dirichlet"
NEUMANN0 = "neumann0"


def second_diff_weights(z: np.ndarray):
    """Nonuniform three-point second-difference weights (l, c, r) per node.

    Boundary rows hold the ghost-mirror closure (uniform spacing taken
    from the first interior cell); rows are overwritten for Dirichlet
    boundaries at assembly time.
    """
    n = z.size
    l = np.zeros(n)
    c = np.zeros(n)
    r = np.zeros(n)
    hm = z[1:-1] - z[:-2]
    hp = z[2:] - z[1:-1]
    l[1:-1] = 2.0 / (hm * (hm + hp))
    c[1:-1] = -2.0 / (hm * hp)
    r[1:-1] = 2.0 / (hp * (hm + hp))
    h0 = z[1] - z[0]
    c[0] = -2.0 / h0**2
    r[0] = 2.0 / h0**2
    g0 = z[-1] - z[-2]
    c[-1] = -2.0 / g0**2
    l[-1] = 2.0 / g0**2
    return l, c, r


class ScalarStepper:
    """CN march of d/dt u = nu d2/dz2 u + s with Dirichlet or zero-flux walls."""

    def __init__(self, z: np.ndarray, nu: float, dt: float, bc_lo: str, bc_hi: str):
        if dt <= 0:
            raise SolverError("dt must be positive")
        self.z = z
        self.nu = float(nu)
        self.dt = float(dt)
        self.bc = (bc_lo, bc_hi)
        l, c, r = second_diff_weights(z)
        x_l = 0.5 * dt * nu * l
        x_c = 0.5 * dt * nu * c
        x_r = 0.5 * dt * nu * r
        for end, idx in ((bc_lo, 0), (bc_hi, -1)):
            if end == DIRICHLET:
                x_l[idx] = x_c[idx] = x_r[idx] = 0.0
            elif end != NEUMANN0:
                raise SolverError(f"unknown boundary kind {end!r}")
        self.x_l, self.x_c, self.x_r = x_l, x_c, x_r
        n = z.size
        ab = np.zeros((3, n))
        ab[0, 1:] = -x_r[:-1]
        ab[1, :] = 1.0 - x_c
        ab[2, :-1] = -x_l[1:]
        if bc_lo == DIRICHLET:
            ab[1, 0] = 1.0
            ab[0, 1] = 0.0
        if bc_hi == DIRICHLET:
            ab[1, -1] = 1.0
            ab[2, -2] = 0.0
        self.ab = ab

    def apply_explicit(self, u):
        out = u.copy()
        out[1:-1] += self.x_l[1:-1] * u[:-2] + self.x_c[1:-1] * u[1:-1] + self.x_r[1:-1] * u[2:]
        out[0] += self.x_c[0] * u[0] + self.x_r[0] * u[1]
        out[-1] += self.x_c[-1] * u[-1] + self.x_l[-1] * u[-2]
        return out

    def step(self, u, source=None, bc_lo_val=0.0, bc_hi_val=0.0):
        rhs = self.apply_explicit(u)
        if source is not None:
            rhs += self.dt * source
        if self.bc[0] == DIRICHLET:
            rhs[0] = bc_lo_val
        if self.bc[1] == DIRICHLET:
            rhs[-1] = bc_hi_val
        out = solve_banded((1, 1), self.ab, rhs)
        if not np.all(np.isfinite(out)):
            raise SolverError("scalar march produced non-finite values")
        if self.bc[0] == DIRICHLET:
            out[0] = bc_lo_val
        if self.bc[1] == DIRICHLET:
            out[-1] = bc_hi_val
        return out


class PairStepper:
    """Batched CN march of the coupled tangential pair over Fourier modes.

    Per mode k the system is
        d/dt u = nu d2z u - nu k^2 u * [with_kx2] - i k P(t,z) u + i k Q(t,z) h + su
        d/dt h = nu d2z h - nu k^2 h * [with_kx2] - i k P(t,z) h + i k Q(t,z) u + sh
    with per-field wall conditions.  bc_kind is a mapping with keys
    ('u_lo', 'h_lo', 'u_hi', 'h_hi') to 'dirichlet' or 'neumann0'.
    """

    def __init__(self, z, kx, nu, dt, with_kx2, bc_kind):
        self.z = z
        self.kx = np.asarray(kx, float)
        self.nu = float(nu)
        self.dt = float(dt)
        self.with_kx2 = bool(with_kx2)
        self.bc_kind = dict(bc_kind)
        self.n = z.size
        self.nm = self.kx.size
        l, c, r = second_diff_weights(z)
        self.d2 = (l, c, r)
        for key in ("u_lo", "h_lo", "u_hi", "h_hi"):
            if self.bc_kind[key] not in (DIRICHLET, NEUMANN0):
                raise SolverError(f"unknown boundary kind {self.bc_kind[key]!r}")

    def _x_diagonals(self, P, Q):
        """Half-step-scaled operator diagonals, shapes (nm, 2n)."""
        nm, n = self.nm, self.n
        dt2 = 0.5 * self.dt
        l, c, r = self.d2
        kx = self.kx[:, None]
        P = np.broadcast_to(P, (nm, n))
        Q = np.broadcast_to(Q, (nm, n))
        diag_field = self.nu * c[None, :] - 1j * kx * P
        if self.with_kx2:
            diag_field = diag_field - self.nu * kx**2
        x_main = np.empty((nm, 2 * n), complex)
        x_main[:, 0::2] = diag_field
        x_main[:, 1::2] = diag_field
        x_sup1 = np.zeros((nm, 2 * n), complex)  # A[i, i+1]
        x_sub1 = np.zeros((nm, 2 * n), complex)  # A[i, i-1]
        coup = 1j * kx * Q
        x_sup1[:, 0::2] = coup  # u_j <- h_j
        x_sub1[:, 1::2] = coup  # h_j <- u_j
        x_sup2 = np.zeros((nm, 2 * n), complex)  # A[i, i+2]
        x_sub2 = np.zeros((nm, 2 * n), complex)
        x_sup2[:, 0:-2:2] = self.nu * r[None, :-1]
        x_sup2[:, 1:-2:2] = self.nu * r[None, :-1]
        x_sub2[:, 2::2] = self.nu * l[None, 1:]
        x_sub2[:, 3::2] = self.nu * l[None, 1:]
        for arr in (x_main, x_sup1, x_sub1, x_sup2, x_sub2):
            arr *= dt2
        # zero the rows of Dirichlet-pinned boundary unknowns
        rows = []
        if self.bc_kind["u_lo"] == DIRICHLET:
            rows.append(0)
        if self.bc_kind["h_lo"] == DIRICHLET:
            rows.append(1)
        if self.bc_kind["u_hi"] == DIRICHLET:
            rows.append(2 * n - 2)
        if self.bc_kind["h_hi"] == DIRICHLET:
            rows.append(2 * n - 1)
        for i in rows:
            x_main[:, i] = 0.0
            x_sup1[:, i] = 0.0
            x_sub1[:, i] = 0.0
            x_sup2[:, i] = 0.0
            x_sub2[:, i] = 0.0
        return x_main, x_sup1, x_sub1, x_sup2, x_sub2, rows

    def step(self, y, P, Q, su=None, sh=None, bc_vals=None):
        """Advance one step.  y: (nm, 2n) interleaved complex state.

        P, Q: coefficient arrays at the half step, shape (n,) or (nm, n);
        su, sh: sources at the half step, shape (nm, n); bc_vals: mapping
        from the Dirichlet bc keys to (nm,) values at the new time.
        """
        nm, n = self.nm, self.n
        x_main, x_sup1, x_sub1, x_sup2, x_sub2, dir_rows = self._x_diagonals(P, Q)

        # explicit half: rhs = (I + X) y + dt*s
        rhs = y.copy()
        rhs += x_main * y
        rhs[:, :-1] += x_sup1[:, :-1] * y[:, 1:]
        rhs[:, 1:] += x_sub1[:, 1:] * y[:, :-1]
        rhs[:, :-2] += x_sup2[:, :-2] * y[:, 2:]
        rhs[:, 2:] += x_sub2[:, 2:] * y[:, :-2]
        if su is not None:
            rhs[:, 0::2] += self.dt * su
        if sh is not None:
            rhs[:, 1::2] += self.dt * sh
        for i in dir_rows:
            rhs[:, i] = 0.0
        if bc_vals:
            key_row = {"u_lo": 0, "h_lo": 1, "u_hi": 2 * n - 2, "h_hi": 2 * n - 1}
            for key, vals in bc_vals.items():
                if vals is not None and self.bc_kind[key] == DIRICHLET:
                    rhs[:, key_row[key]] = vals

        # implicit half as one block-diagonal banded system over the modes
        N = nm * 2 * n
        ab = np.zeros((5, N), complex)
        main = (1.0 - x_main).reshape(N)
        sup1 = (-x_sup1).copy()
        sup1[:, -1] = 0.0
        sub1 = (-x_sub1).copy()
        sub1[:, 0] = 0.0
        sup2 = (-x_sup2).copy()
        sup2[:, -2:] = 0.0
        sub2 = (-x_sub2).copy()
        sub2[:, :2] = 0.0
        ab[2, :] = main
        ab[1, 1:] = sup1.reshape(N)[:-1]
        ab[0, 2:] = sup2.reshape(N)[:-2]
        ab[3, :-1] = sub1.reshape(N)[1:]
        ab[4, :-2] = sub2.reshape(N)[2:]
        out = solve_banded((2, 2), ab, rhs.reshape(N)).reshape(nm, 2 * n)
        if not np.all(np.isfinite(out)):
            raise SolverError("pair march produced non-finite values")
        # pin Dirichlet rows bit-exactly to the prescribed data
        for i in dir_rows:
            out[:, i] = rhs[:, i]
        return out
