"""Grids, field containers, transforms, differentiation, and norms.

The channel is periodic in x (collocation via FFT) and wall-bounded in
z in [0, 1] with an optional tanh grading that clusters nodes at both
walls.  All fields are either x-independent real profiles or complex
Fourier-in-x coefficient stacks sampled on the z nodes; since every
coefficient in the governing equations is x-independent, modes never
mix and the half-spectrum (rfft layout) is a complete representation
of real fields.

Norm convention: the trivial spanwise direction carries unit measure,
so L2(domain)^2 = int_0^L int_0^1 |f|^2 dz dx.  Time-uniform norms are
maxima over the stored snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError

DECAY_WARN_RTOL = 1e-8


@dataclass(frozen=True)
class ChannelGrid:
    """Periodic-x / wall-bounded-z collocation grid with quadrature weights."""

    length_L: float
    nx: int
    z: np.ndarray
    weights: np.ndarray
    stretch: float

    @property
    def nz(self) -> int:
        return self.z.size

    @property
    def nkr(self) -> int:
        """Number of retained Fourier coefficients (rfft layout)."""
        return self.nx // 2 + 1

    @property
    def x(self) -> np.ndarray:
        return self.length_L * np.arange(self.nx) / self.nx

    @property
    def kx(self) -> np.ndarray:
        """Wavenumbers 2*pi*k/L for the retained modes."""
        return 2.0 * np.pi * np.arange(self.nkr) / self.length_L

    def min_wall_spacing(self) -> float:
        return min(self.z[1] - self.z[0], self.z[-1] - self.z[-2])

    def nodes_within(self, depth: float) -> int:
        """Nodes strictly inside a layer of the given depth at either wall (min of the two)."""
        lo = int(np.sum(self.z < depth))
        hi = int(np.sum(self.z > 1.0 - depth))
        return min(lo, hi)


@dataclass(frozen=True)
class BLGrid:
    """Uniform grid on the truncated stretched half-line [0, z_max]."""

    z_max: float
    nzb: int

    def __post_init__(self):
        if self.z_max < 12.0:
            raise ConfigError(f"boundary-layer truncation z_max={self.z_max} < 12")
        if self.nzb < 2 or self.spacing > 0.05:
            raise ConfigError(
                f"boundary-layer grid spacing {self.spacing:.4g} > 0.05 (nzb={self.nzb})"
            )

    @property
    def spacing(self) -> float:
        return self.z_max / (self.nzb - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.z_max, self.nzb)


@dataclass
class ModalField:
    """Fourier-in-x coefficients (rfft half-spectrum) sampled on the z nodes.

    Hermitian symmetry of the underlying real field is implied by the
    storage: rows are k = 0 .. nx/2 and the k=0 / Nyquist rows must be
    real.
    """

    coeffs: np.ndarray  # complex, shape (nkr, nz)
    nx: int
    time_tag: float = 0.0

    @property
    def nz(self) -> int:
        return self.coeffs.shape[1]

    def check_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(np.abs(self.coeffs).max(), 1.0)
        bad = abs(self.coeffs[0].imag).max()
        if self.nx % 2 == 0 and self.coeffs.shape[0] == self.nx // 2 + 1:
            bad = max(bad, abs(self.coeffs[-1].imag).max())
        return bad <= tol * scale


@dataclass
class Profile1D:
    """x-independent real profile on the z nodes."""

    values: np.ndarray
    time_tag: float = 0.0

    @property
    def nz(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class NormTriple:
    """L2, full H1, and pointwise-max norms, each maximised over snapshots."""

    l2: float
    h1: float
    linf: float

    def __post_init__(self):
        if not (self.l2 >= 0 and self.h1 >= 0 and self.linf >= 0):
            raise ValueError("norms must be nonnegative")
        if self.l2 > self.h1 * (1 + 1e-12) + 1e-300:
            raise ValueError("l2 norm exceeds h1 norm")


@dataclass(frozen=True)
class TimeLattice:
    """Shared uniform time stepping with a coarser snapshot cadence."""

    dt: float
    n_steps: int
    snap_every: int

    @classmethod
    def build(cls, t_end: float, dt: float, snap_dt: float) -> "TimeLattice":
        if dt <= 0 or t_end <= 0:
            raise ConfigError("dt and t_end must be positive")
        n = round(t_end / dt)
        if abs(n * dt - t_end) > 1e-9 * t_end:
            raise ConfigError(f"t_end={t_end} is not a multiple of dt={dt}")
        m = round(snap_dt / dt)
        if m < 1 or abs(m * dt - snap_dt) > 1e-9 * snap_dt:
            raise ConfigError(f"snap_dt={snap_dt} is not a multiple of dt={dt}")
        if n % m != 0:
            raise ConfigError("t_end must be a multiple of snap_dt")
        return cls(dt=dt, n_steps=n, snap_every=m)

    @property
    def t_end(self) -> float:
        return self.n_steps * self.dt

    @property
    def t_steps(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def snap_indices(self) -> np.ndarray:
        return np.arange(0, self.n_steps + 1, self.snap_every)

    @property
    def snap_times(self) -> np.ndarray:
        return self.dt * self.snap_indices

    @property
    def n_snaps(self) -> int:
        return self.n_steps // self.snap_every + 1


def build_channel_grid(nx: int, nz: int, stretch: float, length_L: float) -> ChannelGrid:
    """Build the collocation grid: uniform x, tanh-graded z with trapezoid weights.

    The z map is z(u) = (1 + tanh(atanh(s) u)/s)/2 on u in [-1, 1], which
    degenerates to the uniform mesh as s -> 0 and clusters symmetrically
    at both walls as s -> 1.
    """
    if nx < 4 or nx % 2 != 0:
        raise ConfigError(f"nx={nx} must be even and >= 4")
    if nz < 33 or nz % 2 != 1:
        raise ConfigError(f"nz={nz} must be odd and >= 33")
    if not (0.0 <= stretch < 1.0):
        raise ConfigError(f"stretch={stretch} outside [0, 1)")
    if length_L <= 0:
        raise ConfigError(f"length_L={length_L} must be positive")

    u = 2.0 * np.arange(nz) / (nz - 1) - 1.0
    if stretch == 0.0:
        z = 0.5 * (1.0 + u)
    else:
        beta = np.arctanh(stretch)
        z = 0.5 * (1.0 + np.tanh(beta * u) / stretch)
    # symmetrise and pin the endpoints exactly
    z = 0.5 * (z - z[::-1]) + 0.5
    z[0], z[-1] = 0.0, 1.0

    w = np.zeros(nz)
    dz = np.diff(z)
    w[:-1] += 0.5 * dz
    w[1:] += 0.5 * dz
    return ChannelGrid(length_L=float(length_L), nx=nx, z=z, weights=w, stretch=float(stretch))


def build_bl_grid(z_max: float = 12.0, nzb: int = 481) -> BLGrid:
    return BLGrid(z_max=float(z_max), nzb=int(nzb))


def to_modal(samples: np.ndarray, grid: ChannelGrid, time_tag: float = 0.0) -> ModalField:
    """Forward x-transform of real physical samples, shape (nx, nz)."""
    if samples.shape != (grid.nx, grid.nz):
        raise ValueError(f"samples shape {samples.shape} != {(grid.nx, grid.nz)}")
    coeffs = np.fft.rfft(samples.astype(float), axis=0) / grid.nx
    coeffs[0] = coeffs[0].real
    if grid.nx % 2 == 0:
        coeffs[-1] = coeffs[-1].real
    return ModalField(coeffs=coeffs, nx=grid.nx, time_tag=time_tag)


def from_modal(f: ModalField, grid: ChannelGrid) -> np.ndarray:
    """Inverse x-transform back to real samples of shape (nx, nz)."""
    if f.nx != grid.nx or f.nz != grid.nz:
        raise ValueError("modal field does not match grid")
    return np.fft.irfft(f.coeffs * grid.nx, n=grid.nx, axis=0)


def _ddz_weights(z: np.ndarray):
    """Three-point first-derivative weights: one-sided at ends, centered inside.

    Exact on quadratics of the node coordinate for any spacing.
    """
    n = z.size
    if n < 3:
        raise ValueError("need at least 3 nodes to differentiate")
    wl = np.zeros(n)
    wc = np.zeros(n)
    wr = np.zeros(n)
    hm = z[1:-1] - z[:-2]
    hp = z[2:] - z[1:-1]
    wl[1:-1] = -hp / (hm * (hm + hp))
    wc[1:-1] = (hp - hm) / (hm * hp)
    wr[1:-1] = hm / (hp * (hm + hp))
    h0, h1 = z[1] - z[0], z[2] - z[1]
    wc[0] = -(2 * h0 + h1) / (h0 * (h0 + h1))
    wr[0] = (h0 + h1) / (h0 * h1)
    wl[0] = -h0 / (h1 * (h0 + h1))  # weight of node 2 in the left one-sided stencil
    g0, g1 = z[-1] - z[-2], z[-2] - z[-3]
    wc[-1] = (2 * g0 + g1) / (g0 * (g0 + g1))
    wl[-1] = -(g0 + g1) / (g0 * g1)
    wr[-1] = g0 / (g1 * (g0 + g1))  # weight of node n-3 in the right one-sided stencil
    return wl, wc, wr


def ddz_values(values: np.ndarray, z: np.ndarray) -> np.ndarray:
    """First z-derivative along the last axis on an arbitrary strictly increasing mesh."""
    wl, wc, wr = _ddz_weights(z)
    out = np.empty_like(values)
    v = values
    out[..., 1:-1] = wl[1:-1] * v[..., :-2] + wc[1:-1] * v[..., 1:-1] + wr[1:-1] * v[..., 2:]
    out[..., 0] = wc[0] * v[..., 0] + wr[0] * v[..., 1] + wl[0] * v[..., 2]
    out[..., -1] = wc[-1] * v[..., -1] + wl[-1] * v[..., -2] + wr[-1] * v[..., -3]
    return out


def d2dz2_values(values: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Second z-derivative along the last axis: three-point stencils throughout.

    Interior rows are the standard nonuniform second difference; the end
    rows use the one-sided three-point formula (exact on quadratics).
    """
    n = z.size
    if n < 3:
        raise ValueError("need at least 3 nodes to differentiate twice")
    hm = z[1:-1] - z[:-2]
    hp = z[2:] - z[1:-1]
    wl = 2.0 / (hm * (hm + hp))
    wc = -2.0 / (hm * hp)
    wr = 2.0 / (hp * (hm + hp))
    v = values
    out = np.empty_like(v)
    out[..., 1:-1] = wl * v[..., :-2] + wc * v[..., 1:-1] + wr * v[..., 2:]

    # four-point one-sided rows (exact on cubics) keep the ends second order
    def onesided(zs):
        import math

        n4 = 4
        V = np.vander(zs - zs[0], n4, increasing=True).T
        rhs = np.zeros(n4)
        rhs[2] = math.factorial(2)
        return np.linalg.solve(V, rhs)

    if n >= 4:
        w0 = onesided(z[:4])
        out[..., 0] = sum(w0[i] * v[..., i] for i in range(4))
        w1 = onesided(z[-1] - z[-1:-5:-1])
        out[..., -1] = sum(w1[i] * v[..., -1 - i] for i in range(4))
    else:
        h0, h1 = z[1] - z[0], z[2] - z[1]
        out[..., 0] = (
            2.0 / (h0 * (h0 + h1)) * v[..., 0]
            - 2.0 / (h0 * h1) * v[..., 1]
            + 2.0 / (h1 * (h0 + h1)) * v[..., 2]
        )
        g0, g1 = z[-1] - z[-2], z[-2] - z[-3]
        out[..., -1] = (
            2.0 / (g0 * (g0 + g1)) * v[..., -1]
            - 2.0 / (g0 * g1) * v[..., -2]
            + 2.0 / (g1 * (g0 + g1)) * v[..., -3]
        )
    return out


def ddz(f, grid: ChannelGrid):
    """z-derivative of a ModalField or Profile1D on its channel grid."""
    if isinstance(f, ModalField):
        return ModalField(coeffs=ddz_values(f.coeffs, grid.z), nx=f.nx, time_tag=f.time_tag)
    if isinstance(f, Profile1D):
        return Profile1D(values=ddz_values(f.values, grid.z), time_tag=f.time_tag)
    raise TypeError(f"cannot differentiate {type(f).__name__}")


def _mode_multiplicity(nkr: int, nx: int) -> np.ndarray:
    m = np.full(nkr, 2.0)
    m[0] = 1.0
    if nx % 2 == 0 and nkr == nx // 2 + 1:
        m[-1] = 1.0
    return m


def _component_sq_norms(f, grid: ChannelGrid):
    """Return (l2^2, dx^2, dz^2, linf) for one component at one time."""
    if isinstance(f, Profile1D):
        v = f.values
        l2s = grid.length_L * float(grid.weights @ (v * v))
        dz = ddz_values(v, grid.z)
        dzs = grid.length_L * float(grid.weights @ (dz * dz))
        return l2s, 0.0, dzs, float(np.abs(v).max())
    if isinstance(f, ModalField):
        c = f.coeffs
        m = _mode_multiplicity(c.shape[0], f.nx)
        absq = (c.real * c.real + c.imag * c.imag)
        l2s = grid.length_L * float((m[:, None] * absq * grid.weights[None, :]).sum())
        kx2 = grid.kx**2
        dxs = grid.length_L * float(((m * kx2)[:, None] * absq * grid.weights[None, :]).sum())
        dc = ddz_values(c, grid.z)
        absq_dz = dc.real * dc.real + dc.imag * dc.imag
        dzs = grid.length_L * float((m[:, None] * absq_dz * grid.weights[None, :]).sum())
        phys = from_modal(f, grid)
        return l2s, dxs, dzs, float(np.abs(phys).max())
    raise TypeError(f"cannot take norms of {type(f).__name__}")


def snapshot_norms(components, grid: ChannelGrid):
    """Combined (l2, h1, linf) of a set of components at a single time."""
    l2s = dxs = dzs = 0.0
    linf = 0.0
    for f in components:
        a, b, c, m = _component_sq_norms(f, grid)
        l2s += a
        dxs += b
        dzs += c
        linf = max(linf, m)
    return np.sqrt(l2s), np.sqrt(l2s + dxs + dzs), linf


def norms(snapshots, grid: ChannelGrid) -> NormTriple:
    """Time-uniform norms of a snapshot series of component sets.

    Each entry of `snapshots` is a sequence of ModalField / Profile1D
    components sharing `grid`; the three norms are maximised over time.
    """
    l2 = h1 = linf = 0.0
    for comps in snapshots:
        a, b, c = snapshot_norms(comps, grid)
        l2, h1, linf = max(l2, a), max(h1, b), max(linf, c)
    return NormTriple(l2=l2, h1=h1, linf=linf)


def interp_halfline(values: np.ndarray, blgrid: BLGrid, zq: np.ndarray, even_wall: bool = False):
    """Evaluate a half-line profile at arbitrary nonnegative points.

    Monotone cubic interpolation inside [0, z_max], exact zero beyond.
    `even_wall=True` interpolates in the squared coordinate instead:
    zero-flux components extend evenly through the wall, so they are
    smooth functions of Z^2, and this representation makes every odd
    wall derivative of the interpolant vanish structurally.

    Returns (values_at_zq, decay_warning); the warning fires when the
    stored profile has not decayed below 1e-8 of its maximum at z_max.
    """
    v = np.asarray(values)
    zq = np.asarray(zq, dtype=float)
    if np.any(zq < 0):
        raise ValueError("query points must be nonnegative")
    scale = float(np.abs(v).max())
    warn = bool(scale > 0 and np.abs(v[..., -1]).max() > DECAY_WARN_RTOL * scale)
    out_shape = v.shape[:-1] + zq.shape
    if scale == 0.0:
        return np.zeros(out_shape, dtype=v.dtype), False

    inside = zq <= blgrid.z_max
    if even_wall:
        nodes_ext = blgrid.nodes**2
        zin = zq[inside] ** 2
    else:
        nodes_ext = blgrid.nodes
        zin = zq[inside]
    out = np.zeros(out_shape, dtype=v.dtype)

    def _interp_real(y):
        return PchipInterpolator(nodes_ext, y, axis=-1, extrapolate=False)(zin)

    if np.iscomplexobj(v):
        got = _interp_real(v.real) + 1j * _interp_real(v.imag)
    else:
        got = _interp_real(v)
    out[..., inside] = got
    return out, warn
