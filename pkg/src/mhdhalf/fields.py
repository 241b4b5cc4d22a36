"""Real vector fields on the half strip: Fourier in x1, nodal in x2.

A Field2D stores, per named component, the normalized horizontal Fourier
coefficients c_k(x2_j) of a real field (full spectrum, conjugate-symmetric),
so horizontal derivatives are exact multipliers and vertical operators act
through the grid's differentiation matrices.  The module also provides the
leray/Helmholtz projection onto divergence-free fields with zero normal
trace, all norms used by the energy ledgers, divergence-free data built
from stream functions, and the binary snapshot format.
"""

from __future__ import annotations

import struct
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .vgrid import VerticalGrid

__all__ = [
    "Field2D",
    "NormBundle",
    "deriv",
    "helmholtz_project",
    "norms",
    "sup_norm",
    "interpolation_ratio",
    "stream_function_data",
    "write_snapshot",
    "read_snapshot",
    "SNAPSHOT_MAGIC",
]

SNAPSHOT_MAGIC = b"MHD2"
_SNAPSHOT_VERSION = 1


@dataclass(eq=False)
class Field2D:
    """Named real scalar fields as (n1, n2) arrays of Fourier-in-x1 coefficients."""

    n1: int
    l1: float
    grid2: VerticalGrid
    components: dict

    def __post_init__(self):
        for name, arr in self.components.items():
            if arr.shape != (self.n1, self.grid2.n2):
                raise ValueError(f"component {name!r} has shape {arr.shape}, "
                                 f"expected {(self.n1, self.grid2.n2)}")

    @classmethod
    def zeros(cls, n1, l1, grid2, names):
        comps = {n: np.zeros((n1, grid2.n2), dtype=complex) for n in names}
        return cls(n1=n1, l1=l1, grid2=grid2, components=comps)

    @classmethod
    def from_physical(cls, values: dict, l1, grid2):
        comps = {}
        n1 = None
        for name, arr in values.items():
            arr = np.asarray(arr, dtype=float)
            n1 = arr.shape[0] if n1 is None else n1
            comps[name] = np.fft.fft(arr, axis=0) / arr.shape[0]
        return cls(n1=n1, l1=float(l1), grid2=grid2, components=comps)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n1, d=1.0 / self.n1) / self.l1

    def to_physical(self, name: str, oversample: int = 1) -> np.ndarray:
        """Collocation values on a uniform x1 grid of size oversample*n1."""
        c = self.components[name]
        m = oversample * self.n1
        if m == self.n1:
            return np.real(np.fft.ifft(c * self.n1, axis=0))
        padded = np.zeros((m, c.shape[1]), dtype=complex)
        half = self.n1 // 2
        padded[:half] = c[:half]
        padded[-half:] = c[-half:]
        return np.real(np.fft.ifft(padded * m, axis=0))

    def conjugate_symmetry_defect(self) -> float:
        """Max |c_k - conj(c_{-k})| over components; ~0 for real fields."""
        worst = 0.0
        for arr in self.components.values():
            flipped = np.conj(np.roll(arr[::-1], 1, axis=0))
            worst = max(worst, float(np.max(np.abs(arr - flipped))))
        return worst

    def copy(self) -> "Field2D":
        return Field2D(self.n1, self.l1, self.grid2,
                       {k: v.copy() for k, v in self.components.items()})

    def component_field(self, name: str) -> "Field2D":
        return Field2D(self.n1, self.l1, self.grid2, {name: self.components[name]})


def deriv(f: Field2D, axis: int, order: int = 1) -> Field2D:
    """Discrete partial derivative: exact multiplier in x1, matrix in x2."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    out = {}
    if axis == 1:
        mult = (1j * f.wavenumbers) ** order
        for name, arr in f.components.items():
            out[name] = arr * mult[:, None]
    elif axis == 2:
        mat = f.grid2.d1 if order == 1 else f.grid2.d2
        for name, arr in f.components.items():
            out[name] = arr @ mat.T
    else:
        raise ValueError("axis must be 1 or 2")
    return Field2D(f.n1, f.l1, f.grid2, out)


_PROJ_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _projection_factors(grid: VerticalGrid, n1: int, l1: float):
    """Cached LU factorizations of (d1 d1 - xi1^2) with wall-flux/far rows."""
    per_grid = _PROJ_CACHE.setdefault(grid, {})
    key = (n1, float(l1))
    if key in per_grid:
        return per_grid[key]
    d1 = grid.d1
    lap = d1 @ d1
    k = 2.0 * np.pi * np.fft.fftfreq(n1, d=1.0 / n1) / l1
    factors = {}
    for kk in np.unique(np.abs(k)):
        if kk == 0.0:
            continue
        mat = lap - kk * kk * np.eye(grid.n2)
        mat[0, :] = d1[0, :]       # normal-trace row: d2 phi(0) = v2(0)
        mat[-1, :] = 0.0
        mat[-1, -1] = 1.0          # decay surrogate: phi(h) = 0
        factors[kk] = lu_factor(mat)
    per_grid[key] = factors
    return factors


def helmholtz_project(v: Field2D) -> Field2D:
    """Leray projection: divergence-free part with zero normal trace.

    Component pair order is (horizontal, vertical).  Per nonzero mode the
    potential solves (d1 d1 - xi1^2) phi = div v with d2 phi(0) = v2(0) and
    phi(h) = 0; the discrete Laplacian is the square of the first-derivative
    matrix so the projected divergence vanishes identically on the rows
    where the equation is enforced.  The zero mode keeps v1 and zeroes v2.
    """
    names = list(v.components)
    if len(names) != 2:
        raise ValueError("projection expects a two-component field")
    v1 = v.components[names[0]]
    v2 = v.components[names[1]]
    grid = v.grid2
    d1 = grid.d1
    k = v.wavenumbers
    factors = _projection_factors(grid, v.n1, v.l1)
    out1 = v1.copy()
    out2 = v2.copy()
    div = 1j * k[:, None] * v1 + v2 @ d1.T
    for i, kk in enumerate(k):
        if kk == 0.0:
            out2[i] = 0.0
            continue
        rhs = div[i].copy()
        rhs[0] = v2[i, 0]
        rhs[-1] = 0.0
        phi = lu_solve(factors[abs(kk)], rhs)
        out1[i] = v1[i] - 1j * kk * phi
        out2[i] = v2[i] - d1 @ phi
    return Field2D(v.n1, v.l1, v.grid2, {names[0]: out1, names[1]: out2})


@dataclass(frozen=True)
class NormBundle:
    l2: float
    h1: float
    h2: float
    mixed_inf_2: float    # L^inf_{x1} L^2_{x2}
    mixed_2_inf: float    # L^2_{x1} L^inf_{x2}
    l1x1_l2x2: float      # L^1_{x1} L^2_{x2}


def _l2_sq(f: Field2D) -> float:
    total = 0.0
    w = f.grid2.weights
    for arr in f.components.values():
        total += f.l1 * float(np.sum((np.abs(arr) ** 2) @ w))
    return total


def norms(f: Field2D) -> NormBundle:
    """All norms of the (vector) field; components aggregated in quadrature.

    H1/H2 sum squared L2 norms of derivatives up to the order, with the
    mixed derivative counted once.  Mixed-direction norms evaluate the inner
    norm first on an anti-aliased collocation grid of size 2 n1.
    """
    l2s = _l2_sq(f)
    d1f = deriv(f, 1)
    d2f = deriv(f, 2)
    h1s = l2s + _l2_sq(d1f) + _l2_sq(d2f)
    h2s = h1s + _l2_sq(deriv(f, 1, 2)) + _l2_sq(deriv(d1f, 2)) + _l2_sq(deriv(f, 2, 2))
    w = f.grid2.weights
    phys = [f.to_physical(n, oversample=2) for n in f.components]
    sq = sum(p * p for p in phys)                      # (2 n1, n2)
    vert_l2 = np.sqrt(sq @ w)                          # per x1 sample
    vert_sup = np.sqrt(np.max(sq, axis=1))
    dx1 = f.l1 / sq.shape[0]
    return NormBundle(
        l2=float(np.sqrt(l2s)),
        h1=float(np.sqrt(h1s)),
        h2=float(np.sqrt(h2s)),
        mixed_inf_2=float(np.max(vert_l2)),
        mixed_2_inf=float(np.sqrt(np.sum(vert_sup**2) * dx1)),
        l1x1_l2x2=float(np.sum(vert_l2) * dx1),
    )


def sup_norm(f: Field2D, oversample: int = 2) -> float:
    """Pointwise sup of the vector magnitude on the collocation grid."""
    sq = sum(f.to_physical(n, oversample) ** 2 for n in f.components)
    return float(np.sqrt(np.max(sq)))


def interpolation_ratio(f: Field2D) -> float:
    """||f||_inf over the quarter-power product of L2 norms of f and its
    d1, d2, d1 d2 derivatives; finite for smooth decaying fields."""
    d1f = deriv(f, 1)
    parts = [f, d1f, deriv(f, 2), deriv(d1f, 2)]
    denom = 1.0
    for p in parts:
        denom *= np.sqrt(_l2_sq(p)) ** 0.25
    if denom == 0.0:
        return 0.0
    return sup_norm(f) / denom


def _periodized_bump(x1: np.ndarray, l1: float, center: float, width: float) -> np.ndarray:
    out = np.zeros_like(x1)
    for shift in (-l1, 0.0, l1):
        out += np.exp(-((x1 - center + shift) / width) ** 2)
    return out


def stream_function_data(kind: str, amplitude: float, n1: int, l1: float,
                         grid2: VerticalGrid, width: float | None = None,
                         x2_scale: float = 1.0, seed: int | None = None) -> Field2D:
    """Divergence-free data from a stream function psi ~ amplitude x2^2 bump.

    The x2^2 prefactor puts both velocity components to zero on the wall
    and, for the magnetic kind, kills the tangential trace d2 psi(0) as
    well.  A seed adds a smooth random modulation for corpus variety.
    """
    if amplitude < 0.0:
        raise ValueError("amplitude must be nonnegative")
    if kind not in ("velocity", "magnetic"):
        raise ValueError("kind must be 'velocity' or 'magnetic'")
    width = l1 / 12.0 if width is None else width
    x1 = l1 * np.arange(n1) / n1
    x2 = grid2.nodes
    bump = _periodized_bump(x1, l1, l1 / 2.0, width)
    if seed is not None:
        rng = np.random.default_rng(seed)
        phase = rng.uniform(0.0, 2.0 * np.pi, 3)
        amp = rng.uniform(-0.3, 0.3, 3)
        for m, (a, p) in enumerate(zip(amp, phase), start=1):
            bump = bump * (1.0 + a * np.cos(2.0 * np.pi * m * x1 / l1 + p))
    profile = x2**2 * np.exp(-x2 / x2_scale)
    # cancel the discrete wall derivative exactly (the one-sided stencil
    # leaves truncation-level residue on x2^2 exp profiles otherwise)
    corr = x2**3 * np.exp(-x2 / x2_scale)
    d0_corr = (grid2.d1 @ corr)[0]
    if d0_corr != 0.0:
        profile = profile - ((grid2.d1 @ profile)[0] / d0_corr) * corr
    psi_phys = amplitude * bump[:, None] * profile[None, :]
    psi = np.fft.fft(psi_phys, axis=0) / n1
    k = 2.0 * np.pi * np.fft.fftfreq(n1, d=1.0 / n1) / l1
    c1 = psi @ grid2.d1.T
    c2 = -1j * k[:, None] * psi
    names = ("u1", "u2") if kind == "velocity" else ("b1", "b2")
    return Field2D(n1, l1, grid2, {names[0]: c1, names[1]: c2})


def write_snapshot(path, f: Field2D, t: float):
    """Fixed little-endian layout: magic, version, n1, n2, l1, h, t, then
    one f64 array per component with the x1 index fastest."""
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", _SNAPSHOT_VERSION))
        fh.write(struct.pack("<QQ", f.n1, f.grid2.n2))
        fh.write(struct.pack("<ddd", f.l1, f.grid2.h, t))
        for name in f.components:
            phys = np.ascontiguousarray(f.to_physical(name).T, dtype="<f8")
            fh.write(phys.tobytes())


def read_snapshot(path, grid2: VerticalGrid | None = None, names=None):
    """Inverse of write_snapshot; returns (Field2D, t).

    The vertical grid is reconstructed as the canonical graded grid for
    (n2, h) unless one is supplied.
    """
    with open(path, "rb") as fh:
        if fh.read(4) != SNAPSHOT_MAGIC:
            raise ValueError("not a field snapshot")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        n1, n2 = struct.unpack("<QQ", fh.read(16))
        l1, h, t = struct.unpack("<ddd", fh.read(24))
        payload = fh.read()
    per = 8 * n1 * n2
    if len(payload) % per:
        raise ValueError("snapshot payload is not a whole number of components")
    n_comp = len(payload) // per
    names = names or [f"c{i}" for i in range(n_comp)]
    if len(names) != n_comp:
        raise ValueError(f"snapshot holds {n_comp} components, got {len(names)} names")
    grid2 = grid2 or VerticalGrid.graded(int(n2), h)
    values = {}
    for i, name in enumerate(names):
        arr = np.frombuffer(payload, dtype="<f8", count=n1 * n2, offset=i * per)
        values[name] = arr.reshape(int(n2), int(n1)).T.astype(float)
    return Field2D.from_physical(values, l1, grid2), t
