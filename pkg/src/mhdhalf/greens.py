"""Green operators for (omega^2 - d^2/dx2^2) on the half line.

free_green applies the free-space kernel

    E[f](x2) = 1/(2 omega) * int_0^inf exp(-omega |x2 - y2|) f(y2) dy2,

dirichlet_green subtracts the reflected kernel so the image vanishes at the
wall.  Profiles are given on a VerticalGrid; integrals use per-cell product
integration (cubic interpolation of f against exactly integrated exponential
moments) accumulated by two bidiagonal sweeps, so one application costs
O(n2) and stays accurate for stiff complex omega with Re omega >= 0.
"""

from __future__ import annotations

import warnings
import weakref

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "NonpositiveRealPartError",
    "FarBoundaryLeakWarning",
    "free_green",
    "dirichlet_green",
    "boundary_ratio",
    "solve_pressure",
]


class NonpositiveRealPartError(ValueError):
    """The kernel decay rate omega must have strictly positive real part."""


class FarBoundaryLeakWarning(UserWarning):
    """exp(-Re omega * h) is not negligible: the truncated tail matters."""


_INTERP_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _cell_interp(grid):
    """Per-cell cubic interpolation stencils in local cell coordinates.

    Returns (idx, tmat): idx[j] are the 4 node indices serving cell j and
    tmat[j] maps values at those nodes to monomial coefficients of the cubic
    in tau = (y - x_j) / (x_{j+1} - x_j).
    """
    cached = _INTERP_CACHE.get(grid)
    if cached is not None:
        return cached
    x = grid.nodes
    n = grid.n2
    ncell = n - 1
    idx = np.empty((ncell, 4), dtype=np.intp)
    tmat = np.empty((ncell, 4, 4))
    for j in range(ncell):
        lo = min(max(j - 1, 0), n - 4)
        idx[j] = np.arange(lo, lo + 4)
        tau = (x[idx[j]] - x[j]) / (x[j + 1] - x[j])
        tmat[j] = np.linalg.inv(np.vander(tau, 4, increasing=True))
    _INTERP_CACHE[grid] = (idx, tmat)
    return idx, tmat


def _decay_moments(z: np.ndarray, kmax: int = 3) -> np.ndarray:
    """J_k(z) = int_0^1 tau^k exp(-z tau) dtau for k = 0..kmax, Re z >= 0.

    Series for small |z| (the recurrence cancels there), upward recurrence
    otherwise; both stay bounded since |exp(-z)| <= 1.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty((kmax + 1,) + z.shape, dtype=complex)
    small = np.abs(z) <= 2.0
    zs = np.where(small, z, 0.0)
    for k in range(kmax + 1):
        acc = np.zeros_like(zs)
        term = np.ones_like(zs)
        for m in range(25):
            acc = acc + term / (k + m + 1.0)
            term = term * (-zs) / (m + 1.0)
        out[k] = acc
    zb = np.where(small, 1.0, z)
    ez = np.exp(-zb)
    jk = (1.0 - ez) / zb
    out[0] = np.where(small, out[0], jk)
    for k in range(1, kmax + 1):
        jk = (k * jk - ez) / zb
        out[k] = np.where(small, out[k], jk)
    return out


def _cell_weights(grid, omega: complex):
    """Product-integration weights of every cell for one decay rate omega.

    Returns (idx, wl, wr, decay): q_left[j] = wl[j] . f[idx[j]] integrates
    f against exp(-omega (x_{j+1} - y)) over cell j, q_right[j] likewise
    against exp(-omega (y - x_j)), and decay[j] = exp(-omega dx_j).
    """
    idx, tmat = _cell_interp(grid)
    dx = grid.spacings
    z = omega * dx
    jmom = _decay_moments(z)  # (4, ncell)
    # "left" kernel moments int tau^k exp(-z(1-tau)) via binomial flip of J_k
    imom = np.empty_like(jmom)
    imom[0] = jmom[0]
    imom[1] = jmom[0] - jmom[1]
    imom[2] = jmom[0] - 2 * jmom[1] + jmom[2]
    imom[3] = jmom[0] - 3 * jmom[1] + 3 * jmom[2] - jmom[3]
    wl = np.einsum("mj,jmk->jk", imom, tmat) * dx[:, None]
    wr = np.einsum("mj,jmk->jk", jmom, tmat) * dx[:, None]
    return idx, wl, wr, np.exp(-z)


def _sweeps(grid, omega: complex, f: np.ndarray):
    """Return L, R with L_i = int_0^{x_i} e^{-omega(x_i-y)} f and R_i its mirror."""
    idx, wl, wr, decay = _cell_weights(grid, omega)
    fcols = f if f.ndim == 2 else f[:, None]
    fst = fcols[idx]  # (ncell, 4, m)
    ql = np.einsum("jk,jkm->jm", wl, fst)
    qr = np.einsum("jk,jkm->jm", wr, fst)
    n = grid.n2
    # L_{i+1} - decay_i L_i = ql_i with L_0 = 0: lower-bidiagonal solve
    ab = np.zeros((2, n), dtype=complex)
    ab[0] = 1.0
    ab[1, :-1] = -decay
    rhs = np.zeros((n, ql.shape[1]), dtype=complex)
    rhs[1:] = ql
    left = solve_banded((1, 0), ab, rhs)
    # R_i - decay_i R_{i+1} = qr_i with R_{n-1} = 0: upper-bidiagonal solve
    ab = np.zeros((2, n), dtype=complex)
    ab[1] = 1.0
    ab[0, 1:] = -decay
    rhs = np.zeros((n, qr.shape[1]), dtype=complex)
    rhs[:-1] = qr
    right = solve_banded((0, 1), ab, rhs)
    if f.ndim == 1:
        return left[:, 0], right[:, 0]
    return left, right


def _check_omega(omega: complex, grid, tail_tol: float = 1e-12):
    if not np.real(omega) > 0.0:
        raise NonpositiveRealPartError(f"Re omega = {np.real(omega):g} is not > 0")
    if np.exp(-np.real(omega) * grid.h) > tail_tol:
        warnings.warn(
            f"exp(-Re omega * h) = {np.exp(-np.real(omega) * grid.h):.2e} exceeds "
            f"{tail_tol:g}; the truncated far-field tail is not negligible",
            FarBoundaryLeakWarning,
            stacklevel=3,
        )


def free_green(omega: complex, f: np.ndarray, grid) -> np.ndarray:
    """Free-space solution profile of (omega^2 - d2^2) v = f decaying both ways.

    The wall value is profile[0] and satisfies d2 v(0) = omega v(0).
    Accepts a profile (n2,) or a stack of profiles (n2, m).
    """
    _check_omega(omega, grid)
    left, right = _sweeps(grid, omega, np.asarray(f, dtype=complex))
    return (left + right) / (2.0 * omega)


def free_green_with_deriv(omega: complex, f: np.ndarray, grid):
    """free_green profile together with its exact vertical derivative.

    With L, R the one-sided kernel accumulations, v = (L + R)/(2 omega) and
    v' = (R - L)/2, so the derivative needs no finite differencing (the
    kernel kink contributes the sign split, nothing else).
    """
    _check_omega(omega, grid)
    left, right = _sweeps(grid, omega, np.asarray(f, dtype=complex))
    return (left + right) / (2.0 * omega), (right - left) / 2.0


def dirichlet_green(omega: complex, f: np.ndarray, grid) -> np.ndarray:
    """Half-line solution with v(0) = 0: free kernel minus its wall reflection."""
    e = free_green(omega, f, grid)
    tail = np.exp(-omega * grid.nodes)
    out = e - (tail[:, None] * e[0] if e.ndim == 2 else tail * e[0])
    out[0] = 0.0
    return out


def boundary_ratio(omega: complex, xi1: float, x2) -> np.ndarray:
    """2 omega (exp(-|xi1| x2) - exp(-omega x2)) / (omega - |xi1|).

    The ratio of the Dirichlet kernel image of exp(-|xi1| x2) to its free
    wall value; the removable singularity at omega -> |xi1| is evaluated by
    series (limit 2 |xi1| x2 exp(-|xi1| x2)).
    """
    x2 = np.asarray(x2, dtype=float)
    a = abs(xi1)
    d = omega - a
    if abs(d) < 1e-7 * (abs(omega) + a):
        poly = x2 * (1.0 - d * x2 / 2.0 + d**2 * x2**2 / 6.0 - d**3 * x2**3 / 24.0)
        return 2.0 * omega * np.exp(-a * x2) * poly
    return 2.0 * omega * (np.exp(-a * x2) - np.exp(-omega * x2)) / d


def boundary_ratio_deriv(omega: complex, xi1: float, x2) -> np.ndarray:
    """Vertical derivative of boundary_ratio, same series fallback."""
    x2 = np.asarray(x2, dtype=float)
    a = abs(xi1)
    d = omega - a
    if abs(d) < 1e-7 * (abs(omega) + a):
        poly = (1.0 - a * x2) - d * (x2 - a * x2**2 / 2.0) + d**2 * (x2**2 / 2.0 - a * x2**3 / 6.0)
        return 2.0 * omega * np.exp(-a * x2) * poly
    return 2.0 * omega * (-a * np.exp(-a * x2) + omega * np.exp(-omega * x2)) / d


def solve_pressure(xi1: float, f1: np.ndarray, f2: np.ndarray, grid, coeff: complex = 0.0):
    """Pressure profile for one horizontal mode from the forcing pair.

    Solves (d2^2 - xi1^2) p = i xi1 f1 + d2 f2 as
    p = coeff * exp(-|xi1| x2) - E_{|xi1|}[i xi1 f1 + d2 f2]; the boundary
    coefficient is owned by the resolvent assembly (its wall system), so a
    standalone call defaults to the particular solution.  Returns (p, coeff).
    """
    if xi1 == 0.0:
        raise ValueError("the pressure solve divides by |xi1|; handle the mean mode separately")
    g = 1j * xi1 * np.asarray(f1, dtype=complex) + grid.d1 @ np.asarray(f2, dtype=complex)
    p = coeff * np.exp(-abs(xi1) * grid.nodes) - free_green(abs(xi1), g, grid)
    return p, coeff
