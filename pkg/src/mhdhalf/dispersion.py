"""Symbol algebra for the damped-wave dispersion relation of the linearized system.

Per horizontal/vertical wavenumber pair (xi1, xi2) the whole-space linearization
reduces to a 2x2 system with generator

    A = [[-xi2**2, 1j*xi1],
         [ 1j*xi1, -xi1**2]]

whose eigenvalues lam_pm satisfy

    lam_pm = -(xi1^2 + xi2^2)/2 +- sqrt((xi1^2 - xi2^2)^2 - 4 xi1^2)/2,

oscillatory (complex pair) when |xi1^2 - xi2^2| <= 2|xi1| and overdamped
otherwise.  This module provides the eigenvalues, the resolvent symbol

    omega(lam, xi1) = sqrt(lam + xi1^2/(lam + xi1^2)),

its branch points, the four propagator amplitudes that multiply initial data
in the mode solution, the four-band partition of frequency space, and a
finite-grid certification of the pointwise amplitude bounds of each band.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Frequency",
    "EigenPair",
    "BranchPoints",
    "CaseRegion",
    "BoundReport",
    "PoleError",
    "CaseGridError",
    "C0_LOWER",
    "C0_DEFAULT",
    "eigenvalues",
    "lam_pm",
    "branch_points",
    "omega",
    "omega_on_cut",
    "kernel_amplitudes",
    "kernel_amplitudes_grid",
    "classify",
    "classify_grid",
    "case_majorants",
    "sample_case_grid",
    "certify_bounds",
    "re_sq_from_square",
]

# Width of the oscillatory band c0 interval: the overdamped band-c estimate
# exp(-c0*(xi1^2+xi2^2)*t) holds for any c0 in (1/2 - sqrt(15)/8, 1/2).
C0_LOWER = 0.5 - np.sqrt(15.0) / 8.0
C0_DEFAULT = C0_LOWER + 0.04

# Relative scale below which lam_plus == lam_minus is treated as a double root
# and the removable singularity is evaluated by its series limit.
_DOUBLE_ROOT_RTOL = 1e-9


class PoleError(ValueError):
    """lam is too close to the pole at -xi1^2 for the symbol to be evaluated."""


class CaseGridError(ValueError):
    """A certification grid contains frequencies outside the requested band."""


@dataclass(frozen=True)
class Frequency:
    """A dual-space point (xi1, xi2); xi1 = 0 only where an operation allows it."""

    xi1: float
    xi2: float

    def __post_init__(self):
        if not (np.isfinite(self.xi1) and np.isfinite(self.xi2)):
            raise ValueError("frequency components must be finite")


@dataclass(frozen=True)
class EigenPair:
    lam_plus: complex
    lam_minus: complex
    discriminant: float
    oscillatory: bool


@dataclass(frozen=True)
class BranchPoints:
    """Singularities of the resolvent symbol in the lam plane.

    lam_prime_pm solve lam^2 + xi1^2 lam + xi1^2 = 0 (a conjugate pair for
    |xi1| <= 2, real for |xi1| > 2); lam_heat = -xi1^2 is the pole.
    """

    lam_prime_plus: complex
    lam_prime_minus: complex
    lam_heat: float


@dataclass(frozen=True)
class CaseRegion:
    """One of the four bands of |xi1^2 - xi2^2| measured against |xi1|.

    A: d <= a, B: a < d <= 2a, C: 2a < d <= 4a, D: d > 4a, where
    d = |xi1^2 - xi2^2| and a = |xi1|.  Band boundaries belong to the
    lower tag (the band inequalities are non-strict on their left end).
    """

    tag: str

    _ORDER = "ABCD"

    def __post_init__(self):
        if self.tag not in self._ORDER:
            raise ValueError(f"unknown case tag {self.tag!r}")


def lam_pm(xi1, xi2):
    """Vectorized eigenvalue pair; returns (lam_plus, lam_minus) complex arrays."""
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    half_trace = -0.5 * (xi1**2 + xi2**2)
    disc = (xi1**2 - xi2**2) ** 2 - 4.0 * xi1**2
    root = np.sqrt(np.abs(disc)) / 2.0
    osc = disc <= 0.0
    shift = np.where(osc, 1j * root, root + 0j)
    return half_trace + shift, half_trace - shift


def eigenvalues(f: Frequency) -> EigenPair:
    """Both eigenvalue branches at a single frequency (total function)."""
    lp, lm = lam_pm(f.xi1, f.xi2)
    disc = (f.xi1**2 - f.xi2**2) ** 2 - 4.0 * f.xi1**2
    return EigenPair(
        lam_plus=complex(lp),
        lam_minus=complex(lm),
        discriminant=float(disc),
        oscillatory=bool(disc <= 0.0),
    )


def branch_points(xi1: float) -> BranchPoints:
    a2 = xi1 * xi1
    disc = a2 * a2 - 4.0 * a2
    if disc <= 0.0:
        root = 1j * np.sqrt(-disc) / 2.0
    else:
        root = np.sqrt(disc) / 2.0 + 0j
    return BranchPoints(
        lam_prime_plus=complex(-a2 / 2.0 + root),
        lam_prime_minus=complex(-a2 / 2.0 - root),
        lam_heat=-a2,
    )


def omega(lam, xi1, pole_eps: float = 1e-12):
    """Principal branch of the resolvent symbol, Re omega >= 0 off the cuts.

    Raises PoleError when lam is within pole_eps*(1+xi1^2) of the pole
    -xi1^2.  On the branch cuts the principal square root picks one of the
    two side limits arbitrarily; use omega_on_cut for a controlled side.
    """
    lam = np.asarray(lam, dtype=complex)
    a2 = float(xi1) ** 2
    denom = lam + a2
    if np.any(np.abs(denom) <= pole_eps * (1.0 + a2)):
        raise PoleError(f"lam within {pole_eps:g} of the pole at {-a2}")
    return np.sqrt(lam + a2 / denom)


def omega_on_cut(eta, xi1, side: int):
    """Side limit of omega on the real cut lam = -eta - xi1^2, eta > 0.

    side=+1 is the limit from Im lam > 0, side=-1 from below, both for the
    everywhere-principal branch (Re omega >= 0 off the cuts).  The upper
    limit is -i*sqrt(eta + xi1^2 + xi1^2/eta) on eta < |xi1| and flips sign
    across eta = |xi1|, where the spectral circle |lam + xi1^2| = |xi1|
    (the oscillatory eigenvalue locus, itself a cut of this branch) crosses
    the real axis.
    """
    eta = np.asarray(eta, dtype=float)
    a = abs(float(xi1))
    mod = np.sqrt(eta + a * a + a * a / eta)
    upper = np.where(eta < a, -1j * mod, 1j * mod)
    return upper if side > 0 else -upper


def _phi_factors(lp, lm, t, scale):
    """Return (phi1, phi0, phi4): the three divided differences of e^{lam t}.

    phi1 = (lp e^{lp t} - lm e^{lm t})/(lp - lm), phi0 the plain difference
    quotient, phi4 = (lm e^{lp t} - lp e^{lm t})/(lp - lm), with the
    removable double-root singularity replaced by its series limit.
    """
    gap = lp - lm
    degenerate = np.abs(gap) < _DOUBLE_ROOT_RTOL * scale
    safe_gap = np.where(degenerate, 1.0, gap)
    ep, em = np.exp(lp * t), np.exp(lm * t)
    phi0 = (ep - em) / safe_gap
    phi1 = (lp * ep - lm * em) / safe_gap
    phi4 = (lm * ep - lp * em) / safe_gap
    if np.any(degenerate):
        lam_c = 0.5 * (lp + lm)
        ec = np.exp(lam_c * t)
        phi0 = np.where(degenerate, t * ec, phi0)
        phi1 = np.where(degenerate, ec * (1.0 + lam_c * t), phi1)
        phi4 = np.where(degenerate, ec * (1.0 - lam_c * t), phi4)
    return phi1, phi0, phi4


def kernel_amplitudes_grid(xi1, xi2, t):
    """Vectorized propagator amplitudes (M1, M2, M3, M4) at xi1 != 0, t >= 0."""
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("kernel amplitudes are defined for t >= 0")
    lp, lm = lam_pm(xi1, xi2)
    scale = xi1**2 + xi2**2 + 1.0
    phi1, phi0, phi4 = _phi_factors(lp, lm, t, scale)
    m2 = xi1**2 * np.abs(phi0)
    return np.abs(phi1), m2, np.abs(xi1) * np.abs(phi0), np.abs(phi4)


def kernel_amplitudes(f: Frequency, t: float):
    m1, m2, m3, m4 = kernel_amplitudes_grid(f.xi1, f.xi2, t)
    return float(m1), float(m2), float(m3), float(m4)


def classify_grid(xi1, xi2):
    """Band index array (0=A .. 3=D) for xi1 != 0."""
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    if np.any(xi1 == 0.0):
        raise ValueError("the band partition requires xi1 != 0")
    d = np.abs(xi1**2 - xi2**2)
    a = np.abs(xi1)
    return np.select([d <= a, d <= 2 * a, d <= 4 * a], [0, 1, 2], default=3)


def classify(f: Frequency) -> CaseRegion:
    return CaseRegion(CaseRegion._ORDER[int(classify_grid(f.xi1, f.xi2))])


def case_majorants(tag: str, xi1, xi2, t, c0: float = C0_DEFAULT):
    """Per-amplitude decay majorants (maj1..maj4) for the given band.

    Bands A and B share exp(-(xi1^2+xi2^2) t / 2); band C uses
    exp(-c0 (xi1^2+xi2^2) t) with c0 in (1/2 - sqrt(15)/8, 1/2); band D uses
    the weak-field envelope exp(-(xi1^2/xi2^2) t - xi1^2 t) for M4 and the
    same envelope weighted by |xi1|-polynomial over |xi2^2 - xi1^2| factors
    for M1..M3.  The band-D majorants target the xi2^2 > xi1^2 + 4|xi1|
    sub-band (the complementary sub-band requires |xi1| > 4 and decays at a
    uniform exponential rate instead).
    """
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    t = np.asarray(t, dtype=float)
    if tag in ("A", "B"):
        base = np.exp(-0.5 * (xi1**2 + xi2**2) * t)
        return base, base, base, base
    if tag == "C":
        if not (C0_LOWER < c0 < 0.5):
            raise ValueError(f"c0 must lie in ({C0_LOWER:.6f}, 0.5)")
        base = np.exp(-c0 * (xi1**2 + xi2**2) * t)
        return base, base, base, base
    if tag == "D":
        sep = np.abs(xi2**2 - xi1**2)
        base = np.exp(-(xi1**2 / xi2**2) * t - xi1**2 * t)
        a = np.abs(xi1)
        return (
            (a + a**2 + a**3) / sep * base,
            a**2 / sep * base,
            a / sep * base,
            base,
        )
    raise ValueError(f"unknown case tag {tag!r}")


def sample_case_grid(tag: str, n_freq: int, n_t: int, xi1_range=(0.1, 1.2), t_max=5.0):
    """Deterministic (xi1, xi2, t) grid inside one band, t=0 row included.

    Frequencies are sampled on the xi2^2 >= xi1^2 side of each band (the
    side that exists for all |xi1|; band D is restricted to its weak-field
    sub-band xi2^2 > xi1^2 + 4|xi1| with a bounded separation so that the
    fitted constants stay O(1)).
    """
    n_a = max(2, int(round(np.sqrt(n_freq))))
    n_b = max(2, (n_freq + n_a - 1) // n_a)
    a_vals = np.linspace(xi1_range[0], xi1_range[1], n_a)
    frac = np.linspace(0.0, 1.0, n_b + 1)[1:]  # avoid the previous band's edge
    bands = {"A": (0.0, 1.0), "B": (1.0, 2.0), "C": (2.0, 4.0), "D": (4.2, 7.0)}
    lo, hi = bands[tag]
    aa, ff = np.meshgrid(a_vals, frac, indexing="ij")
    if tag == "A":
        sep = aa * ff  # d in (0, a]
    else:
        sep = aa * (lo + (hi - lo) * ff)
    xi2 = np.sqrt(aa**2 + sep)
    t = np.concatenate([[0.0], np.geomspace(0.05, t_max, n_t - 1)])
    return aa.ravel(), xi2.ravel(), t


@dataclass(frozen=True)
class BoundReport:
    """Minimal constants C with M_k <= C * majorant_k over a finite grid."""

    case: str
    n_samples: int
    c_m1: float
    c_m2: float
    c_m3: float
    c_m4: float
    worst_xi1: float
    worst_xi2: float
    worst_t: float
    c0: float = C0_DEFAULT

    def all_constants(self):
        return (self.c_m1, self.c_m2, self.c_m3, self.c_m4)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("case,n_samples,C_M1,C_M2,C_M3,C_M4,worst_xi1,worst_xi2,worst_t,c0\n")
        buf.write(
            f"{self.case},{self.n_samples},{self.c_m1:.12g},{self.c_m2:.12g},"
            f"{self.c_m3:.12g},{self.c_m4:.12g},{self.worst_xi1:.12g},"
            f"{self.worst_xi2:.12g},{self.worst_t:.12g},{self.c0:.12g}\n"
        )
        return buf.getvalue()


def certify_bounds(xi1, xi2, t, case: CaseRegion | str, c0: float = C0_DEFAULT) -> BoundReport:
    """Fit the smallest constants bounding M1..M4 by the band majorants.

    xi1, xi2 are frequency arrays (same shape), t a time array; the report
    covers the tensor grid frequencies x times.  Raises CaseGridError if any
    frequency classifies outside the requested band.
    """
    tag = case.tag if isinstance(case, CaseRegion) else str(case)
    xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if xi1.size == 0 or t.size == 0:
        raise CaseGridError("certification grid must be nonempty")
    idx = classify_grid(xi1, xi2)
    want = CaseRegion._ORDER.index(tag)
    if np.any(idx != want):
        bad = np.argmax(idx != want)
        raise CaseGridError(
            f"grid point (xi1={xi1.flat[bad]:g}, xi2={xi2.flat[bad]:g}) "
            f"classifies as {CaseRegion._ORDER[int(idx.flat[bad])]}, not {tag}"
        )
    x1 = xi1[:, None]
    x2 = xi2[:, None]
    tt = t[None, :]
    amps = kernel_amplitudes_grid(x1, x2, tt)
    majs = case_majorants(tag, x1, x2, tt, c0=c0)
    consts = []
    worst_ratio, worst = -np.inf, (0, 0)
    for amp, maj in zip(amps, majs):
        ratio = amp / maj
        k = np.unravel_index(np.argmax(ratio), ratio.shape)
        consts.append(float(ratio[k]))
        if ratio[k] > worst_ratio:
            worst_ratio, worst = float(ratio[k]), k
    return BoundReport(
        case=tag,
        n_samples=int(xi1.size * t.size),
        c_m1=consts[0],
        c_m2=consts[1],
        c_m3=consts[2],
        c_m4=consts[3],
        worst_xi1=float(x1[worst[0], 0]),
        worst_xi2=float(x2[worst[0], 0]),
        worst_t=float(t[worst[1]]),
        c0=c0,
    )


def re_sq_from_square(z):
    """(Re z)^2 recovered from z^2 alone: (|z^2| + Re z^2) / 2."""
    w = np.asarray(z, dtype=complex) ** 2
    return (np.hypot(w.real, w.imag) + w.real) / 2.0
