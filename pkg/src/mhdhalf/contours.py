"""Integration paths in the lam plane and the numerical inverse transform.

The undeformed path is a wide vee of two rays at +-120 degrees from a real
abscissa R chosen so Re omega > 0 along it.  The deformed family hugs the
branch-cut skeleton of the symbol omega(lam, xi1):

* a real cut lam = -eta - xi1^2, eta > 0, wrapped on both sides;
* for |xi1| <= 2, two oblique cut arcs on the circle |lam + xi1^2| = |xi1|
  joining the branch points lam'_pm to the real axis at -xi1^2 - |xi1|
  (there the real-cut lip signs flip);
* for |xi1| > 2, a closed loop around the real cut segment [lam'_-, lam'_+];
* a small circle of radius epsilon around the pole -xi1^2.

Every segment yields quadrature points together with the correct one-sided
value of omega, so evaluators receive (lam, omega) pairs and never have to
resolve the branch themselves.  inverse_laplace refines Gauss-Legendre
panels until two refinement levels agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dispersion import branch_points, omega as omega_principal

__all__ = [
    "ContourSpec",
    "Segment",
    "InverseLaplaceError",
    "bromwich_abscissa",
    "bromwich_contour",
    "deformed_contour",
    "inverse_laplace",
]


class InverseLaplaceError(RuntimeError):
    """Panel refinement did not converge to the requested tolerance."""


def _gauss_panels(breaks: np.ndarray, level: int, order: int = 12):
    """Gauss-Legendre nodes/weights on panels refined by 2**level splits."""
    bp = np.asarray(breaks, dtype=float)
    for _ in range(level):
        bp = np.sort(np.concatenate([bp, 0.5 * (bp[1:] + bp[:-1])]))
    xg, wg = np.polynomial.legendre.leggauss(order)
    a, b = bp[:-1], bp[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def _geometric_breaks(lo: float, hi: float, scale: float, max_panels: int = 24):
    """Panel boundaries growing geometrically from lo with the given scale."""
    pts = [lo]
    step = scale
    while pts[-1] + step < hi and len(pts) < max_panels:
        pts.append(pts[-1] + step)
        step *= 2.0
    pts.append(hi)
    return np.array(pts)


@dataclass
class Segment:
    """One parametrized piece; produces (lam, dlam-weight, omega) triples."""

    kind: str                      # "ray" | "cut-wrap" | "circle"
    label: str
    sampler: object = field(repr=False)

    def quadrature(self, level: int, t: float):
        return self.sampler(level, t)


@dataclass
class ContourSpec:
    """An ordered family of segments equivalent to the inversion path."""

    xi1: float
    segments: list
    params: dict

    def labelled(self, label: str) -> "ContourSpec":
        picked = [s for s in self.segments if s.label == label]
        if not picked:
            raise KeyError(f"no segment labelled {label!r}")
        return ContourSpec(self.xi1, picked, self.params)


def bromwich_abscissa(xi1: float) -> float:
    """R = 2 max(1, xi1^2) + 1 keeps Re omega > 0 along the vee."""
    return 2.0 * max(1.0, xi1 * xi1) + 1.0


def _cut_mod(eta, a):
    return np.sqrt(eta + a * a + a * a / eta)


def bromwich_contour(xi1: float, R: float | None = None) -> ContourSpec:
    R = bromwich_abscissa(xi1) if R is None else float(R)
    segs = []
    for sign, orient in ((1.0, 1.0), (-1.0, -1.0)):
        direction = np.exp(sign * 2j * np.pi / 3.0)

        def sampler(level, t, direction=direction, orient=orient):
            eta_max = 2.0 * R + 120.0 / max(t, 1e-3)
            breaks = _geometric_breaks(0.0, eta_max, min(1.0, 1.0 / max(t, 1e-3)))
            eta, w = _gauss_panels(breaks, level)
            lam = R + eta * direction
            om = omega_principal(lam, xi1)
            return lam, orient * direction * w, om

        segs.append(Segment("ray", "bromwich", sampler))
    return ContourSpec(xi1, segs, {"R": R})


def deformed_contour(xi1: float, eps: float = 1e-2) -> ContourSpec:
    """The cut-hugging family of the everywhere-principal branch.

    The branch with Re omega >= 0 off its cuts keeps every kernel bounded
    along the path; its cut skeleton is the real ray lam <= -xi1^2, the
    portion of the spectral circle |lam + xi1^2| = |xi1| where
    omega^2 <= 0 (an arc pair ending on the real axis for |xi1| <= 2,
    the full circle for |xi1| > 2), and, for |xi1| > 2, the real segment
    [lam'_-, lam'_+].  Lip values are the one-sided limits -+i|omega|; they
    flip wherever another cut branch crosses (the real ray at eta = |xi1|,
    the segment where the circle crosses it).  The pole at -xi1^2 is
    enclosed by a circle of radius eps > 0.
    """
    a = abs(float(xi1))
    if a == 0.0:
        raise ValueError("contours are defined per nonzero horizontal wavenumber")
    if eps <= 0.0:
        raise ValueError("the pole circle needs radius eps > 0")
    bp = branch_points(xi1)
    lam_pole = -a * a
    segs = []
    params = {
        "R": bromwich_abscissa(xi1),
        "epsilon": eps,
        "tilde_d": np.sqrt(2.0 * np.sqrt(2.0) * a + a * a),
        "tilde_d_prime": np.sqrt(max(a * a - 2.0 * a, 0.0)),
        "d0": bp.lam_prime_plus.real + a + a * a,
    }

    def circle(level, t):
        breaks = np.linspace(-np.pi, np.pi, 9)
        g, w = _gauss_panels(breaks, level)
        lam = lam_pole + eps * np.exp(1j * g)
        om = omega_principal(lam, xi1)
        return lam, 1j * eps * np.exp(1j * g) * w, om

    def ray_inner(level, t):
        # between the pole circle and the spectral-circle junction eta = a
        if eps >= a:
            return (np.empty(0, complex),) * 3
        breaks = _geometric_breaks(eps, a, eps)
        eta, w = _gauss_panels(breaks, level)
        lam = lam_pole - eta + 0j
        mod = _cut_mod(eta, a)
        # lower lip (+i) minus upper lip (-i), walk direction in the weights
        return np.concatenate([lam, lam]), np.concatenate([w, -w]), \
            np.concatenate([1j * mod, -1j * mod])

    def ray_outer(level, t):
        eta_max = a + 100.0 / max(t, 1e-3)
        breaks = _geometric_breaks(a, eta_max, min(1.0, 1.0 / max(t, 1e-3)))
        eta, w = _gauss_panels(breaks, level)
        lam = lam_pole - eta + 0j
        mod = _cut_mod(eta, a)
        # lips flipped past the junction: lower is -i, upper +i
        return np.concatenate([lam, lam]), np.concatenate([w, -w]), \
            np.concatenate([-1j * mod, 1j * mod])

    def arcs(level, t):
        # spectral-circle portion with omega^2 <= 0, wrapped on both sides;
        # outer lip on the upper half is +i|omega|, mirrored below
        phi0 = np.arccos(a / 2.0) if a <= 2.0 else 0.0
        sigma, ws = _gauss_panels(np.linspace(0.0, 1.0, 5), level)
        if a <= 2.0:
            phi = phi0 + (np.pi - phi0) * sigma**2   # cluster at the branch point
            dphi = (np.pi - phi0) * 2.0 * sigma * ws
        else:
            phi = np.pi * sigma
            dphi = np.pi * ws
        mod = np.sqrt(np.maximum(a * a - 2.0 * a * np.cos(phi), 0.0))
        lam_up = lam_pole + a * np.exp(1j * phi)
        lam_dn = lam_pole + a * np.exp(-1j * phi)
        dlam_up = 1j * a * np.exp(1j * phi) * dphi
        dlam_dn = -1j * a * np.exp(-1j * phi) * dphi
        lam = np.concatenate([lam_up, lam_up, lam_dn, lam_dn])
        wgt = np.concatenate([dlam_up, -dlam_up, -dlam_dn, dlam_dn])
        om = np.concatenate([1j * mod, -1j * mod, -1j * mod, 1j * mod])
        return lam, wgt, om

    segs.append(Segment("cut-wrap", "real-cut-inner", ray_inner))
    segs.append(Segment("cut-wrap", "real-cut-outer", ray_outer))
    segs.append(Segment("cut-wrap", "arc", arcs))
    segs.append(Segment("circle", "pole-circle", circle))

    if a > 2.0:
        lp, lm = bp.lam_prime_plus.real, bp.lam_prime_minus.real
        cross = lam_pole + a   # where the spectral circle crosses the segment

        def loop(level, t):
            # two smooth halves split at the circle crossing (lip flip there),
            # sigma^2 substitution absorbing the sqrt branch-point endpoints
            sigma, ws = _gauss_panels(np.linspace(0.0, 1.0, 5), level)
            xs, dxs, uppers = [], [], []
            for x0, x1 in ((lm, cross), (lp, cross)):
                x = x0 + (x1 - x0) * sigma**2
                dx = (x1 - x0) * 2.0 * sigma * ws
                om2 = (x - lp) * (x - lm) / (x + a * a)
                mod = np.sqrt(np.maximum(-om2, 0.0))
                upper = (-1j if x0 == lm else 1j) * mod
                sign = 1.0 if x0 == lm else -1.0   # keep left-to-right orientation
                xs.append(x)
                dxs.append(sign * dx)
                uppers.append(upper)
            lam = np.concatenate([xs[0], xs[0], xs[1], xs[1]]) + 0j
            wgt = np.concatenate([dxs[0], -dxs[0], dxs[1], -dxs[1]])
            om = np.concatenate([-uppers[0], uppers[0], -uppers[1], uppers[1]])
            return lam, wgt, om

        segs.append(Segment("cut-wrap", "loop", loop))
    return ContourSpec(xi1, segs, params)


def inverse_laplace(spec: ContourSpec, t: float, evaluator, rtol: float = 1e-6,
                    max_refine: int = 7, min_refine: int = 1):
    """(1/2 pi i) int e^{lam t} F(lam) dlam along the spec.

    evaluator(lam, omega) may return a scalar or a profile array; panels are
    doubled until two successive levels agree to rtol in the max norm.
    Raises InverseLaplaceError if max_refine levels are exhausted.
    """
    if t <= 0.0:
        raise ValueError("inversion requires t > 0")

    def total(level):
        acc = None
        for seg in spec.segments:
            lam, w, om = seg.quadrature(level, t)
            if len(lam) == 0:
                continue
            factor = w * np.exp(lam * t)
            vals = np.stack([np.asarray(evaluator(l, o)) for l, o in zip(lam, om)])
            contrib = np.tensordot(factor, vals, axes=(0, 0))
            acc = contrib if acc is None else acc + contrib
        return acc / (2j * np.pi)

    prev = total(0)
    for level in range(1, max_refine + 1):
        cur = total(level)
        scale = np.max(np.abs(cur)) + 1e-300
        if level >= min_refine and np.max(np.abs(cur - prev)) <= rtol * scale:
            return cur
        prev = cur
    raise InverseLaplaceError(f"no convergence to rtol={rtol:g} after {max_refine} refinements")
