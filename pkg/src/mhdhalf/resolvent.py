"""Explicit half-space solution of the Laplace-transformed linear system.

For one horizontal wavenumber xi1 and transform variable lam the velocity
profiles solve (omega^2 - d2^2) u = data with u(0) = 0, assembled from the
Dirichlet Green operator plus a wall-correction proportional to the ratio
kernel; the magnetic profiles follow algebraically as
b = (i xi1 u + b0 + g) / (lam + xi1^2).  A whole-space per-mode oracle
(sine-diagonalizable 2x2 evolution) cross-validates the time-domain
inversion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .dispersion import branch_points, lam_pm, omega
from .greens import boundary_ratio, boundary_ratio_deriv, free_green, free_green_with_deriv

__all__ = [
    "ModeState",
    "ResolventInput",
    "ResolventSolution",
    "BranchProximityError",
    "StepControlError",
    "assemble_resolvent",
    "resolvent_residual",
    "mode_kernel_matrix",
    "evolve_whole_space_mode",
]


class BranchProximityError(ValueError):
    """lam is too close to a branch point or the pole for a resolvent solve."""


class StepControlError(RuntimeError):
    """The reference ODE integration failed or disagrees with the kernel."""


@dataclass(frozen=True)
class ModeState:
    """Complex amplitudes (u1, u2, b1, b2) of a single whole-space mode."""

    u_hat: np.ndarray
    b_hat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u_hat", np.asarray(self.u_hat, dtype=complex))
        object.__setattr__(self, "b_hat", np.asarray(self.b_hat, dtype=complex))
        if self.u_hat.shape != (2,) or self.b_hat.shape != (2,):
            raise ValueError("mode state holds one complex pair per field")
        if not (np.all(np.isfinite(self.u_hat)) and np.all(np.isfinite(self.b_hat))):
            raise ValueError("mode state must be finite")


def _pair(arr, n2, name):
    if arr is None:
        return np.zeros((n2, 2), dtype=complex)
    arr = np.asarray(arr, dtype=complex)
    if arr.shape != (n2, 2):
        raise ValueError(f"{name} must have shape (n2, 2), got {arr.shape}")
    return arr


@dataclass
class ResolventInput:
    """Mode data (initial profiles and Laplace-space forcing) at one (xi1, lam)."""

    xi1: float
    lam: complex
    u0: np.ndarray
    b0: np.ndarray
    f: np.ndarray | None = None
    g: np.ndarray | None = None

    def validate(self, grid, div_tol: float = 1e-8, wall_tol: float = 1e-6):
        """Check discrete admissibility: divergence-free u0, wall traces zero.

        Tolerances are relative to the data scale; wall traces of data built
        by discrete differentiation of a stream function carry the scheme's
        truncation error, hence the looser default.
        """
        u0 = _pair(self.u0, grid.n2, "u0")
        b0 = _pair(self.b0, grid.n2, "b0")
        div = 1j * self.xi1 * u0[:, 0] + grid.d1 @ u0[:, 1]
        scale = max(np.max(np.abs(u0)), 1.0)
        if np.max(np.abs(div[2:-2])) > div_tol * scale:
            raise ValueError("u0 is not discretely divergence-free")
        if max(np.max(np.abs(u0[0])), abs(b0[0, 1])) > wall_tol * scale:
            raise ValueError("u0 and b0[:,1] must vanish at the wall")


@dataclass
class ResolventSolution:
    u: np.ndarray          # (n2, 2) velocity profiles
    b: np.ndarray          # (n2, 2) magnetic profiles
    p: np.ndarray          # (n2,) pressure profile
    wall_coeff: complex    # coefficient of the exp(-|xi1| x2) pressure mode
    omega: complex = field(default=0j)
    du2: np.ndarray | None = None  # quadrature-exact d2 of u[:, 1]


def assemble_resolvent(inp: ResolventInput, grid, include_boundary_correction: bool = True,
                       branch_eps: float = 1e-10) -> ResolventSolution:
    """Solve the transformed mode system at (xi1, lam).

    include_boundary_correction=False drops the wall-ratio terms, leaving
    the free-space (odd-extension) component only; the full solution has
    u(0) = 0 exactly and d2 u2(0) = 0 to discretization accuracy.
    """
    xi1 = float(inp.xi1)
    if xi1 == 0.0:
        raise ValueError("the resolvent formulas divide by |xi1|; the mean mode is handled by the time stepper")
    lam = complex(inp.lam)
    a = abs(xi1)
    bp = branch_points(xi1)
    scale = 1.0 + a * a
    near = min(abs(lam - bp.lam_prime_plus), abs(lam - bp.lam_prime_minus), abs(lam - bp.lam_heat))
    if near < branch_eps * scale:
        raise BranchProximityError(f"lam = {lam} within {branch_eps:g} of a branch point")
    om = complex(omega(lam, xi1))

    n2 = grid.n2
    u0 = _pair(inp.u0, n2, "u0")
    b0 = _pair(inp.b0, n2, "b0")
    ffor = _pair(inp.f, n2, "f")
    gfor = _pair(inp.g, n2, "g")
    s = 1j * xi1 / (lam + a * a)

    # pressure particular part from the forcing (zero for linear data)
    if np.any(ffor):
        gsrc = 1j * xi1 * ffor[:, 0] + grid.d1 @ ffor[:, 1]
        pp, dpp = free_green_with_deriv(a, gsrc, grid)
    else:
        pp = np.zeros(n2, dtype=complex)
        dpp = np.zeros(n2, dtype=complex)

    stack = np.stack([
        u0[:, 0] + ffor[:, 0],
        b0[:, 0] + gfor[:, 0],
        pp,
        u0[:, 1] + ffor[:, 1],
        b0[:, 1] + gfor[:, 1],
        dpp,
    ], axis=1)
    efull, defull = free_green_with_deriv(om, stack, grid)
    wall = efull[0].copy()
    decay = np.exp(-om * grid.nodes)
    nfull = efull - decay[:, None] * wall
    nfull[0] = 0.0
    # exact derivative of the Dirichlet images: d2 N[f] = d2 E[f] + om e^{-om x} E[f](0)
    dnfull = defull + om * decay[:, None] * wall
    nf1, ng1, npp, nf2, ng2, ndp = nfull.T
    dn2 = dnfull[:, 3] + s * dnfull[:, 4] + dnfull[:, 5]

    u1 = nf1 + s * ng1 + 1j * xi1 * npp
    u2 = nf2 + s * ng2 + ndp
    theta = wall[3] + s * wall[4] + wall[5]
    if include_boundary_correction:
        ratio = boundary_ratio(om, xi1, grid.nodes)
        u1 = u1 + (1j * xi1 / a) * ratio * theta
        u2 = u2 - ratio * theta
        dn2 = dn2 - boundary_ratio_deriv(om, xi1, grid.nodes) * theta
        u1[0] = 0.0
        u2[0] = 0.0
    u = np.stack([u1, u2], axis=1)
    b = (1j * xi1 * u + b0 + gfor) / (lam + a * a)
    # exact wall value of the free kernel image of exp(-|xi1| x2)
    e_exp_wall = 1.0 / (2.0 * om * (om + a))
    coeff = -theta / (a * e_exp_wall)
    p = coeff * np.exp(-a * grid.nodes) - pp
    return ResolventSolution(u=u, b=b, p=p, wall_coeff=coeff, omega=om, du2=dn2)


def resolvent_residual(inp: ResolventInput, sol: ResolventSolution, grid, n_edge: int = 4):
    """Discrete residual of the transformed system, by independent operators.

    Applies 4th-order differentiation matrices to the assembled profiles
    (nothing is reused from the quadrature path).  Returns a dict with the
    interior relative residual of each momentum/induction row, the interior
    divergence, and the wall values.
    """
    xi1, lam = inp.xi1, complex(inp.lam)
    a2 = xi1 * xi1
    n2 = grid.n2
    u0 = _pair(inp.u0, n2, "u0")
    b0 = _pair(inp.b0, n2, "b0")
    ffor = _pair(inp.f, n2, "f")
    gfor = _pair(inp.g, n2, "g")
    d1, d2 = grid.d1, grid.d2
    u, b, p = sol.u, sol.b, sol.p
    r_u1 = lam * u[:, 0] - d2 @ u[:, 0] - 1j * xi1 * b[:, 0] + 1j * xi1 * p - (u0[:, 0] + ffor[:, 0])
    r_u2 = lam * u[:, 1] - d2 @ u[:, 1] - 1j * xi1 * b[:, 1] + d1 @ p - (u0[:, 1] + ffor[:, 1])
    r_b = lam * b + a2 * b - 1j * xi1 * u - (b0 + gfor)
    div = 1j * xi1 * u[:, 0] + d1 @ u[:, 1]
    sl = slice(n_edge, n2 - n_edge)
    scale = max(np.max(np.abs(u0 + ffor)), np.max(np.abs(b0 + gfor)), 1e-300)
    out = {
        "rel_r_u1": float(np.max(np.abs(r_u1[sl])) / scale),
        "rel_r_u2": float(np.max(np.abs(r_u2[sl])) / scale),
        "rel_r_b": float(np.max(np.abs(r_b[sl])) / scale),
        "div_interior": float(np.max(np.abs(div[sl]))),
        "wall_u": float(np.max(np.abs(u[0]))),
        "wall_b2": float(abs(b[0, 1])),
        "wall_d2u2": float(abs((d1 @ u[:, 1])[0])),
    }
    if sol.du2 is not None:
        div_exact = 1j * xi1 * u[:, 0] + sol.du2
        out["div_exact"] = float(np.max(np.abs(div_exact[sl])))
        out["wall_d2u2_exact"] = float(abs(sol.du2[0]))
    return out


def mode_kernel_matrix(xi1: float, xi2: float, t: float) -> np.ndarray:
    """Closed-form propagator exp(t A) of the whole-space 2x2 mode system.

    A = [[-xi2^2, i xi1], [i xi1, -xi1^2]] acting on (u_j, b_j) for either
    component j; expressed through the eigenvalue pair with the double-root
    limit handled by series.
    """
    lp, lm = (complex(v) for v in lam_pm(xi1, xi2))
    gap = lp - lm
    scale = xi1 * xi1 + xi2 * xi2 + 1.0
    if abs(gap) < 1e-9 * scale:
        lam_c = 0.5 * (lp + lm)
        ec = np.exp(lam_c * t)
        phi0 = t * ec
        k11 = ec * (1.0 + (lam_c + xi1 * xi1) * t)
        k22 = ec * (1.0 + (lam_c + xi2 * xi2) * t)
    else:
        ep, em = np.exp(lp * t), np.exp(lm * t)
        phi0 = (ep - em) / gap
        k11 = ((lp + xi1 * xi1) * ep - (lm + xi1 * xi1) * em) / gap
        k22 = ((lp + xi2 * xi2) * ep - (lm + xi2 * xi2) * em) / gap
    k12 = 1j * xi1 * phi0
    return np.array([[k11, k12], [k12, k22]], dtype=complex)


def evolve_whole_space_mode(xi1: float, xi2: float, m0: ModeState, t: float,
                            check: bool = True, agree_tol: float = 1e-8) -> ModeState:
    """Evolve one whole-space mode; kernel evaluation checked against an ODE solve.

    The closed-form kernel result is returned; with check=True a high-order
    adaptive integration of u' = -xi2^2 u + i xi1 b, b' = -xi1^2 b + i xi1 u
    must agree within agree_tol or StepControlError is raised.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    kern = mode_kernel_matrix(xi1, xi2, t)
    pairs = np.stack([m0.u_hat, m0.b_hat])  # (2 fields, 2 components)
    out = kern @ pairs
    result = ModeState(u_hat=out[0], b_hat=out[1])
    if check and t > 0.0:
        amat = np.array([[-xi2 * xi2, 1j * xi1], [1j * xi1, -xi1 * xi1]], dtype=complex)

        def rhs(_, y):
            z = y[:4] + 1j * y[4:]
            dz = amat @ z.reshape(2, 2)
            return np.concatenate([dz.real.ravel(), dz.imag.ravel()])

        y0 = np.concatenate([pairs.real.ravel(), pairs.imag.ravel()])
        ivp = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=1e-11, atol=1e-13)
        if not ivp.success:
            raise StepControlError(f"reference integration failed: {ivp.message}")
        zt = (ivp.y[:4, -1] + 1j * ivp.y[4:, -1]).reshape(2, 2)
        gap = np.max(np.abs(zt - out))
        if gap > agree_tol * (1.0 + np.max(np.abs(pairs))):
            raise StepControlError(f"kernel/integrator disagreement {gap:.2e}")
    return result
