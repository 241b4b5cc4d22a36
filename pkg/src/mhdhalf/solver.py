"""IMEX time integration of the perturbation system on the half strip.

Per horizontal mode, vertical velocity diffusion is implicit (one shared
dense factorization, Dirichlet walls), horizontal magnetic diffusion is an
algebraic multiplier, and the field coupling plus the de-aliased
pseudo-spectral nonlinearity are explicit (Crank-Nicolson/Adams-Bashforth 2
by default, backward/forward Euler at order 1).  The velocity is re-projected
every step; u = 0 and b2 = 0 wall rows are enforced strongly; b1 on the wall
evolves freely.

The viscous operator is the quadrature-adjoint second derivative, so the
semi-discrete linear flow obeys d/dt (||u||^2 + ||b||^2)/2 =
-||d2 u||^2 - ||d1 b||^2 exactly in the discrete norms; the stepper
accumulates that dissipation integral trapezoidally for the energy-identity
ledger.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .fields import Field2D, _projection_factors, deriv, helmholtz_project

__all__ = ["SolverConfig", "StepReport", "CFLError", "BlowupError", "Stepper", "rhs", "run"]

_STATE = ("u1", "u2", "b1", "b2")


class CFLError(RuntimeError):
    """dt exceeds the stability estimate for the explicit terms."""


class BlowupError(RuntimeError):
    """Non-finite values appeared in the state."""


@dataclass
class SolverConfig:
    dt: float
    t_end: float
    imex_order: int = 2
    cfl_safety: float = 0.8
    filter_strength: float = 0.0
    linear_only: bool = False

    def __post_init__(self):
        if self.dt <= 0.0 or self.t_end < 0.0:
            raise ValueError("dt must be positive and t_end nonnegative")
        if self.imex_order not in (1, 2):
            raise ValueError("imex_order must be 1 or 2")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.filter_strength < 0.0:
            raise ValueError("filter_strength must be nonnegative")


@dataclass
class StepReport:
    t: float
    max_div: float
    boundary_b1_max: float
    dt_used: float


def _require_state(state: Field2D):
    if tuple(state.components) != _STATE:
        raise ValueError(f"state needs components {_STATE}, got {tuple(state.components)}")


def _nonlinear(state: Field2D, mask: np.ndarray):
    """De-aliased pseudo-spectral -(u.grad)u + (b.grad)b and magnetic twin."""
    n1 = state.n1
    k = state.wavenumbers
    d1mat = state.grid2.d1
    phys, dx1, dx2 = {}, {}, {}
    for name, c in state.components.items():
        cm = c * mask[:, None]
        phys[name] = np.real(np.fft.ifft(cm * n1, axis=0))
        dx1[name] = np.real(np.fft.ifft(1j * k[:, None] * cm * n1, axis=0))
        dx2[name] = np.real(np.fft.ifft((cm @ d1mat.T) * n1, axis=0))
    u1, u2, b1, b2 = (phys[n] for n in _STATE)

    def advect(a1, a2, name):
        return a1 * dx1[name] + a2 * dx2[name]

    out = {
        "u1": -advect(u1, u2, "u1") + advect(b1, b2, "b1"),
        "u2": -advect(u1, u2, "u2") + advect(b1, b2, "b2"),
        "b1": -advect(u1, u2, "b1") + advect(b1, b2, "u1"),
        "b2": -advect(u1, u2, "b2") + advect(b1, b2, "u2"),
    }
    res = {}
    for name, arr in out.items():
        c = np.fft.fft(arr, axis=0) / n1
        c *= mask[:, None]
        c[0] = 0.0   # mean-mode closure: nonlinear feedback on k=0 dropped
        res[name] = c
    return res


class Stepper:
    """Owns the factorizations and advances one state exclusively."""

    def __init__(self, n1: int, l1: float, grid2, cfg: SolverConfig):
        self.cfg = cfg
        self.n1, self.l1, self.grid2 = n1, float(l1), grid2
        self.k = 2.0 * np.pi * np.fft.fftfreq(n1, d=1.0 / n1) / l1
        self.mask = (np.abs(np.fft.fftfreq(n1, d=1.0 / n1) * n1) <= n1 // 3).astype(float)
        if cfg.filter_strength > 0.0:
            frac = np.abs(np.fft.fftfreq(n1, d=1.0 / n1) * n1) / max(n1 // 2, 1)
            self.filter = np.exp(-cfg.filter_strength * frac**8)
        else:
            self.filter = None
        n2 = grid2.n2
        visc = grid2.d2_sym
        theta = 0.5 if cfg.imex_order == 2 else 1.0
        mat = np.eye(n2) - cfg.dt * theta * visc
        mat[0, :] = 0.0
        mat[0, 0] = 1.0
        mat[-1, :] = 0.0
        mat[-1, -1] = 1.0
        self._visc_lu = lu_factor(mat)
        self._visc_expl = None if cfg.imex_order == 1 else (np.eye(n2) + cfg.dt * 0.5 * visc)
        self._proj = _projection_factors(grid2, n1, l1)
        self._theta = theta
        # dissipation bookkeeping (discrete-norm rates)
        self.dissipation_integral = 0.0
        self._last_rate = None
        self._nl_prev = None

    # -- diagnostics -------------------------------------------------------
    def energy(self, state: Field2D) -> float:
        w = self.grid2.weights
        tot = 0.0
        for arr in state.components.values():
            tot += self.l1 * float(np.sum((np.abs(arr) ** 2) @ w))
        return 0.5 * tot

    def dissipation_rate(self, state: Field2D) -> float:
        """||d2 u||^2 + ||d1 b||^2 in the discrete norms of the scheme."""
        w = self.grid2.weights
        d1mat = self.grid2.d1
        tot = 0.0
        for name in ("u1", "u2"):
            g = state.components[name] @ d1mat.T
            tot += self.l1 * float(np.sum((np.abs(g) ** 2) @ w))
        for name in ("b1", "b2"):
            g = 1j * self.k[:, None] * state.components[name]
            tot += self.l1 * float(np.sum((np.abs(g) ** 2) @ w))
        return tot

    def _cfl_scale(self, state: Field2D) -> float:
        kmax = np.max(np.abs(self.k))
        rate = kmax  # explicit skew coupling
        if not self.cfg.linear_only:
            u1 = np.real(np.fft.ifft(state.components["u1"] * self.n1, axis=0))
            u2 = np.real(np.fft.ifft(state.components["u2"] * self.n1, axis=0))
            dx2 = np.concatenate([self.grid2.spacings, self.grid2.spacings[-1:]])
            rate += np.max(np.abs(u1)) * kmax + np.max(np.abs(u2) / dx2[None, :])
        return rate

    # -- stepping ----------------------------------------------------------
    def _explicit(self, state: Field2D):
        terms = {}
        ik = 1j * self.k[:, None]
        terms["u1"] = ik * state.components["b1"]
        terms["u2"] = ik * state.components["b2"]
        terms["b1"] = ik * state.components["u1"]
        terms["b2"] = ik * state.components["u2"]
        if not self.cfg.linear_only:
            nl = _nonlinear(state, self.mask)
            for name in _STATE:
                terms[name] = terms[name] + nl[name]
        for name in _STATE:
            terms[name][0] = 0.0   # mean modes follow their own closures
        return terms

    def step(self, state: Field2D, t: float):
        _require_state(state)
        cfg = self.cfg
        scale = self._cfl_scale(state)
        if cfg.dt * scale > 0.7 * cfg.cfl_safety:
            raise CFLError(f"dt*max_rate = {cfg.dt * scale:.3g} exceeds "
                           f"0.7*cfl_safety = {0.7 * cfg.cfl_safety:.3g}")
        expl = self._explicit(state)
        if cfg.imex_order == 2 and self._nl_prev is not None:
            eff = {n: 1.5 * expl[n] - 0.5 * self._nl_prev[n] for n in _STATE}
        else:
            eff = expl
        self._nl_prev = expl

        dt = cfg.dt
        # velocity: CN (or BE) on the adjoint-consistent vertical diffusion
        rhs_cols = []
        for name in ("u1", "u2"):
            c = state.components[name]
            base = c @ self._visc_expl.T if self._visc_expl is not None else c
            rhs_cols.append(base + dt * eff[name])
        rhs_mat = np.concatenate(rhs_cols, axis=0).T  # (n2, 2 n1)
        rhs_mat[0, :] = 0.0
        rhs_mat[-1, :] = 0.0
        sol = lu_solve(self._visc_lu, rhs_mat).T
        new = {"u1": sol[: self.n1], "u2": sol[self.n1:]}

        # magnetic: diagonal horizontal diffusion multiplier
        k2 = self.k**2
        denom = 1.0 + dt * self._theta * k2
        numer = 1.0 - dt * (1.0 - self._theta) * k2
        for name in ("b1", "b2"):
            c = state.components[name]
            new[name] = ((numer[:, None] * c) + dt * eff[name]) / denom[:, None]
        new["b2"][:, 0] = 0.0
        new["b2"][:, -1] = 0.0

        # pressure projection, then strong wall rows
        vel = Field2D(self.n1, self.l1, self.grid2, {"u1": new["u1"], "u2": new["u2"]})
        vel = helmholtz_project(vel)
        new["u1"], new["u2"] = vel.components["u1"], vel.components["u2"]
        div = 1j * self.k[:, None] * new["u1"] + new["u2"] @ self.grid2.d1.T
        max_div = float(np.max(np.abs(div[:, 1:-1])))
        for name in ("u1", "u2"):
            new[name][:, 0] = 0.0
            new[name][:, -1] = 0.0
        if self.filter is not None:
            for name in _STATE:
                new[name] = new[name] * self.filter[:, None]

        out = Field2D(self.n1, self.l1, self.grid2, new)
        if not all(np.all(np.isfinite(a)) for a in new.values()):
            raise BlowupError(f"non-finite state at t = {t + dt:g}")
        # boundary b1 in physical space
        b1_wall = np.real(np.fft.ifft(new["b1"][:, 0] * self.n1))
        rate = self.dissipation_rate(out)
        if self._last_rate is not None:
            self.dissipation_integral += dt * 0.5 * (self._last_rate + rate)
        self._last_rate = rate
        report = StepReport(t=t + dt, max_div=max_div,
                            boundary_b1_max=float(np.max(np.abs(b1_wall))), dt_used=dt)
        return out, report

    def prime(self, state: Field2D):
        """Initialize the dissipation accumulator at the initial state."""
        self._last_rate = self.dissipation_rate(state)
        self._nl_prev = None
        self.dissipation_integral = 0.0


def rhs(state: Field2D, linear_only: bool = False):
    """Instantaneous right-hand side (du, db, p) via the projection solve.

    du = P(d2^2 u + d1 b + nonlinear) with the pressure gradient as the
    removed component; db = d1^2 b + d1 u + nonlinear.  Uses the direct
    field-level operators, independent of the stepping path.
    """
    _require_state(state)
    k = state.wavenumbers
    ik = k * 1j
    grid = state.grid2
    comp = state.components
    d2u = {n: comp[n] @ grid.d2.T for n in ("u1", "u2")}
    raw = {
        "u1": d2u["u1"] + ik[:, None] * comp["b1"],
        "u2": d2u["u2"] + ik[:, None] * comp["b2"],
        "b1": -(k**2)[:, None] * comp["b1"] + ik[:, None] * comp["u1"],
        "b2": -(k**2)[:, None] * comp["b2"] + ik[:, None] * comp["u2"],
    }
    if not linear_only:
        mask = np.ones(state.n1)
        nl = _nonlinear(state, mask)
        for name in _STATE:
            raw[name] = raw[name] + nl[name]
    force = Field2D(state.n1, state.l1, grid, {"u1": raw["u1"], "u2": raw["u2"]})
    proj = helmholtz_project(force)
    du = {n: proj.components[n] for n in ("u1", "u2")}
    # recover the projection potential as the pressure profile
    gradp1 = raw["u1"] - du["u1"]
    p = np.zeros_like(gradp1)
    nz = k != 0.0
    p[nz] = gradp1[nz] / (1j * k[nz, None])
    db = {"b1": raw["b1"], "b2": raw["b2"]}
    return (Field2D(state.n1, state.l1, grid, du),
            Field2D(state.n1, state.l1, grid, db),
            Field2D(state.n1, state.l1, grid, {"p": p}))


def run(ic: Field2D, cfg: SolverConfig, sink=None, observe_every: float | None = None):
    """Advance the state to t_end, invoking sink(t, state, report) at cadence."""
    _require_state(ic)
    stepper = Stepper(ic.n1, ic.l1, ic.grid2, cfg)
    stepper.prime(ic)
    state = ic
    t = 0.0
    if sink is not None:
        sink(0.0, state, StepReport(t=0.0, max_div=0.0, boundary_b1_max=0.0, dt_used=0.0),
             stepper)
    if cfg.t_end == 0.0:
        return state
    n_steps = int(round(cfg.t_end / cfg.dt))
    every = max(1, int(round((observe_every or cfg.t_end) / cfg.dt)))
    for i in range(n_steps):
        state, report = stepper.step(state, t)
        t = report.t
        if sink is not None and ((i + 1) % every == 0 or i == n_steps - 1):
            sink(t, state, report, stepper)
    return state
