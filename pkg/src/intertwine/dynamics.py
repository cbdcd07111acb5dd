"""Coupled pairs of 2D Navier-Stokes copies and their time integration.

Two coupling families are implemented through a 2x2 intertwining matrix M
acting on an intertwining function F of each copy:

  * nudging:            F(v) = P_K v          (linear low-mode feedback)
  * direct replacement: F(v) = P_K B(v, v)    (low-mode nonlinearity swap)

Each equation reads dv_i/dt + nu A v_i + B(v_i, v_i) = g_i + sum_j m_ij F(v_j).
The stepper removes the stiff diffusion exactly with an integrating factor
and advances the remaining terms with Heun's method (second order); for
strongly damped nudging runs the linear coupling can be folded into a
per-mode 2x2 matrix exponential so large feedback gains do not force tiny
steps.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from . import spectral
from .forcing import ForcingPair
from .spectral import Grid, SpectralField, project_high, project_low

NUDGE_SYMMETRIC = "nudge_symmetric"
NUDGE_MUTUAL = "nudge_mutual"
DR_SYMMETRIC = "dr_symmetric"
DR_MUTUAL = "dr_mutual"
GENERAL = "general"

NUDGING_CLASSES = (NUDGE_SYMMETRIC, NUDGE_MUTUAL)
DR_CLASSES = (DR_SYMMETRIC, DR_MUTUAL)


class WrongMatrixClass(ValueError):
    """Operation requires a coupling matrix from a different class."""


class StepGuardViolation(ValueError):
    """Requested step size exceeds the configured stability guard."""


class BlowupDetected(RuntimeError):
    """Trajectory left the finite ball; expected in misconfigured regimes."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"solution norm diverged at t={t:g}")


class IntertwiningMatrix:
    """Tagged 2x2 coupling matrix with its class constraints enforced.

    entries[i][j] multiplies F(v_{j+1}) in the equation for v_{i+1}.
    """

    __slots__ = ("kind", "params", "entries")

    def __init__(self, kind, params, entries):
        self.kind = kind
        self.params = tuple(float(p) for p in params)
        self.entries = np.asarray(entries, dtype=np.float64).reshape(2, 2)

    @classmethod
    def nudge_symmetric(cls, mu1: float, mu2: float) -> "IntertwiningMatrix":
        if not mu1 >= mu2 >= 0:
            raise ValueError(f"symmetric nudging requires mu1 >= mu2 >= 0, got ({mu1}, {mu2})")
        return cls(NUDGE_SYMMETRIC, (mu1, mu2), [[-mu1, mu2], [mu2, -mu1]])

    @classmethod
    def nudge_mutual(cls, mu1: float, mu2: float) -> "IntertwiningMatrix":
        if mu1 < 0 or mu2 < 0:
            raise ValueError(f"mutual nudging requires mu1, mu2 >= 0, got ({mu1}, {mu2})")
        return cls(NUDGE_MUTUAL, (mu1, mu2), [[-mu1, mu1], [mu2, -mu2]])

    @classmethod
    def dr_symmetric(cls, theta1: float, theta2: float) -> "IntertwiningMatrix":
        if abs(theta1 + theta2 - 1.0) > 1e-12:
            raise ValueError(f"direct replacement requires theta1 + theta2 = 1, got {theta1 + theta2}")
        return cls(DR_SYMMETRIC, (theta1, theta2), [[theta1, -theta2], [-theta2, theta1]])

    @classmethod
    def dr_mutual(cls, theta1: float, theta2: float) -> "IntertwiningMatrix":
        if abs(theta1 + theta2 - 1.0) > 1e-12:
            raise ValueError(f"direct replacement requires theta1 + theta2 = 1, got {theta1 + theta2}")
        if theta1 < 0 or theta2 < 0:
            raise ValueError(f"mutual direct replacement requires theta1, theta2 >= 0, got ({theta1}, {theta2})")
        return cls(DR_MUTUAL, (theta1, theta2), [[theta1, -theta1], [-theta2, theta2]])

    @classmethod
    def general(cls, m11, m12, m21, m22) -> "IntertwiningMatrix":
        return cls(GENERAL, (m11, m12, m21, m22), [[m11, m12], [m21, m22]])

    @classmethod
    def zero(cls) -> "IntertwiningMatrix":
        """The trivial intertwinement (uncoupled copies)."""
        return cls.general(0.0, 0.0, 0.0, 0.0)

    @property
    def is_nudging(self):
        return self.kind in NUDGING_CLASSES

    @property
    def is_direct_replacement(self):
        return self.kind in DR_CLASSES

    @property
    def eigenvalues(self):
        """Eigenvalues of the damping matrix -M, ordered (lambda1, lambda2).

        For the symmetric nudging class these are (mu1 - mu2, mu1 + mu2) and
        -M is non-negative definite.
        """
        lams = np.linalg.eigvals(-self.entries)
        lams = np.sort(np.real_if_close(lams))
        return float(np.real(lams[0])), float(np.real(lams[1]))

    def damping(self) -> np.ndarray:
        """The matrix -entries (non-negative definite for symmetric nudging)."""
        return -self.entries

    def __repr__(self):
        return f"IntertwiningMatrix({self.kind}, params={self.params})"


@dataclass(frozen=True)
class IntertwinedState:
    """Snapshot of the coupled pair: (v1, v2) plus time and parameters.

    States are immutable; stepping returns a new state.  Setting advect=False
    drops both B terms, turning each copy into a driven heat equation (used by
    the low-mode heat checks).
    """

    grid: Grid
    t: float
    nu: float
    K: float
    matrix: IntertwiningMatrix
    v1: SpectralField
    v2: SpectralField
    forcing: ForcingPair
    advect: bool = True

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("viscosity must be positive")
        if self.K < 0:
            raise ValueError("cutoff K must be >= 0")
        if self.K > self.grid.dealias_radius + 1e-12:
            raise ValueError(
                f"cutoff K={self.K} exceeds the dealias radius {self.grid.dealias_radius:g}"
            )
        if self.v1.grid != self.grid or self.v2.grid != self.grid:
            raise ValueError("v1, v2 must live on the state's grid")


def rhs_nse(u: SpectralField, f: SpectralField, nu: float) -> SpectralField:
    """Plain Navier-Stokes right-hand side f - nu A u - B(u, u)."""
    return f - nu * spectral.stokes_apply(u, 2) - spectral.bilinear_B(u, u)


def _coupling_inputs(state: IntertwinedState, intertwining: str):
    """F(v1), F(v2) for the requested intertwining function."""
    if intertwining == "project":
        return project_low(state.v1, state.K), project_low(state.v2, state.K)
    if intertwining == "project_bilinear":
        B1 = spectral.bilinear_B(state.v1, state.v1)
        B2 = spectral.bilinear_B(state.v2, state.v2)
        return project_low(B1, state.K), project_low(B2, state.K)
    raise ValueError(f"unknown intertwining function {intertwining!r}")


def rhs_general(state: IntertwinedState, intertwining: str):
    """Right-hand sides of the general intertwined system.

    Returns (f1, f2) with f_i = g_i - nu A v_i - B(v_i, v_i)
    + m_i1 F(v1) + m_i2 F(v2), where F is P_K ("project") or
    P_K B(., .) ("project_bilinear").
    """
    g1 = state.forcing.g1(state.t)
    g2 = state.forcing.g2(state.t)
    nu = state.nu
    f1 = g1 - nu * spectral.stokes_apply(state.v1, 2)
    f2 = g2 - nu * spectral.stokes_apply(state.v2, 2)
    if state.advect:
        f1 = f1 - spectral.bilinear_B(state.v1, state.v1)
        f2 = f2 - spectral.bilinear_B(state.v2, state.v2)
    m = state.matrix.entries
    if np.any(m != 0.0):
        c1, c2 = _coupling_inputs(state, intertwining)
        # sum each row's coupling first: commutativity of addition then keeps
        # the two equations bitwise equal on the synchronized manifold
        f1 = f1 + (m[0, 0] * c1 + m[0, 1] * c2)
        f2 = f2 + (m[1, 0] * c1 + m[1, 1] * c2)
    return f1, f2


def rhs_nudging(state: IntertwinedState):
    """Nudging system right-hand sides; requires a nudging-class matrix."""
    if state.matrix.kind not in NUDGING_CLASSES:
        raise WrongMatrixClass(f"nudging rhs needs a nudging matrix, got {state.matrix.kind}")
    return rhs_general(state, "project")


def rhs_direct_replacement(state: IntertwinedState):
    """Direct-replacement right-hand sides; requires a DR-class matrix.

    The second equation uses the class-defined row (m21, m22) of the matrix.
    """
    if state.matrix.kind not in DR_CLASSES:
        raise WrongMatrixClass(
            f"direct-replacement rhs needs a DR matrix, got {state.matrix.kind}"
        )
    return rhs_general(state, "project_bilinear")


def intertwining_function_for(matrix: IntertwiningMatrix) -> str:
    if matrix.is_direct_replacement:
        return "project_bilinear"
    return "project"


def derived_views(state: IntertwinedState) -> dict:
    """The linear change-of-variable views of the pair.

    w = v1 - v2, p/q its low/high parts, z = v1 + v2 with parts r/s.  The
    twisted combination v_theta = theta2 v1 + theta1 v2 and the rescaled error
    w_theta = sqrt(theta1 theta2) w exist only for direct-replacement
    matrices; when theta1 * theta2 = 0 the unscaled w is returned in place of
    w_theta (the rescaling degenerates there).
    """
    w = state.v1 - state.v2
    z = state.v1 + state.v2
    views = {
        "w": w,
        "p": project_low(w, state.K),
        "q": project_high(w, state.K),
        "z": z,
        "r": project_low(z, state.K),
        "s": project_high(z, state.K),
    }
    if state.matrix.is_direct_replacement:
        theta1, theta2 = state.matrix.params
        views["v_theta"] = theta2 * state.v1 + theta1 * state.v2
        scale = theta1 * theta2
        views["w_theta"] = np.sqrt(scale) * w if scale > 0 else w
    return views


def require_theta_views(state: IntertwinedState):
    if not state.matrix.is_direct_replacement:
        raise WrongMatrixClass("theta views are defined for direct-replacement matrices only")


def residual_twisted(state: IntertwinedState) -> float:
    """Check the closed equation satisfied by the twisted combination.

    For the mutual direct-replacement coupling, theta2*rhs1 + theta1*rhs2 must
    equal g_theta - nu A v_theta - B(v_theta, v_theta) - B(w_theta, w_theta)
    with g_theta = theta2 g1 + theta1 g2.  Returns the L2 norm of the gap.
    """
    if state.matrix.kind != DR_MUTUAL:
        raise WrongMatrixClass("the twisted-variable identity is for mutual direct replacement")
    theta1, theta2 = state.matrix.params
    if theta1 == 0.0:
        raise WrongMatrixClass("theta1 must be nonzero for the rescaled error variable")
    f1, f2 = rhs_direct_replacement(state)
    combo = theta2 * f1 + theta1 * f2
    views = derived_views(state)
    v_th = views["v_theta"]
    w_th = views["w_theta"]
    g_th = theta2 * state.forcing.g1(state.t) + theta1 * state.forcing.g2(state.t)
    closed = (
        g_th
        - state.nu * spectral.stokes_apply(v_th, 2)
        - spectral.bilinear_B(v_th, v_th)
        - spectral.bilinear_B(w_th, w_th)
    )
    return (combo - closed).l2


def residual_half_DB(v1: SpectralField, v2: SpectralField) -> float:
    """L2 gap in B(v1,v1) - B(v2,v2) = (1/2) DB(v1+v2)(v1-v2)."""
    lhs = spectral.bilinear_B(v1, v1) - spectral.bilinear_B(v2, v2)
    rhs = 0.5 * spectral.frechet_DB(v1 + v2, v1 - v2)
    return (lhs - rhs).l2


def cfl_limit(state: IntertwinedState, c: float = 1.0) -> float:
    """Largest admissible step c * min(1/(nu k_max^2), dx / |u|_inf)."""
    kmax2 = state.grid.dealias_radius**2
    diffusive = 1.0 / (state.nu * kmax2)
    dx = 2.0 * np.pi / state.grid.n
    umax = max(spectral.linf_norm(state.v1), spectral.linf_norm(state.v2), 1e-30)
    return c * min(diffusive, dx / umax)


def _linear_propagator(state: IntertwinedState, dt: float, fold_coupling: bool):
    """Per-mode decay factors, optionally with the nudging coupling folded in.

    Returns (decay, pair_block) where decay = exp(-nu |k|^2 dt) and pair_block
    is the 2x2 exp(dt M) applied across the two copies on low modes (or None).
    """
    decay = np.exp(-state.nu * state.grid.k2 * dt)
    if not fold_coupling:
        return decay, None
    return decay, expm(dt * state.matrix.entries)


def _apply_propagator(V, decay, pair_block, low_mask):
    """V has shape (2 copies, 2 components, n, n)."""
    out = V * decay
    if pair_block is not None:
        low = out[:, :, low_mask]
        mixed = np.tensordot(pair_block, low, axes=(1, 0))
        out[:, :, low_mask] = mixed
    return out


def step(
    state: IntertwinedState,
    dt: float,
    fold_coupling: bool = False,
) -> IntertwinedState:
    """One step of the integrating-factor Heun scheme.

    The viscous term is integrated exactly; forcing, advection and coupling
    are advanced at second order with stage evaluations at t and t + dt.
    With fold_coupling=True (nudging classes) the linear coupling moves from
    the explicit stage into the exact low-mode propagator, so large feedback
    gains mu * dt > 1 stay stable without shrinking dt.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if fold_coupling and not state.matrix.is_nudging:
        raise WrongMatrixClass("coupling folding applies to nudging matrices only")
    grid = state.grid
    intertwining = intertwining_function_for(state.matrix)
    decay, pair_block = _linear_propagator(state, dt, fold_coupling)
    low_mask = grid.low_mode_mask(state.K) if pair_block is not None else None

    def explicit_rhs(v1, v2, t):
        f1 = state.forcing.g1(t)
        f2 = state.forcing.g2(t)
        B1 = B2 = None
        if state.advect:
            B1 = spectral.bilinear_B(v1, v1)
            B2 = spectral.bilinear_B(v2, v2)
            f1 = f1 - B1
            f2 = f2 - B2
        m = state.matrix.entries
        if not fold_coupling and np.any(m != 0.0):
            if intertwining == "project":
                c1 = project_low(v1, state.K)
                c2 = project_low(v2, state.K)
            else:
                if B1 is None:
                    B1 = spectral.bilinear_B(v1, v1)
                    B2 = spectral.bilinear_B(v2, v2)
                c1 = project_low(B1, state.K)
                c2 = project_low(B2, state.K)
            f1 = f1 + (m[0, 0] * c1 + m[0, 1] * c2)
            f2 = f2 + (m[1, 0] * c1 + m[1, 1] * c2)
        return f1, f2

    V = np.stack([state.v1.coeffs, state.v2.coeffs])
    k1a, k1b = explicit_rhs(state.v1, state.v2, state.t)
    K1 = np.stack([k1a.coeffs, k1b.coeffs])

    pred = _apply_propagator(V + dt * K1, decay, pair_block, low_mask)
    p1 = SpectralField(grid, pred[0])
    p2 = SpectralField(grid, pred[1])
    k2a, k2b = explicit_rhs(p1, p2, state.t + dt)
    K2 = np.stack([k2a.coeffs, k2b.coeffs])

    new = _apply_propagator(V + 0.5 * dt * K1, decay, pair_block, low_mask) + 0.5 * dt * K2
    return replace(
        state,
        t=state.t + dt,
        v1=SpectralField(grid, new[0]),
        v2=SpectralField(grid, new[1]),
    )


def integrate(
    state: IntertwinedState,
    t_end: float,
    dt: float,
    sample_every: float | None = None,
    sink=None,
    cfl_factor: float | None = 1.0,
    fold_threshold: float = 1.0,
    blowup_limit: float = 1e8,
) -> IntertwinedState:
    """Advance the state to t_end, sampling diagnostics along the way.

    sink(state) is invoked at t = start, every sample_every thereafter, and at
    t_end.  Aborts with BlowupDetected when any norm exceeds blowup_limit or
    turns non-finite (diverging trajectories are an expected outcome for some
    symmetric direct-replacement parameters).  cfl_factor=None disables the
    step-size guard.
    """
    if t_end < state.t:
        raise ValueError("t_end precedes the state's current time")
    nsteps = int(round((t_end - state.t) / dt))
    if nsteps <= 0:
        return state
    if cfl_factor is not None and state.advect:
        limit = cfl_limit(state, cfl_factor)
        if dt > limit:
            raise StepGuardViolation(
                f"dt={dt:g} violates the step guard {limit:g}; "
                "reduce dt or raise cfl_factor explicitly"
            )
    fold = state.matrix.is_nudging and max(abs(p) for p in state.matrix.params) * dt > fold_threshold
    stride = max(1, int(round((sample_every or (t_end - state.t)) / dt)))
    if sink is not None:
        sink(state)
    for istep in range(nsteps):
        state = step(state, dt, fold_coupling=fold)
        n1, n2 = state.v1.l2, state.v2.l2
        if not (np.isfinite(n1) and np.isfinite(n2)) or max(n1, n2) > blowup_limit:
            raise BlowupDetected(state.t)
        if sink is not None and ((istep + 1) % stride == 0 or istep == nsteps - 1):
            sink(state)
    return state
