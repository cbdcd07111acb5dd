"""Dimensionless run diagnostics: Grashof-type numbers, sufficient-condition
checks, uniform-in-time bound checks, decay detection, and CSV time series.

All sufficient conditions implemented here guarantee synchronization or
uniform bounds; they are one-directional, so a violated condition annotates a
run as "out of the guaranteed regime" rather than aborting it.  sup over time
is approximated by the sampled max on a caller-chosen tail window.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources

import numpy as np

from . import spectral
from .dynamics import DR_CLASSES, NUDGE_MUTUAL, IntertwinedState, derived_views
from .spectral import Grid, SpectralField, hm_norm, random_field

CONSTANTS_DATA_VERSION = 1


class EmptySeries(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass
class GrashofSet:
    """The dimensionless force and solution magnitudes of a configured run.

    All entries are sup-in-time force norms divided by nu^2 (or norm ratios
    against nu), so conditions and bounds read directly off this record.
    Entries that do not apply to a run are NaN.
    """

    g1: float = math.nan
    g2: float = math.nan
    g: float = math.nan
    g_tilde: float = math.nan
    g_mu_tilde: float = math.nan
    g_theta: float = math.nan
    h_frak: float = math.nan
    k_frak: float = math.nan
    p_frak: float = math.nan
    m_frak: float = math.nan
    d_frak: float = math.nan
    f_frak: float = math.nan
    r_frak: float = math.nan

    def __post_init__(self):
        for f_ in fields(self):
            val = getattr(self, f_.name)
            if not math.isnan(val) and val < -1e-12:
                raise ValueError(f"{f_.name} must be nonnegative, got {val}")
        if not math.isnan(self.g) and not math.isnan(self.g1):
            if abs(self.g**2 - (self.g1**2 + self.g2**2)) > 1e-9 * (1.0 + self.g**2):
                raise ValueError("g^2 must equal g1^2 + g2^2")
        if not math.isnan(self.k_frak) and not math.isnan(self.g):
            if self.k_frak > math.sqrt(2.0) * self.g + 1e-9 * (1.0 + self.g):
                raise ValueError("combined-force number exceeds sqrt(2) * g")


@dataclass
class ConstantsConfig:
    """Working values for the interpolation-inequality constants.

    C_L (Ladyzhenskaya), C_A (Agmon) and C_S (borderline Sobolev) are measured
    empirically by calibrate_constants; C0..C3 are otherwise-unnamed analysis
    constants and default to 1 (user inputs; checks built on them are
    sensitivity scans, not sharp thresholds).
    """

    C_L: float
    C_A: float
    C_S: float
    C0: float = 1.0
    C1: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("C_L", "C_A", "C_S", "C0", "C1", "C2", "C3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_json(self) -> str:
        payload = {
            "version": CONSTANTS_DATA_VERSION,
            "C_L": self.C_L,
            "C_A": self.C_A,
            "C_S": self.C_S,
            "C0": self.C0,
            "C1": self.C1,
            "C2": self.C2,
            "C3": self.C3,
            "meta": self.meta,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ConstantsConfig":
        payload = json.loads(text)
        payload.pop("version", None)
        return cls(**payload)


@dataclass
class ConditionReport:
    """One evaluated inequality: satisfied iff lhs <= rhs, margin = rhs - lhs."""

    name: str
    satisfied: bool
    lhs: float
    rhs: float
    margin: float
    formula: str

    @classmethod
    def compare(cls, name: str, lhs: float, rhs: float, formula: str) -> "ConditionReport":
        return cls(
            name=name,
            satisfied=bool(lhs <= rhs),
            lhs=float(lhs),
            rhs=float(rhs),
            margin=float(rhs - lhs),
            formula=formula,
        )


@dataclass
class DecayVerdict:
    decayed: bool
    rate: float
    r2: float


def grashof_from_series(samples, nu: float) -> float:
    """Sampled sup of |g(t)| / nu^2; sampling density is the caller's job."""
    values = [float(x) for x in samples]
    if not values:
        raise EmptySeries("force series is empty")
    return max(values) / nu**2


def grashof_set_for_state(state: IntertwinedState, t0: float = 0.0, m_frak: float = math.nan) -> GrashofSet:
    """Assemble the dimensionless numbers for a configured run."""
    nu = state.nu
    pair = state.forcing
    g1 = pair.g1.sup_l2() / nu**2
    g2 = pair.g2.sup_l2() / nu**2
    g = math.sqrt(g1**2 + g2**2)
    h_frak = pair.sup_h_l2(t0) / nu**2
    # sum-force envelope: exact for a synchronized pair
    if pair.g2 is pair.g1:
        k_frak = 2.0 * pair.g1.sup_l2() / nu**2
    else:
        k_frak = min((pair.g1.sup_l2() + pair.g2.sup_l2()) / nu**2, math.sqrt(2.0) * g)
    views = derived_views(state)
    p0 = hm_norm(views["p"], 1) / nu
    r0 = hm_norm(views["r"], 1) / nu
    z0 = views["z"].h1
    w0 = views["w"].h1
    g_theta = math.nan
    if state.matrix.kind in DR_CLASSES:
        th1, th2 = state.matrix.params
        if pair.g2 is pair.g1:
            g_theta = pair.g1.sup_l2() * abs(th1 + th2) / nu**2
        else:
            g_theta = (abs(th2) * pair.g1.sup_l2() + abs(th1) * pair.g2.sup_l2()) / nu**2
    return GrashofSet(
        g1=g1,
        g2=g2,
        g=g,
        g_theta=g_theta,
        h_frak=h_frak,
        k_frak=k_frak,
        p_frak=math.sqrt(p0**2 + h_frak**2),
        m_frak=m_frak,
        d_frak=math.sqrt(1.0 + (z0**2 + w0**2) / nu**2),
        f_frak=math.sqrt(k_frak**2 + h_frak**2),
        r_frak=math.sqrt(16.0 * (r0**2 + k_frak**2)),
        g_tilde=math.nan,
        g_mu_tilde=math.nan,
    )


def measured_m_frak(h1_v1_series, h1_v2_series, nu: float, tail_fraction: float = 0.5) -> float:
    """min over copies of the tail sup of |v_i| / nu (the uniform-ball size)."""
    n = len(h1_v1_series)
    if n == 0:
        raise EmptySeries("empty norm series")
    start = int(n * (1.0 - tail_fraction))
    sup1 = max(h1_v1_series[start:])
    sup2 = max(h1_v2_series[start:])
    return min(sup1, sup2) / nu


# ---------------------------------------------------------------------------
# sufficient-condition checks


def check_nudge_fdss_condition(K: float, m_frak: float, constants: ConstantsConfig) -> ConditionReport:
    """Low-mode-driven self-synchronization condition for nudging: K >= 2 C_L m."""
    lhs = 2.0 * constants.C_L * m_frak
    return ConditionReport.compare(
        "nudge_fdss", lhs, K, f"2*C_L*m = {lhs:.6g} <= K = {K:.6g}"
    )


def check_nudge_ss_condition(
    K: float, mu1: float, mu2: float, m_frak: float, nu: float, constants: ConstantsConfig
) -> ConditionReport:
    """Full self-synchronization condition: K >= 2 C_L m and mu1+mu2 >= C_L^2 m^2 nu."""
    k_req = 2.0 * constants.C_L * m_frak
    mu_req = constants.C_L**2 * m_frak**2 * nu
    mu_sum = mu1 + mu2
    margins = [(K - k_req, k_req, K), (mu_sum - mu_req, mu_req, mu_sum)]
    margin, lhs, rhs = min(margins, key=lambda entry: entry[0])
    return ConditionReport(
        name="nudge_ss",
        satisfied=bool(K >= k_req and mu_sum >= mu_req),
        lhs=float(lhs),
        rhs=float(rhs),
        margin=float(margin),
        formula=(
            f"K = {K:.6g} >= 2*C_L*m = {k_req:.6g} and "
            f"mu1+mu2 = {mu_sum:.6g} >= C_L^2*m^2*nu = {mu_req:.6g}"
        ),
    )


def check_dr_condition(K: float, m_frak: float, constants: ConstantsConfig) -> ConditionReport:
    """Direct-replacement self-synchronization condition: K >= 12 C_L m."""
    lhs = 12.0 * constants.C_L * m_frak
    return ConditionReport.compare(
        "dr_ss", lhs, K, f"12*C_L*m = {lhs:.6g} <= K = {K:.6g}"
    )


def check_K_log_condition(
    K: float,
    g_frak: float,
    C0: float,
    name: str = "cutoff_log",
    k_power: float = 1.0,
    log_power: float = 0.5,
    g_power: float = 1.0,
) -> ConditionReport:
    """Generic cutoff condition K^a >= C0 * ln(e+K)^b * g^c.

    The callers pick (a, b, c) to match the regime: the default is the
    logarithmically-corrected linear form K >= C0 * ln(e+K)^(1/2) * g.
    """
    lhs = C0 * math.log(math.e + K) ** log_power * g_frak**g_power
    rhs = K**k_power
    return ConditionReport.compare(
        name,
        lhs,
        rhs,
        f"{C0:.6g}*ln(e+K)^{log_power:g}*g^{g_power:g} = {lhs:.6g} <= K^{k_power:g} = {rhs:.6g}",
    )


def condition_cutoff_dr_mutual(K: float, g_theta: float, constants: ConstantsConfig) -> ConditionReport:
    """Cutoff size for the mutual direct-replacement refined bound."""
    coeff = 64.0 * math.sqrt(6.0) * max(constants.C_S, math.sqrt(constants.C_A))
    return check_K_log_condition(K, g_theta, coeff, name="cutoff_dr_mutual")


def condition_cutoff_decoupled(K: float, k_frak: float, constants: ConstantsConfig) -> ConditionReport:
    """Cutoff size for the decoupled (theta1 = 1) refined bound."""
    coeff = 32.0 * constants.C_S**2
    return check_K_log_condition(
        K, k_frak, coeff, name="cutoff_dr_decoupled", k_power=2.0, log_power=1.0, g_power=2.0
    )


def condition_cutoff_small_theta2(K: float, k_frak: float, constants: ConstantsConfig) -> ConditionReport:
    """Cutoff size for the nearly-decoupled (small theta2) refined bound."""
    coeff = 20.0 * max(constants.C_A, constants.C_S) ** 2
    return check_K_log_condition(
        K, k_frak, coeff, name="cutoff_dr_small_theta2", k_power=2.0, log_power=1.0, g_power=2.0
    )


def condition_cutoff_near_balanced(
    K: float, p_frak: float, h_frak: float, constants: ConstantsConfig
) -> ConditionReport:
    """Cutoff size for the nearly-balanced (theta1 ~ theta2) global bound."""
    lhs = 1024.0 * constants.C_S**2 * math.log(math.e + K) * (p_frak**2 + h_frak**2)
    rhs = K**2
    return ConditionReport.compare(
        "cutoff_dr_near_balanced",
        lhs,
        rhs,
        f"1024*C_S^2*ln(e+K)*(p^2+h^2) = {lhs:.6g} <= K^2 = {rhs:.6g}",
    )


def m_frak_small_theta2(K: float, grashofs: GrashofSet, constants: ConstantsConfig) -> float:
    """Guaranteed uniform-ball size in the small-theta2 regime."""
    lnK = math.log(math.e + K)
    return math.sqrt(
        16.0
        * (1.0 + constants.C_S**2 * lnK * (1.0 + grashofs.p_frak**2))
        * (grashofs.d_frak**2 + grashofs.f_frak**2)
    )


def m_frak_near_balanced(K: float, state: IntertwinedState, grashofs: GrashofSet, constants: ConstantsConfig) -> float:
    """Guaranteed uniform-ball size in the nearly-balanced regime."""
    lnK = math.log(math.e + K)
    views = derived_views(state)
    z0 = views["z"].h1 / state.nu
    w0 = views["w"].h1 / state.nu
    return math.sqrt(
        2.0
        * math.e
        * (
            z0**2
            + w0**2
            + grashofs.k_frak**2
            + grashofs.h_frak**2
            + constants.C_S**2 * lnK * grashofs.p_frak**4
        )
    )


def check_theta_regime(
    theta1: float,
    theta2: float,
    K: float,
    m0_frak: float,
    g_frak: float,
    constants: ConstantsConfig,
    m_frak: float | None = None,
    grashofs: GrashofSet | None = None,
) -> list[ConditionReport]:
    """Evaluate the symmetric direct-replacement regime inequalities.

    Always reports the composite smallness condition on
    min(1 - theta1, |theta1 - theta2|); with m_frak supplied adds the
    near-balanced gap condition, and with a GrashofSet adds the small-theta2
    and cutoff conditions.  One report per inequality.
    """
    lnK = math.log(math.e + K)
    reports = []

    lhs = min(1.0 - theta1, abs(theta1 - theta2))
    rhs = constants.C2 / (lnK * (1.0 + m0_frak + g_frak) ** 4)
    reports.append(
        ConditionReport.compare(
            "theta_composite",
            lhs,
            rhs,
            f"min(1-theta1, |theta1-theta2|) = {lhs:.6g} <= C2/(ln(e+K)(1+m0+g)^4) = {rhs:.6g}",
        )
    )

    if m_frak is not None and not math.isnan(m_frak):
        rhs = math.sqrt(2.0) / (8.0 * constants.C_S * math.sqrt(lnK) * m_frak)
        lhs = abs(theta1 - theta2)
        reports.append(
            ConditionReport.compare(
                "theta_near_balanced",
                lhs,
                rhs,
                f"|theta1-theta2| = {lhs:.6g} <= sqrt(2)/(8*C_S*ln(e+K)^(1/2)*m) = {rhs:.6g}",
            )
        )

    if grashofs is not None:
        m_small = m_frak_small_theta2(K, grashofs, constants)
        lhs = theta2**2 * constants.C_S**2 * lnK * m_small**4
        # 2*(|r0|/nu)^2 + k^2 recovered from r^2 = 16*((|r0|/nu)^2 + k^2)
        rhs = max(0.0, grashofs.r_frak**2 / 8.0 - grashofs.k_frak**2)
        reports.append(
            ConditionReport.compare(
                "theta_small",
                lhs,
                rhs,
                f"theta2^2*C_S^2*ln(e+K)*m^4 = {lhs:.6g} <= 2*(|r0|/nu)^2 + k^2 = {rhs:.6g}",
            )
        )
        floor = math.exp(1.0 / (8.0 * constants.C_S**2))
        reports.append(
            ConditionReport.compare(
                "cutoff_small_theta2_floor",
                floor,
                K,
                f"exp(1/(8 C_S^2)) = {floor:.6g} <= K = {K:.6g}",
            )
        )
        balance = (
            constants.C_A * grashofs.r_frak / K
            + 16.0 * constants.C_S**2 * lnK * (grashofs.p_frak**2 + grashofs.r_frak**2) / K**2
        )
        reports.append(
            ConditionReport.compare(
                "cutoff_small_theta2_balance",
                balance,
                2.0,
                f"C_A*r/K + 16*C_S^2*ln(e+K)*(p^2+r^2)/K^2 = {balance:.6g} <= 2",
            )
        )
        reports.append(
            condition_cutoff_near_balanced(K, grashofs.p_frak, grashofs.h_frak, constants)
        )
    return reports


# ---------------------------------------------------------------------------
# uniform-in-time bound checks

BOUND_FORMULAS = (
    "nudge_mutual",
    "nudge_symmetric",
    "dr_mutual_pair",
    "dr_decoupled",
    "dr_balanced",
    "dr_small_theta2",
    "dr_near_balanced",
    "heat_low_mode",
)


def _bound_value(bound_formula: str, grashofs: GrashofSet, matrix, nu: float, mu_tilde=None) -> tuple[float, str]:
    if bound_formula == "nudge_mutual":
        mu1, mu2 = matrix.params
        lo, hi = min(mu1, mu2), max(mu1, mu2)
        if lo == 0.0:
            return math.inf, "nu*(mu_max/mu_min)*g (unbounded: mu_min = 0)"
        val = nu * (hi / lo) * grashofs.g
        return val, f"nu*(mu_max/mu_min)*g = {val:.6g}"
    if bound_formula == "nudge_symmetric":
        candidates = [grashofs.g**2]
        if mu_tilde is not None and not math.isnan(grashofs.g_mu_tilde):
            candidates.append(grashofs.g_mu_tilde**2 + mu_tilde**2 * grashofs.g_tilde**2)
        val = nu * math.sqrt(min(candidates))
        return val, f"nu*min(g^2, g_mu~^2 + mu~^2 g~^2)^(1/2) = {val:.6g}"
    if bound_formula == "dr_mutual_pair":
        val = math.sqrt(96.0) * nu * grashofs.g_theta
        return val, f"sqrt(96)*nu*g_theta = {val:.6g}"
    if bound_formula == "dr_decoupled":
        val = 4.0 * grashofs.k_frak * nu
        return val, f"4*k*nu = {val:.6g}"
    if bound_formula == "dr_balanced":
        val = 4.0 * grashofs.k_frak * nu
        return val, f"4*k*nu = {val:.6g}"
    if bound_formula == "dr_small_theta2":
        val = 6.0 * grashofs.k_frak * nu
        return val, f"6*k*nu = {val:.6g}"
    if bound_formula == "dr_near_balanced":
        val = 8.0 * grashofs.k_frak * nu
        return val, f"8*nu*k = {val:.6g}"
    if bound_formula == "heat_low_mode":
        val = math.sqrt(2.0) * nu * grashofs.h_frak
        return val, f"sqrt(2)*nu*h = {val:.6g}"
    raise ValueError(f"unknown bound formula {bound_formula!r}")


def check_uniform_bound(
    series,
    bound_formula: str,
    grashofs: GrashofSet,
    matrix=None,
    nu: float = 1.0,
    tail_fraction: float = 0.5,
    mu_tilde: float | None = None,
) -> ConditionReport:
    """Compare a trajectory's tail sup against a closed-form uniform bound.

    series is a list of (t, value) pairs; the value convention matches the
    bound: the pair norm sqrt(|v1|_V^2 + |v2|_V^2) for the nudging and
    direct-replacement checks, sqrt(|v_th|_V^2 + |w_th|_V^2) for
    "dr_mutual_pair", and |p|_V for "heat_low_mode".  Bounds are sufficient
    theory, so a pass is the expected outcome; a violation flags either a
    constants miscalibration or a bug.
    """
    if not series:
        raise EmptySeries("empty trajectory series")
    n = len(series)
    start = int(n * (1.0 - tail_fraction))
    tail_sup = max(float(v) for _, v in series[start:])
    bound, formula = _bound_value(bound_formula, grashofs, matrix, nu, mu_tilde)
    return ConditionReport.compare(
        f"bound_{bound_formula}", tail_sup, bound, f"tail sup = {tail_sup:.6g} <= {formula}"
    )


# ---------------------------------------------------------------------------
# decay detection and heat comparison


def decay_detect(series, tail_fraction: float = 0.5, threshold: float = 1e-6) -> DecayVerdict:
    """Decide whether a nonnegative signal decays, with a fitted rate.

    Fits log(x) against t on the tail window by least squares.  Decayed means
    the final value fell below threshold * initial value, or the fitted rate
    is negative with r^2 >= 0.9 (a clean exponential).
    """
    pts = [(float(t), float(x)) for t, x in series]
    if any(x < 0 for _, x in pts):
        raise ValueError("decay detection expects a nonnegative signal")
    n = len(pts)
    start = int(n * (1.0 - tail_fraction))
    tail = pts[start:]
    if len(tail) < 10:
        raise InsufficientData(f"need at least 10 tail samples, got {len(tail)}")
    initial = pts[0][1]
    final = tail[-1][1]
    ratio_decayed = final <= threshold * initial if initial > 0 else False

    ts = np.array([t for t, _ in tail])
    xs = np.array([max(x, 1e-300) for _, x in tail])
    ys = np.log(xs)
    A = np.vstack([ts, np.ones_like(ts)]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    rate = float(coef[0])
    fitted = A @ coef
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 1e-30 else 1.0
    decayed = bool(ratio_decayed or (rate < 0.0 and r2 >= 0.9 and final < initial))
    return DecayVerdict(decayed=decayed, rate=rate, r2=r2)


def heat_compare(p_series, h: SpectralField | None, nu: float, K: float) -> float:
    """Max L2 gap between a sampled low-mode block and the exact heat flow.

    p_series is a list of (t, SpectralField); the first sample seeds the exact
    solution, h is the constant-in-time low-mode force (None for unforced).
    """
    from .oracle import heat_exact

    if not p_series:
        raise EmptySeries("empty low-mode series")
    t0, p0 = p_series[0]
    p0 = spectral.project_low(p0, K)
    h_low = spectral.project_low(h, K) if h is not None else None
    worst = 0.0
    for t, p_sim in p_series:
        exact = heat_exact(p0, h_low, nu, t - t0)
        gap = (spectral.project_low(p_sim, K) - exact).l2
        worst = max(worst, gap)
    return worst


# ---------------------------------------------------------------------------
# constants calibration


def calibrate_constants(n: int = 32, samples: int = 200, seed: int = 0) -> ConstantsConfig:
    """Measure working interpolation constants on random-field batches.

    Maximizes each inequality ratio over seeded random fields plus the
    extremizing candidates (single shear modes, the cellular flow, low-mode
    concentrations) and returns the observed maxima times a 1.1 safety
    factor.  Deterministic for a fixed seed.
    """
    grid = Grid(n)
    rng = np.random.default_rng(seed)
    ratio_L = 0.0
    ratio_A = 0.0
    ratio_S = 0.0

    candidates = [
        spectral.taylor_green(grid, 1.0),
        spectral.field_from_modes(grid, [(0, 1, (0.5 / 1j, 0.0))]),
        spectral.field_from_modes(grid, [(0, 2, (0.5 / 1j, 0.0)), (1, 0, (0.0, 0.25))]),
    ]
    slopes = (0.5, 1.0, 2.0, 3.0)
    kmaxes = (2.0, 4.0, 8.0, grid.dealias_radius)
    for i in range(samples):
        slope = slopes[i % len(slopes)]
        kmax = kmaxes[(i // len(slopes)) % len(kmaxes)]
        candidates.append(random_field(grid, rng, energy=1.0, slope=slope, kmax=kmax))

    for u in candidates:
        l2 = u.l2
        h1 = u.h1
        if l2 == 0.0 or h1 == 0.0:
            continue
        linf = spectral.linf_norm(u)
        l4 = spectral.l4_norm(u)
        h2 = hm_norm(u, 2)
        ratio_L = max(ratio_L, l4**2 / (h1 * l2))
        ratio_A = max(ratio_A, linf**2 / (h2 * l2))
        # support radius of this candidate, floor 2 to keep ln positive
        kmag = u.grid.kmag[np.abs(u.coeffs).max(axis=0) > 1e-13 * np.abs(u.coeffs).max()]
        nmax = max(2.0, float(kmag.max()) if kmag.size else 2.0)
        ratio_S = max(ratio_S, linf / (math.sqrt(math.log(nmax)) * h1))

    return ConstantsConfig(
        C_L=1.1 * ratio_L,
        C_A=1.1 * ratio_A,
        C_S=1.1 * ratio_S,
        meta={"n": n, "samples": samples, "seed": seed, "safety": 1.1},
    )


def default_constants() -> ConstantsConfig:
    """The shipped calibration (n=32, seed 0), loaded from the data file."""
    text = resources.files("intertwine.data").joinpath("constants_default.json").read_text()
    return ConstantsConfig.from_json(text)


# ---------------------------------------------------------------------------
# time series records and CSV output

CSV_COLUMNS = [
    "t",
    "l2_v1",
    "h1_v1",
    "l2_v2",
    "h1_v2",
    "l2_w",
    "h1_w",
    "l2_p",
    "l2_q",
    "h1_vtheta",
    "h1_wtheta",
    "energy_residual",
    "force_l2_g1",
    "force_l2_g2",
    "force_l2_h",
]


@dataclass
class TimeSeriesRecord:
    """One sampled diagnostics row; the budget_* fields stay out of the CSV."""

    t: float
    l2_v1: float
    h1_v1: float
    l2_v2: float
    h1_v2: float
    l2_w: float
    h1_w: float
    l2_p: float
    l2_q: float
    h1_vtheta: float
    h1_wtheta: float
    energy_residual: float
    force_l2_g1: float
    force_l2_g2: float
    force_l2_h: float
    budget_energy: float = math.nan
    budget_dissipation: float = math.nan
    budget_pump: float = math.nan
    budget_penalty: float = math.nan


def sample_record(state: IntertwinedState) -> TimeSeriesRecord:
    """Norms, force magnitudes and the weighted energy-budget terms at t."""
    views = derived_views(state)
    g1 = state.forcing.g1(state.t)
    g2 = state.forcing.g2(state.t)
    h = g1 - g2
    is_dr = state.matrix.kind in DR_CLASSES
    rec = TimeSeriesRecord(
        t=state.t,
        l2_v1=state.v1.l2,
        h1_v1=state.v1.h1,
        l2_v2=state.v2.l2,
        h1_v2=state.v2.h1,
        l2_w=views["w"].l2,
        h1_w=views["w"].h1,
        l2_p=views["p"].l2,
        l2_q=views["q"].l2,
        h1_vtheta=views["v_theta"].h1 if is_dr else math.nan,
        h1_wtheta=views["w_theta"].h1 if is_dr else math.nan,
        energy_residual=math.nan,
        force_l2_g1=g1.l2,
        force_l2_g2=g2.l2,
        force_l2_h=h.l2,
    )
    if state.matrix.kind == NUDGE_MUTUAL:
        mu1, mu2 = state.matrix.params
        total = mu1 + mu2
        if total > 0:
            lam1, lam2 = mu2 / total, mu1 / total
            rec.budget_energy = lam1 * rec.l2_v1**2 + lam2 * rec.l2_v2**2
            rec.budget_dissipation = lam1 * rec.h1_v1**2 + lam2 * rec.h1_v2**2
            rec.budget_pump = lam1 * spectral.inner(g1, state.v1) + lam2 * spectral.inner(
                g2, state.v2
            )
            pk_diff = spectral.project_low(views["w"], state.K)
            rec.budget_penalty = (mu1 * mu2 / total) * pk_diff.l2**2
    return rec


def fill_energy_residuals(records: list[TimeSeriesRecord], nu: float) -> None:
    """Discrete residual of the weighted energy balance, central differences.

    The balance reads dE/dt = 2P - 2 nu D - 2C with E, D, P, C the weighted
    energy, dissipation, pumping and coupling-penalty samples, so
    residual = dE/dt + 2 nu D - 2P + 2C.  Endpoints stay NaN.  The residual
    shrinks at second order under step refinement when the sample spacing
    tracks dt.
    """
    for i in range(1, len(records) - 1):
        prev_, here, next_ = records[i - 1], records[i], records[i + 1]
        if math.isnan(here.budget_energy):
            continue
        span = next_.t - prev_.t
        if span <= 0:
            continue
        dEdt = (next_.budget_energy - prev_.budget_energy) / span
        here.energy_residual = (
            dEdt
            + 2.0 * nu * here.budget_dissipation
            - 2.0 * here.budget_pump
            + 2.0 * here.budget_penalty
        )


def _weighted_force_sq(rec: TimeSeriesRecord, lam1: float, lam2: float) -> float:
    return lam1 * rec.force_l2_g1**2 + lam2 * rec.force_l2_g2**2


def energy_inequality_slack(
    records: list[TimeSeriesRecord], nu: float, mu1: float, mu2: float
) -> float:
    """Worst relative violation of the integrated weighted energy inequality.

    E(t) + nu * int D ds <= E(t0) + (1/nu) * int (weighted |g|^2) ds must hold
    along mutual-nudging trajectories; returns max over samples of
    (lhs - rhs) / scale, which should be <= 0 up to quadrature error.
    """
    total = mu1 + mu2
    if total <= 0:
        raise ValueError("the weighted inequality needs mu1 + mu2 > 0")
    lam1, lam2 = mu2 / total, mu1 / total
    usable = [r for r in records if not math.isnan(r.budget_energy)]
    if len(usable) < 2:
        raise InsufficientData("need at least two budget samples")
    worst = -math.inf
    diss_int = 0.0
    pump_int = 0.0
    e0 = usable[0].budget_energy
    for prev_, here in zip(usable, usable[1:]):
        dt_ = here.t - prev_.t
        diss_int += 0.5 * dt_ * (prev_.budget_dissipation + here.budget_dissipation)
        pump_int += 0.5 * dt_ * (
            _weighted_force_sq(prev_, lam1, lam2) + _weighted_force_sq(here, lam1, lam2)
        )
        lhs = here.budget_energy + nu * diss_int
        rhs = e0 + pump_int / nu
        scale = max(abs(lhs), abs(rhs), 1e-30)
        worst = max(worst, (lhs - rhs) / scale)
    return worst


def write_timeseries_csv(path, records: list[TimeSeriesRecord]) -> None:
    """RFC-4180 CSV, header mandatory, floats at 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, col)) for col in CSV_COLUMNS])


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_condition_reports(dir_path, reports: list[ConditionReport], stem: str = "conditions") -> None:
    """Human-readable lines plus a machine-readable TSV, one record per report."""
    import os

    txt_path = os.path.join(dir_path, f"{stem}.txt")
    tsv_path = os.path.join(dir_path, f"{stem}.tsv")
    with open(txt_path, "w", encoding="utf-8") as fh:
        for rep in reports:
            verdict = "satisfied" if rep.satisfied else "VIOLATED (out of guaranteed regime)"
            fh.write(f"{rep.name}: {verdict}; {rep.formula}; margin = {rep.margin:.6g}\n")
    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write("name\tlhs\trhs\tmargin\tsatisfied\n")
        for rep in reports:
            fh.write(
                f"{rep.name}\t{_fmt(rep.lhs)}\t{_fmt(rep.rhs)}\t{_fmt(rep.margin)}\t{rep.satisfied}\n"
            )
