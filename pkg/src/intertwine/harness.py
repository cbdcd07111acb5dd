"""Experiment configuration, scenario library, and artifact persistence.

Configs are flat INI-style text (sections of key = value lines, no nesting);
parsing is strict: unknown sections or keys fail with the offending line
number, and class constraints are enforced at parse time.  Every run
directory receives the config copy, the constants file used, the CSV series,
condition reports, a final checkpoint and a manifest, all written atomically.
"""

from __future__ import annotations

import json
import math
import os
import platform
import struct
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics as diag
from . import dynamics as dyn
from . import forcing as fr
from . import spectral as sp
from .diagnostics import ConditionReport, ConstantsConfig, TimeSeriesRecord

SCENARIOS = (
    "self_sync",
    "fdss_determining_modes",
    "reconstruction_nudge",
    "reconstruction_dr",
    "regime_sweep",
)


class ParseError(ValueError):
    """Malformed config file or violated field constraint."""


class ConfigInvalid(ValueError):
    pass


class IoError(OSError):
    pass


# ---------------------------------------------------------------------------
# configuration

_SCHEMA = {
    "grid": {"n", "dealias_radius"},
    "physics": {"nu", "k"},
    "coupling": {"class", "mu1", "mu2", "theta1", "theta2", "m11", "m12", "m21", "m22"},
    "forcing": {
        "kind",
        "amplitude",
        "wavenumber",
        "omega",
        "pair_delta_amplitude",
        "pair_decay_rate",
        "pair_delta_max_wavenumber",
    },
    "initial": {
        "kind",
        "energy",
        "spectrum_slope",
        "max_wavenumber",
        "difference",
        "difference_scale",
        "modes",
    },
    "time": {"dt", "t_end", "sample_every"},
    "output": {"dir", "seed", "decay_threshold", "constants_file", "scenario", "threads"},
    "sweep": {"k", "mu", "theta1"},
}

_COUPLING_CLASSES = ("none", "nudge_symmetric", "nudge_mutual", "dr_symmetric", "dr_mutual", "general")
_FORCING_KINDS = ("kolmogorov", "time_periodic", "decaying_pair")
_DIFFERENCE_KINDS = ("none", "random", "high_modes")


@dataclass
class ExperimentConfig:
    """Validated experiment description, one value per physical knob."""

    n: int
    nu: float
    K: float
    coupling_class: str
    dt: float
    t_end: float
    sample_every: float = 0.0
    dealias_radius: float | None = None
    mu1: float = 0.0
    mu2: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0
    general_entries: tuple = (0.0, 0.0, 0.0, 0.0)
    forcing_kind: str = "kolmogorov"
    amplitude: float = 0.0
    wavenumber: int = 2
    omega: float = 0.0
    pair_delta_amplitude: float = 0.0
    pair_decay_rate: float = 1.0
    pair_delta_max_wavenumber: float = 2.0
    initial_kind: str = "random"
    initial_modes: str = ""
    energy: float = 1.0
    spectrum_slope: float = 2.0
    max_wavenumber: float | None = None
    difference: str = "random"
    difference_scale: float = 1.0
    out_dir: str = "runs"
    seed: int = 0
    decay_threshold: float = 1e-6
    constants_file: str | None = None
    scenario: str = "self_sync"
    threads: int = 1
    sweep_K: tuple = ()
    sweep_mu: tuple = ()
    sweep_theta1: tuple = ()

    def validate(self):
        grid_limit = (self.dealias_radius if self.dealias_radius else self.n / 3.0)
        if self.K > grid_limit + 1e-12:
            raise ParseError(
                f"constraint violated: cutoff K = {self.K} exceeds the dealias radius {grid_limit:g}"
            )
        if self.nu <= 0 or self.dt <= 0 or self.t_end <= 0:
            raise ParseError("constraint violated: nu, dt, t_end must be positive")
        if self.coupling_class.startswith("nudge"):
            if self.mu1 < 0 or self.mu2 < 0:
                raise ParseError("constraint violated: nudging gains must be >= 0")
            if self.coupling_class == "nudge_symmetric" and self.mu1 < self.mu2:
                raise ParseError("constraint violated: symmetric nudging needs mu1 >= mu2")
        if self.coupling_class.startswith("dr"):
            if abs(self.theta1 + self.theta2 - 1.0) > 1e-12:
                raise ParseError(
                    f"constraint violated: theta1 + theta2 = {self.theta1 + self.theta2:g}, must equal 1"
                )
            if self.coupling_class == "dr_mutual" and (self.theta1 < 0 or self.theta2 < 0):
                raise ParseError("constraint violated: mutual replacement needs theta1, theta2 >= 0")
        if self.scenario not in SCENARIOS:
            raise ParseError(f"unknown scenario {self.scenario!r}")
        if self.difference not in _DIFFERENCE_KINDS:
            raise ParseError(f"unknown initial difference kind {self.difference!r}")
        return self


def _parse_kv_lines(text: str):
    """Yield (line_number, section, key, value) with strict syntax checking."""
    section = None
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ParseError(f"line {num}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ParseError(f"line {num}: expected key = value, got {raw!r}")
        if section is None:
            raise ParseError(f"line {num}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.split("#", 1)[0].strip()
        if key not in _SCHEMA[section]:
            raise ParseError(f"line {num}: unknown key {key!r} in section [{section}]")
        yield num, section, key, value


def _to_float(num, key, value):
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"line {num}: {key} must be a number, got {value!r}") from None


def _to_floats(num, key, value):
    try:
        return tuple(float(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise ParseError(f"line {num}: {key} must be a comma-separated number list") from None


def parse_config_text(text: str) -> ExperimentConfig:
    values: dict = {}
    for num, section, key, value in _parse_kv_lines(text):
        slot = f"{section}.{key}"
        if slot in values:
            raise ParseError(f"line {num}: duplicate key {key!r} in [{section}]")
        values[slot] = (num, value)

    def need(slot):
        if slot not in values:
            raise ParseError(f"missing required key {slot.replace('.', ': ', 1)}")
        return values[slot]

    def opt(slot, default=None):
        return values.get(slot, (0, default))

    num, raw = need("grid.n")
    n = int(_to_float(num, "n", raw))
    num, raw = need("physics.nu")
    nu = _to_float(num, "nu", raw)
    num, raw = need("physics.k")
    K = _to_float(num, "K", raw)
    num, raw = need("coupling.class")
    klass = raw.lower()
    if klass not in _COUPLING_CLASSES:
        raise ParseError(f"line {num}: unknown coupling class {raw!r}")
    num, raw = need("time.dt")
    dt = _to_float(num, "dt", raw)
    num, raw = need("time.t_end")
    t_end = _to_float(num, "t_end", raw)

    def fval(slot, default):
        num, raw = opt(slot)
        return default if raw is None else _to_float(num, slot, raw)

    def sval(slot, default):
        _, raw = opt(slot)
        return default if raw is None else raw

    def sweep_vals(slot):
        if slot not in values:
            return ()
        num, raw = values[slot]
        return _to_floats(num, slot, raw)

    cfg = ExperimentConfig(
        n=n,
        nu=nu,
        K=K,
        coupling_class=klass,
        dt=dt,
        t_end=t_end,
        sample_every=fval("time.sample_every", 0.0) or max(dt, t_end / 200.0),
        dealias_radius=fval("grid.dealias_radius", None),
        mu1=fval("coupling.mu1", 0.0),
        mu2=fval("coupling.mu2", 0.0),
        theta1=fval("coupling.theta1", 0.0),
        theta2=fval("coupling.theta2", 0.0),
        general_entries=(
            fval("coupling.m11", 0.0),
            fval("coupling.m12", 0.0),
            fval("coupling.m21", 0.0),
            fval("coupling.m22", 0.0),
        ),
        forcing_kind=sval("forcing.kind", "kolmogorov").lower(),
        amplitude=fval("forcing.amplitude", 0.0),
        wavenumber=int(fval("forcing.wavenumber", 2)),
        omega=fval("forcing.omega", 0.0),
        pair_delta_amplitude=fval("forcing.pair_delta_amplitude", 0.0),
        pair_decay_rate=fval("forcing.pair_decay_rate", 1.0),
        pair_delta_max_wavenumber=fval("forcing.pair_delta_max_wavenumber", 2.0),
        initial_kind=sval("initial.kind", "random").lower(),
        initial_modes=sval("initial.modes", ""),
        energy=fval("initial.energy", 1.0),
        spectrum_slope=fval("initial.spectrum_slope", 2.0),
        max_wavenumber=fval("initial.max_wavenumber", None),
        difference=sval("initial.difference", "random").lower(),
        difference_scale=fval("initial.difference_scale", 1.0),
        out_dir=sval("output.dir", "runs"),
        seed=int(fval("output.seed", 0)),
        decay_threshold=fval("output.decay_threshold", 1e-6),
        constants_file=sval("output.constants_file", None),
        scenario=sval("output.scenario", "self_sync").lower(),
        threads=int(fval("output.threads", 1)),
        sweep_K=sweep_vals("sweep.k"),
        sweep_mu=sweep_vals("sweep.mu"),
        sweep_theta1=sweep_vals("sweep.theta1"),
    )
    if cfg.forcing_kind not in _FORCING_KINDS:
        raise ParseError(f"unknown forcing kind {cfg.forcing_kind!r}")
    return cfg.validate()


def parse_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = ["[grid]", f"n = {cfg.n}"]
    if cfg.dealias_radius is not None:
        lines.append(f"dealias_radius = {cfg.dealias_radius!r}")
    lines += ["", "[physics]", f"nu = {cfg.nu!r}", f"K = {cfg.K!r}"]
    lines += ["", "[coupling]", f"class = {cfg.coupling_class}"]
    if cfg.coupling_class.startswith("nudge"):
        lines += [f"mu1 = {cfg.mu1!r}", f"mu2 = {cfg.mu2!r}"]
    elif cfg.coupling_class.startswith("dr"):
        lines += [f"theta1 = {cfg.theta1!r}", f"theta2 = {cfg.theta2!r}"]
    elif cfg.coupling_class == "general":
        m11, m12, m21, m22 = cfg.general_entries
        lines += [f"m11 = {m11!r}", f"m12 = {m12!r}", f"m21 = {m21!r}", f"m22 = {m22!r}"]
    lines += [
        "",
        "[forcing]",
        f"kind = {cfg.forcing_kind}",
        f"amplitude = {cfg.amplitude!r}",
        f"wavenumber = {cfg.wavenumber}",
        f"omega = {cfg.omega!r}",
        f"pair_delta_amplitude = {cfg.pair_delta_amplitude!r}",
        f"pair_decay_rate = {cfg.pair_decay_rate!r}",
        f"pair_delta_max_wavenumber = {cfg.pair_delta_max_wavenumber!r}",
        "",
        "[initial]",
        f"kind = {cfg.initial_kind}",
    ]
    if cfg.initial_modes:
        lines.append(f"modes = {cfg.initial_modes}")
    lines += [
        f"energy = {cfg.energy!r}",
        f"spectrum_slope = {cfg.spectrum_slope!r}",
    ]
    if cfg.max_wavenumber is not None:
        lines.append(f"max_wavenumber = {cfg.max_wavenumber!r}")
    lines += [
        f"difference = {cfg.difference}",
        f"difference_scale = {cfg.difference_scale!r}",
        "",
        "[time]",
        f"dt = {cfg.dt!r}",
        f"t_end = {cfg.t_end!r}",
        f"sample_every = {cfg.sample_every!r}",
        "",
        "[output]",
        f"dir = {cfg.out_dir}",
        f"seed = {cfg.seed}",
        f"decay_threshold = {cfg.decay_threshold!r}",
        f"scenario = {cfg.scenario}",
        f"threads = {cfg.threads}",
    ]
    if cfg.constants_file:
        lines.append(f"constants_file = {cfg.constants_file}")
    if cfg.sweep_K or cfg.sweep_mu or cfg.sweep_theta1:
        lines += ["", "[sweep]"]
        if cfg.sweep_K:
            lines.append("K = " + ", ".join(repr(v) for v in cfg.sweep_K))
        if cfg.sweep_mu:
            lines.append("mu = " + ", ".join(repr(v) for v in cfg.sweep_mu))
        if cfg.sweep_theta1:
            lines.append("theta1 = " + ", ".join(repr(v) for v in cfg.sweep_theta1))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# construction from config


def build_grid(cfg: ExperimentConfig) -> sp.Grid:
    return sp.Grid(cfg.n, cfg.dealias_radius)


def build_matrix(cfg: ExperimentConfig) -> dyn.IntertwiningMatrix:
    if cfg.coupling_class == "none":
        return dyn.IntertwiningMatrix.zero()
    if cfg.coupling_class == "nudge_symmetric":
        return dyn.IntertwiningMatrix.nudge_symmetric(cfg.mu1, cfg.mu2)
    if cfg.coupling_class == "nudge_mutual":
        return dyn.IntertwiningMatrix.nudge_mutual(cfg.mu1, cfg.mu2)
    if cfg.coupling_class == "dr_symmetric":
        return dyn.IntertwiningMatrix.dr_symmetric(cfg.theta1, cfg.theta2)
    if cfg.coupling_class == "dr_mutual":
        return dyn.IntertwiningMatrix.dr_mutual(cfg.theta1, cfg.theta2)
    return dyn.IntertwiningMatrix.general(*cfg.general_entries)


def build_forcing(cfg: ExperimentConfig, grid: sp.Grid, rng: np.random.Generator) -> fr.ForcingPair:
    base_field = fr.kolmogorov_force(grid, cfg.amplitude, cfg.wavenumber)
    if cfg.forcing_kind == "time_periodic":
        base = fr.TimePeriodicForcing(base_field, cfg.omega)
    else:
        base = fr.SteadyForcing(base_field)
    if cfg.forcing_kind == "decaying_pair" or cfg.pair_delta_amplitude != 0.0:
        delta = sp.random_field(
            grid, rng, energy=cfg.pair_delta_amplitude, slope=2.0,
            kmax=cfg.pair_delta_max_wavenumber,
        )
        return fr.ForcingPair.decaying_delta(base, delta, cfg.pair_decay_rate)
    return fr.ForcingPair.synchronized(base)


def _parse_mode_list(text: str):
    """Parse "kx,ky,re_x,im_x,re_y,im_y ; ..." into field_from_modes entries."""
    entries = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [float(p) for p in chunk.split(",")]
        if len(parts) != 6:
            raise ParseError(
                "each initial mode needs six numbers: kx, ky, re_x, im_x, re_y, im_y"
            )
        kx, ky, rex, imx, rey, imy = parts
        entries.append((int(kx), int(ky), (complex(rex, imx), complex(rey, imy))))
    if not entries:
        raise ParseError("initial kind = modes requires a nonempty modes list")
    return entries


def build_initial(cfg: ExperimentConfig, grid: sp.Grid, rng: np.random.Generator):
    """Initial pair (v1, v2) per config; the RNG stream order is fixed."""
    kmax = cfg.max_wavenumber if cfg.max_wavenumber is not None else grid.dealias_radius
    if cfg.initial_kind == "modes":
        v1 = sp.field_from_modes(grid, _parse_mode_list(cfg.initial_modes))
    else:
        v1 = sp.random_field(grid, rng, energy=cfg.energy, slope=cfg.spectrum_slope, kmax=kmax)
    if cfg.difference == "none":
        return v1, v1.copy()
    if cfg.difference == "random":
        offset = sp.random_field(grid, rng, energy=cfg.difference_scale, slope=cfg.spectrum_slope, kmax=kmax)
        return v1, v1 + offset
    # high_modes: offset supported strictly above the cutoff K
    raw = sp.random_field(grid, rng, energy=1.0, slope=cfg.spectrum_slope, kmax=grid.dealias_radius)
    offset = sp.project_high(raw, cfg.K)
    amp = offset.l2
    if amp == 0.0:
        raise ConfigInvalid("no modes available above the cutoff for a high-mode difference")
    return v1, v1 + (cfg.difference_scale / amp) * offset


def build_state(cfg: ExperimentConfig, scenario: str | None = None, seed: int | None = None):
    """Grid, rng, state wired per scenario; returns (state, rng, constants)."""
    scenario = scenario or cfg.scenario
    seed = cfg.seed if seed is None else seed
    grid = build_grid(cfg)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    matrix = build_matrix(cfg)
    if scenario == "fdss_determining_modes":
        matrix = dyn.IntertwiningMatrix.zero()
    elif scenario == "reconstruction_nudge":
        matrix = dyn.IntertwiningMatrix.nudge_mutual(0.0, max(cfg.mu1, cfg.mu2))
    elif scenario == "reconstruction_dr":
        matrix = dyn.IntertwiningMatrix.dr_mutual(0.0, 1.0)
    forcing = build_forcing(cfg, grid, rng)
    v1, v2 = build_initial(cfg, grid, rng)
    if scenario in ("reconstruction_nudge", "reconstruction_dr"):
        # the observer starts from the observed low modes of the truth
        v2 = sp.project_low(v1, cfg.K)
    state = dyn.IntertwinedState(
        grid=grid, t=0.0, nu=cfg.nu, K=cfg.K, matrix=matrix, v1=v1, v2=v2, forcing=forcing
    )
    constants = (
        ConstantsConfig.from_json(open(cfg.constants_file, encoding="utf-8").read())
        if cfg.constants_file
        else diag.default_constants()
    )
    return state, rng, constants


# ---------------------------------------------------------------------------
# checkpoints

_CKPT_MAGIC = b"ITWN"
_CKPT_VERSION = 1
_MATRIX_CODES = {
    dyn.NUDGE_SYMMETRIC: 0,
    dyn.NUDGE_MUTUAL: 1,
    dyn.DR_SYMMETRIC: 2,
    dyn.DR_MUTUAL: 3,
    dyn.GENERAL: 4,
}
_MATRIX_FROM_CODE = {v: k for k, v in _MATRIX_CODES.items()}


def _field_bytes(u: sp.SpectralField) -> bytes:
    # row-major over k; per mode: component 0 (re, im), component 1 (re, im)
    stacked = np.moveaxis(u.coeffs, 0, 2)  # (ky, kx, comp)
    interleaved = np.empty(stacked.shape + (2,), dtype="<f8")
    interleaved[..., 0] = stacked.real
    interleaved[..., 1] = stacked.imag
    return interleaved.tobytes()


def _field_from_bytes(grid: sp.Grid, blob: bytes) -> sp.SpectralField:
    arr = np.frombuffer(blob, dtype="<f8").reshape(grid.n, grid.n, 2, 2)
    # assign through the real/imag views: arithmetic like re + 1j*im would
    # flip the sign bit of negative zeros and break the bit-exact round trip
    cplx = np.empty((grid.n, grid.n, 2), dtype=np.complex128)
    cplx.real = arr[..., 0]
    cplx.imag = arr[..., 1]
    return sp.SpectralField(grid, np.ascontiguousarray(np.moveaxis(cplx, 2, 0)))


def checkpoint_save(state: dyn.IntertwinedState, path, seed: int = 0) -> None:
    """Binary checkpoint, little-endian, bit-exact round trip.

    Layout: magic "ITWN", u32 version, f64 nu, f64 t, u32 n, f64 K,
    u8 matrix class, two f64 matrix params, u64 seed, then the v1 and v2
    coefficient blocks.  The forcing is not serialized; it is rebuilt from
    the config on load.  General matrices carry only their first two entries,
    so only the zero general matrix round-trips (named classes always do).
    """
    m = state.matrix
    if m.kind == dyn.GENERAL and np.any(m.entries != 0.0):
        raise ConfigInvalid("checkpoint format holds two matrix params; general matrices unsupported")
    params = (m.params + (0.0, 0.0))[:2]
    header = _CKPT_MAGIC + struct.pack(
        "<IddIdBddQ",
        _CKPT_VERSION,
        state.nu,
        state.t,
        state.grid.n,
        state.K,
        _MATRIX_CODES[m.kind],
        params[0],
        params[1],
        seed,
    )
    payload = header + _field_bytes(state.v1) + _field_bytes(state.v2)
    _atomic_write_bytes(path, payload)


def checkpoint_load(path) -> tuple[dyn.IntertwinedState, int]:
    """Load a checkpoint; the returned state carries a zero forcing pair."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _CKPT_MAGIC:
        raise IoError(f"{path}: not a checkpoint (bad magic)")
    head = struct.Struct("<IddIdBddQ")
    try:
        version, nu, t, n, K, code, p1, p2, seed = head.unpack_from(blob, 4)
    except struct.error as exc:
        raise IoError(f"{path}: truncated checkpoint header") from exc
    if version != _CKPT_VERSION:
        raise IoError(f"{path}: unsupported checkpoint version {version}")
    grid = sp.Grid(int(n))
    kind = _MATRIX_FROM_CODE.get(int(code))
    if kind is None:
        raise IoError(f"{path}: unknown matrix class code {code}")
    if kind == dyn.NUDGE_SYMMETRIC:
        matrix = dyn.IntertwiningMatrix.nudge_symmetric(p1, p2)
    elif kind == dyn.NUDGE_MUTUAL:
        matrix = dyn.IntertwiningMatrix.nudge_mutual(p1, p2)
    elif kind == dyn.DR_SYMMETRIC:
        matrix = dyn.IntertwiningMatrix.dr_symmetric(p1, p2)
    elif kind == dyn.DR_MUTUAL:
        matrix = dyn.IntertwiningMatrix.dr_mutual(p1, p2)
    else:
        matrix = dyn.IntertwiningMatrix.zero()
    offset = 4 + head.size
    block = grid.n * grid.n * 2 * 2 * 8
    if len(blob) < offset + 2 * block:
        raise IoError(f"{path}: truncated coefficient blocks")
    v1 = _field_from_bytes(grid, blob[offset : offset + block])
    v2 = _field_from_bytes(grid, blob[offset + block : offset + 2 * block])
    zero_pair = fr.ForcingPair.synchronized(fr.SteadyForcing(sp.zero_field(grid)))
    state = dyn.IntertwinedState(
        grid=grid, t=t, nu=nu, K=K, matrix=matrix, v1=v1, v2=v2, forcing=zero_pair
    )
    return state, int(seed)


def _atomic_write_bytes(path, payload: bytes) -> None:
    path = os.fspath(path)
    dir_ = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=dir_, prefix=".tmp_", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise IoError(str(exc)) from exc


def _atomic_write_text(path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# scenario library

FDM_LADDER = (1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0)


@dataclass
class ScenarioResult:
    """What a scenario run produced: verdicts, reports, artifact paths."""

    scenario: str
    out_dir: str
    decayed: bool | None = None
    decay_l2: diag.DecayVerdict | None = None
    decay_h1: diag.DecayVerdict | None = None
    final_ratio: float = math.nan
    reports: list = field(default_factory=list)
    blowup: bool = False
    blowup_t: float = math.nan
    extras: dict = field(default_factory=dict)


def _collect_series(records: list[TimeSeriesRecord], column: str):
    return [(rec.t, getattr(rec, column)) for rec in records]


def _pair_h1_series(records):
    return [(rec.t, math.sqrt(rec.h1_v1**2 + rec.h1_v2**2)) for rec in records]


def _theta_pair_series(records, matrix):
    # at theta1*theta2 = 0 the rescaled error vanishes identically, while the
    # recorded h1_wtheta column holds the unscaled difference; drop it there
    theta1, theta2 = matrix.params
    use_w = theta1 * theta2 > 0
    return [
        (rec.t, math.sqrt(rec.h1_vtheta**2 + (rec.h1_wtheta**2 if use_w else 0.0)))
        for rec in records
        if not math.isnan(rec.h1_vtheta)
    ]


def _dr_bound_formula(matrix: dyn.IntertwiningMatrix) -> str:
    theta1, theta2 = matrix.params
    if matrix.kind == dyn.DR_MUTUAL:
        return "dr_mutual_pair"
    if abs(theta1 - 1.0) < 1e-12:
        return "dr_decoupled"
    if abs(theta1 - theta2) < 1e-12:
        return "dr_balanced"
    if theta2 <= abs(theta1 - theta2):
        return "dr_small_theta2"
    return "dr_near_balanced"


def _condition_reports(state0, records, constants, nu) -> list[ConditionReport]:
    """Evaluate the sufficient conditions and the uniform bound for one run."""
    matrix = state0.matrix
    reports: list[ConditionReport] = []
    if not (matrix.is_nudging or matrix.is_direct_replacement):
        return reports
    m_meas = diag.measured_m_frak(
        [rec.h1_v1 for rec in records], [rec.h1_v2 for rec in records], nu
    )
    grashofs = diag.grashof_set_for_state(state0, m_frak=m_meas)
    if matrix.is_nudging:
        mu1, mu2 = matrix.params
        reports.append(diag.check_nudge_fdss_condition(state0.K, m_meas, constants))
        reports.append(diag.check_nudge_ss_condition(state0.K, mu1, mu2, m_meas, nu, constants))
        if matrix.kind == dyn.NUDGE_MUTUAL and min(mu1, mu2) > 0:
            reports.append(
                diag.check_uniform_bound(
                    _pair_h1_series(records), "nudge_mutual", grashofs, matrix, nu
                )
            )
            slack = diag.energy_inequality_slack(records, nu, mu1, mu2)
            reports.append(
                ConditionReport.compare(
                    "energy_inequality",
                    slack,
                    1e-6,
                    f"integrated weighted energy inequality slack = {slack:.3e} <= 1e-6",
                )
            )
        elif matrix.kind == dyn.NUDGE_SYMMETRIC:
            reports.append(
                diag.check_uniform_bound(
                    _pair_h1_series(records), "nudge_symmetric", grashofs, matrix, nu
                )
            )
    else:
        theta1, theta2 = matrix.params
        reports.append(diag.check_dr_condition(state0.K, m_meas, constants))
        m0 = max(state0.v1.h1, state0.v2.h1) / nu
        reports.extend(
            diag.check_theta_regime(
                theta1, theta2, state0.K, m0, grashofs.g, constants,
                m_frak=m_meas, grashofs=grashofs,
            )
        )
        formula = _dr_bound_formula(matrix)
        if formula == "dr_mutual_pair":
            reports.append(diag.condition_cutoff_dr_mutual(state0.K, grashofs.g_theta, constants))
            series = _theta_pair_series(records, matrix)
        else:
            if formula == "dr_decoupled":
                reports.append(diag.condition_cutoff_decoupled(state0.K, grashofs.k_frak, constants))
            elif formula == "dr_small_theta2":
                reports.append(diag.condition_cutoff_small_theta2(state0.K, grashofs.k_frak, constants))
            elif formula == "dr_near_balanced":
                reports.append(
                    diag.condition_cutoff_near_balanced(
                        state0.K, grashofs.p_frak, grashofs.h_frak, constants
                    )
                )
            series = _pair_h1_series(records)
        reports.append(diag.check_uniform_bound(series, formula, grashofs, matrix, nu))
    return reports


def _integrate_with_records(cfg, state, extra_sink=None):
    records: list[TimeSeriesRecord] = []

    def sink(snapshot):
        records.append(diag.sample_record(snapshot))
        if extra_sink is not None:
            extra_sink(snapshot)

    final = dyn.integrate(
        state, cfg.t_end, dt=cfg.dt, sample_every=cfg.sample_every, sink=sink
    )
    diag.fill_energy_residuals(records, cfg.nu)
    return final, records


def write_outputs(records, reports, dir_path) -> None:
    """Write the CSV series and condition reports into a directory."""
    os.makedirs(dir_path, exist_ok=True)
    diag.write_timeseries_csv(os.path.join(dir_path, "series.csv"), records)
    diag.write_condition_reports(dir_path, reports)


def _write_run_artifacts(cfg, out_dir, records, reports, final_state, constants, result):
    os.makedirs(out_dir, exist_ok=True)
    _atomic_write_text(os.path.join(out_dir, "config.ini"), serialize_config(cfg))
    _atomic_write_text(os.path.join(out_dir, "constants.json"), constants.to_json())
    write_outputs(records, reports, out_dir)
    if final_state is not None:
        checkpoint_save(final_state, os.path.join(out_dir, "final.ckpt"), seed=cfg.seed)
    manifest = {
        "package": "intertwine",
        "version": __import__("intertwine").__version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "seed": cfg.seed,
        "scenario": result.scenario,
        "decayed": result.decayed,
        "final_ratio": None if math.isnan(result.final_ratio) else result.final_ratio,
        "blowup": result.blowup,
    }
    _atomic_write_text(
        os.path.join(out_dir, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True)
    )


def run_scenario(cfg: ExperimentConfig, kind: str | None = None, out_dir=None, seed=None) -> ScenarioResult:
    """Run one scenario and persist its artifacts; returns the verdict bundle.

    self_sync integrates the configured coupling from distinct initial states
    under a synchronous force pair and reports decay of |w| and of its V norm;
    the reconstruction scenarios wire the endpoint one-directional couplings
    (truth plus observer); fdss_determining_modes runs the uncoupled pair with
    a decaying force offset and tabulates low-mode versus full-state decay;
    regime_sweep fans self_sync over parameter grids.
    """
    kind = (kind or cfg.scenario).lower()
    if kind not in SCENARIOS:
        raise ConfigInvalid(f"unknown scenario {kind!r}")
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    out_dir = os.fspath(out_dir or cfg.out_dir)
    if kind == "regime_sweep":
        return _run_sweep(cfg, out_dir)

    state, _rng, constants = build_state(cfg, scenario=kind)
    result = ScenarioResult(scenario=kind, out_dir=out_dir)
    cfg = replace(cfg, scenario=kind)

    ladder = None
    ladder_rows = []
    if kind == "fdss_determining_modes":
        ladder = [N for N in FDM_LADDER if N <= state.grid.dealias_radius]

        def extra_sink(snapshot, _ladder=ladder, _rows=ladder_rows):
            w = snapshot.v1 - snapshot.v2
            _rows.append(
                (snapshot.t, [sp.project_low(w, N).l2 for N in _ladder])
            )

    else:
        extra_sink = None

    final_state = None
    records: list[TimeSeriesRecord] = []
    try:
        final_state, records = _integrate_with_records(cfg, state, extra_sink)
    except dyn.BlowupDetected as exc:
        result.blowup = True
        result.blowup_t = exc.t

    if records:
        l2_series = _collect_series(records, "l2_w")
        h1_series = _collect_series(records, "h1_w")
        try:
            result.decay_l2 = diag.decay_detect(l2_series, threshold=cfg.decay_threshold)
            result.decay_h1 = diag.decay_detect(h1_series, threshold=cfg.decay_threshold)
        except diag.InsufficientData:
            pass
        initial = l2_series[0][1]
        if initial > 0:
            result.final_ratio = l2_series[-1][1] / initial
        # the scenario verdict is the explicit finite-horizon ratio criterion;
        # the fitted-rate verdicts above stay available as diagnostics
        result.decayed = bool(initial > 0 and result.final_ratio <= cfg.decay_threshold)
        result.reports = _condition_reports(state, records, constants, cfg.nu)

    if ladder is not None and ladder_rows:
        result.extras["fdm"] = _fdm_verdicts(cfg, ladder, ladder_rows, result)
        _write_fdm_table(out_dir, ladder, ladder_rows)

    _write_run_artifacts(cfg, out_dir, records, result.reports, final_state, constants, result)
    return result


def _fdm_verdicts(cfg, ladder, rows, result):
    """Per-N decay verdicts and the empirical determining-modes threshold.

    The threshold proxy is the smallest ladder N whose low-mode verdict
    agrees with the full-state verdict from that N upward; the asymptotic
    dimension itself is not computable from a finite run.
    """
    per_n = []
    for j, _ in enumerate(ladder):
        initial = rows[0][1][j]
        final = rows[-1][1][j]
        per_n.append(bool(initial > 0 and final <= cfg.decay_threshold * initial))
    full = bool(result.decayed)
    threshold = None
    for j in range(len(ladder)):
        if all(per_n[i] == full for i in range(j, len(ladder))):
            threshold = ladder[j]
            break
    # the implication "low modes decayed => full state decayed" must hold at
    # and above the threshold; smaller N may disagree (below the determining
    # dimension) without contradiction
    consistent = threshold is not None and all(
        (not per_n[j]) or full for j, N in enumerate(ladder) if N >= threshold
    )
    return {
        "ladder": list(ladder),
        "low_mode_decayed": per_n,
        "full_decayed": full,
        "threshold_proxy": threshold,
        "implication_consistent": consistent,
    }


def _write_fdm_table(out_dir, ladder, rows):
    os.makedirs(out_dir, exist_ok=True)
    lines = ["t," + ",".join(f"l2_P{N:g}_w" for N in ladder)]
    for t, vals in rows:
        lines.append(",".join([f"{t:.17g}"] + [f"{v:.17g}" for v in vals]))
    _atomic_write_text(os.path.join(out_dir, "fdm_table.csv"), "\r\n".join(lines) + "\r\n")


# ---------------------------------------------------------------------------
# parameter sweeps


def _sweep_points(cfg: ExperimentConfig):
    ks = cfg.sweep_K or (cfg.K,)
    if cfg.coupling_class.startswith("nudge"):
        seconds = [("mu", v) for v in (cfg.sweep_mu or (max(cfg.mu1, cfg.mu2),))]
    elif cfg.coupling_class.startswith("dr"):
        seconds = [("theta1", v) for v in (cfg.sweep_theta1 or (cfg.theta1,))]
    else:
        seconds = [("mu", 0.0)]
    points = []
    for K in ks:
        for name, val in seconds:
            points.append({"K": float(K), name: float(val)})
    return points


def _point_config(cfg: ExperimentConfig, point: dict) -> ExperimentConfig:
    updates = {"K": point["K"]}
    if "mu" in point and cfg.coupling_class.startswith("nudge"):
        updates["mu1"] = point["mu"]
        updates["mu2"] = point["mu"]
    if "theta1" in point and cfg.coupling_class.startswith("dr"):
        updates["theta1"] = point["theta1"]
        updates["theta2"] = 1.0 - point["theta1"]
    return replace(cfg, **updates, sweep_K=(), sweep_mu=(), sweep_theta1=())


def _run_sweep_point(args):
    cfg, point, index, out_dir = args
    pcfg = _point_config(cfg, point)
    pdir = os.path.join(out_dir, f"point_{index:03d}")
    try:
        res = run_scenario(pcfg, kind="self_sync", out_dir=pdir)
    except (ParseError, ConfigInvalid, dyn.StepGuardViolation) as exc:
        return {**point, "index": index, "error": str(exc)}
    row = {
        **point,
        "index": index,
        "decayed": res.decayed,
        "final_ratio": res.final_ratio,
        "rate": res.decay_l2.rate if res.decay_l2 else math.nan,
        "blowup": res.blowup,
        "condition_satisfied": all(
            rep.satisfied for rep in res.reports if rep.name in ("nudge_ss", "dr_ss")
        ),
    }
    return row


def _run_sweep(cfg: ExperimentConfig, out_dir: str) -> ScenarioResult:
    """Grid sweep over K and mu or theta; each point fully isolated.

    Per-point RNG streams derive from (master seed, point index).  Blowups
    are recorded per point, never fatal to the sweep.  The verdict table is
    checked for non-monotone decay-versus-K patterns, which are flagged for
    human review rather than asserted away.
    """
    os.makedirs(out_dir, exist_ok=True)
    points = _sweep_points(cfg)
    jobs = []
    for index, point in enumerate(points):
        child = int(np.random.SeedSequence([cfg.seed, index]).generate_state(1, dtype=np.uint64)[0])
        jobs.append((replace(cfg, seed=child % (2**63)), point, index, out_dir))
    threads = max(1, cfg.threads)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_sweep_point, jobs))
    else:
        rows = [_run_sweep_point(job) for job in jobs]

    flags = _monotonicity_flags(rows)
    result = ScenarioResult(scenario="regime_sweep", out_dir=out_dir)
    result.extras["table"] = rows
    result.extras["monotonicity_flags"] = flags
    _write_sweep_table(out_dir, rows, flags)
    _atomic_write_text(os.path.join(out_dir, "config.ini"), serialize_config(cfg))
    return result


def _monotonicity_flags(rows):
    """Flag K-orderings where decay turns off again as K grows."""
    flags = []
    by_second = {}
    for row in rows:
        if "error" in row:
            continue
        key = tuple((k, v) for k, v in sorted(row.items()) if k in ("mu", "theta1"))
        by_second.setdefault(key, []).append(row)
    for key, group in by_second.items():
        group = sorted(group, key=lambda r: r["K"])
        seen_decay = False
        for row in group:
            if row["decayed"]:
                seen_decay = True
            elif seen_decay:
                flags.append(
                    f"non-monotone decay vs K at K={row['K']:g} for {dict(key)}"
                )
    return flags


def _write_sweep_table(out_dir, rows, flags):
    cols = sorted({key for row in rows for key in row})
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_csv_cell(row.get(col)) for col in cols))
    _atomic_write_text(os.path.join(out_dir, "sweep_table.csv"), "\r\n".join(lines) + "\r\n")
    if flags:
        _atomic_write_text(os.path.join(out_dir, "sweep_flags.txt"), "\n".join(flags) + "\n")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)
