"""Time-dependent body forces for the coupled systems.

Forces are always mean-free and divergence-free (elements of the same space
as the velocity) and bounded in time.  A ForcingPair bundles the two forces
driving the two copies; the decaying-delta pair g2 = g1 + exp(-rate*t)*delta
is the canonical synchronous pair used by the determining-modes experiments.
"""

from __future__ import annotations

import numpy as np

from .spectral import Grid, SpectralField, field_from_modes, zero_field

STEADY = "steady"
TIME_PERIODIC = "time_periodic"
DECAYING_PAIR_DELTA = "decaying_pair_delta"


class Forcing:
    """Base class: a bounded curve t -> g(t) in the divergence-free space."""

    kind = STEADY

    def __call__(self, t: float) -> SpectralField:
        raise NotImplementedError

    def sup_l2(self) -> float:
        """sup over t >= 0 of |g(t)|, exact where a closed form exists."""
        raise NotImplementedError


class SteadyForcing(Forcing):
    kind = STEADY

    def __init__(self, field: SpectralField):
        self.field = field

    def __call__(self, t: float) -> SpectralField:
        return self.field

    def sup_l2(self) -> float:
        return self.field.l2


class TimePeriodicForcing(Forcing):
    """g(t) = cos(omega t) * a + sin(omega t) * b."""

    kind = TIME_PERIODIC

    def __init__(self, cos_field: SpectralField, omega: float, sin_field=None):
        self.cos_field = cos_field
        self.sin_field = sin_field if sin_field is not None else zero_field(cos_field.grid)
        self.omega = float(omega)

    def __call__(self, t: float) -> SpectralField:
        return np.cos(self.omega * t) * self.cos_field + np.sin(self.omega * t) * self.sin_field

    def sup_l2(self) -> float:
        # |g(t)|^2 is a quadratic form in (cos, sin); the sup is the largest
        # eigenvalue of the 2x2 Gram matrix of (a, b)
        from .spectral import inner

        aa = inner(self.cos_field, self.cos_field)
        bb = inner(self.sin_field, self.sin_field)
        ab = inner(self.cos_field, self.sin_field)
        half_tr = 0.5 * (aa + bb)
        rad = np.sqrt(max(0.0, (0.5 * (aa - bb)) ** 2 + ab**2))
        return float(np.sqrt(max(0.0, half_tr + rad)))


class DecayingDeltaForcing(Forcing):
    """base(t) + exp(-rate * t) * delta; tends to base, giving a synchronous pair."""

    kind = DECAYING_PAIR_DELTA

    def __init__(self, base: Forcing, delta: SpectralField, rate: float):
        if rate <= 0:
            raise ValueError("decay rate must be positive")
        self.base = base
        self.delta = delta
        self.rate = float(rate)

    def __call__(self, t: float) -> SpectralField:
        return self.base(t) + np.exp(-self.rate * t) * self.delta

    def sup_l2(self) -> float:
        # triangle-inequality envelope; exact for steady base when the
        # offset is aligned, and always an upper bound
        return self.base.sup_l2() + self.delta.l2


class ForcingPair:
    """The pair (g1, g2) driving the two copies of the system."""

    def __init__(self, g1: Forcing, g2: Forcing | None = None):
        self.g1 = g1
        self.g2 = g2 if g2 is not None else g1

    @classmethod
    def synchronized(cls, g: Forcing) -> "ForcingPair":
        return cls(g, g)

    @classmethod
    def decaying_delta(cls, base: Forcing, delta: SpectralField, rate: float) -> "ForcingPair":
        return cls(base, DecayingDeltaForcing(base, delta, rate))

    def h(self, t: float) -> SpectralField:
        """The force mismatch g1(t) - g2(t)."""
        return self.g1(t) - self.g2(t)

    def sup_h_l2(self, t0: float = 0.0) -> float:
        """sup over t >= t0 of |g1 - g2|; exact for the decaying-delta pair."""
        if self.g2 is self.g1:
            return 0.0
        if isinstance(self.g2, DecayingDeltaForcing) and self.g2.base is self.g1:
            return float(np.exp(-self.g2.rate * t0)) * self.g2.delta.l2
        ts = np.linspace(t0, t0 + 50.0, 501)
        return max(self.h(float(t)).l2 for t in ts)


def kolmogorov_force(grid: Grid, amplitude: float, wavenumber: int = 2) -> SpectralField:
    """Unidirectional shear force amplitude * (sin(wavenumber * y), 0)."""
    kf = int(wavenumber)
    if kf < 1:
        raise ValueError("forcing wavenumber must be >= 1")
    # sin(kf y) = (e^{i kf y} - e^{-i kf y}) / (2i); field_from_modes adds the
    # conjugate partner, so pass half of the pair once
    c = amplitude / 2.0 / 1j
    return field_from_modes(grid, [(0, kf, (c, 0.0))])
