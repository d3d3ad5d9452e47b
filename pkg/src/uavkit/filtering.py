"""Second-order Butterworth low-pass front end for the analog IMU channels."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class FilterSpec:
    cutoff_hz: float = 5.0
    sample_rate_hz: float = 250.0
    order: int = 2

    def __post_init__(self):
        if self.order != 2:
            raise InvalidInputError("only order-2 filters are supported")
        if not self.sample_rate_hz > 0.0:
            raise InvalidInputError("sample rate must be positive")
        if not 0.0 < self.cutoff_hz < self.sample_rate_hz / 2.0:
            raise InvalidInputError(
                f"cutoff {self.cutoff_hz} Hz must lie in (0, {self.sample_rate_hz / 2.0}) Hz"
            )


class BiquadState:
    """One transposed direct-form-II section with its own delay line.

    ``a1``/``a2`` are the feedback coefficients of
    ``H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)``.
    """

    __slots__ = ("b0", "b1", "b2", "a1", "a2", "z1", "z2", "primed")

    def __init__(self, b0, b1, b2, a1, a2):
        self.b0, self.b1, self.b2 = b0, b1, b2
        self.a1, self.a2 = a1, a2
        self.z1 = 0.0
        self.z2 = 0.0
        self.primed = False

    @property
    def b(self):
        return np.array([self.b0, self.b1, self.b2])

    @property
    def a(self):
        return np.array([1.0, self.a1, self.a2])

    def dc_gain(self):
        return (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)

    def poles(self):
        return np.roots([1.0, self.a1, self.a2])

    def response(self, freq_hz, sample_rate_hz):
        """Complex frequency response at ``freq_hz``."""
        zi = cmath.exp(-2j * math.pi * freq_hz / sample_rate_hz)
        return (self.b0 + self.b1 * zi + self.b2 * zi * zi) / (1.0 + self.a1 * zi + self.a2 * zi * zi)

    def prime(self, x0):
        """Load the delay line with the steady state for a constant input ``x0``."""
        self.z2 = (self.b2 - self.a2) * x0
        self.z1 = (self.b1 - self.a1) * x0 + self.z2
        self.primed = True

    def copy(self):
        other = BiquadState(self.b0, self.b1, self.b2, self.a1, self.a2)
        other.z1, other.z2, other.primed = self.z1, self.z2, self.primed
        return other


def design_butterworth(spec: FilterSpec = FilterSpec()) -> BiquadState:
    """Bilinear-transform Butterworth low-pass, pre-warped at the cutoff."""
    k = math.tan(math.pi * spec.cutoff_hz / spec.sample_rate_hz)
    k2 = k * k
    norm = 1.0 / (1.0 + math.sqrt(2.0) * k + k2)
    b0 = k2 * norm
    return BiquadState(
        b0,
        2.0 * b0,
        b0,
        2.0 * (k2 - 1.0) * norm,
        (1.0 - math.sqrt(2.0) * k + k2) * norm,
    )


def filter_step(state: BiquadState, sample: float) -> float:
    """Advance the filter by one sample (in place) and return the output.

    An unprimed state is warm-started at the first sample, so a constant
    input passes through without a start-up transient.
    """
    if not state.primed:
        state.prime(sample)
    y = state.b0 * sample + state.z1
    state.z1 = state.b1 * sample - state.a1 * y + state.z2
    state.z2 = state.b2 * sample - state.a2 * y
    return y


def filter_signal(state: BiquadState, samples) -> np.ndarray:
    return np.array([filter_step(state, float(x)) for x in samples])


class ImuConditioner:
    """Independent filters for the three accelerometer and three gyro axes."""

    def __init__(self, spec: FilterSpec = FilterSpec()):
        self.spec = spec
        self._acc = [design_butterworth(spec) for _ in range(3)]
        self._gyro = [design_butterworth(spec) for _ in range(3)]

    def step(self, acc, gyro):
        a = np.array([filter_step(f, float(x)) for f, x in zip(self._acc, acc)])
        g = np.array([filter_step(f, float(x)) for f, x in zip(self._gyro, gyro)])
        return a, g
