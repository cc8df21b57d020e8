"""Empirical measures, fluctuation fields, and martingale diagnostics.

Test functions are periodic Fourier modes and periodized Gaussian bumps:
their discrete norms and generator actions are exact through the torus
symbol, which removes one layer of approximation from every check built
on top of them.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import _loops
from .hydro import DensityField, apply_L
from .jumpkernel import DiscreteKernel, FourierSymbol
from .simulate import Configuration, _periodized_gaussian


class TestFunctionKind(str, Enum):
    FOURIER_MODE = "fourier_mode"
    GAUSSIAN_BUMP = "gaussian_bump"
    TABULATED = "tabulated"


@dataclass
class TestFunction:
    """Smooth test function on the unit torus with cached grid evaluations."""

    kind: TestFunctionKind
    mode: int = 1
    phase: str = "cos"  # "cos" or "sin", Fourier kind only
    amplitude: float = 1.0
    center: float = 0.5
    width: float = 0.1
    table: Optional[np.ndarray] = None
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind is TestFunctionKind.FOURIER_MODE and self.phase not in ("cos", "sin"):
            raise ValueError("phase must be 'cos' or 'sin'")
        if self.kind is TestFunctionKind.TABULATED and self.table is None:
            raise ValueError("tabulated test function needs a table")
        if not self.label:
            self.label = self._default_label()

    def _default_label(self) -> str:
        if self.kind is TestFunctionKind.FOURIER_MODE:
            return f"{self.phase}{self.mode}"
        if self.kind is TestFunctionKind.GAUSSIAN_BUMP:
            return f"bump(c={self.center},w={self.width})"
        return "tabulated"

    def values(self, n: int) -> np.ndarray:
        """Grid evaluation at x/n for x = 0..n-1 (d=1), cached per n."""
        if n not in self._cache:
            u = np.arange(n) / n
            if self.kind is TestFunctionKind.FOURIER_MODE:
                if self.mode == 0:
                    vals = np.full(n, self.amplitude)
                elif self.phase == "cos":
                    vals = self.amplitude * np.sqrt(2.0) * np.cos(2 * np.pi * self.mode * u)
                else:
                    vals = self.amplitude * np.sqrt(2.0) * np.sin(2 * np.pi * self.mode * u)
            elif self.kind is TestFunctionKind.GAUSSIAN_BUMP:
                delta = np.minimum(np.abs(u - self.center), 1.0 - np.abs(u - self.center))
                vals = self.amplitude * _periodized_gaussian(delta, self.width)
            else:
                table = np.asarray(self.table, dtype=float)
                grid = np.arange(len(table) + 1) / len(table)
                vals = np.interp(u, grid, np.append(table, table[0]))
            self._cache[n] = vals
        return self._cache[n]

    def discrete_norm_sq(self, n: int) -> float:
        """Squared discrete L2 norm n^-1 sum phi^2."""
        v = self.values(n)
        return float(v @ v) / n

    def generator_action(self, symbol: FourierSymbol) -> np.ndarray:
        """L_n phi on the grid via the exact torus symbol (no alpha factor)."""
        f = DensityField(M=symbol.M, d=1, values=self.values(symbol.M))
        return apply_L(f, symbol).values


def empirical(config: Configuration, phi_values: np.ndarray) -> float:
    """pi_n(phi) = n^-d sum eta(x) phi(x/n)."""
    if len(phi_values) != config.sites:
        raise ValueError("test-function grid does not match the configuration")
    return float(config.occ @ phi_values) / config.sites


def fluctuation(config: Configuration, phi_values: np.ndarray,
                mean: DensityField) -> float:
    """Y(phi) = n^{d/2} (pi_n(phi) - <mean profile, phi>)."""
    if mean.M**mean.d != config.sites:
        raise ValueError("mean profile grid does not match the configuration")
    if abs(mean.time - config.time) > 1e-9:
        raise ValueError(f"time-stamp mismatch: config at {config.time}, mean at {mean.time}")
    centered = empirical(config, phi_values) - mean.inner(phi_values)
    return float(np.sqrt(config.sites) * centered)


def carre_du_champ(config: Configuration, phi_values: np.ndarray,
                   kernel: DiscreteKernel, alpha: float) -> float:
    """Instantaneous quadratic-variation density of the fluctuation martingale.

    (n^beta / n^d) sum_{x,z} q(z) eta(x) (alpha + eta(x+z))
    (phi((x+z)/n) - phi(x/n))^2, by direct double sum restricted to
    occupied sites and the kernel window.
    """
    if kernel.M != config.n:
        raise ValueError("kernel torus does not match the configuration")
    raw = _loops.carre_sum(config.occ, alpha, kernel.probs, kernel.displacements,
                           np.asarray(phi_values, dtype=float), config.n, config.d)
    speed = float(config.n) ** kernel.spec.beta
    return float(raw * speed / config.sites)


def cumulative_trapezoid(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    if len(times) > 1:
        inc = 0.5 * np.diff(times) * (values[1:] + values[:-1])
        out[1:] = np.cumsum(inc)
    return out


def dynkin_residual(times, field_values, drift_values) -> np.ndarray:
    """M_t = F_t - F_0 - int_0^t drift ds, trapezoid on the snapshot grid.

    Works for both the empirical measure (drift = pi_s(alpha L phi)) and
    the fluctuation field (drift = Y_s(alpha L phi)); the quadrature error
    is O(spacing^2) and is budgeted into the calling tolerance.
    """
    times = np.asarray(times, dtype=float)
    field_values = np.asarray(field_values, dtype=float)
    if len(times) < 2:
        raise ValueError("need at least two snapshots")
    return field_values - field_values[0] - cumulative_trapezoid(times, drift_values)


class ReplicaStats:
    """Single-pass mean/variance accumulator with associative merge."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0

    def add(self, value: float):
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (value - self.mean)

    def merge(self, other: "ReplicaStats"):
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self._m2 = other.count, other.mean, other._m2
            return
        total = self.count + other.count
        delta = other.mean - self.mean
        self._m2 += other._m2 + delta**2 * self.count * other.count / total
        self.mean += delta * other.count / total
        self.count = total

    @property
    def variance(self) -> float:
        return self._m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def se(self) -> float:
        return float(np.sqrt(self.variance / self.count)) if self.count else 0.0

    @property
    def variance_se(self) -> float:
        """Standard error of the variance estimate (normal approximation)."""
        if self.count < 2:
            return 0.0
        return float(self.variance * np.sqrt(2.0 / (self.count - 1)))
