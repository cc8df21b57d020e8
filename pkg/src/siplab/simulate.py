"""Event-driven simulation of the inclusion process on a periodic torus.

Jump rates are ``n^beta * q(z) * eta(x) * (alpha + eta(y))``; simulation is
exact-law thinning against the running occupancy bound, with time kept in
macroscopic units (the ``n^beta`` speed-up enters only the event rates).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import _loops
from .jumpkernel import DiscreteKernel


class ProfileKind(str, Enum):
    CONSTANT = "constant"
    GAUSSIAN_BUMP = "gaussian_bump"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class InitialProfile:
    """Bounded nonnegative density profile on the unit torus."""

    kind: ProfileKind
    level: float = 0.0
    amplitude: float = 0.0
    center: float = 0.5
    width: float = 0.1
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind is ProfileKind.CONSTANT and self.level < 0:
            raise ValueError("constant profile must be nonnegative")
        if self.kind is ProfileKind.GAUSSIAN_BUMP:
            if self.level < 0 or self.amplitude < 0 or self.width <= 0:
                raise ValueError("bump profile must be nonnegative with positive width")
        if self.kind is ProfileKind.TABULATED:
            if self.table is None or np.any(np.asarray(self.table) < 0):
                raise ValueError("tabulated profile must be a nonnegative array")

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """Profile values at macroscopic positions u in [0,1)^d."""
        u = np.asarray(u, dtype=float)
        if self.kind is ProfileKind.CONSTANT:
            return np.full(u.shape if u.ndim <= 1 else u.shape[:-1], self.level)
        if self.kind is ProfileKind.GAUSSIAN_BUMP:
            if u.ndim > 1:
                r2 = np.zeros(u.shape[:-1])
                for a in range(u.shape[-1]):
                    da = _torus_dist(u[..., a], self.center)
                    r2 = r2 + da**2
            else:
                r2 = _torus_dist(u, self.center) ** 2
            # periodization of the Gaussian; images beyond +-3 are negligible
            out = np.full_like(r2, self.level, dtype=float)
            out += self.amplitude * _periodized_gaussian(np.sqrt(r2), self.width)
            return out
        table = np.asarray(self.table, dtype=float)
        idx = np.mod(np.floor(np.asarray(u) * len(table)).astype(int), len(table))
        return table[idx]

    def grid_values(self, n: int, d: int = 1) -> np.ndarray:
        """Profile sampled on the n-site lattice, flat array of n^d values."""
        x = np.arange(n) / n
        if d == 1:
            return self.evaluate(x)
        g0, g1 = np.meshgrid(x, x, indexing="ij")
        return self.evaluate(np.stack([g0, g1], axis=-1)).ravel()


def _torus_dist(u, c):
    delta = np.abs(np.mod(u - c, 1.0))
    return np.minimum(delta, 1.0 - delta)


def _periodized_gaussian(r, width):
    out = np.zeros_like(r, dtype=float)
    for m in range(-3, 4):
        out += np.exp(-((r + m) ** 2) / (2.0 * width**2))
    return out


@dataclass(frozen=True)
class SimParams:
    alpha: float
    beta: float
    horizon: float
    snapshot_times: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.0 < self.beta < 2.0:
            raise ValueError("beta must lie in (0, 2)")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        for t in self.snapshot_times:
            if not 0.0 <= t <= self.horizon:
                raise ValueError("snapshot times must lie in [0, horizon]")
        if list(self.snapshot_times) != sorted(self.snapshot_times):
            raise ValueError("snapshot times must be sorted")


@dataclass
class Configuration:
    """Occupation numbers plus a flat particle index for O(1) sampling."""

    n: int
    d: int
    occ: np.ndarray  # int64, length n^d
    parts: np.ndarray  # int64 site index per particle
    max_occ: int  # running occupancy bound, never lowered mid-run
    time: float = 0.0
    proposals: int = 0
    accepted: int = 0

    @property
    def N(self) -> int:
        return len(self.parts)

    @property
    def sites(self) -> int:
        return self.n**self.d

    def copy(self) -> "Configuration":
        return Configuration(self.n, self.d, self.occ.copy(), self.parts.copy(),
                             self.max_occ, self.time, self.proposals, self.accepted)

    def check_consistent(self):
        counts = np.bincount(self.parts, minlength=self.sites)
        if not np.array_equal(counts, self.occ):
            raise AssertionError("particle index inconsistent with occupancies")
        if self.N and self.max_occ < self.occ.max():
            raise AssertionError("occupancy bound below actual maximum")


def configuration_from_occ(occ: np.ndarray, n: int, d: int = 1) -> Configuration:
    occ = np.asarray(occ, dtype=np.int64)
    if occ.shape != (n**d,):
        raise ValueError("occupancy array has wrong length")
    if np.any(occ < 0):
        raise ValueError("occupancies must be nonnegative")
    parts = np.repeat(np.arange(n**d, dtype=np.int64), occ)
    max_occ = int(occ.max()) if occ.size else 0
    return Configuration(n=n, d=d, occ=occ, parts=parts, max_occ=max_occ)


def init_product_negbin(profile: InitialProfile, alpha: float, n: int, d: int,
                        rng: np.random.Generator) -> Configuration:
    """Independent negative-binomial site marginals with mean rho_0(x/n).

    Shape parameter alpha, success parameter rho/(alpha+rho); drawn as a
    gamma-Poisson mixture.  This product measure makes the duality-moment
    factorization exact (E[alpha^m d(m, eta(x))] = rho_0(x/n)^m).
    """
    rho = profile.grid_values(n, d)
    if np.any(rho < 0):
        raise ValueError("profile must be nonnegative")
    lam = np.where(rho > 0, rng.gamma(alpha, 1.0, size=rho.shape) * rho / alpha, 0.0)
    occ = rng.poisson(lam).astype(np.int64)
    return configuration_from_occ(occ, n, d)


class UniformStream:
    """Chunked uniform draws feeding the jitted event loops.

    When a loop reports buffer exhaustion the (fewer than five) leftover
    draws are discarded and a fresh chunk is generated; consumption order
    is therefore a pure function of the seed.
    """

    def __init__(self, rng: np.random.Generator, chunk: int = 1 << 17):
        self.rng = rng
        self.chunk = chunk
        self.buf = rng.random(chunk)
        self.pos = 0

    def refresh(self):
        self.buf = self.rng.random(self.chunk)
        self.pos = 0


def step(config: Configuration, kernel: DiscreteKernel, params: SimParams,
         rng: np.random.Generator) -> float:
    """Execute one proposal event in place; returns the time increment.

    The clock advances by an exponential of the proposal rate whether or
    not the thinning acceptance fires.
    """
    if config.N == 0:
        raise ValueError("no particles to move")
    u = rng.random(_loops.DRAWS_PER_PROPOSAL)
    speed = float(config.n) ** params.beta
    t0 = config.time
    t_now, _, max_occ, prop, acc, _ = _loops.event_loop(
        config.occ, config.parts, params.alpha, speed, kernel.probs,
        kernel.alias_prob, kernel.alias_idx, kernel.displacements,
        config.n, config.d, config.time, np.inf, config.max_occ, u, 0)
    config.time = float(t_now)
    config.max_occ = int(max_occ)
    config.proposals += int(prop)
    config.accepted += int(acc)
    return config.time - t0


def advance_to(config: Configuration, kernel: DiscreteKernel, params: SimParams,
               stream: UniformStream, t_target: float):
    """Run the event loop in place until the macroscopic time ``t_target``."""
    if t_target < config.time:
        raise ValueError("cannot run backwards in time")
    if config.N == 0:
        config.time = t_target
        return
    speed = float(config.n) ** params.beta
    while True:
        t_now, pos, max_occ, prop, acc, status = _loops.event_loop(
            config.occ, config.parts, params.alpha, speed, kernel.probs,
            kernel.alias_prob, kernel.alias_idx, kernel.displacements,
            config.n, config.d, config.time, t_target, config.max_occ,
            stream.buf, stream.pos)
        config.time = float(t_now)
        config.max_occ = int(max_occ)
        config.proposals += int(prop)
        config.accepted += int(acc)
        stream.pos = int(pos)
        if status == 0:
            return
        stream.refresh()


def run_snapshots(config: Configuration, kernel: DiscreteKernel, params: SimParams,
                  rng: np.random.Generator) -> list[tuple[float, Configuration]]:
    """Simulate to the horizon, deep-copying the configuration at each snapshot."""
    stream = UniformStream(rng)
    times = list(params.snapshot_times) if params.snapshot_times else [params.horizon]
    out = []
    for t in times:
        advance_to(config, kernel, params, stream, t)
        out.append((t, config.copy()))
    if times[-1] < params.horizon:
        advance_to(config, kernel, params, stream, params.horizon)
    return out
