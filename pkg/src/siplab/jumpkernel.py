"""Symmetric heavy-tailed jump kernels on the periodic lattice.

The jump law is defined directly on the torus: power-law weights
``|z|^-(d+beta)`` on the nonzero integer displacements inside a window,
periodically folded and normalized to a probability distribution.  The
macroscopic non-local generator is only ever used through its Fourier
symbol, obtained as the large-n limit of the exact torus eigenvalues.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .backend import maybe_njit


class KernelFamily(str, Enum):
    POWER_LAW_LATTICE = "power_law_lattice"
    CUSTOM_TABULATED = "custom_tabulated"


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the continuum jump family.

    ``window`` is the maximum base-cell displacement magnitude retained
    (``None`` means full torus support, M/2 - 1).  ``image_folds`` is the
    number of periodic image shells folded onto the torus; the neglected
    tail carries mass O((image_folds * M)^-beta).
    """

    d: int
    beta: float
    family: KernelFamily = KernelFamily.POWER_LAW_LATTICE
    window: Optional[int] = None
    image_folds: int = 3
    table: Optional[dict] = None  # displacement tuple -> weight, for CUSTOM_TABULATED

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if not 0.0 < self.beta < 2.0:
            raise ValueError(f"beta must lie in (0, 2), got {self.beta}")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be >= 1")
        if self.image_folds < 0:
            raise ValueError("image_folds must be >= 0")
        if self.family is KernelFamily.CUSTOM_TABULATED:
            if not self.table:
                raise ValueError("custom kernel requires a displacement table")
            for z, w in self.table.items():
                if w < 0:
                    raise ValueError("custom weights must be nonnegative")
                if tuple(-c for c in z) not in self.table:
                    raise ValueError(f"custom table not symmetric at {z}")


@dataclass(frozen=True)
class DiscreteKernel:
    """Normalized, symmetric jump distribution on a torus of M^d sites.

    ``displacements`` has shape (S, d) with entries in (-M/2, M/2];
    ``probs`` sums to one.  ``total_mass`` records the pre-normalization
    weight mass for rate bookkeeping.  Instances are immutable and safe for
    concurrent reads.
    """

    spec: KernelSpec
    M: int
    displacements: np.ndarray
    probs: np.ndarray
    total_mass: float
    alias_prob: np.ndarray = field(repr=False, default=None)
    alias_idx: np.ndarray = field(repr=False, default=None)

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def support_size(self) -> int:
        return len(self.probs)

    def prob_of(self, z) -> float:
        """Probability of a displacement (0 outside the support).

        The argument is reduced modulo the torus, so both representatives
        of the antipodal displacement (e.g. -M/2 and M/2) resolve to the
        same table entry."""
        z = np.atleast_1d(np.asarray(z, dtype=np.int64))
        lo = -(self.M // 2) + 1
        z = (z - lo) % self.M + lo
        hit = np.all(self.displacements == z[None, :], axis=1)
        idx = np.nonzero(hit)[0]
        return float(self.probs[idx[0]]) if len(idx) else 0.0


def _centered_range(M: int) -> np.ndarray:
    # torus displacement representatives, excluding 0
    lo = -(M // 2) + 1
    hi = M // 2
    r = np.arange(lo, hi + 1)
    return r[r != 0]


def _power_law_weights(spec: KernelSpec, M: int) -> tuple[np.ndarray, np.ndarray]:
    W = spec.window if spec.window is not None else M // 2 - 1
    if W > M // 2 - 1:
        raise ValueError(f"window {W} exceeds torus half-side for M={M}")
    exponent = spec.d + spec.beta
    axes = [_centered_range(M)] * spec.d
    grids = np.meshgrid(*axes, indexing="ij")
    disp = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.zeros(len(disp))
    folds = np.arange(-spec.image_folds, spec.image_folds + 1)
    fold_axes = [folds * M] * spec.d
    fold_grids = np.meshgrid(*fold_axes, indexing="ij")
    fold_disp = np.stack([g.ravel() for g in fold_grids], axis=1)
    for shift in fold_disp:
        image = disp + shift[None, :]
        norm = np.sqrt(np.sum(image.astype(float) ** 2, axis=1))
        if np.all(shift == 0):
            keep = norm <= W
        else:
            keep = norm > 0  # periodic images folded regardless of window
        weights[keep] += norm[keep] ** (-exponent)
    keep = weights > 0
    return disp[keep], weights[keep]


def _custom_weights(spec: KernelSpec, M: int) -> tuple[np.ndarray, np.ndarray]:
    acc: dict[tuple, float] = {}
    for z, w in spec.table.items():
        if len(z) != spec.d:
            raise ValueError(f"displacement {z} has wrong dimension")
        if all(c == 0 for c in z):
            raise ValueError("custom table must not contain the zero displacement")
        zz = tuple(((c + M // 2 - 1) % M) - M // 2 + 1 for c in z)
        acc[zz] = acc.get(zz, 0.0) + float(w)
    disp = np.array(sorted(acc), dtype=np.int64).reshape(len(acc), spec.d)
    weights = np.array([acc[tuple(row)] for row in disp])
    return disp, weights


def _alias_setup(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vose alias table: O(1) sampling from a finite distribution."""
    K = len(probs)
    scaled = probs * K
    alias_prob = np.ones(K)
    alias_idx = np.arange(K)
    small = [i for i in range(K) if scaled[i] < 1.0]
    large = [i for i in range(K) if scaled[i] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s = small.pop()
        l = large.pop()
        alias_prob[s] = scaled[s]
        alias_idx[s] = l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    for i in small + large:
        alias_prob[i] = 1.0
    return alias_prob, alias_idx


def build_discrete_kernel(spec: KernelSpec, M: int) -> DiscreteKernel:
    """Fold, normalize and tabulate the jump law on a torus of M sites per side."""
    if M % 2 != 0 or M < 4:
        raise ValueError(f"M must be even and >= 4, got {M}")
    if spec.window is not None and M < 2 * spec.window + 2:
        raise ValueError(f"M={M} too small for window {spec.window}")
    if spec.family is KernelFamily.POWER_LAW_LATTICE:
        disp, weights = _power_law_weights(spec, M)
    else:
        disp, weights = _custom_weights(spec, M)
    total = float(weights.sum())
    if total <= 0:
        raise ValueError("kernel has zero mass")
    probs = weights / total
    # symmetry check on the folded table (modulo the torus)
    lookup = {tuple(z): p for z, p in zip(map(tuple, disp), probs)}
    for z, p in lookup.items():
        neg = tuple(((-c + M // 2 - 1) % M) - M // 2 + 1 for c in z)
        if abs(lookup.get(neg, 0.0) - p) > 1e-12 * max(p, 1e-300):
            raise ValueError(f"kernel not symmetric at displacement {z}")
    if np.any(probs <= 0):
        raise ValueError("kernel probabilities must be strictly positive on the support")
    alias_prob, alias_idx = _alias_setup(probs)
    return DiscreteKernel(
        spec=spec,
        M=M,
        displacements=np.ascontiguousarray(disp, dtype=np.int64),
        probs=probs,
        total_mass=total,
        alias_prob=alias_prob,
        alias_idx=np.ascontiguousarray(alias_idx, dtype=np.int64),
    )


@maybe_njit(cache=True)
def _alias_draw(alias_prob, alias_idx, u_col, u_coin):
    K = len(alias_prob)
    k = int(u_col * K)
    if k >= K:  # u_col == 1.0 edge case
        k = K - 1
    if u_coin < alias_prob[k]:
        return k
    return alias_idx[k]


def sample_jump(kernel: DiscreteKernel, rng: np.random.Generator) -> np.ndarray:
    """Draw one displacement distributed exactly as the kernel table."""
    k = _alias_draw(kernel.alias_prob, kernel.alias_idx, rng.random(), rng.random())
    return kernel.displacements[k]


def sample_jump_indices(kernel: DiscreteKernel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized alias draws, returned as support indices."""
    u = rng.random((size, 2))
    k = (u[:, 0] * kernel.support_size).astype(np.int64)
    k[k >= kernel.support_size] = kernel.support_size - 1
    take_alias = u[:, 1] >= kernel.alias_prob[k]
    k[take_alias] = kernel.alias_idx[k[take_alias]]
    return k


@dataclass(frozen=True)
class FourierSymbol:
    """Torus eigenvalues of the sped-up one-particle jump generator.

    ``values`` is indexed like ``numpy.fft.fftfreq``: entry j holds
    psi_n(j) for the mode exp(2*pi*i*j*x/M).  For d=2 the array is the
    full (M, M) mode grid.
    """

    M: int
    beta: float
    values: np.ndarray

    def mode(self, j) -> float:
        return float(self.values[tuple(np.atleast_1d(j))])


def discrete_symbol(kernel: DiscreteKernel, n: int) -> FourierSymbol:
    """Exact symbol psi_n(j) = n^beta * sum_z q(z) (cos(2 pi j.z / M) - 1)."""
    M = kernel.M
    if n != M:
        raise ValueError("symbol is defined on the unit torus with M = n sites")
    speed = float(n) ** kernel.spec.beta
    d = kernel.d
    modes = np.fft.fftfreq(M, d=1.0 / M)  # integer mode numbers
    if d == 1:
        phase = np.outer(modes, kernel.displacements[:, 0]) * (2.0 * np.pi / M)
        vals = speed * ((np.cos(phase) - 1.0) @ kernel.probs)
    else:
        j0, j1 = np.meshgrid(modes, modes, indexing="ij")
        phase = (
            j0[..., None] * kernel.displacements[:, 0]
            + j1[..., None] * kernel.displacements[:, 1]
        ) * (2.0 * np.pi / M)
        vals = speed * ((np.cos(phase) - 1.0) @ kernel.probs)
    vals = np.minimum(vals, 0.0)  # clip float noise at the zero mode
    return FourierSymbol(M=M, beta=kernel.spec.beta, values=vals)


def symbol_at_modes(spec: KernelSpec, M: int, modes: Sequence[int]) -> np.ndarray:
    """psi_M evaluated at selected 1-d modes without building the full grid."""
    kernel = build_discrete_kernel(spec, M)
    speed = float(M) ** spec.beta
    z = kernel.displacements[:, 0]
    out = np.empty(len(modes))
    for i, j in enumerate(modes):
        out[i] = speed * np.dot(np.cos(2.0 * np.pi * j * z / M) - 1.0, kernel.probs)
    return out


def symbol_limit_estimate(spec: KernelSpec, j, n_list: Sequence[int]):
    """Richardson-extrapolated macroscopic symbol at mode ``j``.

    Returns ``(psi_inf, table)`` where ``table`` has one row per scale:
    (n, psi_n(j), |psi_2n - psi_n| where available).  The convergence
    order is fitted from the last three ladder points; a non-monotone
    tail is reported in the table, not fatal.
    """
    if spec.d != 1:
        raise NotImplementedError("symbol extrapolation is implemented for d=1")
    n_list = sorted(n_list)
    if len(n_list) < 2:
        raise ValueError("need at least two scales")
    psi = np.array([symbol_at_modes(spec, n, [j])[0] for n in n_list])
    if j == 0:
        return 0.0, [(n, 0.0, 0.0) for n in n_list]
    diffs = np.abs(np.diff(psi))
    # fit geometric decay ratio from the last increments; fall back to the
    # last value if the tail is too flat to extrapolate
    if len(diffs) >= 2 and diffs[-1] > 0 and diffs[-2] > 0:
        ratio = diffs[-1] / diffs[-2]
        if ratio < 1.0:
            psi_inf = psi[-1] + (psi[-1] - psi[-2]) * ratio / (1.0 - ratio)
        else:
            psi_inf = psi[-1]
    else:
        psi_inf = psi[-1]
    table = []
    for i, n in enumerate(n_list):
        inc = diffs[i] if i < len(diffs) else float("nan")
        table.append((n, float(psi[i]), float(inc)))
    return float(psi_inf), table
