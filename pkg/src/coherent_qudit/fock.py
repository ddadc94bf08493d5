"""Single-mode truncated Fock-space primitives.

Amplitudes are indexed by photon number ``n = 0..n_max``. Everything here is
pure: vectors are frozen after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats


class TruncationError(ValueError):
    """Raised when the Poisson tail above ``n_max`` exceeds the tolerance."""


@dataclass(frozen=True)
class TruncationPolicy:
    margin_sigmas: float = 8.0
    hard_cap: int = 256
    tail_tolerance: float = 1e-10

    def __post_init__(self):
        if not self.margin_sigmas > 0:
            raise ValueError("margin_sigmas must be positive")
        if self.hard_cap < 1:
            raise ValueError("hard_cap must be >= 1")
        if not 0 < self.tail_tolerance < 1:
            raise ValueError("tail_tolerance must lie in (0, 1)")


DEFAULT_POLICY = TruncationPolicy()


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FockVector:
    """Complex amplitudes of one optical mode over ``|0>, ..., |n_max>``."""

    amplitudes: np.ndarray
    alpha_ref: Optional[complex] = None

    def __post_init__(self):
        amps = _frozen(self.amplitudes)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-d sequence")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_max(self) -> int:
        return self.amplitudes.size - 1

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "FockVector":
        return FockVector(self.amplitudes / math.sqrt(self.norm_squared()), self.alpha_ref)

    def mean_photon_number(self) -> float:
        n = np.arange(self.dim)
        return float(np.sum(n * np.abs(self.amplitudes) ** 2))

    def padded(self, n_max: int) -> "FockVector":
        if n_max < self.n_max:
            raise ValueError("cannot pad to a smaller n_max")
        amps = np.zeros(n_max + 1, dtype=complex)
        amps[: self.dim] = self.amplitudes
        return FockVector(amps, self.alpha_ref)


def fock_basis(n: int, n_max: int) -> FockVector:
    if not 0 <= n <= n_max:
        raise ValueError(f"photon number {n} outside 0..{n_max}")
    amps = np.zeros(n_max + 1, dtype=complex)
    amps[n] = 1.0
    return FockVector(amps)


def poisson_tail(mean_photons: float, n_max: int) -> float:
    """Probability mass of a Poisson(mean_photons) distribution above ``n_max``."""
    if mean_photons == 0:
        return 0.0
    return float(stats.poisson.sf(n_max, mean_photons))


def truncation_dim(alpha: complex, policy: TruncationPolicy = DEFAULT_POLICY) -> int:
    r = abs(alpha)
    m = policy.margin_sigmas
    n_max = min(policy.hard_cap, math.ceil(r * r + m * r + m))
    tail = poisson_tail(r * r, n_max)
    if tail > policy.tail_tolerance:
        raise TruncationError(
            f"|alpha|={r:g} needs more than hard_cap={policy.hard_cap} photons "
            f"(tail mass {tail:.3g} > {policy.tail_tolerance:g})"
        )
    return n_max


def coherent_state(
    alpha: complex, n_max: Optional[int] = None, tail_tolerance: float = DEFAULT_POLICY.tail_tolerance
) -> FockVector:
    """Truncated coherent state ``|alpha>``.

    Amplitudes come from the recursion ``c[n+1] = c[n] * alpha / sqrt(n+1)``
    seeded with ``exp(-|alpha|^2 / 2)``. When ``n_max`` is omitted the default
    truncation policy picks it.
    """
    alpha = complex(alpha)
    if n_max is None:
        n_max = truncation_dim(alpha)
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    x = abs(alpha) ** 2
    tail = poisson_tail(x, n_max)
    if tail > tail_tolerance:
        raise TruncationError(f"tail mass {tail:.3g} above n_max={n_max} exceeds {tail_tolerance:g}")
    amps = np.empty(n_max + 1, dtype=complex)
    amps[0] = math.exp(-x / 2)
    for n in range(n_max):
        amps[n + 1] = amps[n] * alpha / math.sqrt(n + 1)
    return FockVector(amps, alpha)


def apply_phase_rotation(state: FockVector, theta: float) -> FockVector:
    """Phase shifter ``exp(i theta n)``."""
    n = np.arange(state.dim)
    # reduce theta*n modulo 2pi before exponentiating; exact for integer multiples of 2pi
    phase = np.exp(1j * np.mod(theta * n, 2 * np.pi))
    return FockVector(state.amplitudes * phase, state.alpha_ref)


def overlap(a: FockVector, b: FockVector) -> complex:
    """``<a|b>``, zero-padding the shorter vector."""
    n = min(a.dim, b.dim)
    return complex(np.vdot(a.amplitudes[:n], b.amplitudes[:n]))


def fidelity(a: FockVector, b: FockVector) -> float:
    return abs(overlap(a, b)) ** 2 / (a.norm_squared() * b.norm_squared())


# -- partial exponential sums ------------------------------------------------

_RESCALE = 1e200


def _scaled_partial_sum(k: int, d: int, x: float) -> tuple[float, float]:
    """Return ``(s, log_scale)`` with ``f_k(x) = s * exp(log_scale)``.

    Forward term recursion over ``n = k, k+d, k+2d, ...``. Terms and the running
    sum are rescaled together whenever the sum grows past 1e200, so the result
    never overflows.
    """
    if not 0 <= k < d:
        raise ValueError(f"need 0 <= k < d, got k={k}, d={d}")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return (1.0 if k == 0 else 0.0), 0.0

    log_scale = 0.0
    term = 1.0
    for j in range(1, k + 1):
        term *= x / j
        if term > _RESCALE:
            term /= _RESCALE
            log_scale += math.log(_RESCALE)
    total = term
    n = k
    while True:
        for j in range(1, d + 1):
            term *= x / (n + j)
        n += d
        total += term
        if total > _RESCALE:
            total /= _RESCALE
            term /= _RESCALE
            log_scale += math.log(_RESCALE)
        # only stop on the decreasing flank of the series
        if n > x and term < 1e-18 * total:
            break
        if term == 0.0 and n > x:
            break
    return total, log_scale


def log_partial_exp_sum(k: int, d: int, x: float) -> float:
    """Natural log of ``f_k(x)``; ``-inf`` when the sum is zero."""
    s, log_scale = _scaled_partial_sum(k, d, x)
    if s == 0.0:
        return -math.inf
    return math.log(s) + log_scale


def partial_exp_sum(k: int, d: int, x: float) -> float:
    """``f_k(x) = sum_m x**(k + m d) / (k + m d)!``.

    The ``d`` sums over residues ``k = 0..d-1`` add up to ``exp(x)``. Raises
    ``OverflowError`` when the value is beyond double range; use
    :func:`log_partial_exp_sum` there.
    """
    s, log_scale = _scaled_partial_sum(k, d, x)
    if log_scale == 0.0:
        return s
    return s * math.exp(log_scale)


def normalized_partial_sum(k: int, d: int, x: float) -> float:
    """``d * exp(-x) * f_k(x)``, which tends to 1 as ``x`` grows."""
    lf = log_partial_exp_sum(k, d, x)
    if lf == -math.inf:
        return 0.0
    return math.exp(lf - x + math.log(d))


def residue_weights(d: int, x: float) -> np.ndarray:
    """``exp(-x) * f_k(x)`` for every ``k = 0..d-1`` at once.

    These are the Poisson(x) masses of the residue classes ``n = k mod d``.
    Terms are formed in log space, so any ``x >= 0`` works; the series is cut
    where the Poisson tail drops below double precision.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        out = np.zeros(d)
        out[0] = 1.0
        return out
    n = np.arange(int(x + 40 * math.sqrt(x) + 60))
    pmf = np.exp(n * math.log(x) - special.gammaln(n + 1) - x)
    return np.bincount(n % d, weights=pmf, minlength=d)


def partial_exp_sums(d: int, x: float) -> np.ndarray:
    """Vector of ``f_k(x)`` for ``k = 0..d-1``; raises OverflowError past double range."""
    if x > 709:
        raise OverflowError(f"exp({x}) is beyond double range")
    return residue_weights(d, x) * math.exp(x)


def regime_threshold(d: int) -> float:
    """Smallest ``x = |alpha|^2`` at which ``|alpha| = d / 2pi``."""
    return (d / (2 * math.pi)) ** 2


@dataclass(frozen=True)
class AsymptoticRow:
    x: float
    max_deviation: float


@dataclass(frozen=True)
class AsymptoticReport:
    d: int
    rows: tuple[AsymptoticRow, ...] = field(default_factory=tuple)

    def deviations(self) -> list[float]:
        return [r.max_deviation for r in self.rows]

    def non_increasing_in_regime(self) -> bool:
        """Trend check over the rows with ``x`` past :func:`regime_threshold`."""
        devs = [r.max_deviation for r in self.rows if r.x >= regime_threshold(self.d)]
        return all(b <= a for a, b in zip(devs, devs[1:]))


def asymptotic_ratio_report(d: int, x_list: Sequence[float]) -> AsymptoticReport:
    xs = [float(x) for x in x_list]
    if any(x <= 0 for x in xs):
        raise ValueError("x values must be positive")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("x values must be strictly increasing")
    rows = []
    for x in xs:
        dev = max(abs(normalized_partial_sum(k, d, x) - 1.0) for k in range(d))
        rows.append(AsymptoticRow(x, dev))
    return AsymptoticReport(d, tuple(rows))
