"""Measurement models for one mode of a multi-mode state.

Two routes to a pseudo-phase outcome:

``subspace_projective``
    Born rule over the d orthonormal codeword kets plus one extra "leak"
    outcome for the orthogonal complement.
``heterodyne_bin``
    Double-arm homodyne: a 50/50 beamsplitter feeds two homodyne detectors
    reading conjugate quadratures. For ideal detectors the joint statistics
    are the Husimi Q function of the mode, which is sampled directly on a grid;
    the sample's optical phase is then binned to the nearest sector centre.

Quadrature convention: ``x1 + i x2 = sqrt(2) * beta`` where ``beta`` is the
coherent amplitude the detector projected onto. A coherent input ``|b>`` then
gives samples centred on ``sqrt(2) b`` with variance 1 per axis (vacuum 1/2
plus 1/2 from the heterodyne split).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from .cv import CodewordBasis, KerrPhase, MultiModeState, apply_cross_kerr, tensor
from .fock import FockVector, coherent_state
from .qudit import PSEUDO_NUMBER, PSEUDO_PHASE, QuditDims
from .rng import as_rng, sample_index

SUBSPACE = "subspace_projective"
HETERODYNE = "heterodyne_bin"
MODELS = (SUBSPACE, HETERODYNE)

LEAK = -1
QUADRATURE_SCALE = math.sqrt(2.0)
# per-axis standard deviation of Q for a coherent state, in beta units
Q_SIGMA = 1 / math.sqrt(2.0)
PROB_TOLERANCE = 1e-8
GRID_MASS_TOLERANCE = 1e-6


class GridTooSmallError(ValueError):
    pass


class ZeroSampleError(ValueError):
    """Heterodyne sample at the origin: its phase is undefined, resample."""


@dataclass(frozen=True)
class HeterodyneConfig:
    grid_radius_sigmas: float = 6.0
    grid_points_per_axis: int = 192

    def __post_init__(self):
        if self.grid_radius_sigmas < 6:
            raise ValueError("grid must extend at least 6 sigma past the state")
        if self.grid_points_per_axis < 64:
            raise ValueError("grid_points_per_axis must be >= 64")


@dataclass(frozen=True)
class MeasurementRecord:
    mode: object
    model: str
    basis: str
    outcome: int
    raw_sample: Optional[tuple[float, float]] = None
    probs: Optional[np.ndarray] = None
    seed_used: Optional[int] = None

    @property
    def leaked(self) -> bool:
        return self.outcome == LEAK


class MeasureResult(NamedTuple):
    record: MeasurementRecord
    post: Optional[MultiModeState]
    leakage: float


def _as_multimode(state) -> MultiModeState:
    if isinstance(state, FockVector):
        return MultiModeState(state.amplitudes)
    return state


def _mode_first(state: MultiModeState, m: int) -> np.ndarray:
    return np.moveaxis(state.amplitudes, m, 0)


def _drop_mode(state: MultiModeState, m: int, rest: np.ndarray) -> Optional[MultiModeState]:
    if state.num_modes == 1:
        return None
    labels = state.mode_labels[:m] + state.mode_labels[m + 1 :]
    return MultiModeState(rest / np.linalg.norm(rest), labels)


def basis_probabilities(state, mode, basis_kind: str, basis: CodewordBasis) -> tuple[np.ndarray, float, np.ndarray]:
    """Born weights of the d basis kets on ``mode``, the leak weight, and the projections.

    Weights are relative to the state's own norm. The leak weight is computed
    from the orthogonal remainder directly, not as ``1 - sum``.
    """
    state = _as_multimode(state)
    m = state.mode_index(mode)
    if state.mode_dims[m] != basis.n_max + 1:
        raise ValueError(f"mode dim {state.mode_dims[m]} does not match basis n_max={basis.n_max}")
    kets = basis.matrix(basis_kind)
    psi = _mode_first(state, m)
    proj = np.tensordot(kets.conj(), psi, axes=([1], [0]))
    remainder = psi - np.tensordot(kets.T, proj, axes=([1], [0]))
    norm2 = state.norm_squared()
    weights = np.sum(np.abs(proj.reshape(basis.dims.d, -1)) ** 2, axis=1) / norm2
    leak = float(np.sum(np.abs(remainder) ** 2) / norm2)
    return weights, leak, proj


def subspace_projective_measure(
    state,
    mode,
    basis_kind: str,
    basis: CodewordBasis,
    rng=None,
    forced: Optional[int] = None,
) -> MeasureResult:
    """Projective measurement in a codeword basis completed by a leak outcome.

    On a leak outcome the measured mode cannot be contracted against a basis
    ket, so ``post`` is the full state projected onto the leak subspace.
    """
    state = _as_multimode(state)
    m = state.mode_index(mode)
    weights, leak, proj = basis_probabilities(state, m, basis_kind, basis)
    total = weights.sum() + leak
    if abs(total - 1.0) > PROB_TOLERANCE:
        raise ValueError(f"outcome probabilities sum to {total!r}")
    gen, seed = as_rng(rng)
    if forced is None:
        idx = sample_index(np.append(weights, leak), gen)
        outcome = LEAK if idx == basis.dims.d else idx
    else:
        outcome = int(forced)
        if outcome != LEAK and weights[outcome] <= 1e-300:
            raise ValueError(f"forced outcome {outcome} has zero probability")
    probs = weights / weights.sum()
    if outcome == LEAK:
        kets = basis.matrix(basis_kind)
        psi = _mode_first(state, m)
        rem = psi - np.tensordot(kets.T, proj, axes=([1], [0]))
        post = MultiModeState(np.moveaxis(rem, 0, m) / np.linalg.norm(rem), state.mode_labels)
    else:
        post = _drop_mode(state, m, proj[outcome])
    record = MeasurementRecord(state.mode_labels[m], SUBSPACE, basis_kind, outcome, None, probs, seed)
    return MeasureResult(record, post, leak)


# -- heterodyne ----------------------------------------------------------------


@lru_cache(maxsize=2)
def _beta_grid(dim: int, radius_sigmas: float, points: int) -> tuple[np.ndarray, float, np.ndarray]:
    """Grid points, cell width, and the ``(P, dim)`` matrix of coherent bras ``<beta|n>``."""
    half_width = math.sqrt(dim - 1) + radius_sigmas * Q_SIGMA
    axis = np.linspace(-half_width, half_width, points)
    h = float(axis[1] - axis[0])
    re, im = np.meshgrid(axis, axis, indexing="ij")
    beta = (re + 1j * im).ravel()
    bras = np.empty((beta.size, dim), dtype=complex)
    z = beta.conj()
    bras[:, 0] = np.exp(-np.abs(beta) ** 2 / 2)
    for n in range(dim - 1):
        bras[:, n + 1] = bras[:, n] * z / math.sqrt(n + 1)
    beta.setflags(write=False)
    bras.setflags(write=False)
    return beta, h, bras


def husimi_grid(state, mode, cfg: HeterodyneConfig = HeterodyneConfig()) -> tuple[np.ndarray, np.ndarray, float]:
    """Q function of one mode's reduced state on the sampling grid.

    Returns ``(beta_points, cell_probabilities, cell_width)``; probabilities
    are ``Q * h**2`` normalised by the state's norm, not renormalised to 1.
    The grid is a square centred on the origin reaching ``sqrt(n_max)`` plus
    ``grid_radius_sigmas`` standard deviations, so it covers any state
    representable at this truncation.
    """
    state = _as_multimode(state)
    m = state.mode_index(mode)
    dim = state.mode_dims[m]
    a = _mode_first(state, m).reshape(dim, -1)
    rho = a @ a.conj().T
    lam, vecs = np.linalg.eigh(rho)
    # eigenvalues below 1e-14 of the trace carry no resolvable probability
    keep = lam > 1e-14 * lam.sum()
    lam, vecs = lam[keep], vecs[:, keep]
    beta, h, bras = _beta_grid(dim, cfg.grid_radius_sigmas, cfg.grid_points_per_axis)
    amps = bras @ vecs
    q = (np.abs(amps) ** 2 @ lam) / math.pi
    cell = q * h * h / state.norm_squared()
    return beta, cell, h


def _check_mass(cell: np.ndarray):
    mass = float(cell.sum())
    if mass < 1 - GRID_MASS_TOLERANCE:
        raise GridTooSmallError(f"grid captures only {mass:.8f} of the Q mass; enlarge grid_radius_sigmas")


def heterodyne_samples(state, mode, cfg: HeterodyneConfig = HeterodyneConfig(), rng=None, size: int = 1) -> np.ndarray:
    """``size`` independent ``(x1, x2)`` draws, shape ``(size, 2)``; no post-states."""
    gen, _ = as_rng(rng)
    beta, cell, h = husimi_grid(state, mode, cfg)
    _check_mass(cell)
    cdf = np.cumsum(cell)
    u = gen.random(size) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cell.size - 1)
    jitter = gen.uniform(-h / 2, h / 2, size=(size, 2))
    b = beta[idx]
    out = np.column_stack([b.real, b.imag]) + jitter
    return QUADRATURE_SCALE * out


def conditional_state(state, mode, beta: complex) -> Optional[MultiModeState]:
    """Remaining modes after the heterodyne projected ``mode`` onto ``<beta|``."""
    state = _as_multimode(state)
    m = state.mode_index(mode)
    dim = state.mode_dims[m]
    bra = coherent_state(beta, dim - 1, tail_tolerance=1.0).amplitudes.conj()
    rest = np.tensordot(bra, _mode_first(state, m), axes=([0], [0]))
    return _drop_mode(state, m, rest)


class HeterodyneSample(NamedTuple):
    x1: float
    x2: float
    post: Optional[MultiModeState]


def heterodyne_sample(state, mode, cfg: HeterodyneConfig = HeterodyneConfig(), rng=None) -> HeterodyneSample:
    """One heterodyne shot and the conditional state of the other modes."""
    gen, _ = as_rng(rng)
    beta, cell, h = husimi_grid(state, mode, cfg)
    _check_mass(cell)
    idx = sample_index(cell, gen)
    jx, jy = gen.uniform(-h / 2, h / 2, size=2)
    b = complex(beta[idx].real + jx, beta[idx].imag + jy)
    post = conditional_state(state, mode, b)
    return HeterodyneSample(QUADRATURE_SCALE * b.real, QUADRATURE_SCALE * b.imag, post)


def phase_bin(x1: float, x2: float, dims: QuditDims, ref_phase: float = 0.0) -> int:
    """Index of the nearest sector centre ``omega^l exp(i ref_phase)``."""
    if math.hypot(x1, x2) < 1e-30:
        raise ZeroSampleError("sample at the origin has no phase")
    turns = dims.d * (math.atan2(x2, x1) - ref_phase) / (2 * math.pi)
    return int(math.floor(turns + 0.5)) % dims.d


def phase_bins(samples: np.ndarray, dims: QuditDims, ref_phase: float = 0.0) -> np.ndarray:
    """Vectorised :func:`phase_bin` over an ``(N, 2)`` array."""
    samples = np.asarray(samples)
    if np.any(np.hypot(samples[:, 0], samples[:, 1]) < 1e-30):
        raise ZeroSampleError("sample at the origin has no phase")
    turns = dims.d * (np.arctan2(samples[:, 1], samples[:, 0]) - ref_phase) / (2 * np.pi)
    return np.floor(turns + 0.5).astype(int) % dims.d


def measure_pseudo_phase(
    state,
    mode,
    model: str,
    basis: CodewordBasis,
    cfg: HeterodyneConfig = HeterodyneConfig(),
    rng=None,
    forced: Optional[int] = None,
) -> MeasureResult:
    """Pseudo-phase measurement through either model.

    For the heterodyne model ``leakage`` is the measured mode's weight outside
    the codeword subspace before the shot; a zero-magnitude sample is redrawn.
    """
    if model == SUBSPACE:
        return subspace_projective_measure(state, mode, PSEUDO_PHASE, basis, rng, forced)
    if model != HETERODYNE:
        raise ValueError(f"unknown measurement model {model!r}")
    if forced is not None:
        raise ValueError("heterodyne outcomes cannot be forced")
    state = _as_multimode(state)
    m = state.mode_index(mode)
    gen, seed = as_rng(rng)
    _, leak, _ = basis_probabilities(state, m, PSEUDO_PHASE, basis)
    ref = math.atan2(basis.alpha.imag, basis.alpha.real)
    while True:
        x1, x2, post = heterodyne_sample(state, m, cfg, gen)
        try:
            outcome = phase_bin(x1, x2, basis.dims, ref)
            break
        except ZeroSampleError:
            continue
    record = MeasurementRecord(state.mode_labels[m], HETERODYNE, PSEUDO_PHASE, outcome, (x1, x2), None, seed)
    return MeasureResult(record, post, leak)


def measure_pseudo_number_via_ancilla(
    state,
    mode,
    basis: CodewordBasis,
    model: str = SUBSPACE,
    cfg: HeterodyneConfig = HeterodyneConfig(),
    rng=None,
    max_modes: int = 3,
) -> MeasureResult:
    """Pseudo-number readout by entangling with a fresh ``|alpha>`` ancilla.

    A controlled-Z (cross-Kerr at ``2 pi / d``) writes the target's pseudo-number
    into the ancilla's optical phase; a pseudo-phase measurement of the ancilla
    then returns it. ``basis`` fixes ``d``, ``alpha`` and the truncation. The
    ancilla is consumed; ``post`` holds the original modes.
    """
    state = _as_multimode(state)
    m = state.mode_index(mode)
    if state.num_modes + 1 > max_modes:
        raise ValueError(f"no room for an ancilla: {state.num_modes} modes, max_modes={max_modes}")
    ancilla = coherent_state(basis.alpha, basis.n_max)
    labels = state.mode_labels + ("ancilla",)
    joint = tensor([state, ancilla], labels=labels, max_modes=max_modes)
    joint = apply_cross_kerr(joint, m, joint.num_modes - 1, KerrPhase.for_dimension(basis.dims.d))
    rec, post, leak = measure_pseudo_phase(joint, joint.num_modes - 1, model, basis, cfg, rng)
    record = MeasurementRecord(
        state.mode_labels[m], model, PSEUDO_NUMBER, rec.outcome, rec.raw_sample, rec.probs, rec.seed_used
    )
    return MeasureResult(record, post, leak)
