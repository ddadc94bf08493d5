"""Truncated-Fock simulation of the optical implementation.

Multi-mode amplitudes are stored as a tensor of shape ``mode_dims`` (mode 0 on
axis 0, i.e. slowest in row-major flattening). Pseudo-number kets are the
mod-d photon-number sectors of ``|alpha>``, renormalized; pseudo-phase kets
are their exact discrete-Fourier images, so both bases are orthonormal at any
finite ``alpha``. How far they sit from the ``sqrt(d)``-prefactor kets and from
the physical coherent states ``|omega^l alpha>`` is kept as diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import fock
from .fock import FockVector, coherent_state
from .qudit import PSEUDO_NUMBER, PSEUDO_PHASE, ClusterGraph, MultiQuditState, QuditDims, QuditState

MAX_MODES = 3
# 257**3: three modes at the default hard cap
AMPLITUDE_CAP = 17_000_000
DEFAULT_LEAKAGE_ABORT = 0.5
EMPTY_SECTOR_NORM = 1e-30


class EmptySectorError(ValueError):
    """A photon-number residue class carries no weight under truncation."""


class LeakageError(ValueError):
    """Too much population outside the codeword subspace to call the state a qudit."""


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultiModeState:
    amplitudes: np.ndarray
    mode_labels: tuple = ()

    def __post_init__(self):
        amps = _freeze(self.amplitudes)
        if amps.ndim == 0:
            raise ValueError("need at least one mode")
        if amps.size > AMPLITUDE_CAP:
            raise ValueError(f"{amps.size} amplitudes exceed cap {AMPLITUDE_CAP}")
        labels = tuple(self.mode_labels) or tuple(f"m{i}" for i in range(amps.ndim))
        if len(labels) != amps.ndim:
            raise ValueError("one label per mode required")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "mode_labels", labels)

    @property
    def mode_dims(self) -> tuple[int, ...]:
        return self.amplitudes.shape

    @property
    def num_modes(self) -> int:
        return self.amplitudes.ndim

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def norm_squared(self) -> float:
        v = self.vector
        return float(np.vdot(v, v).real)

    def normalized(self) -> "MultiModeState":
        return MultiModeState(self.amplitudes / math.sqrt(self.norm_squared()), self.mode_labels)

    def mode_index(self, mode) -> int:
        if isinstance(mode, str):
            try:
                return self.mode_labels.index(mode)
            except ValueError:
                raise KeyError(f"no mode labelled {mode!r}") from None
        if not 0 <= mode < self.num_modes:
            raise IndexError(f"mode {mode} out of range for {self.num_modes} modes")
        return int(mode)

    def single_mode(self) -> FockVector:
        if self.num_modes != 1:
            raise ValueError("state has more than one mode")
        return FockVector(self.amplitudes)


def tensor(
    states: Sequence[FockVector | MultiModeState],
    labels: Optional[Sequence[str]] = None,
    max_modes: int = MAX_MODES,
) -> MultiModeState:
    parts = []
    for st in states:
        parts.append(st.amplitudes)
    n_modes = sum(p.ndim for p in parts)
    if n_modes > max_modes:
        raise ValueError(f"{n_modes} modes exceed max_modes={max_modes}")
    size = int(np.prod([p.size for p in parts]))
    if size > AMPLITUDE_CAP:
        raise ValueError(f"tensor of {size} amplitudes exceeds cap {AMPLITUDE_CAP}")
    amps = parts[0]
    for p in parts[1:]:
        amps = np.multiply.outer(amps, p)
    if labels is None:
        labels = []
        for st in states:
            labels.extend(st.mode_labels if isinstance(st, MultiModeState) else [None])
        labels = [lab if lab is not None else f"m{i}" for i, lab in enumerate(labels)]
        if len(set(labels)) != len(labels):
            labels = [f"m{i}" for i in range(n_modes)]
    return MultiModeState(amps, tuple(labels))


@dataclass(frozen=True)
class KerrPhase:
    """Accumulated cross-Kerr phase ``chi * t`` in radians.

    ``turns`` holds the same phase as an exact fraction of ``2 pi`` when known;
    the evolution then reduces ``n_a n_b`` modulo the denominator and the gate
    phases are exact roots of unity instead of ``exp`` of a large argument.
    """

    chi_t: float
    turns: Optional[Fraction] = None

    def __post_init__(self):
        if not math.isfinite(self.chi_t):
            raise ValueError("chi_t must be finite")

    @classmethod
    def for_dimension(cls, d: int) -> "KerrPhase":
        """The controlled-Z setting ``chi t = 2 pi / d``."""
        return cls(2 * math.pi / d, Fraction(1, d))

    def phases(self, n_a: np.ndarray, n_b: np.ndarray) -> np.ndarray:
        prod = np.multiply.outer(n_a, n_b)
        if self.turns is not None:
            p, q = self.turns.numerator, self.turns.denominator
            return np.exp(2j * np.pi * ((p * prod) % q) / q)
        return np.exp(1j * np.mod(self.chi_t * prod, 2 * np.pi))


def apply_cross_kerr(state: MultiModeState, mode_a, mode_b, kerr: KerrPhase) -> MultiModeState:
    """Multiply the ``(n_a, n_b)`` amplitude by ``exp(i chi_t n_a n_b)``."""
    a = state.mode_index(mode_a)
    b = state.mode_index(mode_b)
    if a == b:
        raise ValueError("cross-Kerr needs two distinct modes")
    dims = state.mode_dims
    phase = kerr.phases(np.arange(dims[a]), np.arange(dims[b]))
    if a > b:
        phase = phase.T
    shape = [1] * state.num_modes
    shape[a] = dims[a]
    shape[b] = dims[b]
    return MultiModeState(state.amplitudes * phase.reshape(shape), state.mode_labels)


# -- codeword basis ------------------------------------------------------------


def raw_sector(k: int, dims: QuditDims, alpha: complex, n_max: int) -> FockVector:
    """Photon-number residue class ``n = k mod d`` of the truncated ``|alpha>``."""
    coh = coherent_state(alpha, n_max, tail_tolerance=1.0)
    mask = (np.arange(n_max + 1) % dims.d) == k
    return FockVector(np.where(mask, coh.amplitudes, 0), alpha)


def pseudo_number_ket(k: int, dims: QuditDims, alpha: complex, n_max: int) -> tuple[FockVector, float]:
    """Normalized pseudo-number ket and its normalization defect.

    The defect is ``|sqrt(d) * ||sector_k|| - 1|``: how far the ``sqrt(d)``
    prefactor is from normalizing the sector at this ``(d, alpha)``.
    """
    if not 0 <= k < dims.d:
        raise ValueError(f"k={k} outside 0..{dims.d - 1}")
    sector = raw_sector(k, dims, alpha, n_max)
    raw_norm = math.sqrt(sector.norm_squared())
    if raw_norm < EMPTY_SECTOR_NORM:
        raise EmptySectorError(
            f"sector k={k} is empty for d={dims.d}, |alpha|={abs(alpha):g}, n_max={n_max}"
        )
    defect = abs(math.sqrt(dims.d) * raw_norm - 1.0)
    return FockVector(sector.amplitudes / raw_norm, alpha), defect


def pseudo_phase_ket(l: int, dims: QuditDims, alpha: complex, n_max: int) -> FockVector:
    """Physical pseudo-phase ket: the rotated coherent state ``|omega^l alpha>``."""
    if not 0 <= l < dims.d:
        raise ValueError(f"l={l} outside 0..{dims.d - 1}")
    return coherent_state(complex(dims.omega_power(l)) * complex(alpha), n_max)


@dataclass(frozen=True)
class CodewordBasis:
    dims: QuditDims
    alpha: complex
    number_kets: tuple[FockVector, ...]
    phase_kets: tuple[FockVector, ...]
    normalization_defects: np.ndarray
    phase_ket_physical_gap: np.ndarray
    number_matrix: np.ndarray = field(repr=False, default=None)
    phase_matrix: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "number_matrix", _freeze([k.amplitudes for k in self.number_kets]))
        object.__setattr__(self, "phase_matrix", _freeze([k.amplitudes for k in self.phase_kets]))

    @property
    def n_max(self) -> int:
        return self.number_kets[0].n_max

    def matrix(self, basis_kind: str) -> np.ndarray:
        """Rows are the basis kets of ``basis_kind`` in the Fock basis."""
        if basis_kind == PSEUDO_NUMBER:
            return self.number_matrix
        if basis_kind == PSEUDO_PHASE:
            return self.phase_matrix
        raise ValueError(f"unknown basis {basis_kind!r}")


def codeword_subspace(dims: QuditDims, alpha: complex, n_max: Optional[int] = None) -> CodewordBasis:
    if n_max is None:
        n_max = fock.truncation_dim(alpha)
    d = dims.d
    kets, defects = [], []
    for k in range(d):
        ket, defect = pseudo_number_ket(k, dims, alpha, n_max)
        kets.append(ket)
        defects.append(defect)
    numbers = np.array([k.amplitudes for k in kets])
    kk = np.arange(d)
    fourier = dims.omega_power(np.outer(kk, kk)) / math.sqrt(d)
    # phase_l = sum_k H[k, l] number_k
    phases = fourier.T @ numbers
    phase_kets = tuple(FockVector(p, alpha) for p in phases)
    gaps = []
    for l in range(d):
        f = fock.fidelity(phase_kets[l], pseudo_phase_ket(l, dims, alpha, n_max))
        gaps.append(max(0.0, 1.0 - f))
    return CodewordBasis(
        dims,
        complex(alpha),
        tuple(kets),
        phase_kets,
        _freeze_real(defects),
        _freeze_real(gaps),
    )


def _freeze_real(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# -- states and codec ----------------------------------------------------------


def build_cv_cluster(
    graph: ClusterGraph,
    dims: QuditDims,
    alpha: complex,
    kerr: Optional[KerrPhase] = None,
    n_max: Optional[int] = None,
    max_modes: int = MAX_MODES,
    edge_order: Optional[Sequence[tuple[int, int]]] = None,
) -> MultiModeState:
    """Coherent state on every site, then cross-Kerr along every edge."""
    if graph.num_sites > max_modes:
        raise ValueError(f"{graph.num_sites} sites exceed max_modes={max_modes}")
    if kerr is None:
        kerr = KerrPhase.for_dimension(dims.d)
    if n_max is None:
        n_max = fock.truncation_dim(alpha)
    coh = coherent_state(alpha, n_max)
    state = tensor([coh] * graph.num_sites, max_modes=max_modes)
    edges = graph.sorted_edges() if edge_order is None else list(edge_order)
    for a, b in edges:
        state = apply_cross_kerr(state, a, b, kerr)
    return state


def cv_bell_pair(dims: QuditDims, alpha: complex, n_max: Optional[int] = None) -> MultiModeState:
    return build_cv_cluster(ClusterGraph.path(2), dims, alpha, n_max=n_max)


def encode_qudit(q: QuditState, basis: CodewordBasis) -> FockVector:
    if q.dims != basis.dims:
        raise ValueError("qudit and basis dimensions differ")
    return FockVector(q.amplitudes @ basis.number_matrix, basis.alpha)


@dataclass(frozen=True)
class DecodeResult:
    state: QuditState | MultiQuditState
    leakage: float


def project_codewords(state: MultiModeState, basis: CodewordBasis) -> np.ndarray:
    """Overlaps with every tensor product of pseudo-number kets, shape ``(d,) * modes``."""
    dim = basis.n_max + 1
    if any(m != dim for m in state.mode_dims):
        raise ValueError(f"mode dims {state.mode_dims} do not match basis n_max={basis.n_max}")
    bra = basis.number_matrix.conj()
    coeffs = state.amplitudes
    for _ in range(state.num_modes):
        # contract the leading Fock axis; the new qudit axis goes to the back
        coeffs = np.tensordot(coeffs, bra, axes=([0], [1]))
    return coeffs


def decode_cv(
    state: MultiModeState | FockVector,
    basis: CodewordBasis,
    leakage_abort: float = DEFAULT_LEAKAGE_ABORT,
) -> DecodeResult:
    """Project onto the codeword subspace of every mode.

    ``leakage`` is the fraction of the state's norm outside the subspace, so
    truncation loss of an unnormalized input is not counted as leakage.
    """
    if isinstance(state, FockVector):
        state = MultiModeState(state.amplitudes)
    coeffs = project_codewords(state, basis)
    kept = float(np.sum(np.abs(coeffs) ** 2))
    leakage = max(0.0, 1.0 - kept / state.norm_squared())
    if leakage > leakage_abort:
        raise LeakageError(f"leakage {leakage:.3g} exceeds abort threshold {leakage_abort:g}")
    coeffs = coeffs / math.sqrt(kept)
    if state.num_modes == 1:
        return DecodeResult(QuditState(basis.dims, coeffs), leakage)
    return DecodeResult(MultiQuditState(basis.dims, coeffs), leakage)
