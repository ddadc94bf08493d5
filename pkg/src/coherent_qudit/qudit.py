"""Exact d-level qudit engine in the pseudo-number computational basis.

Conventions
-----------
* ``H[k, l] = omega**(k l) / sqrt(d)``; its columns are the pseudo-phase kets.
* ``Z = diag(omega**k)``, ``X|k> = |k-1>``, ``R|k> = |-k>``.
* Multi-site amplitudes are stored with shape ``(d,) * num_sites``, site 0 on
  axis 0.
* Gate words are tuples of ``(name, power)`` pairs in *application order*:
  the first entry acts on the state first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .rng import as_rng, sample_index

PSEUDO_NUMBER = "pseudo_number"
PSEUDO_PHASE = "pseudo_phase"
BASES = (PSEUDO_NUMBER, PSEUDO_PHASE)

MAX_AMPLITUDES = 2**24

GateWord = tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class QuditDims:
    d: int

    def __post_init__(self):
        # d = 1 is the degenerate single-sector case, kept for CV diagnostics
        if self.d < 1:
            raise ValueError(f"qudit dimension must be >= 1, got {self.d}")

    @property
    def omega(self) -> complex:
        return complex(np.exp(2j * np.pi / self.d))

    def omega_power(self, m) -> np.ndarray | complex:
        """``omega**m`` with the exponent reduced mod d before exponentiating."""
        return np.exp(2j * np.pi * (np.asarray(m) % self.d) / self.d)


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuditState:
    dims: QuditDims
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _freeze(self.amplitudes)
        if amps.shape != (self.dims.d,):
            raise ValueError(f"expected {self.dims.d} amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    def normalized(self) -> "QuditState":
        return QuditState(self.dims, self.amplitudes / np.linalg.norm(self.amplitudes))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def basis_state(k: int, dims: QuditDims) -> QuditState:
    amps = np.zeros(dims.d, dtype=complex)
    amps[k % dims.d] = 1.0
    return QuditState(dims, amps)


def uniform_state(dims: QuditDims) -> QuditState:
    """Even superposition of all pseudo-number kets; the ideal image of ``|alpha>``."""
    return QuditState(dims, np.full(dims.d, 1 / math.sqrt(dims.d), dtype=complex))


def random_state(dims: QuditDims, rng=None) -> QuditState:
    gen, _ = as_rng(rng)
    v = gen.normal(size=dims.d) + 1j * gen.normal(size=dims.d)
    return QuditState(dims, v / np.linalg.norm(v))


def fidelity(a, b) -> float:
    """``|<a|b>|^2`` for normalized vectors (QuditState, MultiQuditState or arrays)."""
    va = np.ravel(getattr(a, "amplitudes", a))
    vb = np.ravel(getattr(b, "amplitudes", b))
    f = abs(np.vdot(va, vb)) ** 2 / (np.vdot(va, va).real * np.vdot(vb, vb).real)
    return float(min(1.0, f))


# -- gates ---------------------------------------------------------------------


@dataclass(frozen=True)
class GateMatrix:
    dims: QuditDims
    entries: np.ndarray

    def __post_init__(self):
        m = _freeze(self.entries)
        if m.shape != (self.dims.d, self.dims.d):
            raise ValueError("gate matrix must be d x d")
        object.__setattr__(self, "entries", m)

    def __matmul__(self, other):
        if isinstance(other, GateMatrix):
            return GateMatrix(self.dims, self.entries @ other.entries)
        if isinstance(other, QuditState):
            return QuditState(self.dims, self.entries @ other.amplitudes)
        return NotImplemented

    @property
    def dagger(self) -> "GateMatrix":
        return GateMatrix(self.dims, self.entries.conj().T)

    def unitarity_error(self) -> float:
        m = self.entries
        return float(np.max(np.abs(m.conj().T @ m - np.eye(self.dims.d))))


def gate_matrix(kind: str, dims: QuditDims, power: int = 1) -> GateMatrix:
    """Build one of ``H``, ``Z``, ``X``, ``R``, ``I`` (raised to ``power``).

    Powers of Z and X are built directly from the reduced exponent, so
    ``gate_matrix("X", dims, -s)`` is exact rather than a matrix power.
    ``Z_pow`` / ``X_pow`` are accepted as aliases.
    """
    d = dims.d
    kind = {"Z_pow": "Z", "X_pow": "X"}.get(kind, kind)
    k = np.arange(d)
    if kind == "H":
        h = dims.omega_power(np.outer(k, k)) / math.sqrt(d)
        m = np.linalg.matrix_power(h, power % 4)
    elif kind == "Z":
        m = np.diag(dims.omega_power(power * k))
    elif kind == "X":
        m = np.zeros((d, d), dtype=complex)
        m[(k - power) % d, k] = 1.0
    elif kind == "R":
        m = np.zeros((d, d), dtype=complex)
        if power % 2:
            m[(-k) % d, k] = 1.0
        else:
            m[k, k] = 1.0
    elif kind == "I":
        m = np.eye(d, dtype=complex)
    else:
        raise ValueError(f"unknown gate kind {kind!r}")
    return GateMatrix(dims, m)


def word_matrix(word: GateWord, dims: QuditDims) -> GateMatrix:
    """Operator for a gate word; later entries multiply from the left."""
    m = gate_matrix("I", dims)
    for name, power in word:
        m = gate_matrix(name, dims, power) @ m
    return m


def apply_word(word: GateWord, state: QuditState) -> QuditState:
    return word_matrix(word, state.dims) @ state


def format_word(word: GateWord) -> str:
    """Operator notation, e.g. ``X^-1 R Z^-2`` (rightmost acts first)."""
    parts = []
    for name, power in reversed(word):
        parts.append(name if power == 1 else f"{name}^{power}")
    return " ".join(parts) if parts else "I"


def byproduct_word(k: int, s: Optional[int] = None) -> GateWord:
    """Residual operator left on the output after outcomes ``k`` (and ``s``).

    One step leaves ``H Z^-k``; two steps leave ``X^-s R Z^-k``.
    """
    if s is None:
        return (("Z", -k), ("H", 1))
    return (("Z", -k), ("R", 1), ("X", -s))


@dataclass(frozen=True)
class CorrectionOps:
    exact_inverse: GateWord
    stated_order: GateWord


def correction_ops(k: int, s: int, dims: QuditDims) -> CorrectionOps:
    """Corrections undoing ``X^-s R Z^-k``.

    ``exact_inverse`` is derived by inverting the byproduct word term by term;
    ``stated_order`` applies ``X^s``, then ``R``, then ``Z^k`` as written in
    the protocol description. The two coincide; tests check that instead of
    assuming it.
    """
    if not (0 <= k < dims.d and 0 <= s < dims.d):
        raise ValueError("outcomes must lie in 0..d-1")
    inverse = tuple((name, -power) for name, power in reversed(byproduct_word(k, s)))
    stated = (("X", s), ("R", 1), ("Z", k))
    return CorrectionOps(inverse, stated)


# -- multi-site states ---------------------------------------------------------


@dataclass(frozen=True)
class ClusterGraph:
    num_sites: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop on site {a}")
            if not (0 <= a < self.num_sites and 0 <= b < self.num_sites):
                raise ValueError(f"edge ({a}, {b}) out of range")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def path(cls, n: int) -> "ClusterGraph":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def complete(cls, n: int) -> "ClusterGraph":
        return cls(n, frozenset(combinations(range(n), 2)))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def neighbours(self, site: int) -> list[int]:
        return sorted({b for a, b in self.edges if a == site} | {a for a, b in self.edges if b == site})


@dataclass(frozen=True)
class MultiQuditState:
    dims: QuditDims
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _freeze(self.amplitudes)
        if amps.ndim == 0 or any(s != self.dims.d for s in amps.shape):
            raise ValueError(f"amplitude tensor must have shape (d,)*n, got {amps.shape}")
        if amps.size > MAX_AMPLITUDES:
            raise ValueError(f"{amps.size} amplitudes exceed cap {MAX_AMPLITUDES}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_sites(self) -> int:
        return self.amplitudes.ndim

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def as_qudit(self) -> QuditState:
        if self.num_sites != 1:
            raise ValueError("only single-site states convert to QuditState")
        return QuditState(self.dims, self.amplitudes)


def product_state(states: Sequence[QuditState]) -> MultiQuditState:
    dims = states[0].dims
    amps = states[0].amplitudes
    for st in states[1:]:
        amps = np.multiply.outer(amps, st.amplitudes)
    return MultiQuditState(dims, amps)


def _check_size(d: int, n: int):
    if d**n > MAX_AMPLITUDES:
        raise ValueError(f"d**n = {d}**{n} exceeds the amplitude cap {MAX_AMPLITUDES}")


def cz_apply(state: MultiQuditState, site_a: int, site_b: int, power: int = 1) -> MultiQuditState:
    """Generalized controlled-Z ``omega**(power * k_a * k_b)`` between two sites."""
    n = state.num_sites
    if site_a == site_b:
        raise ValueError("controlled-Z needs two distinct sites")
    if not (0 <= site_a < n and 0 <= site_b < n):
        raise IndexError(f"sites ({site_a}, {site_b}) out of range for {n} sites")
    d = state.dims.d
    k = np.arange(d)
    phase = state.dims.omega_power(power * np.outer(k, k))
    shape = [1] * n
    shape[site_a] = d
    shape[site_b] = d
    # axes ordered so phase[i, j] lands on (site_a, site_b) regardless of their order
    if site_a > site_b:
        phase = phase.T
    return MultiQuditState(state.dims, state.amplitudes * phase.reshape(shape))


def ideal_cluster(graph: ClusterGraph, dims: QuditDims) -> MultiQuditState:
    _check_size(dims.d, graph.num_sites)
    state = product_state([uniform_state(dims)] * graph.num_sites)
    for a, b in graph.sorted_edges():
        state = cz_apply(state, a, b)
    return state


def embed_gate(gate: GateMatrix, site: int, num_sites: int) -> np.ndarray:
    """Dense ``d**n x d**n`` operator acting with ``gate`` on one site."""
    d = gate.dims.d
    ops = [np.eye(d)] * num_sites
    ops[site] = gate.entries
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out


def apply_site_gate(state: MultiQuditState, gate: GateMatrix, site: int) -> MultiQuditState:
    amps = np.moveaxis(np.tensordot(gate.entries, state.amplitudes, axes=([1], [site])), 0, site)
    return MultiQuditState(state.dims, amps)


def cluster_stabilizer(graph: ClusterGraph, dims: QuditDims, site: int) -> np.ndarray:
    """``X_site * prod_{neighbours} Z^-1`` as a dense matrix; fixes the cluster state."""
    n = graph.num_sites
    op = embed_gate(gate_matrix("X", dims), site, n)
    for nb in graph.neighbours(site):
        op = embed_gate(gate_matrix("Z", dims, -1), nb, n) @ op
    return op


# -- measurement ---------------------------------------------------------------


@dataclass(frozen=True)
class IdealOutcome:
    outcome: int
    post_state: Optional[MultiQuditState]
    probs: np.ndarray


def _basis_coefficients(state: MultiQuditState, site: int, basis: str) -> np.ndarray:
    """Amplitudes with ``site`` moved to axis 0 and expressed in ``basis``."""
    amps = np.moveaxis(state.amplitudes, site, 0)
    if basis == PSEUDO_NUMBER:
        return amps
    if basis == PSEUDO_PHASE:
        h = gate_matrix("H", state.dims).entries
        return np.tensordot(h.conj().T, amps, axes=([1], [0]))
    raise ValueError(f"unknown basis {basis!r}")


def ideal_measure(
    state: MultiQuditState,
    site: int,
    basis: str,
    rng=None,
    forced: Optional[int] = None,
) -> IdealOutcome:
    """Projective measurement of one site; the site is removed from the post-state.

    ``forced`` selects a branch deterministically (for exhaustive checks); it
    must have non-zero probability.
    """
    if not 0 <= site < state.num_sites:
        raise IndexError(f"site {site} out of range")
    coeffs = _basis_coefficients(state, site, basis)
    weights = np.sum(np.abs(coeffs.reshape(state.dims.d, -1)) ** 2, axis=1)
    total = weights.sum()
    if total <= 0:
        raise ValueError("measured state has zero norm")
    probs = weights / total
    if forced is None:
        gen, _ = as_rng(rng)
        outcome = sample_index(probs, gen)
    else:
        outcome = int(forced) % state.dims.d
        if probs[outcome] <= 1e-300:
            raise ValueError(f"forced outcome {outcome} has zero probability")
    post = None
    if state.num_sites > 1:
        rest = coeffs[outcome]
        post = MultiQuditState(state.dims, rest / np.linalg.norm(rest))
    return IdealOutcome(outcome, post, probs)


def schmidt_coefficients(amplitudes: np.ndarray, num_left: int = 1) -> np.ndarray:
    """Schmidt coefficients across the cut after the first ``num_left`` axes."""
    a = np.asarray(amplitudes)
    left = int(np.prod(a.shape[:num_left]))
    s = np.linalg.svd(a.reshape(left, -1), compute_uv=False)
    return s / np.linalg.norm(s)


def entanglement_entropy(amplitudes: np.ndarray, num_left: int = 1, base: float = math.e) -> float:
    """Von Neumann entropy of the reduced state of the first ``num_left`` axes."""
    p = schmidt_coefficients(amplitudes, num_left) ** 2
    p = p[p > 1e-300]
    return float(-np.sum(p * np.log(p)) / math.log(base))


def ideal_bell_pair(dims: QuditDims) -> MultiQuditState:
    """``(1/sqrt d) sum_k |k> |k~>`` built directly from the H columns."""
    h = gate_matrix("H", dims).entries
    return MultiQuditState(dims, h.T / math.sqrt(dims.d))


def stabilizer_expectations(state: MultiQuditState, graph: ClusterGraph) -> list[complex]:
    v = state.amplitudes.ravel()
    return [complex(np.vdot(v, cluster_stabilizer(graph, state.dims, s) @ v)) for s in range(graph.num_sites)]

