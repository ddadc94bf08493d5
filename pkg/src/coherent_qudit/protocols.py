"""Bell pairs, one-step and two-step qudit teleportation, and trial harnesses.

Both engines run the same protocol:

``ideal``
    exact qudit vectors; the uniform superposition stands in for ``|alpha>``.
``cv``
    truncated Fock modes; controlled-Z is a cross-Kerr phase ``2 pi / d``,
    Bob's output mode is decoded into the codeword subspace and corrected there.

Alice and Bob only share the classical message list of a
:class:`TeleportRecord`; Bob's correction is built from those messages alone.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import cv
from .cv import CodewordBasis, KerrPhase, codeword_subspace, decode_cv, encode_qudit, tensor
from .fock import coherent_state
from .measurement import HETERODYNE, LEAK, SUBSPACE, HeterodyneConfig, measure_pseudo_phase
from .qudit import (
    PSEUDO_PHASE,
    ClusterGraph,
    GateWord,
    MultiQuditState,
    QuditDims,
    QuditState,
    apply_word,
    byproduct_word,
    correction_ops,
    cz_apply,
    entanglement_entropy,
    fidelity,
    format_word,
    ideal_cluster,
    ideal_measure,
    product_state,
    random_state,
    uniform_state,
)
from .rng import as_rng, derive_rng

IDEAL = "ideal"
CV = "cv"
ENGINES = (IDEAL, CV)


class TeleportFailure(RuntimeError):
    """A trial could not complete, e.g. a measurement landed on the leak outcome."""


@dataclass(frozen=True)
class TeleportRecord:
    engine: str
    meas_model: str
    outcomes: tuple[int, Optional[int]]
    messages: tuple[tuple[str, tuple[str, int]], ...]
    byproduct: GateWord
    fidelity_pre_correction: float
    fidelity_post_correction: Optional[float]
    leakage_total: float
    seed: Optional[int]
    trial: int = 0
    correction: GateWord = ()
    raw_samples: tuple = ()
    output: Optional[QuditState] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "meas_model": self.meas_model,
            "outcomes": list(self.outcomes),
            "messages": [[sender, list(payload)] for sender, payload in self.messages],
            "byproduct": format_word(self.byproduct),
            "correction": format_word(self.correction) if self.correction else None,
            "fidelity_pre_correction": self.fidelity_pre_correction,
            "fidelity_post_correction": self.fidelity_post_correction,
            "leakage_total": self.leakage_total,
            "raw_samples": [list(s) for s in self.raw_samples],
            "seed": self.seed,
            "trial": self.trial,
        }


def bell_pair(dims: QuditDims, alpha: complex = 0, engine: str = IDEAL, n_max: Optional[int] = None):
    """Controlled-Z on two fresh resources: ``(1/sqrt d) sum_k |k> |k~>``."""
    if engine == IDEAL:
        return ideal_cluster(ClusterGraph.path(2), dims)
    if engine == CV:
        return cv.cv_bell_pair(dims, alpha, n_max)
    raise ValueError(f"unknown engine {engine!r}")


def bell_entropy(dims: QuditDims, alpha: complex, engine: str = CV, basis: Optional[CodewordBasis] = None):
    """Entanglement entropy (log base d) of the Bell pair and its decode leakage."""
    if engine == IDEAL:
        return entanglement_entropy(bell_pair(dims).amplitudes, base=dims.d), 0.0
    basis = basis or codeword_subspace(dims, alpha)
    decoded = decode_cv(bell_pair(dims, alpha, CV, basis.n_max), basis)
    return entanglement_entropy(decoded.state.amplitudes, base=dims.d), decoded.leakage


def bob_correction(messages, dims: QuditDims) -> GateWord:
    """Correction word from the classical messages alone."""
    values = dict(payload for _, payload in messages)
    return correction_ops(values["k"], values["s"], dims).exact_inverse


def _check_model(engine: str, model: str):
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    if model not in (SUBSPACE, HETERODYNE):
        raise ValueError(f"unknown measurement model {model!r}")
    if engine == IDEAL and model == HETERODYNE:
        raise ValueError("the heterodyne model needs the cv engine")


def _pair(forced, i):
    return None if forced is None else forced[i]


def _cv_measure(state, basis, model, cfg, gen, forced):
    rec, post, leak = measure_pseudo_phase(state, 0, model, basis, cfg, gen, forced)
    if rec.outcome == LEAK:
        raise TeleportFailure("pseudo-phase measurement returned the leak outcome")
    return rec, post, leak


def one_step_teleport(
    input: QuditState,
    dims: QuditDims,
    alpha: complex = 0,
    engine: str = IDEAL,
    meas_model: str = SUBSPACE,
    rng=None,
    forced: Optional[int] = None,
    basis: Optional[CodewordBasis] = None,
    cfg: HeterodyneConfig = HeterodyneConfig(),
) -> TeleportRecord:
    """Entangle the input with one fresh resource and measure the input site.

    No correction is applied: the record's fidelity is that of the residual
    with ``H Z^-k |input>``.
    """
    _check_model(engine, meas_model)
    gen, seed = as_rng(rng)
    leakage = 0.0
    samples = ()
    if engine == IDEAL:
        state = cz_apply(product_state([input, uniform_state(dims)]), 0, 1)
        res = ideal_measure(state, 0, PSEUDO_PHASE, gen, forced)
        k, output = res.outcome, res.post_state.as_qudit()
    else:
        basis = basis or codeword_subspace(dims, alpha)
        coh = coherent_state(basis.alpha, basis.n_max)
        state = tensor([encode_qudit(input, basis), coh], labels=("in", "out"))
        state = cv.apply_cross_kerr(state, 0, 1, KerrPhase.for_dimension(dims.d))
        rec, post, leak = _cv_measure(state, basis, meas_model, cfg, gen, forced)
        k = rec.outcome
        samples = (rec.raw_sample,) if rec.raw_sample else ()
        decoded = decode_cv(post, basis)
        output = decoded.state
        leakage = leak + decoded.leakage
    byproduct = byproduct_word(k)
    return TeleportRecord(
        engine=engine,
        meas_model=meas_model,
        outcomes=(k, None),
        messages=(("alice", ("k", k)),),
        byproduct=byproduct,
        fidelity_pre_correction=fidelity(output, apply_word(byproduct, input)),
        fidelity_post_correction=None,
        leakage_total=leakage,
        seed=seed,
        raw_samples=samples,
        output=output,
    )


def full_teleport(
    input: QuditState,
    dims: QuditDims,
    alpha: complex = 0,
    engine: str = IDEAL,
    meas_model: str = SUBSPACE,
    apply_corrections: bool = True,
    rng=None,
    forced: Optional[tuple[int, int]] = None,
    basis: Optional[CodewordBasis] = None,
    cfg: HeterodyneConfig = HeterodyneConfig(),
) -> TeleportRecord:
    """Two-step teleportation from Alice's input site to Bob's third site.

    Bob entangles sites 2 and 3, Alice entangles 1 and 2 and measures both in
    the pseudo-phase basis, sending ``k`` and ``s``. Bob's state is then
    ``X^-s R Z^-k |input>`` up to a global phase. With ``apply_corrections``
    false the outcome is only tracked: ``fidelity_post_correction`` is None
    and the pre-correction fidelity is taken against that byproduct target.
    """
    _check_model(engine, meas_model)
    gen, seed = as_rng(rng)
    leakage = 0.0
    samples = []
    if engine == IDEAL:
        u = uniform_state(dims)
        state = product_state([input, u, u])
        state = cz_apply(state, 1, 2)
        state = cz_apply(state, 0, 1)
        first = ideal_measure(state, 0, PSEUDO_PHASE, gen, _pair(forced, 0))
        second = ideal_measure(first.post_state, 0, PSEUDO_PHASE, gen, _pair(forced, 1))
        k, s = first.outcome, second.outcome
        bob = second.post_state.as_qudit()
    else:
        basis = basis or codeword_subspace(dims, alpha)
        coh = coherent_state(basis.alpha, basis.n_max)
        state = tensor([encode_qudit(input, basis), coh, coh], labels=("alice_in", "alice_ch", "bob"))
        cz = KerrPhase.for_dimension(dims.d)
        state = cv.apply_cross_kerr(state, "alice_ch", "bob", cz)
        state = cv.apply_cross_kerr(state, "alice_in", "alice_ch", cz)
        rec1, post, leak1 = _cv_measure(state, basis, meas_model, cfg, gen, _pair(forced, 0))
        rec2, post, leak2 = _cv_measure(post, basis, meas_model, cfg, gen, _pair(forced, 1))
        k, s = rec1.outcome, rec2.outcome
        samples = [r.raw_sample for r in (rec1, rec2) if r.raw_sample]
        decoded = decode_cv(post, basis)
        bob = decoded.state
        leakage = leak1 + leak2 + decoded.leakage

    messages = (("alice", ("k", k)), ("alice", ("s", s)))
    byproduct = byproduct_word(k, s)
    pre = fidelity(bob, apply_word(byproduct, input))
    post_fid = None
    correction: GateWord = ()
    if apply_corrections:
        correction = bob_correction(messages, dims)
        bob = apply_word(correction, bob)
        post_fid = fidelity(bob, input)
    return TeleportRecord(
        engine=engine,
        meas_model=meas_model,
        outcomes=(k, s),
        messages=messages,
        byproduct=byproduct,
        fidelity_pre_correction=pre,
        fidelity_post_correction=post_fid,
        leakage_total=leakage,
        seed=seed,
        correction=correction,
        raw_samples=tuple(samples),
        output=bob,
    )


def ideal_teleport(input: QuditState, rng=None, forced: Optional[tuple[int, int]] = None) -> TeleportRecord:
    return full_teleport(input, input.dims, engine=IDEAL, rng=rng, forced=forced)


# -- trial harness -------------------------------------------------------------

FULL = "full"
ONE_STEP = "one_step"


@dataclass(frozen=True)
class TrialSpec:
    protocol: str
    dims: QuditDims
    alpha: complex = 0
    engine: str = IDEAL
    meas_model: str = SUBSPACE
    input: Optional[QuditState] = None
    apply_corrections: bool = True
    n_max: Optional[int] = None
    cfg: HeterodyneConfig = HeterodyneConfig()


@dataclass(frozen=True)
class TrialSummary:
    num_trials: int
    failed: int
    mean_fidelity_pre: float
    min_fidelity_pre: float
    mean_fidelity_post: Optional[float]
    min_fidelity_post: Optional[float]
    std_fidelity_post: Optional[float]
    mean_leakage: float
    max_leakage: float
    histogram: np.ndarray
    chi_square: float
    records: tuple[TeleportRecord, ...] = ()
    errors: tuple[str, ...] = ()

    @property
    def mean_infidelity_post(self) -> Optional[float]:
        return None if self.mean_fidelity_post is None else 1.0 - self.mean_fidelity_post


def _stats(values):
    if not values:
        return None, None, None
    a = np.asarray(values)
    return float(a.mean()), float(a.min()), float(a.std(ddof=1)) if a.size > 1 else 0.0


def run_trials(spec: TrialSpec, num_trials: int, seed: int, keep_records: int = 1000) -> TrialSummary:
    """Repeat a protocol with per-trial generators ``derive_rng(seed, i)``.

    Random inputs (when ``spec.input`` is None) come from a separate stream so
    the same inputs are used whatever the engine, model or ``alpha``. Failed
    trials are counted, not raised.
    """
    if num_trials < 1:
        raise ValueError("num_trials must be >= 1")
    basis = None
    if spec.engine == CV:
        basis = codeword_subspace(spec.dims, spec.alpha, spec.n_max)
    d = spec.dims.d
    hist = np.zeros((d, d) if spec.protocol == FULL else (d,), dtype=int)
    pre, post, leaks, records, errors = [], [], [], [], []
    for i in range(num_trials):
        gen = derive_rng(seed, i)
        inp = spec.input if spec.input is not None else random_state(spec.dims, derive_rng(seed, i, stream=1))
        try:
            if spec.protocol == FULL:
                rec = full_teleport(
                    inp, spec.dims, spec.alpha, spec.engine, spec.meas_model,
                    spec.apply_corrections, gen, basis=basis, cfg=spec.cfg,
                )
                hist[rec.outcomes] += 1
            elif spec.protocol == ONE_STEP:
                rec = one_step_teleport(
                    inp, spec.dims, spec.alpha, spec.engine, spec.meas_model, gen, basis=basis, cfg=spec.cfg
                )
                hist[rec.outcomes[0]] += 1
            else:
                raise ValueError(f"unknown protocol {spec.protocol!r}")
        except (TeleportFailure, cv.LeakageError) as exc:
            errors.append(f"trial {i}: {exc}")
            continue
        rec = dataclasses.replace(rec, seed=seed, trial=i)
        pre.append(rec.fidelity_pre_correction)
        if rec.fidelity_post_correction is not None:
            post.append(rec.fidelity_post_correction)
        leaks.append(rec.leakage_total)
        if len(records) < keep_records:
            records.append(rec)
    done = len(pre)
    if done == 0:
        nan = math.nan
        return TrialSummary(num_trials, num_trials, nan, nan, None, None, None, nan, nan, hist, nan, (), tuple(errors))
    expected = done / hist.size
    chi2 = float(np.sum((hist - expected) ** 2) / expected)
    mean_pre, min_pre, _ = _stats(pre)
    mean_post, min_post, std_post = _stats(post)
    return TrialSummary(
        num_trials=num_trials,
        failed=num_trials - done,
        mean_fidelity_pre=mean_pre,
        min_fidelity_pre=min_pre,
        mean_fidelity_post=mean_post,
        min_fidelity_post=min_post,
        std_fidelity_post=std_post,
        mean_leakage=float(np.mean(leaks)),
        max_leakage=float(np.max(leaks)),
        histogram=hist,
        chi_square=chi2,
        records=tuple(records),
        errors=tuple(errors),
    )
