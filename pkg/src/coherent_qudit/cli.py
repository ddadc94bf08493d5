"""Command-line front end: experiment scans over (d, alpha, engine, model).

Examples::

    coherent-qudit diagnose-basis --d 4 --alpha 5
    coherent-qudit teleport-full --d 4 --alpha 5 --engine cv --model subspace --trials 100 --seed 7
    coherent-qudit scan --d 4 --alpha 2,3,4,5 --engine cv --output scan.csv

CSV output starts with two ``#`` provenance lines (version, resolved config),
then a header row and one data row per cell. JSON output is a single object
with ``schema_version``, the resolved config, the rows, and per-cell
teleportation records.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .cv import EmptySectorError, LeakageError, build_cv_cluster, codeword_subspace, decode_cv
from .fock import TruncationError, TruncationPolicy, truncation_dim
from .measurement import HETERODYNE, SUBSPACE, HeterodyneConfig
from .protocols import CV, FULL, IDEAL, ONE_STEP, TrialSpec, bell_entropy, run_trials
from .qudit import ClusterGraph, QuditDims, entanglement_entropy, fidelity, ideal_cluster
from .rng import default_seed

SCHEMA_VERSION = 1
COMMANDS = ("diagnose-basis", "bell", "cluster", "teleport-one", "teleport-full", "scan")
ENGINE_CHOICES = {"ideal": (IDEAL,), "cv": (CV,), "both": (IDEAL, CV)}
MODEL_CHOICES = {"subspace": (SUBSPACE,), "heterodyne": (HETERODYNE,), "both": (SUBSPACE, HETERODYNE)}

COLUMNS = (
    "command",
    "d",
    "alpha_abs",
    "alpha_phase_deg",
    "engine",
    "model",
    "seed",
    "config_hash",
    "n_max",
    "defect_max",
    "phase_gap_max",
    "entanglement_entropy",
    "mean_fidelity_pre",
    "min_fidelity_pre",
    "mean_fidelity_post",
    "min_fidelity_post",
    "leakage",
    "outcome_chi2",
    "trials",
    "failed_trials",
    "status",
    "errors",
    "wall_time_ms",
)

# keys that do not change the data and so stay out of the replay hash
_NON_DATA_KEYS = ("output_path", "output_format", "timing")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScanConfig:
    command: str
    d_list: tuple[int, ...] = (4,)
    alpha_list: tuple[tuple[float, float], ...] = ((5.0, 0.0),)
    engine: str = "cv"
    meas_model: str = "subspace"
    trials: int = 100
    seed: int = 0
    margin_sigmas: float = 8.0
    hard_cap: int = 256
    tail_tolerance: float = 1e-10
    max_defect: float = 0.5
    grid_points: int = 192
    keep_records: int = 100
    output_path: Optional[str] = None
    output_format: str = "csv"
    timing: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not self.d_list or not self.alpha_list:
            raise ConfigError("d and alpha lists must be non-empty")
        if any(d < 1 for d in self.d_list):
            raise ConfigError("every d must be >= 1")
        if any(mag < 0 or not math.isfinite(mag) for mag, _ in self.alpha_list):
            raise ConfigError("alpha magnitudes must be finite and >= 0")
        if self.engine not in ENGINE_CHOICES:
            raise ConfigError(f"engine must be one of {sorted(ENGINE_CHOICES)}")
        if self.meas_model not in MODEL_CHOICES:
            raise ConfigError(f"model must be one of {sorted(MODEL_CHOICES)}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.output_format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        try:
            TruncationPolicy(self.margin_sigmas, self.hard_cap, self.tail_tolerance)
            HeterodyneConfig(grid_points_per_axis=self.grid_points)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(self.margin_sigmas, self.hard_cap, self.tail_tolerance)

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["d_list"] = list(self.d_list)
        out["alpha_list"] = [list(a) for a in self.alpha_list]
        return out

    def config_hash(self) -> str:
        data = {k: v for k, v in self.as_dict().items() if k not in _NON_DATA_KEYS}
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


_FIELDS = {f.name for f in dataclasses.fields(ScanConfig)}


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"malformed integer list {text!r}") from None


def _parse_alphas(text: str, phase_deg: float) -> tuple[tuple[float, float], ...]:
    """``"2,3,5@45"``: magnitudes, each optionally ``@phase_degrees``."""
    out = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        mag, _, ph = tok.partition("@")
        try:
            out.append((float(mag), float(ph) if ph else float(phase_deg)))
        except ValueError:
            raise ConfigError(f"malformed alpha {tok!r}") from None
    return tuple(out)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coherent-qudit", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with ScanConfig keys; flags override it")
    p.add_argument("--d", dest="d_list", help="qudit dimensions, comma separated")
    p.add_argument("--alpha", dest="alpha_list", help="|alpha| values, comma separated, optional @phase_deg")
    p.add_argument("--alpha-phase-deg", type=float, default=None, help="phase applied to bare magnitudes")
    p.add_argument("--engine", choices=sorted(ENGINE_CHOICES))
    p.add_argument("--model", dest="meas_model", choices=sorted(MODEL_CHOICES))
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--margin-sigmas", type=float)
    p.add_argument("--hard-cap", type=int)
    p.add_argument("--tail-tolerance", type=float)
    p.add_argument("--max-defect", type=float, help="skip cv cells whose basis defect exceeds this")
    p.add_argument("--grid-points", type=int, help="heterodyne grid points per axis")
    p.add_argument("--keep-records", type=int)
    p.add_argument("--output", dest="output_path")
    p.add_argument("--format", dest="output_format", choices=("csv", "json"))
    p.add_argument("--timing", action="store_true", default=None, help="fill wall_time_ms (not deterministic)")
    return p


def parse_config(argv: Sequence[str]) -> ScanConfig:
    args = build_parser().parse_args(list(argv))
    values: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(file_values) - _FIELDS
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(file_values)
    phase = args.alpha_phase_deg if args.alpha_phase_deg is not None else 0.0
    for key, val in vars(args).items():
        if key in ("config", "alpha_phase_deg") or val is None:
            continue
        values[key] = val
    values.setdefault("seed", default_seed())
    if "d_list" in values:
        v = values["d_list"]
        values["d_list"] = _parse_ints(v) if isinstance(v, str) else tuple(int(x) for x in v)
    if "alpha_list" in values:
        v = values["alpha_list"]
        if isinstance(v, str):
            values["alpha_list"] = _parse_alphas(v, phase)
        else:
            values["alpha_list"] = tuple(
                (float(x), phase) if not isinstance(x, (list, tuple)) else (float(x[0]), float(x[1])) for x in v
            )
    try:
        return ScanConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# -- cells ---------------------------------------------------------------------


def _alpha(mag: float, phase_deg: float) -> complex:
    if phase_deg == 0:
        return complex(mag)
    return complex(mag * math.cos(math.radians(phase_deg)), mag * math.sin(math.radians(phase_deg)))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _basis_or_skip(cfg: ScanConfig, dims: QuditDims, alpha: complex, enforce_defect: bool):
    """Codeword basis for a cell, or a skip reason."""
    try:
        n_max = truncation_dim(alpha, cfg.policy())
        basis = codeword_subspace(dims, alpha, n_max)
    except (EmptySectorError, TruncationError) as exc:
        return None, f"infeasible: {exc}"
    if enforce_defect and basis.normalization_defects.max() > cfg.max_defect:
        return None, (
            f"infeasible: basis defect {basis.normalization_defects.max():.3g} exceeds max_defect {cfg.max_defect:g}"
        )
    return basis, None


def _trial_cell(cfg, row, spec) -> tuple[dict, list]:
    summary = run_trials(spec, cfg.trials, cfg.seed, cfg.keep_records)
    row.update(
        mean_fidelity_pre=summary.mean_fidelity_pre,
        min_fidelity_pre=summary.min_fidelity_pre,
        mean_fidelity_post=summary.mean_fidelity_post,
        min_fidelity_post=summary.min_fidelity_post,
        leakage=summary.mean_leakage,
        outcome_chi2=summary.chi_square,
        trials=summary.num_trials,
        failed_trials=summary.failed,
    )
    if summary.errors:
        row["errors"] = f"{len(summary.errors)} failed; first: {summary.errors[0]}"
    if summary.failed == summary.num_trials:
        row["status"] = "failed"
    return row, [r.to_dict() for r in summary.records]


def run_cell(cfg: ScanConfig, d: int, mag: float, phase_deg: float, engine: str, model: str):
    dims = QuditDims(d)
    alpha = _alpha(mag, phase_deg)
    row = dict.fromkeys(COLUMNS)
    row.update(
        command=cfg.command, d=d, alpha_abs=mag, alpha_phase_deg=phase_deg, engine=engine, model=model,
        seed=cfg.seed, config_hash=cfg.config_hash(), status="ok", errors="",
    )
    records: list = []
    cmd = cfg.command
    if engine == IDEAL and model == HETERODYNE and cmd not in ("diagnose-basis", "bell", "cluster"):
        row.update(status="skipped", errors="heterodyne model needs the cv engine")
        return row, records

    basis = None
    if engine == CV or cmd == "diagnose-basis":
        basis, reason = _basis_or_skip(cfg, dims, alpha, enforce_defect=cmd != "diagnose-basis")
        if basis is None:
            row.update(status="skipped", errors=reason)
            return row, records
        row.update(
            n_max=basis.n_max,
            defect_max=float(basis.normalization_defects.max()),
            phase_gap_max=float(basis.phase_ket_physical_gap.max()),
        )

    try:
        if cmd == "diagnose-basis":
            pass
        elif cmd == "bell":
            ent, leak = bell_entropy(dims, alpha, engine, basis)
            row.update(entanglement_entropy=ent, leakage=leak)
        elif cmd == "cluster":
            graph = ClusterGraph.path(3)
            ideal = ideal_cluster(graph, dims)
            if engine == IDEAL:
                state, leak = ideal, 0.0
            else:
                decoded = decode_cv(build_cv_cluster(graph, dims, alpha, n_max=basis.n_max), basis)
                state, leak = decoded.state, decoded.leakage
            f = fidelity(state, ideal)
            row.update(
                entanglement_entropy=entanglement_entropy(state.amplitudes, 1, base=d),
                mean_fidelity_post=f, min_fidelity_post=f, leakage=leak,
            )
        else:
            protocol = ONE_STEP if cmd == "teleport-one" else FULL
            spec = TrialSpec(
                protocol, dims, alpha, engine, model,
                n_max=basis.n_max if basis else None, cfg=HeterodyneConfig(grid_points_per_axis=cfg.grid_points),
            )
            if cmd == "scan":
                ent, _ = bell_entropy(dims, alpha, engine, basis)
                row["entanglement_entropy"] = ent
            row, records = _trial_cell(cfg, row, spec)
    except (LeakageError, ValueError, RuntimeError) as exc:
        row.update(status="failed", errors=str(exc).replace("\n", " "))
    return row, records


def iter_cells(cfg: ScanConfig):
    engines = ENGINE_CHOICES[cfg.engine]
    models = MODEL_CHOICES[cfg.meas_model]
    if cfg.command == "diagnose-basis":
        engines, models = (CV,), ("-",)
    elif cfg.command in ("bell", "cluster"):
        models = ("-",)
    for d in cfg.d_list:
        for mag, ph in cfg.alpha_list:
            for engine in engines:
                for model in models:
                    yield d, mag, ph, engine, model


def run(cfg: ScanConfig, stream=None) -> int:
    """Execute every cell in deterministic order and write the output."""
    rows, cell_records = [], []
    for d, mag, ph, engine, model in iter_cells(cfg):
        t0 = time.perf_counter()
        row, records = run_cell(cfg, d, mag, ph, engine, model)
        if cfg.timing:
            row["wall_time_ms"] = round((time.perf_counter() - t0) * 1000, 3)
        rows.append(row)
        cell_records.append(records)

    text = _render_json(cfg, rows, cell_records) if cfg.output_format == "json" else _render_csv(cfg, rows)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        (stream or sys.stdout).write(text)
    failed = sum(r["status"] == "failed" for r in rows)
    return 1 if rows and failed == len(rows) else 0


def _render_csv(cfg: ScanConfig, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# coherent-qudit {__version__} schema_version={SCHEMA_VERSION}\n")
    buf.write(f"# config: {json.dumps(cfg.as_dict(), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


def _render_json(cfg: ScanConfig, rows, cell_records) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg.as_dict(),
        "config_hash": cfg.config_hash(),
        "columns": list(COLUMNS),
        "rows": [{c: _jsonable(r[c]) for c in COLUMNS} for r in rows],
        "records": cell_records,
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"coherent-qudit: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
