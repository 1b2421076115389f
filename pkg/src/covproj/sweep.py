"""Quasi-exhaustive enumeration engine over covariance-pair families.

A sweep expands a parameter grid into cells (one per combination of ambient
dimension p, embedding dimension q, and family parameters), generates
``n_simu`` covariance pairs per cell, builds the requested projections for
each pair, and evaluates one metric mode:

* ``overlap``             closed-form embedded overlap per projection;
* ``risk_mc``             Monte Carlo Bayes risk in the embedding;
* ``oos_loss``            0-1 loss of a trained embedded classifier on a
                          held-out split of sampled Gaussian data;
* ``finite_sample_curve`` 0-1 loss and covariance reconstruction error as a
                          function of the per-class sample size, with both
                          parameter-oracle and empirical projections.

Randomness is keyed on (master seed, cell index, replicate, context), so
results are identical for any worker count and across runs. Records stream
to a CSV sink with resume-from-checkpoint at cell granularity; rows are
written in cell order, which makes the file byte-stable. The per-record
``ms`` column is written as 0 unless timing capture is enabled, because wall
times would break that byte stability; aggregate timing lives in the run
manifest instead.

Record CSV header (fixed):
    family,p,q,param1,param2,param3,replicate,projection,metric_overlap,
    metric_oos,metric_mc,metric_mc_se,metric_recon,status,ms
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .classify import fit_embedded_qda, mc_bayes_risk, oos_error, reconstruction_error
from .core import (
    ConfigError,
    CovProjError,
    EmptyGridError,
    MixedModesError,
    RngStream,
    SpdMatrix,
    TwoClassGaussian,
    derive_stream,
    make_spd,
)
from .datasets import load_dataset
from .generators import (
    LatentConfig,
    column_overlap,
    empirical_cov_pair,
    gen_iw_pair,
    gen_latent_pair,
    pca_adversarial_pair,
    pca_favorable_pair,
    sample_two_class,
)
from .metrics import embedded_overlap
from .projections import (
    empirical_covariances,
    mixture_covariance,
    optimal_projection_auto_ridge,
    pca_projection,
    random_projection,
    sparse_random_projection,
)

CSV_HEADER = (
    "family,p,q,param1,param2,param3,replicate,projection,"
    "metric_overlap,metric_oos,metric_mc,metric_mc_se,metric_recon,status,ms"
)

FAMILIES = ("inverse_wishart", "latent_low_dim", "empirical_cov", "example1", "example2")
MODES = ("overlap", "risk_mc", "oos_loss", "finite_sample_curve")
ORACLE_PROJECTIONS = ("pca", "rp", "sparse_rp", "bhatt_optimal")
EMPIRICAL_PROJECTIONS = (
    "empirical_pca",
    "empirical_rp",
    "empirical_sparse_rp",
    "empirical_bhatt_optimal",
)
DATA_MODES = ("oos_loss", "finite_sample_curve")

# path categories under the (cell index, replicate) stream
_CTX_PAIR, _CTX_PROJ, _CTX_DATA, _CTX_SPLIT, _CTX_MC = 0, 1, 2, 3, 4


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    """Full description of one sweep; see module docstring for the modes."""

    family: str
    p_grid: tuple[int, ...]
    q_grid: tuple[int, ...]
    mode: str = "overlap"
    projections: tuple[str, ...] = ("pca", "rp", "sparse_rp")
    n_simu: int = 1
    master_seed: int = 0
    n_workers: int = 1
    # inverse Wishart family: degrees of freedom as multiples of p
    df1_over_p: tuple[float, ...] = (1.0,)
    df2_over_p: tuple[float, ...] = (1.0,)
    # latent low-dimension family
    share_modes: tuple[str, ...] = ("none",)
    q_densities: tuple[str, ...] = ("dense",)
    sparse_q_density: float = 0.1
    # empirical covariance family
    gamma_grid: tuple[float, ...] = (0.0,)
    dataset: str | None = None
    label_column: str | None = None
    # fixture families
    alpha: float = 4.0
    delta: float = 1.0
    # per-mode knobs
    train_frac: float = 0.7
    mc_samples: int = 20000
    ridge: float = 1e-6
    n_per_class: int = 100
    sample_grid: tuple[int, ...] = (20, 40, 80, 160, 320)
    record_timings: bool = False

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError("family", f"must be one of {FAMILIES}, got {self.family!r}")
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {MODES}, got {self.mode!r}")
        if not self.p_grid or any(p < 1 for p in self.p_grid):
            raise ConfigError("p", "need at least one positive ambient dimension")
        if not self.q_grid or any(q < 1 for q in self.q_grid):
            raise ConfigError("q", "need at least one positive embedding dimension")
        if self.n_simu < 1:
            raise ConfigError("n_simu", "must be at least 1")
        if self.n_workers < 1:
            raise ConfigError("workers", "must be at least 1")
        if not self.projections:
            raise ConfigError("projections", "need at least one projection")
        known = set(ORACLE_PROJECTIONS) | set(EMPIRICAL_PROJECTIONS)
        for name in self.projections:
            if name not in known:
                raise ConfigError("projections", f"unknown projection {name!r}")
            if name in EMPIRICAL_PROJECTIONS and self.mode not in DATA_MODES:
                raise ConfigError(
                    "projections",
                    f"{name!r} needs sampled data; valid only in modes {DATA_MODES}",
                )
        if self.family == "inverse_wishart":
            for key, grid in (("df1_over_p", self.df1_over_p), ("df2_over_p", self.df2_over_p)):
                if not grid or any(m < 1.0 for m in grid):
                    raise ConfigError(key, "df/p multiples must all be >= 1")
        if self.family == "latent_low_dim":
            for mode in self.share_modes:
                if mode not in ("none", "q", "theta"):
                    raise ConfigError("share", f"must be none, q or theta, got {mode!r}")
            for dens in self.q_densities:
                if dens not in ("dense", "sparse"):
                    raise ConfigError("q_density", f"must be dense or sparse, got {dens!r}")
            if not 0.0 < self.sparse_q_density <= 1.0:
                raise ConfigError("sparse_q_density", "must lie in (0, 1]")
        if self.family == "empirical_cov":
            if any(not 0.0 <= g <= 1.0 for g in self.gamma_grid):
                raise ConfigError("gamma", "overlap fractions must lie in [0, 1]")
        if self.family in ("example1", "example2") and not 0 < self.delta < self.alpha:
            raise ConfigError("alpha/delta", "need 0 < delta < alpha")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigError("train_frac", "must lie strictly between 0 and 1")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples", "must be at least 1")
        if self.ridge < 0:
            raise ConfigError("ridge", "must be non-negative")
        if self.n_per_class < 2:
            raise ConfigError("n_per_class", "need at least 2 observations per class")
        if self.mode == "finite_sample_curve":
            if not self.sample_grid or any(n < 2 for n in self.sample_grid):
                raise ConfigError("sample_grid", "per-class sizes must all be >= 2")
        if self.master_seed < 0:
            raise ConfigError("seed", "must be non-negative")

    def to_mapping(self) -> dict[str, str]:
        """Flat key=value echo of every field, suitable for a manifest."""
        join = lambda xs: ",".join(_fmt(x) for x in xs)
        return {
            "family": self.family,
            "mode": self.mode,
            "p": join(self.p_grid),
            "q": join(self.q_grid),
            "projections": ",".join(self.projections),
            "n_simu": str(self.n_simu),
            "seed": str(self.master_seed),
            "workers": str(self.n_workers),
            "df1_over_p": join(self.df1_over_p),
            "df2_over_p": join(self.df2_over_p),
            "share": ",".join(self.share_modes),
            "q_density": ",".join(self.q_densities),
            "sparse_q_density": _fmt(self.sparse_q_density),
            "gamma": join(self.gamma_grid),
            "dataset": self.dataset or "",
            "label_column": self.label_column or "",
            "alpha": _fmt(self.alpha),
            "delta": _fmt(self.delta),
            "train_frac": _fmt(self.train_frac),
            "mc_samples": str(self.mc_samples),
            "ridge": _fmt(self.ridge),
            "n_per_class": str(self.n_per_class),
            "sample_grid": join(self.sample_grid),
            "record_timings": _fmt(self.record_timings),
        }


def _parse_list(value: str, parse, key: str) -> tuple:
    items = [tok.strip() for tok in value.split(",") if tok.strip() != ""]
    try:
        return tuple(parse(tok) for tok in items)
    except ValueError:
        raise ConfigError(key, f"cannot parse list value {value!r}")


def _parse_scalar(value: str, parse, key: str):
    try:
        return parse(value.strip())
    except ValueError:
        raise ConfigError(key, f"cannot parse value {value!r}")


def config_from_mapping(mapping: dict[str, str]) -> SweepConfig:
    """Build a config from flat string key=value pairs, validating each field."""
    m = dict(mapping)
    if "family" not in m:
        raise ConfigError("family", "missing required key")
    kwargs = {"family": m.pop("family").strip()}
    spec = {
        "mode": ("mode", lambda v: v.strip()),
        "p": ("p_grid", lambda v: _parse_list(v, int, "p")),
        "q": ("q_grid", lambda v: _parse_list(v, int, "q")),
        "projections": ("projections", lambda v: _parse_list(v, str, "projections")),
        "n_simu": ("n_simu", lambda v: _parse_scalar(v, int, "n_simu")),
        "seed": ("master_seed", lambda v: _parse_scalar(v, int, "seed")),
        "workers": ("n_workers", lambda v: _parse_scalar(v, int, "workers")),
        "df1_over_p": ("df1_over_p", lambda v: _parse_list(v, float, "df1_over_p")),
        "df2_over_p": ("df2_over_p", lambda v: _parse_list(v, float, "df2_over_p")),
        "share": ("share_modes", lambda v: _parse_list(v, str, "share")),
        "q_density": ("q_densities", lambda v: _parse_list(v, str, "q_density")),
        "sparse_q_density": (
            "sparse_q_density",
            lambda v: _parse_scalar(v, float, "sparse_q_density"),
        ),
        "gamma": ("gamma_grid", lambda v: _parse_list(v, float, "gamma")),
        "dataset": ("dataset", lambda v: v.strip() or None),
        "label_column": ("label_column", lambda v: v.strip() or None),
        "alpha": ("alpha", lambda v: _parse_scalar(v, float, "alpha")),
        "delta": ("delta", lambda v: _parse_scalar(v, float, "delta")),
        "train_frac": ("train_frac", lambda v: _parse_scalar(v, float, "train_frac")),
        "mc_samples": ("mc_samples", lambda v: _parse_scalar(v, int, "mc_samples")),
        "ridge": ("ridge", lambda v: _parse_scalar(v, float, "ridge")),
        "n_per_class": ("n_per_class", lambda v: _parse_scalar(v, int, "n_per_class")),
        "sample_grid": ("sample_grid", lambda v: _parse_list(v, int, "sample_grid")),
        "record_timings": (
            "record_timings",
            lambda v: v.strip().lower() in ("1", "true", "yes"),
        ),
    }
    for key, value in m.items():
        if key not in spec:
            raise ConfigError(key, "unknown configuration key")
        name, parser = spec[key]
        kwargs[name] = parser(value)
    config = SweepConfig(**kwargs)
    config.validate()
    return config


def parse_config_file(path: str | Path) -> SweepConfig:
    """Read a key=value config file, or a run manifest (JSON) echoing one."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(text)
        if "config" not in payload:
            raise ConfigError("config", "manifest JSON lacks a 'config' section")
        return config_from_mapping(payload["config"])
    mapping: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
        key, value = body.split("=", 1)
        mapping[key.strip()] = value.strip()
    return config_from_mapping(mapping)


# ---------------------------------------------------------------------------
# Grid expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    """One evaluated grid combination; ``params`` is family-specific."""

    index: int
    p: int
    q: int
    params: tuple


def _family_param_combos(config: SweepConfig) -> list[tuple]:
    if config.family == "inverse_wishart":
        return [(d1, d2) for d1 in config.df1_over_p for d2 in config.df2_over_p]
    if config.family == "latent_low_dim":
        return [(s, d) for s in config.share_modes for d in config.q_densities]
    if config.family == "empirical_cov":
        return [(g,) for g in config.gamma_grid]
    return [(config.alpha, config.delta)]


def expand_grid(config: SweepConfig) -> list[Cell]:
    """All grid cells in canonical order; combinations with q >= p are dropped
    (the embedding must strictly reduce the dimension)."""
    config.validate()
    combos = _family_param_combos(config)
    cells: list[Cell] = []
    for p in config.p_grid:
        for q in config.q_grid:
            if q >= p:
                continue
            if config.family == "example2" and 2 * q > p:
                continue
            for params in combos:
                cells.append(Cell(len(cells), p, q, params))
    if not cells:
        raise EmptyGridError("grid expansion produced no cells")
    return cells


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass
class SweepRecord:
    """One evaluated (cell, replicate, projection) combination."""

    family: str
    p: int
    q: int
    param1: str
    param2: str
    param3: str
    replicate: int
    projection: str
    metric_overlap: float | None = None
    metric_oos: float | None = None
    metric_mc: float | None = None
    metric_mc_se: float | None = None
    metric_recon: float | None = None
    status: str = "ok"
    ms: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_csv_row(self, with_timing: bool) -> str:
        return ",".join(
            (
                self.family,
                str(self.p),
                str(self.q),
                self.param1,
                self.param2,
                self.param3,
                str(self.replicate),
                self.projection,
                _fmt(self.metric_overlap),
                _fmt(self.metric_oos),
                _fmt(self.metric_mc),
                _fmt(self.metric_mc_se),
                _fmt(self.metric_recon),
                self.status,
                str(self.ms if with_timing else 0),
            )
        )


def read_records_csv(path: str | Path) -> list[SweepRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError("records", f"{path} does not carry the sweep record header")
    records = []
    for line in lines[1:]:
        if not line.strip():
            continue
        tok = line.split(",")
        records.append(
            SweepRecord(
                family=tok[0],
                p=int(tok[1]),
                q=int(tok[2]),
                param1=tok[3],
                param2=tok[4],
                param3=tok[5],
                replicate=int(tok[6]),
                projection=tok[7],
                metric_overlap=float(tok[8]) if tok[8] else None,
                metric_oos=float(tok[9]) if tok[9] else None,
                metric_mc=float(tok[10]) if tok[10] else None,
                metric_mc_se=float(tok[11]) if tok[11] else None,
                metric_recon=float(tok[12]) if tok[12] else None,
                status=tok[13],
                ms=int(tok[14]),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Cell evaluation
# ---------------------------------------------------------------------------


def _param_strings(config: SweepConfig, cell: Cell, n_pc: int | None) -> tuple[str, str, str]:
    third = str(n_pc) if n_pc is not None else ""
    if config.family == "empirical_cov":
        return _fmt(cell.params[0]), "", third
    if config.family == "latent_low_dim":
        return str(cell.params[0]), str(cell.params[1]), third
    return _fmt(cell.params[0]), _fmt(cell.params[1]), third


def _generate_pair(
    config: SweepConfig, cell: Cell, stream: RngStream, source
) -> tuple[SpdMatrix, SpdMatrix]:
    if config.family == "inverse_wishart":
        d1, d2 = cell.params
        return gen_iw_pair(cell.p, d1 * cell.p, d2 * cell.p, stream)
    if config.family == "latent_low_dim":
        share, density = cell.params
        latent = LatentConfig(
            share_q=share == "q",
            share_theta=share == "theta",
            sparse_q=density == "sparse",
            sparse_density=config.sparse_q_density,
        )
        return gen_latent_pair(cell.p, latent, stream)
    if config.family == "empirical_cov":
        x_1, x_2 = source
        gamma = cell.params[0]
        cols = stream.child(0).generator().permutation(x_1.shape[1])[: cell.p]
        x_1_tilde, x_2_tilde = column_overlap(
            x_1[:, cols], x_2[:, cols], gamma, stream.child(1)
        )
        return empirical_cov_pair(x_1_tilde, x_2_tilde)
    if config.family == "example1":
        return pca_favorable_pair(cell.p, cell.q, config.alpha, config.delta)
    return pca_adversarial_pair(cell.p, cell.q, config.alpha, config.delta)


def _build_projection(name, cell, cov_1, cov_2, train, est, stream, config):
    p, q = cell.p, cell.q
    if name == "pca":
        return pca_projection(make_spd(cov_1.entries + cov_2.entries), q)
    if name in ("rp", "empirical_rp"):
        return random_projection(p, q, stream)
    if name in ("sparse_rp", "empirical_sparse_rp"):
        return sparse_random_projection(p, q, stream)
    if name == "bhatt_optimal":
        return optimal_projection_auto_ridge(cov_1, cov_2, q, config.ridge).matrix
    if name == "empirical_pca":
        return pca_projection(mixture_covariance(train.X), q)
    if name == "empirical_bhatt_optimal":
        return optimal_projection_auto_ridge(est.cov_1, est.cov_2, q, config.ridge).matrix
    raise ConfigError("projections", f"unknown projection {name!r}")


def _failed_records(config, cell, rep, n_pc, reason) -> list[SweepRecord]:
    p1, p2, p3 = _param_strings(config, cell, n_pc)
    return [
        SweepRecord(
            family=config.family,
            p=cell.p,
            q=cell.q,
            param1=p1,
            param2=p2,
            param3=p3,
            replicate=rep,
            projection=name,
            status=f"failed:{reason}",
        )
        for name in config.projections
    ]


def _eval_point(
    config: SweepConfig, cell: Cell, rep: int, base: RngStream, idx: int, n_pc: int | None, source
) -> list[SweepRecord]:
    try:
        cov_1, cov_2 = _generate_pair(config, cell, base.child(_CTX_PAIR, idx), source)
    except CovProjError as exc:
        return _failed_records(config, cell, rep, n_pc, type(exc).__name__)
    model = TwoClassGaussian.zero_mean(cov_1, cov_2)
    train = val = est = None
    if config.mode in DATA_MODES:
        per_class = n_pc if n_pc is not None else config.n_per_class
        try:
            data = sample_two_class(model, per_class, per_class, base.child(_CTX_DATA, idx))
            train, val = data.split(config.train_frac, base.child(_CTX_SPLIT, idx))
            est = empirical_covariances(train)
        except CovProjError as exc:
            return _failed_records(config, cell, rep, n_pc, type(exc).__name__)
    p1, p2, p3 = _param_strings(config, cell, n_pc)
    records = []
    for j, name in enumerate(config.projections):
        started = time.perf_counter()
        record = SweepRecord(
            family=config.family,
            p=cell.p,
            q=cell.q,
            param1=p1,
            param2=p2,
            param3=p3,
            replicate=rep,
            projection=name,
        )
        try:
            w = _build_projection(
                name, cell, cov_1, cov_2, train, est, base.child(_CTX_PROJ, idx, j), config
            )
            if config.mode == "overlap":
                record.metric_overlap = embedded_overlap(model, w)
            elif config.mode == "risk_mc":
                risk = mc_bayes_risk(model, w, config.mc_samples, base.child(_CTX_MC, idx, j))
                record.metric_mc = risk.estimate
                record.metric_mc_se = risk.std_error
            else:
                qda = fit_embedded_qda(train, w, ridge=config.ridge)
                record.metric_oos = oos_error(qda, val)
                if config.mode == "finite_sample_curve":
                    record.metric_recon = reconstruction_error(
                        w, est.cov_1, est.cov_2, cov_1, cov_2
                    )
        except CovProjError as exc:
            record.status = f"failed:{type(exc).__name__}"
        record.ms = int(round((time.perf_counter() - started) * 1000))
        records.append(record)
    return records


def _eval_cell(config: SweepConfig, cell: Cell, source) -> list[SweepRecord]:
    records = []
    for rep in range(config.n_simu):
        base = derive_stream(config.master_seed, (cell.index, rep))
        if config.mode == "finite_sample_curve":
            for idx, n_pc in enumerate(config.sample_grid):
                records.extend(_eval_point(config, cell, rep, base, idx, n_pc, source))
        else:
            records.extend(_eval_point(config, cell, rep, base, 0, None, source))
    return records


def rows_per_cell(config: SweepConfig) -> int:
    points = len(config.sample_grid) if config.mode == "finite_sample_curve" else 1
    return config.n_simu * points * len(config.projections)


# ---------------------------------------------------------------------------
# Sink, checkpoint, manifest
# ---------------------------------------------------------------------------


class CsvSink:
    """Cell-ordered append sink with a completed-cell checkpoint.

    Rows are appended strictly in cell-index order and the checkpoint lists
    every fully written cell, so an interrupted run resumes by truncating any
    un-checkpointed trailing rows and continuing with the next cell.
    """

    def __init__(self, records_path: Path, checkpoint_path: Path, expected_rows: int):
        self.records_path = Path(records_path)
        self.checkpoint_path = Path(checkpoint_path)
        self.expected_rows = expected_rows
        self.completed = self._load_checkpoint()
        self._prepare_files()

    def _load_checkpoint(self) -> list[int]:
        if not self.checkpoint_path.exists():
            return []
        done = [int(ln) for ln in self.checkpoint_path.read_text().split() if ln.strip()]
        if done != list(range(len(done))):
            raise ConfigError(
                "checkpoint", f"{self.checkpoint_path} is not a contiguous cell prefix"
            )
        return done

    def _prepare_files(self):
        if not self.completed or not self.records_path.exists():
            self.records_path.write_text(CSV_HEADER + "\n", encoding="utf-8", newline="")
            self.completed = []
            if self.checkpoint_path.exists():
                self.checkpoint_path.unlink()
            return
        keep = 1 + len(self.completed) * self.expected_rows
        lines = self.records_path.read_text(encoding="utf-8").splitlines()
        if len(lines) < keep or lines[0] != CSV_HEADER:
            raise ConfigError(
                "records", f"{self.records_path} inconsistent with its checkpoint"
            )
        if len(lines) > keep:
            self.records_path.write_text(
                "\n".join(lines[:keep]) + "\n", encoding="utf-8", newline=""
            )

    def write_cell(self, cell_index: int, rows: list[str]):
        with open(self.records_path, "a", encoding="utf-8", newline="") as fh:
            fh.write("".join(row + "\n" for row in rows))
        with open(self.checkpoint_path, "a", encoding="utf-8", newline="") as fh:
            fh.write(f"{cell_index}\n")
        self.completed.append(cell_index)


def _write_manifest(path: Path, config: SweepConfig, payload_extra: dict):
    payload = {
        "artifact": "covproj",
        "version": __version__,
        "master_seed": config.master_seed,
        "config": config.to_mapping(),
    }
    payload.update(payload_extra)
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_source(config: SweepConfig):
    if config.family != "empirical_cov":
        return None
    if not config.dataset:
        raise ConfigError("dataset", "the empirical family requires a dataset path")
    if not config.label_column:
        raise ConfigError("label_column", "the empirical family requires a label column")
    data, _ = load_dataset(config.dataset, config.label_column)
    x_1, x_2 = data.class_rows(1), data.class_rows(2)
    if max(config.p_grid) > x_1.shape[1]:
        raise ConfigError(
            "p", f"dataset has {x_1.shape[1]} feature columns, cannot subsample "
            f"p={max(config.p_grid)}"
        )
    return x_1, x_2


def run_sweep(config: SweepConfig, out_dir: str | Path | None = None) -> list[SweepRecord]:
    """Run every cell of the sweep; optionally stream records to ``out_dir``.

    With an output directory, writes ``records.csv``, ``checkpoint.txt`` and
    ``manifest.json`` there, resuming from the checkpoint when present, and
    returns the records computed by this call (already-checkpointed cells are
    skipped). Without one, returns all records in memory.
    """
    config.validate()
    cells = expand_grid(config)
    source = _load_source(config)
    started = datetime.now(timezone.utc).isoformat()
    t_start = time.perf_counter()

    sink = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        sink = CsvSink(
            out_dir / "records.csv", out_dir / "checkpoint.txt", rows_per_cell(config)
        )
        manifest_path = out_dir / "manifest.json"
        if sink.completed and manifest_path.exists():
            previous = json.loads(manifest_path.read_text())
            if previous.get("config") != config.to_mapping():
                raise ConfigError(
                    "config",
                    f"{out_dir} holds a partial run with a different configuration; "
                    "use a fresh output directory",
                )
        _write_manifest(
            out_dir / "manifest.json",
            config,
            {
                "records_csv": str(out_dir / "records.csv"),
                "checkpoint": str(out_dir / "checkpoint.txt"),
                "n_cells": len(cells),
                "rows_per_cell": rows_per_cell(config),
                "started_at": started,
                "status": "running",
            },
        )

    done = set(sink.completed) if sink else set()
    todo = [cell for cell in cells if cell.index not in done]
    collected: list[SweepRecord] = []

    def consume(cell: Cell, records: list[SweepRecord]):
        if sink:
            sink.write_cell(
                cell.index,
                [r.to_csv_row(config.record_timings) for r in records],
            )
        collected.extend(records)

    if config.n_workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=config.n_workers) as pool:
            futures = [(cell, pool.submit(_eval_cell, config, cell, source)) for cell in todo]
            for cell, future in futures:
                consume(cell, future.result())
    else:
        for cell in todo:
            consume(cell, _eval_cell(config, cell, source))

    if sink:
        _write_manifest(
            out_dir / "manifest.json",
            config,
            {
                "records_csv": str(out_dir / "records.csv"),
                "checkpoint": str(out_dir / "checkpoint.txt"),
                "n_cells": len(cells),
                "rows_per_cell": rows_per_cell(config),
                "started_at": started,
                "finished_at": datetime.now(timezone.utc).isoformat(),
                "total_ms": int(round((time.perf_counter() - t_start) * 1000)),
                "status": "complete",
            },
        )
    return collected


def finite_sample_scenario(
    config: SweepConfig, out_dir: str | Path | None = None
) -> list[SweepRecord]:
    """Sample-size curve experiment: requires mode ``finite_sample_curve``."""
    if config.mode != "finite_sample_curve":
        raise ConfigError("mode", "finite_sample_scenario needs mode=finite_sample_curve")
    return run_sweep(config, out_dir)


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

GROUPABLE_FIELDS = ("family", "p", "q", "param1", "param2", "param3")
_IDENTITY_FIELDS = GROUPABLE_FIELDS + ("replicate",)


def _record_metric_field(record: SweepRecord) -> str | None:
    if record.metric_overlap is not None:
        return "metric_overlap"
    if record.metric_mc is not None:
        return "metric_mc"
    if record.metric_oos is not None:
        return "metric_oos"
    return None


@dataclass
class SummaryTable:
    columns: list[str]
    rows: list[list]

    def to_csv_text(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
        return "\n".join(lines) + "\n"

    def format_text(self) -> str:
        def show(v):
            if isinstance(v, float):
                return f"{v:.4f}"
            return str(v)

        table = [self.columns] + [[show(v) for v in row] for row in self.rows]
        widths = [max(len(r[i]) for r in table) for i in range(len(self.columns))]
        lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in table]
        return "\n".join(lines)


def _sort_key(value):
    try:
        return (0, float(value), "")
    except (TypeError, ValueError):
        return (1, 0.0, str(value))


def summarize(
    records: list[SweepRecord], group_by: list[str], baseline: str
) -> SummaryTable:
    """Per-group projection means, regrets against a baseline, and sign rates.

    The regret of projection W in a group is the average over matched
    (cell, replicate) pairs of metric(W) - metric(baseline); positive regret
    means W did worse than the baseline, and exact ties count as
    not-positive. Failed records are excluded from every average but counted
    in the ``n_failed`` column, so silent exclusion cannot bias sign rates
    unnoticed.
    """
    for name in group_by:
        if name not in GROUPABLE_FIELDS:
            raise ConfigError("group_by", f"unknown column {name!r}")
    metric_field = None
    for record in records:
        if not record.ok:
            continue
        this = _record_metric_field(record)
        if this is None:
            continue
        if metric_field is None:
            metric_field = this
        elif metric_field != this:
            raise MixedModesError(
                f"records mix metrics {metric_field} and {this}; summarize one mode at a time"
            )
    projections: list[str] = []
    for record in records:
        if record.projection not in projections:
            projections.append(record.projection)
    if baseline not in projections:
        raise ConfigError("baseline", f"projection {baseline!r} absent from records")

    pairs: dict[tuple, dict[str, float | None]] = {}
    failed_by_group: dict[tuple, int] = {}
    group_of_pair: dict[tuple, tuple] = {}
    for record in records:
        identity = tuple(getattr(record, f) for f in _IDENTITY_FIELDS)
        gkey = tuple(getattr(record, f) for f in group_by)
        group_of_pair[identity] = gkey
        value = getattr(record, metric_field) if (record.ok and metric_field) else None
        pairs.setdefault(identity, {})[record.projection] = value
        if not record.ok:
            failed_by_group[gkey] = failed_by_group.get(gkey, 0) + 1

    by_group: dict[tuple, dict] = {}
    for identity, proj_values in pairs.items():
        gkey = group_of_pair[identity]
        acc = by_group.setdefault(
            gkey,
            {
                "n_pairs": 0,
                "values": {name: [] for name in projections},
                "regrets": {name: [] for name in projections},
            },
        )
        acc["n_pairs"] += 1
        base_value = proj_values.get(baseline)
        for name in projections:
            value = proj_values.get(name)
            if value is not None:
                acc["values"][name].append(value)
                if base_value is not None:
                    acc["regrets"][name].append(value - base_value)

    columns = list(group_by) + ["n_pairs", "n_failed", f"mean_{baseline}"]
    others = [name for name in projections if name != baseline]
    for name in others:
        columns += [f"mean_{name}", f"regret_{name}", f"freq_positive_{name}"]

    rows = []
    for gkey in sorted(by_group, key=lambda k: tuple(_sort_key(v) for v in k)):
        acc = by_group[gkey]
        row: list = list(gkey)
        row.append(acc["n_pairs"])
        row.append(failed_by_group.get(gkey, 0))
        base_values = acc["values"][baseline]
        row.append(float(np.mean(base_values)) if base_values else "")
        for name in others:
            values = acc["values"][name]
            regrets = acc["regrets"][name]
            row.append(float(np.mean(values)) if values else "")
            row.append(float(np.mean(regrets)) if regrets else "")
            row.append(float(np.mean([r > 0 for r in regrets])) if regrets else "")
        rows.append(row)
    return SummaryTable(columns=columns, rows=rows)
