"""Experiment orchestration: reproducible Monte Carlo over replica pairs and
byte-stable report emission (JSON + CSV, optional images).

Replica r of an experiment draws its two realizations from the substreams
(seed, r, 0) and (seed, r, 1), so any replica can be replayed on its own.
Aggregation runs in replica order; reports are deterministic for a fixed
config (wall time goes to a sidecar file, never into report.json).
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from . import render as render_mod
from .classify import Verdict
from .core import JointSurvivalDistribution, make_correlated, make_independent
from .errors import ParameterOutOfRangeError
from .rng import stream_label
from .simulate import diagonal_counts, occupancy_profile, sample_realization

DEFAULT_RUN_RATIOS = (Fraction(1, 3), Fraction(1), Fraction(2))


def parse_distribution(spec: str) -> JointSurvivalDistribution:
    """Parse a distribution spec string.

    Forms: ``correlated:m,M,p`` / ``independent:p0,p1,...`` / ``full:M`` /
    ``@path.json`` (atom literal file with fields M and atoms).
    """
    spec = spec.strip()
    try:
        if spec.startswith("@"):
            with open(spec[1:], "r", encoding="utf-8") as fh:
                return JointSurvivalDistribution.from_dict(json.load(fh))
        kind, _, rest = spec.partition(":")
        if kind == "correlated":
            m_s, M_s, p_s = rest.split(",")
            return make_correlated(int(m_s), int(M_s), Fraction(p_s))
        if kind == "independent":
            return make_independent([Fraction(v) for v in rest.split(",")])
        if kind == "full":
            M = int(rest)
            return make_correlated(M, M, Fraction(1))
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        raise ParameterOutOfRangeError(f"bad distribution spec {spec!r}: {exc}") from exc
    raise ParameterOutOfRangeError(f"unknown distribution spec kind in {spec!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    mu: str
    lam: str
    depth: int
    replicas: int
    seed: int
    run_ratios: tuple[Fraction, ...] = DEFAULT_RUN_RATIOS
    name: str = "experiment"
    workers: int = 1
    render_images: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ParameterOutOfRangeError(f"depth must be >= 1, got {self.depth}")
        if self.replicas < 1:
            raise ParameterOutOfRangeError(f"replicas must be >= 1, got {self.replicas}")
        if self.workers < 1:
            raise ParameterOutOfRangeError(f"workers must be >= 1, got {self.workers}")
        for r in self.run_ratios:
            if not 0 < r <= 2:
                raise ParameterOutOfRangeError(f"run ratio {r} outside (0, 2]")
        parse_distribution(self.mu)
        parse_distribution(self.lam)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "lambda": self.lam,
            "depth": self.depth,
            "replicas": self.replicas,
            "seed": self.seed,
            "run_ratios": [str(r) for r in self.run_ratios],
            "name": self.name,
            "workers": self.workers,
            "render_images": self.render_images,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {
            "mu", "lambda", "lam", "depth", "replicas", "seed",
            "run_ratios", "name", "workers", "render_images",
        }
        unknown = set(data) - known
        if unknown:
            raise ParameterOutOfRangeError(f"unknown config keys: {sorted(unknown)}")
        try:
            kwargs = dict(
                mu=str(data["mu"]),
                lam=str(data.get("lambda", data.get("lam"))),
                depth=int(data["depth"]),
                replicas=int(data["replicas"]),
                seed=int(data["seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterOutOfRangeError(f"malformed config: {exc}") from exc
        if "run_ratios" in data:
            kwargs["run_ratios"] = tuple(Fraction(str(r)) for r in data["run_ratios"])
        for key in ("name", "workers", "render_images"):
            if key in data:
                kwargs[key] = data[key]
        return cls(**kwargs)


CSV_COLUMNS = [
    "experiment",
    "replica",
    "level",
    "f1_stream",
    "f2_stream",
    "f1_survivors",
    "f2_survivors",
    "pair_count",
    "occupied_columns",
    "longest_run",
    "any_occupied",
    "all_columns",
]


@dataclass(frozen=True)
class ReplicaLevelStats:
    """One CSV row: occupancy summary of one replica at one level."""

    experiment: str
    replica: int
    level: int
    f1_stream: str
    f2_stream: str
    f1_survivors: int
    f2_survivors: int
    pair_count: int
    occupied_columns: int
    longest_run: int
    any_occupied: bool
    all_columns: bool

    def to_row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass
class ResultRecord:
    config: ExperimentConfig
    rows: list[ReplicaLevelStats]
    aggregates: dict
    wall_time_s: float


def _replica_stats(cfg: ExperimentConfig, r: int) -> list[ReplicaLevelStats]:
    mu = parse_distribution(cfg.mu)
    lam = parse_distribution(cfg.lam)
    f1 = sample_realization(mu, cfg.depth, (cfg.seed, r, 0))
    f2 = sample_realization(lam, cfg.depth, (cfg.seed, r, 1))
    out = []
    for n in range(1, cfg.depth + 1):
        occ = occupancy_profile(diagonal_counts(f1, f2, n))
        out.append(
            ReplicaLevelStats(
                experiment=cfg.name,
                replica=r,
                level=n,
                f1_stream=stream_label(cfg.seed, r, 0),
                f2_stream=stream_label(cfg.seed, r, 1),
                f1_survivors=f1.survivors(n),
                f2_survivors=f2.survivors(n),
                pair_count=f1.survivors(n) * f2.survivors(n),
                occupied_columns=occ.n_occupied,
                longest_run=occ.longest_run,
                any_occupied=occ.n_occupied > 0,
                all_columns=occ.full,
            )
        )
    return out


def run_threshold(M: int, level: int, ratio: Fraction) -> int:
    """Run-length threshold: ceil(ratio * M**level) columns."""
    span = M**level
    return -((-ratio.numerator * span) // ratio.denominator)


def compute_aggregates(cfg: ExperimentConfig, rows: list[ReplicaLevelStats]) -> dict:
    """Per-level fractions over replicas, with binomial standard errors."""
    M = parse_distribution(cfg.mu).alphabet_size
    n_rep = cfg.replicas
    per_level: dict[str, dict] = {}
    for level in range(1, cfg.depth + 1):
        lvl_rows = [row for row in rows if row.level == level]
        if len(lvl_rows) != n_rep:
            raise ParameterOutOfRangeError(
                f"expected {n_rep} rows at level {level}, got {len(lvl_rows)}"
            )
        def frac(hits: int) -> dict:
            f = hits / n_rep
            se = (f * (1 - f) / n_rep) ** 0.5
            return {"fraction": f, "se": se, "hits": hits}
        entry = {
            "any_occupied": frac(sum(1 for r in lvl_rows if r.any_occupied)),
            "all_columns": frac(sum(1 for r in lvl_rows if r.all_columns)),
            "mean_longest_run": sum(r.longest_run for r in lvl_rows) / n_rep,
        }
        for ratio in cfg.run_ratios:
            thr = run_threshold(M, level, ratio)
            entry[f"run_ge_{ratio}"] = {
                "threshold": thr,
                **frac(sum(1 for r in lvl_rows if r.longest_run >= thr)),
            }
        per_level[str(level)] = entry
    return per_level


def run_monte_carlo(cfg: ExperimentConfig) -> ResultRecord:
    """Sample all replica pairs and summarize occupancy per depth.

    Deterministic for a fixed config: replicas live on disjoint substreams
    and are reduced in index order regardless of worker count.
    """
    t0 = time.perf_counter()
    rows: list[ReplicaLevelStats] = []
    if cfg.workers == 1:
        for r in range(cfg.replicas):
            rows.extend(_replica_stats(cfg, r))
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for chunk in pool.map(
                _replica_stats, [cfg] * cfg.replicas, range(cfg.replicas), chunksize=8
            ):
                rows.extend(chunk)
    aggregates = compute_aggregates(cfg, rows)
    return ResultRecord(
        config=cfg,
        rows=rows,
        aggregates=aggregates,
        wall_time_s=time.perf_counter() - t0,
    )


def stable_json_bytes(obj) -> bytes:
    """Canonical JSON encoding: sorted keys, fixed separators, trailing newline."""
    return (json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n").encode(
        "ascii"
    )


def _csv_bytes(rows: list[ReplicaLevelStats]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                v if not isinstance(v, bool) else int(v)
                for v in row.to_row()
            ]
        )
    return buf.getvalue().encode("ascii")


def emit_report(
    record: ResultRecord,
    verdicts: list[Verdict],
    out_dir: str | Path,
) -> dict[str, Path]:
    """Write report.json, replicas.csv, timing.json and optional images.

    report.json and replicas.csv are byte-stable for a fixed config and
    seed; wall time is excluded into the timing sidecar.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = record.config
    report = {
        "config": cfg.to_dict(),
        "aggregates": record.aggregates,
        "verdicts": [v.to_dict() for v in verdicts],
        "rows_file": "replicas.csv",
        "row_count": len(record.rows),
    }
    paths = {
        "report": out / "report.json",
        "replicas": out / "replicas.csv",
        "timing": out / "timing.json",
    }
    paths["report"].write_bytes(stable_json_bytes(report))
    paths["replicas"].write_bytes(_csv_bytes(record.rows))
    paths["timing"].write_bytes(stable_json_bytes({"wall_time_s": record.wall_time_s}))
    if cfg.render_images:
        mu = parse_distribution(cfg.mu)
        lam = parse_distribution(cfg.lam)
        f1 = sample_realization(mu, cfg.depth, (cfg.seed, 0, 0))
        f2 = sample_realization(lam, cfg.depth, (cfg.seed, 0, 1))
        n_img = min(cfg.depth, 3)
        paths["product_svg"] = out / "replica0_product.svg"
        paths["product_svg"].write_bytes(render_mod.product_svg(f1, f2, n_img))
        paths["bars_svg"] = out / "replica0_bars.svg"
        paths["bars_svg"].write_bytes(render_mod.bars_svg(f1))
    return paths


def load_report(out_dir: str | Path) -> dict:
    """Read a report back and re-derive the aggregates from the CSV rows.

    Raises when the stored aggregates do not match the recomputation, so a
    tampered or truncated report never loads silently.
    """
    out = Path(out_dir)
    report = json.loads((out / "report.json").read_text(encoding="ascii"))
    cfg = ExperimentConfig.from_dict(report["config"])
    rows: list[ReplicaLevelStats] = []
    with open(out / report["rows_file"], newline="", encoding="ascii") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                ReplicaLevelStats(
                    experiment=rec["experiment"],
                    replica=int(rec["replica"]),
                    level=int(rec["level"]),
                    f1_stream=rec["f1_stream"],
                    f2_stream=rec["f2_stream"],
                    f1_survivors=int(rec["f1_survivors"]),
                    f2_survivors=int(rec["f2_survivors"]),
                    pair_count=int(rec["pair_count"]),
                    occupied_columns=int(rec["occupied_columns"]),
                    longest_run=int(rec["longest_run"]),
                    any_occupied=bool(int(rec["any_occupied"])),
                    all_columns=bool(int(rec["all_columns"])),
                )
            )
    recomputed = compute_aggregates(cfg, rows)
    if stable_json_bytes(recomputed) != stable_json_bytes(report["aggregates"]):
        raise ParameterOutOfRangeError("stored aggregates do not match replica rows")
    report["_rows"] = rows
    return report
