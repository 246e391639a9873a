"""Monte Carlo study: repeated fits on synthetic responses over a bundled
design, summarizing per-effect selection frequency and coefficient quartiles.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .design import MAIN_PLUS_2FI, DesignTable, build_model_matrix
from .errors import InvalidInputError
from .garrote import HiGarroteOptions, higarrote
from .datasets import load_dataset


def default_threads(n_tasks: int) -> int:
    env = os.environ.get("HIGARROTE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidInputError(f"HIGARROTE_THREADS={env!r} is not an integer")
    return max(1, min(4, os.cpu_count() or 1, n_tasks))


@dataclass
class SimSpec:
    """Specification of one simulation study."""

    design_id: str = "toy_pb12"
    true_model: list = field(default_factory=lambda: [("A", 20.0), ("AB", 10.0), ("AC", 5.0)])
    noise_sd: float = 1.0
    replications: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidInputError("replications must be >= 1")
        if self.noise_sd < 0:
            raise InvalidInputError("noise_sd must be >= 0")
        self.true_model = [(str(lab), float(v)) for lab, v in self.true_model]

    @classmethod
    def from_dict(cls, raw: dict) -> "SimSpec":
        model = raw.get("true_model", [["A", 20.0], ["AB", 10.0], ["AC", 5.0]])
        return cls(
            design_id=raw.get("design_id", "toy_pb12"),
            true_model=[(e[0], e[1]) for e in model],
            noise_sd=float(raw.get("noise_sd", 1.0)),
            replications=int(raw.get("replications", 100)),
            seed=int(raw.get("seed", 0)),
        )


@dataclass
class EffectSummary:
    label: str
    frequency: float
    q25: float
    median: float
    q75: float


@dataclass
class SimResult:
    spec: SimSpec
    records: list  # one {label: beta} dict per replication
    summaries: list  # EffectSummary, ordered by frequency desc then label

    def frequency(self, label: str) -> float:
        hits = sum(1 for rec in self.records if label in rec)
        return hits / len(self.records)

    def write_csv(self, path):
        """Long-format per-replication CSV: rep, effect, beta."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rep", "effect", "beta"])
            for i, rec in enumerate(self.records):
                for lab in sorted(rec):
                    writer.writerow([i, lab, repr(rec[lab])])

    def summary_text(self) -> str:
        lines = [f"{'effect':<10} {'freq':>6} {'q25':>9} {'median':>9} {'q75':>9}"]
        for s in self.summaries:
            lines.append(
                f"{s.label:<10} {s.frequency:>6.2f} {s.q25:>9.3f} {s.median:>9.3f} {s.q75:>9.3f}"
            )
        return "\n".join(lines)


def run_simulation(spec: SimSpec, heredity: str = "weak", threads: int = None,
                   n_starts: int = None) -> SimResult:
    """Run the study; deterministic for a fixed spec.seed regardless of the
    thread count (per-replication RNG streams are spawned up front)."""
    base_design, _ = load_dataset(spec.design_id)
    mm = build_model_matrix(base_design, MAIN_PLUS_2FI)
    labels = {c.label: c.id for c in mm.columns}
    signal = np.zeros(base_design.n_runs)
    for lab, coef in spec.true_model:
        if lab not in labels:
            raise InvalidInputError(f"effect {lab!r} is not in the model matrix")
        signal = signal + coef * mm.columns[labels[lab]].values
    streams = np.random.SeedSequence(spec.seed).spawn(spec.replications)
    options = HiGarroteOptions(heredity=heredity, seed=spec.seed, n_starts=n_starts)

    def one(i):
        rng = np.random.default_rng(streams[i])
        y = signal + rng.normal(0.0, spec.noise_sd, base_design.n_runs) \
            if spec.noise_sd > 0 else signal.copy()
        design = DesignTable(
            factors=base_design.factors, runs=base_design.runs, response=y
        )
        report = higarrote(design, options)
        return dict(report.effects)

    workers = threads if threads is not None else default_threads(spec.replications)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, range(spec.replications)))
    else:
        records = [one(i) for i in range(spec.replications)]

    seen = sorted({lab for rec in records for lab in rec})
    summaries = []
    for lab in seen:
        vals = np.array([rec[lab] for rec in records if lab in rec])
        q25, med, q75 = np.percentile(vals, [25, 50, 75])
        summaries.append(
            EffectSummary(
                label=lab,
                frequency=len(vals) / spec.replications,
                q25=float(q25),
                median=float(med),
                q75=float(q75),
            )
        )
    summaries.sort(key=lambda s: (-s.frequency, s.label))
    return SimResult(spec=spec, records=records, summaries=summaries)
