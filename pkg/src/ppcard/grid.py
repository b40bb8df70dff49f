"""Parameter-sweep experiment runner.

One grid cell = (method, epsilon, p_flip, rep). Every cell derives its own
RNG seeds from the master seed and the cell coordinates, so results are
reproducible and independent of evaluation order or parallelism. Rows are
emitted in canonical sorted order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import ReferenceConfig, SweepSettings, estimate_cardinality
from .encoding import EncodingParams, RecordSchema, encode_dataset
from .ldp import PrivacyParams, perturb_dataset

CSV_COLUMNS = (
    "method",
    "epsilon",
    "p_flip",
    "rep",
    "k_star",
    "error",
    "error_rate",
    "k_silhouette",
    "silhouette_error_rate",
)

# Domain-separation tags for the per-cell seed streams.
_TAG_PERTURB = 0xE9
_TAG_REFS = 0x5E
_TAG_SWEEP = 0x3E


@dataclass(frozen=True)
class GridConfig:
    """Sweep axes and shared estimator settings."""

    epsilons: tuple[float, ...]
    p_flips: tuple[float, ...]
    methods: tuple[str, ...] = ("A", "B")
    reps: int = 1
    k_min: int = 2
    k_max: int = 0  # 0: use pool size
    pick_ratio: float = 0.1
    dummy_ratio: float = 0.1
    master_seed: int = 0
    compute_silhouette: bool = False

    def __post_init__(self):
        if not self.epsilons or not self.p_flips or not self.methods:
            raise ValueError("epsilons, p_flips and methods must be nonempty")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.k_min < 1:
            raise ValueError("k_min must be >= 1")


@dataclass
class GridRow:
    method: str
    epsilon: float
    p_flip: float
    rep: int
    k_star: int
    k_true: int | None = None
    error: int | None = None
    error_rate: float | None = None
    k_silhouette: int | None = None
    silhouette_error: int | None = None
    silhouette_error_rate: float | None = None

    def as_record(self) -> dict:
        return {c: getattr(self, _FIELD_BY_COLUMN[c]) for c in CSV_COLUMNS}


_FIELD_BY_COLUMN = {c: c for c in CSV_COLUMNS}


def derive_seed(master_seed: int, *coords: int) -> int:
    """Stable scalar seed for one cell of the grid."""
    ss = np.random.SeedSequence([master_seed & 0xFFFFFFFFFFFFFFFF, *coords])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _cell_coords(method: str, epsilon: float, p_flip: float, rep: int) -> tuple[int, ...]:
    return (0 if method == "A" else 1, round(epsilon * 1000), round(p_flip * 1000), rep)


def perturb_providers(provider_filters, provider_truth, epsilon, rep, cfg: GridConfig):
    """One release of perturbed filters per provider for a given budget."""
    seed = derive_seed(cfg.master_seed, _TAG_PERTURB, round(epsilon * 1000), rep)
    privacy = PrivacyParams(epsilon=epsilon, seed=seed)
    out = []
    for i, B in enumerate(provider_filters):
        truth = provider_truth[i] if provider_truth is not None else None
        out.append(perturb_dataset(B, privacy, provider_id=f"p{i}", ground_truth=truth))
    return out


def run_cell(datasets, method, epsilon, p_flip, rep, cfg: GridConfig) -> GridRow:
    """Estimate K* for one grid cell from already-perturbed datasets."""
    coords = _cell_coords(method, epsilon, p_flip, rep)
    ref_cfg = ReferenceConfig(
        method=method,
        pick_ratio=cfg.pick_ratio,
        dummy_ratio=cfg.dummy_ratio,
        p_flip=p_flip,
        seed=derive_seed(cfg.master_seed, _TAG_REFS, *coords),
    )
    n_pool = sum(len(d) for d in datasets)
    k_max = cfg.k_max if cfg.k_max else n_pool
    settings = SweepSettings(
        seed=derive_seed(cfg.master_seed, _TAG_SWEEP, *coords),
        compute_silhouette=cfg.compute_silhouette,
    )
    report = estimate_cardinality(
        datasets, ref_cfg, range(cfg.k_min, k_max + 1), settings
    )
    row = GridRow(
        method=method,
        epsilon=epsilon,
        p_flip=p_flip,
        rep=rep,
        k_star=report.k_star,
        k_true=report.k_true,
        error=report.error,
        error_rate=report.error_rate,
        k_silhouette=report.k_silhouette,
    )
    if report.k_true is not None and report.k_silhouette is not None:
        row.silhouette_error = abs(report.k_silhouette - report.k_true)
        row.silhouette_error_rate = row.silhouette_error / report.k_true
    return row


def run_grid(provider_records, schema: RecordSchema, params: EncodingParams, cfg: GridConfig) -> list[GridRow]:
    """Encode once, perturb per (epsilon, rep), estimate per cell.

    ``provider_records`` is a list of record lists, one per provider; records
    may carry entity ids, which are used only for error reporting.
    """
    filters = [encode_dataset(rs, schema, params) for rs in provider_records]
    truth = None
    if all(all(r.entity_id is not None for r in rs) for rs in provider_records):
        truth = [[r.entity_id for r in rs] for rs in provider_records]
    rows = []
    for epsilon in cfg.epsilons:
        for rep in range(cfg.reps):
            datasets = perturb_providers(filters, truth, epsilon, rep, cfg)
            for method in cfg.methods:
                for p_flip in cfg.p_flips:
                    rows.append(run_cell(datasets, method, epsilon, p_flip, rep, cfg))
    rows.sort(key=lambda r: (r.method, r.epsilon, r.p_flip, r.rep))
    return rows


def write_grid_csv(path, rows: list[GridRow]) -> None:
    """Canonical CSV output; float cells are rendered with repr precision."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in sorted(rows, key=lambda r: (r.method, r.epsilon, r.p_flip, r.rep)):
            rec = row.as_record()
            writer.writerow({k: ("" if v is None else v) for k, v in rec.items()})
