"""Privacy-preserving cardinality estimation over Bloom-filter-encoded records.

Pipeline: plaintext records -> Bloom filters -> epsilon-LDP randomized
response -> pooled k-means clustering -> cardinality K* selected by a
reference/dummy purity criterion.
"""

from .encoding import (
    EncodingParams,
    PlainRecord,
    RecordSchema,
    dice_similarity,
    encode_dataset,
    encode_record,
    expected_fpr,
)
from .ldp import (
    EncodedDataset,
    PrivacyParams,
    flip_probability,
    perturb,
    perturb_dataset,
    read_exchange,
    write_exchange,
)
from .clustering import (
    CardinalityReport,
    KMeansResult,
    PuritySweep,
    ReferenceConfig,
    ReferenceSet,
    SweepSettings,
    estimate_cardinality,
    kmeans,
    make_references,
    purity,
    silhouette_select,
    sweep_k,
)
from .theory import (
    TheoryPoint,
    emit_curves,
    exact_same_cluster_probability,
    monte_carlo_same_cluster,
    same_cluster_probability,
)
from .grid import GridConfig, GridRow, run_grid, write_grid_csv

__version__ = "0.1.0"

__all__ = [
    "EncodingParams",
    "PlainRecord",
    "RecordSchema",
    "dice_similarity",
    "encode_dataset",
    "encode_record",
    "expected_fpr",
    "EncodedDataset",
    "PrivacyParams",
    "flip_probability",
    "perturb",
    "perturb_dataset",
    "read_exchange",
    "write_exchange",
    "CardinalityReport",
    "KMeansResult",
    "PuritySweep",
    "ReferenceConfig",
    "ReferenceSet",
    "SweepSettings",
    "estimate_cardinality",
    "kmeans",
    "make_references",
    "purity",
    "silhouette_select",
    "sweep_k",
    "TheoryPoint",
    "emit_curves",
    "exact_same_cluster_probability",
    "monte_carlo_same_cluster",
    "same_cluster_probability",
    "GridConfig",
    "GridRow",
    "run_grid",
    "write_grid_csv",
    "__version__",
]
