"""Randomized response perturbation of Bloom filters under epsilon-LDP.

Each bit is flipped independently with probability eta = 1/(1 + e^eps), which
keeps the output-probability ratio over adjacent filters at exactly e^eps.
Perturbation draws from a per-record RNG substream derived from (seed,
record_index), so results are reproducible and independent of processing
order or worker count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

EXCHANGE_MAGIC = "ppcard-bf v1"

# Below this budget the flip probability approaches 0.5 and the released
# filters carry almost no signal.
LOW_EPSILON_WARN = 0.5


def flip_probability(epsilon: float) -> float:
    """Per-bit flip probability eta = 1/(1 + e^eps)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    return 1.0 / (1.0 + math.exp(epsilon))


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget and RNG seed for randomized response."""

    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.epsilon < LOW_EPSILON_WARN:
            warnings.warn(
                f"epsilon={self.epsilon} flips nearly half of all bits; "
                "released filters will be close to pure noise",
                stacklevel=2,
            )

    @property
    def eta(self) -> float:
        return flip_probability(self.epsilon)


@dataclass
class EncodedDataset:
    """Perturbed filters of one provider, plus the evaluation-only sidecar.

    ``ground_truth`` (entity ids per filter) is never written into the
    exchange payload; it travels in a separate sidecar file when present.
    """

    provider_id: str
    filters: np.ndarray  # (n, ell) uint8
    epsilon: float
    ground_truth: list[str] | None = None

    @property
    def ell(self) -> int:
        return self.filters.shape[1]

    def __len__(self) -> int:
        return self.filters.shape[0]


def _record_rng(seed: int, record_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, record_index]))


def perturb(bf: np.ndarray, privacy: PrivacyParams, record_index: int) -> np.ndarray:
    """Flip each bit of bf independently with probability eta."""
    bf = np.asarray(bf, dtype=np.uint8)
    rng = _record_rng(privacy.seed, record_index)
    mask = rng.random(bf.shape[-1]) < privacy.eta
    return bf ^ mask.astype(np.uint8)


def perturb_dataset(
    B: np.ndarray,
    privacy: PrivacyParams,
    provider_id: str = "",
    ground_truth: list[str] | None = None,
) -> EncodedDataset:
    """Perturb every filter, record_index = position in B."""
    B = np.asarray(B, dtype=np.uint8)
    if B.ndim != 2 or B.shape[0] == 0:
        raise ValueError("B must be a nonempty (n, ell) bit matrix")
    out = np.stack([perturb(B[i], privacy, i) for i in range(B.shape[0])])
    return EncodedDataset(
        provider_id=provider_id,
        filters=out,
        epsilon=privacy.epsilon,
        ground_truth=list(ground_truth) if ground_truth is not None else None,
    )


def _to_hex(bits: np.ndarray) -> str:
    return np.packbits(bits, bitorder="big").tobytes().hex()


def _from_hex(line: str, ell: int) -> np.ndarray:
    raw = bytes.fromhex(line)
    if len(raw) != (ell + 7) // 8:
        raise ValueError(f"filter line has {len(raw)} bytes, expected {(ell + 7) // 8}")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="big")[:ell].astype(np.uint8)


def write_exchange(path, ds: EncodedDataset) -> None:
    """Write the provider-to-linkage-unit exchange file (header + hex lines)."""
    with open(path, "w") as fh:
        fh.write(
            f"{EXCHANGE_MAGIC}, ell={ds.ell}, epsilon={ds.epsilon}, "
            f"provider={ds.provider_id}, n={len(ds)}\n"
        )
        for row in ds.filters:
            fh.write(_to_hex(row) + "\n")


def read_exchange(path) -> EncodedDataset:
    """Read an exchange file written by :func:`write_exchange`."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith(EXCHANGE_MAGIC + ","):
            raise ValueError(f"{path}: not a ppcard exchange file")
        fields = {}
        for part in header.split(",")[1:]:
            key, _, val = part.strip().partition("=")
            fields[key] = val
        ell = int(fields["ell"])
        epsilon = float(fields["epsilon"])
        n = int(fields["n"])
        filters = [_from_hex(fh.readline().strip(), ell) for _ in range(n)]
    if len(filters) != n:
        raise ValueError(f"{path}: expected {n} filters")
    arr = np.stack(filters) if filters else np.zeros((0, ell), dtype=np.uint8)
    return EncodedDataset(provider_id=fields.get("provider", ""), filters=arr, epsilon=epsilon)
