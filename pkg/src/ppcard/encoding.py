"""Bloom filter encoding of plaintext records.

Records are tokenised attribute by attribute (q-grams for strings, grid
neighbourhoods for numerics, the literal value for categoricals) and all
tokens are hash-mapped into one record-level bit vector. Bloom filters are
plain ``numpy`` uint8 arrays of 0/1 values so that downstream perturbation
and clustering can stay vectorised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from hashlib import blake2b

import numpy as np

VALID_KINDS = ("string", "numeric", "categorical")


@dataclass(frozen=True)
class EncodingParams:
    """Parameters of the record-level Bloom filter encoding."""

    q: int = 2
    ell: int = 200
    num_hashes: int = 20
    hash_seed: int = 0
    numeric_interval: float = 0.0
    numeric_step: float = 1.0

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.ell < 1:
            raise ValueError("ell must be >= 1")
        if self.num_hashes < 1:
            raise ValueError("num_hashes must be >= 1")
        if self.num_hashes > self.ell:
            raise ValueError("num_hashes cannot exceed ell (indices are distinct)")
        if self.numeric_interval < 0:
            raise ValueError("numeric_interval must be >= 0")
        if self.numeric_step <= 0:
            raise ValueError("numeric_step must be > 0")


@dataclass(frozen=True)
class RecordSchema:
    """Ordered attribute list; each attribute is (name, kind)."""

    attributes: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if not self.attributes:
            raise ValueError("schema needs at least one attribute")
        names = [name for name, _ in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        for name, kind in self.attributes:
            if kind not in VALID_KINDS:
                raise ValueError(f"unknown attribute kind {kind!r} for {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attributes)


@dataclass
class PlainRecord:
    """One plaintext record; entity_id is evaluation-only and never encoded."""

    values: tuple
    entity_id: str | None = None


def extract_qgrams(value: str, q: int) -> set[str]:
    """All contiguous length-q substrings of the normalised value."""
    if q < 1:
        raise ValueError("q must be >= 1")
    v = value.strip().lower()
    if len(v) < q:
        return set()
    return {v[i : i + q] for i in range(len(v) - q + 1)}


def _step_decimals(step: float) -> int:
    exp = Decimal(str(step)).normalize().as_tuple().exponent
    return max(0, -int(exp))


def neighbor_tokens(value: float, interval: float, step: float) -> set[str]:
    """String tokens for every grid value within +-interval of the value.

    The grid is anchored at the value itself and rendered with the step's
    decimal precision so that token identity is deterministic.
    """
    if interval < 0:
        raise ValueError("interval must be >= 0")
    if step <= 0:
        raise ValueError("step must be > 0")
    decimals = _step_decimals(step)
    n_steps = int(math.floor(interval / step + 1e-9))
    tokens = set()
    for i in range(-n_steps, n_steps + 1):
        v = value + i * step
        tokens.add(f"{v:.{decimals}f}")
    return tokens


def token_indices(token: str, params: EncodingParams) -> np.ndarray:
    """Bit indices for one token: one independent keyed hash per probe.

    Independent probes (rather than double hashing h1 + i*h2) keep the
    false-positive rate at the textbook (1 - e^{-kn/ell})^k value; with
    double hashing the probe sequences are arithmetic progressions mod ell
    and collide far more often when ell is composite.
    """
    seed = params.hash_seed & 0xFFFFFFFFFFFFFFFF
    data = token.encode("utf-8")
    picked: list[int] = []
    seen: set[int] = set()
    counter = 0
    # draw from the keyed hash stream until num_hashes distinct indices are
    # collected (ell >= num_hashes is enforced by EncodingParams)
    while len(picked) < params.num_hashes:
        key = seed.to_bytes(8, "big") + counter.to_bytes(2, "big")
        digest = blake2b(data, digest_size=64, key=key).digest()
        for i in range(0, 64, 4):
            idx = int.from_bytes(digest[i : i + 4], "big") % params.ell
            if idx not in seen:
                seen.add(idx)
                picked.append(idx)
                if len(picked) == params.num_hashes:
                    break
        counter += 1
    return np.array(picked, dtype=np.int64)


def record_tokens(record: PlainRecord, schema: RecordSchema, params: EncodingParams) -> set[str]:
    """Attribute-tagged tokens of a record (tag prevents cross-attribute collisions)."""
    if len(record.values) != len(schema.attributes):
        raise ValueError(
            f"record has {len(record.values)} values, schema expects {len(schema.attributes)}"
        )
    tokens: set[str] = set()
    for (name, kind), value in zip(schema.attributes, record.values):
        if value is None:
            continue
        if kind == "string":
            for g in extract_qgrams(str(value), params.q):
                tokens.add(f"{name}:{g}")
        elif kind == "numeric":
            text = str(value).strip()
            if not text:
                continue
            num = float(text)
            for t in neighbor_tokens(num, params.numeric_interval, params.numeric_step):
                tokens.add(f"{name}:{t}")
        else:  # categorical
            text = str(value).strip().lower()
            if text:
                tokens.add(f"{name}:{text}")
    return tokens


def encode_record(record: PlainRecord, schema: RecordSchema, params: EncodingParams) -> np.ndarray:
    """Encode one record into an ell-bit Bloom filter (uint8 array of 0/1)."""
    bf = np.zeros(params.ell, dtype=np.uint8)
    for token in record_tokens(record, schema, params):
        bf[token_indices(token, params)] = 1
    return bf


def encode_dataset(records, schema: RecordSchema, params: EncodingParams) -> np.ndarray:
    """Encode a list of records into an (n, ell) bit matrix."""
    if not records:
        return np.zeros((0, params.ell), dtype=np.uint8)
    return np.stack([encode_record(r, schema, params) for r in records])


def dice_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dice coefficient 2|a & b| / (|a| + |b|); defined as 1 for two empty filters."""
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    pa = int(a.sum())
    pb = int(b.sum())
    if pa + pb == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / (pa + pb)


def expected_fpr(params: EncodingParams, n: int) -> float:
    """Expected false positive rate after encoding n elements: (1 - e^{-kn/ell})^k."""
    if n < 0:
        raise ValueError("n must be >= 0")
    k = params.num_hashes
    return (1.0 - math.exp(-k * n / params.ell)) ** k
