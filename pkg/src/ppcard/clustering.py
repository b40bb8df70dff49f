"""Clustering of perturbed Bloom filters and purity-guided model selection.

The cardinality estimate is the cluster count K* maximising the total purity
of a planted reference/dummy set: references are either random bit vectors
(method A) or sampled input filters (method B), each reference gets dummy
copies produced by flipping bits with p_flip, and a clustering is scored by
how completely and exclusively each reference's cluster captures its own
dummies. Silhouette and Calinski-Harabasz Elbow selections are provided as
baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CH_CAP = 1e12  # sentinel for a zero within-cluster dispersion


@dataclass(frozen=True)
class ReferenceConfig:
    """How the reference/dummy set is built."""

    method: str = "B"  # "A": random fake filters, "B": sampled input filters
    pick_ratio: float = 0.1
    dummy_ratio: float = 0.1
    p_flip: float = 0.1
    seed: int = 0
    # Method B pools sampled references alongside their originals; set False
    # to drop the sampled originals from the pool for sensitivity analysis.
    include_sampled_originals: bool = True

    def __post_init__(self):
        if self.method not in ("A", "B"):
            raise ValueError("method must be 'A' or 'B'")
        if not 0 < self.pick_ratio <= 1:
            raise ValueError("pick_ratio must be in (0, 1]")
        if self.dummy_ratio <= 0:
            raise ValueError("dummy_ratio must be > 0")
        if not 0 <= self.p_flip <= 0.5:
            raise ValueError("p_flip must be in [0, 0.5]")


@dataclass
class ReferenceSet:
    """References plus their labelled dummy copies."""

    references: np.ndarray  # (n_ref, ell) uint8
    dummies: np.ndarray  # (n_dum_total, ell) uint8
    dummy_ref_ids: np.ndarray  # (n_dum_total,) index into references
    sampled_pool_indices: np.ndarray | None = None  # method B: rows of the pool

    @property
    def n_ref(self) -> int:
        return self.references.shape[0]

    @property
    def n_dum_per_ref(self) -> np.ndarray:
        return np.bincount(self.dummy_ref_ids, minlength=self.n_ref)


@dataclass
class KMeansResult:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    inertia_history: list[float] = field(default_factory=list)


@dataclass
class SweepEntry:
    k: int
    purity_total: float
    per_reference: np.ndarray
    inertia: float
    silhouette: float | None = None
    calinski_harabasz: float | None = None


@dataclass
class PuritySweep:
    entries: list[SweepEntry]
    k_star: int
    k_silhouette: int | None = None
    k_ch: int | None = None


@dataclass
class CardinalityReport:
    k_star: int
    sweep: PuritySweep
    k_true: int | None = None
    error: int | None = None
    error_rate: float | None = None
    k_silhouette: int | None = None
    k_ch: int | None = None
    config: dict | None = None


def make_references(inputs, cfg: ReferenceConfig) -> ReferenceSet:
    """Build the reference/dummy set from the pooled provider filters.

    n_ref = max(1, round(pick_ratio * N)); total dummies
    max(n_ref, round(dummy_ratio * N)), split as evenly as possible.
    """
    pools = [ds.filters if hasattr(ds, "filters") else np.asarray(ds) for ds in inputs]
    if not pools or sum(p.shape[0] for p in pools) == 0:
        raise ValueError("empty input pool")
    pool = np.concatenate(pools)
    n_total, ell = pool.shape
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5EF]))
    n_ref = max(1, round(cfg.pick_ratio * n_total))

    sampled = None
    if cfg.method == "A":
        references = (rng.random((n_ref, ell)) < 0.5).astype(np.uint8)
    else:
        if n_ref > n_total:
            raise ValueError(f"pick_ratio yields n_ref={n_ref} > pool size {n_total}")
        sampled = rng.choice(n_total, size=n_ref, replace=False)
        references = pool[sampled].copy()

    n_dum_total = max(n_ref, round(cfg.dummy_ratio * n_total))
    base, rem = divmod(n_dum_total, n_ref)
    counts = np.full(n_ref, base, dtype=np.int64)
    counts[:rem] += 1

    dummy_ref_ids = np.repeat(np.arange(n_ref), counts)
    source = references[dummy_ref_ids]
    flips = (rng.random(source.shape) < cfg.p_flip).astype(np.uint8)
    dummies = source ^ flips
    return ReferenceSet(
        references=references,
        dummies=dummies,
        dummy_ref_ids=dummy_ref_ids,
        sampled_pool_indices=sampled,
    )


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=X.dtype)
    centroids[0] = X[rng.integers(n)]
    d2 = np.square(X - centroids[0]).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i:] = X[rng.integers(n, size=k - i)]
            break
        probs = d2 / total
        centroids[i] = X[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.square(X - centroids[i]).sum(axis=1))
    return centroids


def _sq_dists(X: np.ndarray, C: np.ndarray, x2: np.ndarray) -> np.ndarray:
    c2 = np.square(C).sum(axis=1)
    d = x2[:, None] + c2[None, :] - 2.0 * (X @ C.T)
    np.maximum(d, 0.0, out=d)
    return d


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-4,
) -> KMeansResult:
    """Lloyd k-means with k-means++ seeding on bit vectors embedded in R^ell.

    Empty clusters are re-seeded from the point farthest from its centroid;
    the run stops when the max centroid shift drops below tol.
    """
    X = np.ascontiguousarray(points, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
    C = _plus_plus_init(X, k, rng)
    x2 = np.square(X).sum(axis=1)
    history: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, C, x2)
        labels = d.argmin(axis=1)
        point_d = d[np.arange(n), labels]
        # re-seed empty clusters from the farthest points
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        for c in empties:
            far = int(point_d.argmax())
            labels[far] = c
            point_d[far] = 0.0
        history.append(float(point_d.sum()))
        onehot = np.zeros((n, k), dtype=X.dtype)
        onehot[np.arange(n), labels] = 1.0
        counts = onehot.sum(axis=0)
        new_C = np.divide(
            onehot.T @ X, counts[:, None], out=C.copy(), where=counts[:, None] > 0
        )
        shift = float(np.sqrt(np.square(new_C - C).sum(axis=1)).max())
        C = new_C
        if shift < tol:
            break
    d = _sq_dists(X, C, x2)
    labels = d.argmin(axis=1)
    inertia = float(d[np.arange(n), labels].sum())
    history.append(inertia)
    return KMeansResult(
        k=k, assignments=labels, centroids=C, inertia=inertia, iterations=it, inertia_history=history
    )


def min_intercluster_distance(result: KMeansResult) -> float:
    """Smallest pairwise Euclidean distance between cluster centroids."""
    C = result.centroids
    if C.shape[0] < 2:
        raise ValueError("need at least two clusters")
    d2 = np.square(C[:, None, :] - C[None, :, :]).sum(axis=2)
    d2[np.diag_indices_from(d2)] = np.inf
    return float(np.sqrt(d2.min()))


def purity(
    assignments: np.ndarray,
    ref_indices: np.ndarray,
    dummy_indices: np.ndarray,
    dummy_ref_ids: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Per-reference purity scores and their total.

    For reference i in cluster c:
    purity_i = n_dum_in_c / (n_dum + n_c - 1 - n_dum_in_c), where n_dum_in_c
    counts i's dummies inside c, n_dum is i's dummy total, n_c the cluster
    size.
    """
    assignments = np.asarray(assignments)
    n_ref = len(ref_indices)
    n_dum = np.bincount(np.asarray(dummy_ref_ids, dtype=np.int64), minlength=n_ref)
    if np.any(n_dum == 0):
        raise ValueError("every reference needs at least one dummy")
    cluster_sizes = np.bincount(assignments)
    ref_clusters = assignments[ref_indices]
    dummy_clusters = assignments[dummy_indices]
    scores = np.empty(n_ref, dtype=np.float64)
    for i in range(n_ref):
        c = ref_clusters[i]
        own = dummy_clusters[dummy_ref_ids == i]
        in_c = int((own == c).sum())
        scores[i] = in_c / (n_dum[i] + cluster_sizes[c] - 1 - in_c)
    return scores, float(scores.sum())


def mean_silhouette(D: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Mean silhouette coefficient from a precomputed distance matrix.

    Points in singleton clusters contribute 0.
    """
    n = D.shape[0]
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    counts = onehot.sum(axis=0)
    sums = D @ onehot  # (n, k): summed distance from each point to each cluster
    own = labels
    s = np.zeros(n)
    own_counts = counts[own]
    multi = own_counts > 1
    a = np.zeros(n)
    a[multi] = sums[np.arange(n), own][multi] / (own_counts[multi] - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        means = sums / counts[None, :]
    means[np.arange(n), own] = np.inf
    means[:, counts == 0] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    ok = multi & np.isfinite(b) & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(s.mean())


def calinski_harabasz(X: np.ndarray, result: KMeansResult) -> float:
    """Standard CH score; capped at CH_CAP when within-dispersion vanishes."""
    n = X.shape[0]
    k = result.k
    if not 2 <= k < n:
        raise ValueError(f"k={k} out of range [2, {n - 1}]")
    X = np.asarray(X, dtype=np.float64)
    labels = result.assignments
    overall = X.mean(axis=0)
    counts = np.bincount(labels, minlength=k)
    within = result.inertia
    between = float((counts * np.square(result.centroids - overall).sum(axis=1)).sum())
    if within <= 0:
        return CH_CAP
    return (between / (k - 1)) / (within / (n - k))


@dataclass(frozen=True)
class SweepSettings:
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-4
    compute_silhouette: bool = False
    compute_ch: bool = False


def sweep_k(
    X: np.ndarray,
    ref_indices: np.ndarray,
    dummy_indices: np.ndarray,
    dummy_ref_ids: np.ndarray,
    k_range,
    settings: SweepSettings = SweepSettings(),
) -> PuritySweep:
    """Run k-means for every k, score purities, and select K* = argmax.

    Ties resolve to the smallest k. Silhouette / CH baselines are computed
    only when enabled in the settings.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1 or ks[-1] > n:
        raise ValueError(f"k_range must lie within [1, {n}]")
    D = None
    if settings.compute_silhouette:
        from scipy.spatial.distance import squareform, pdist

        D = squareform(pdist(X))
    entries = []
    for k in ks:
        res = kmeans(X, k, seed=settings.seed, max_iter=settings.max_iter, tol=settings.tol)
        scores, total = purity(res.assignments, ref_indices, dummy_indices, dummy_ref_ids)
        sil = None
        ch = None
        if settings.compute_silhouette and 2 <= k <= n - 1:
            sil = mean_silhouette(D, res.assignments, k)
        if settings.compute_ch and 2 <= k < n:
            ch = calinski_harabasz(X, res)
        entries.append(
            SweepEntry(
                k=k,
                purity_total=total,
                per_reference=scores,
                inertia=res.inertia,
                silhouette=sil,
                calinski_harabasz=ch,
            )
        )
    best = max(entries, key=lambda e: (e.purity_total, -e.k))
    k_sil = None
    if settings.compute_silhouette:
        with_sil = [e for e in entries if e.silhouette is not None]
        if with_sil:
            k_sil = max(with_sil, key=lambda e: (e.silhouette, -e.k)).k
    k_ch = None
    if settings.compute_ch:
        with_ch = [e for e in entries if e.calinski_harabasz is not None]
        if with_ch:
            k_ch = max(with_ch, key=lambda e: (e.calinski_harabasz, -e.k)).k
    return PuritySweep(entries=entries, k_star=best.k, k_silhouette=k_sil, k_ch=k_ch)


def silhouette_select(X: np.ndarray, k_range, settings: SweepSettings = SweepSettings()) -> int:
    """Baseline Elbow selection: k maximising the mean silhouette coefficient."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 2 or ks[-1] > n - 1:
        raise ValueError(f"k_range must lie within [2, {n - 1}]")
    from scipy.spatial.distance import squareform, pdist

    D = squareform(pdist(X))
    best_k, best_s = None, -np.inf
    for k in ks:
        res = kmeans(X, k, seed=settings.seed, max_iter=settings.max_iter, tol=settings.tol)
        s = mean_silhouette(D, res.assignments, k)
        if s > best_s:
            best_k, best_s = k, s
    return best_k


def build_pool(inputs, ref_set: ReferenceSet, include_sampled_originals: bool = True):
    """Stack provider filters + references + dummies into the training pool X.

    Returns (X, ref_indices, dummy_indices, data_indices).
    """
    pools = [ds.filters if hasattr(ds, "filters") else np.asarray(ds) for ds in inputs]
    data = np.concatenate(pools)
    if not include_sampled_originals and ref_set.sampled_pool_indices is not None:
        keep = np.setdiff1d(np.arange(data.shape[0]), ref_set.sampled_pool_indices)
        data = data[keep]
    n_data = data.shape[0]
    n_ref = ref_set.n_ref
    X = np.concatenate([data, ref_set.references, ref_set.dummies])
    ref_indices = np.arange(n_data, n_data + n_ref)
    dummy_indices = np.arange(n_data + n_ref, X.shape[0])
    return X, ref_indices, dummy_indices, np.arange(n_data)


def estimate_cardinality(
    inputs,
    cfg: ReferenceConfig,
    k_range,
    settings: SweepSettings = SweepSettings(),
) -> CardinalityReport:
    """End-to-end estimate: references -> pool -> k sweep -> K*."""
    ref_set = make_references(inputs, cfg)
    X, ref_idx, dum_idx, _ = build_pool(inputs, ref_set, cfg.include_sampled_originals)
    sweep = sweep_k(X, ref_idx, dum_idx, ref_set.dummy_ref_ids, k_range, settings)

    k_true = None
    truths = [getattr(ds, "ground_truth", None) for ds in inputs]
    if all(t is not None for t in truths) and truths:
        ids = set()
        for t in truths:
            ids.update(t)
        k_true = len(ids)
    error = error_rate = None
    if k_true is not None:
        error = abs(sweep.k_star - k_true)
        error_rate = error / k_true
    return CardinalityReport(
        k_star=sweep.k_star,
        sweep=sweep,
        k_true=k_true,
        error=error,
        error_rate=error_rate,
        k_silhouette=sweep.k_silhouette,
        k_ch=sweep.k_ch,
        config={
            "method": cfg.method,
            "pick_ratio": cfg.pick_ratio,
            "dummy_ratio": cfg.dummy_ratio,
            "p_flip": cfg.p_flip,
            "seed": cfg.seed,
            "include_sampled_originals": cfg.include_sampled_originals,
            "k_range": [min(k_range), max(k_range)],
        },
    )
