"""Effect-region clustering.

Multi-dimensional effects are grouped with K-Means, choosing the cluster count
by the best silhouette score over ``k = 2..max_clusters``. One-dimensional
effects are grouped by histogram binning, where runs of adjacent non-empty bins
form one class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, SingleCluster
from .exploration import SampleSet
from .rng import substream
from .stairworld import OBS_NAMES

DEFAULT_BIN_RULE = "64"


@dataclass
class EffectClass:
    index: int
    members: np.ndarray
    effect_mean: np.ndarray
    effect_std: np.ndarray
    motion_mean: np.ndarray | None = None

    @classmethod
    def from_members(cls, index, members, effects, motions=None) -> "EffectClass":
        members = np.asarray(members, dtype=int)
        e = effects[members]
        mm = None if motions is None else motions[members].mean(axis=0)
        return cls(index, members, e.mean(axis=0), e.std(axis=0), mm)

    def __len__(self):
        return len(self.members)


@dataclass
class ClusteringReport:
    method: str
    chosen_k: int
    seed: int
    silhouette_by_k: dict[int, float] = field(default_factory=dict)
    bin_edges: list[float] | None = None
    standardized: bool = False

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "chosen_k": self.chosen_k,
            "seed": self.seed,
            "silhouette_by_k": {str(k): v for k, v in self.silhouette_by_k.items()},
            "bin_edges": self.bin_edges,
            "standardized": self.standardized,
        }


# -- K-Means ----------------------------------------------------------------

def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _plusplus_init(points, k, rng):
    n = len(points)
    centroids = [points[rng.integers(n)]]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centroids.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centroids, dtype=float)


def wcss(points: np.ndarray, assignments: np.ndarray, centroids: np.ndarray) -> float:
    points = np.asarray(points, dtype=float).reshape(len(points), -1)
    return float(((points - centroids[assignments]) ** 2).sum())


def _lloyd(points, centroids, max_iter, history=None):
    assign = None
    for _ in range(max_iter):
        d2 = _sq_dists(points, centroids)
        new_assign = d2.argmin(axis=1)
        # repair empty clusters with the point farthest from its centroid
        for j in range(len(centroids)):
            if not np.any(new_assign == j):
                far = d2[np.arange(len(points)), new_assign].argmax()
                centroids[j] = points[far]
                new_assign[far] = j
                d2 = _sq_dists(points, centroids)
        if history is not None:
            history.append(wcss(points, new_assign, centroids))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(len(centroids)):
            centroids[j] = points[assign == j].mean(axis=0)
        if history is not None:
            history.append(wcss(points, assign, centroids))
    return assign, centroids


def _hartigan(points, assign, centroids, history=None):
    """Single-point moves that lower WCSS, best move first, until none is left.

    Moving ``x`` from cluster ``a`` to ``b`` changes WCSS by
    ``n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2``. Every Hartigan optimum is
    also a Lloyd fixpoint, but not the other way round.
    """
    assign = assign.copy()
    cents = centroids.copy()
    k = len(cents)
    counts = np.bincount(assign, minlength=k).astype(float)
    rows = np.arange(len(points))
    while True:
        d2 = _sq_dists(points, cents)
        own = counts[assign]
        removal = np.where(own > 1, own / np.maximum(own - 1, 1) * d2[rows, assign], -np.inf)
        addition = counts[None, :] / (counts[None, :] + 1) * d2
        addition[rows, assign] = np.inf
        target = addition.argmin(axis=1)
        gain = removal - addition[rows, target]
        i = int(gain.argmax())
        if not gain[i] > 1e-12 * max(removal[i], 1e-300):
            break
        a, b, x = assign[i], target[i], points[i]
        cents[a] = (cents[a] * counts[a] - x) / (counts[a] - 1)
        cents[b] = (cents[b] * counts[b] + x) / (counts[b] + 1)
        counts[a] -= 1
        counts[b] += 1
        assign[i] = b
    # recompute means exactly; the running updates accumulate rounding
    for j in range(k):
        cents[j] = points[assign == j].mean(axis=0)
    if history is not None:
        history.append(wcss(points, assign, cents))
    return assign, cents


def kmeans(points, k: int, seed: int = 0, n_init: int = 30, max_iter: int = 300,
           rng: np.random.Generator | None = None, history: list | None = None):
    """K-Means with k-means++ seeding, best of ``n_init`` restarts.

    Each restart runs Lloyd's iterations and then Hartigan single-point moves,
    which escape many of the local optima Lloyd stops in. Returns
    ``(assignments, centroids)``. If ``history`` is given, the WCSS after
    every half-step of the winning restart is appended to it.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n_distinct = len(np.unique(points, axis=0))
    if k < 1 or k > n_distinct:
        raise ValueError(f"k={k} needs 1 <= k <= {n_distinct} distinct points")
    rng = rng if rng is not None else substream(seed, "kmeans", k)
    best = None
    for _ in range(n_init):
        hist = [] if history is not None else None
        assign, cents = _lloyd(points, _plusplus_init(points, k, rng), max_iter, hist)
        assign, cents = _hartigan(points, assign, cents, hist)
        score = wcss(points, assign, cents)
        if best is None or score < best[0]:
            best = (score, assign, cents, hist)
    if history is not None:
        history.extend(best[3])
    return best[1], best[2]


# -- silhouette -------------------------------------------------------------

def pairwise_distances(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    sq = (points ** 2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def silhouette(points, assignments, distances: np.ndarray | None = None) -> float:
    """Mean silhouette coefficient; singleton clusters contribute 0."""
    assignments = np.asarray(assignments)
    labels, inverse, counts = np.unique(assignments, return_inverse=True,
                                        return_counts=True)
    if len(labels) < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    D = pairwise_distances(points) if distances is None else distances
    onehot = np.zeros((len(assignments), len(labels)))
    onehot[np.arange(len(assignments)), inverse] = 1.0
    sums = D @ onehot  # distance from each point to every cluster, summed
    own = counts[inverse]
    a = np.where(own > 1, sums[np.arange(len(inverse)), inverse] / np.maximum(own - 1, 1), 0.0)
    mean_other = sums / counts[None, :]
    mean_other[np.arange(len(inverse)), inverse] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


# -- histogram path ---------------------------------------------------------

def _bin_edges(values: np.ndarray, bin_rule: str) -> np.ndarray:
    rule = str(bin_rule)
    bins: int | str = int(rule) if rule.isdigit() else rule
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return np.array([lo, hi])
    return np.histogram_bin_edges(values, bins=bins, range=(lo, hi))


def histogram_bin(values, bin_rule: str = DEFAULT_BIN_RULE, motions=None):
    """Group 1-D values into classes of contiguous non-empty bins.

    Returns ``(classes, bin_edges)``.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("histogram_bin needs at least one value")
    edges = _bin_edges(values, bin_rule)
    nbins = len(edges) - 1
    # right-closed last bin, as numpy.histogram does
    bin_of = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, nbins - 1)
    counts = np.bincount(bin_of, minlength=nbins)
    group_of_bin = np.full(nbins, -1)
    g = -1
    prev_full = False
    for b in range(nbins):
        if counts[b] > 0:
            if not prev_full:
                g += 1
            group_of_bin[b] = g
            prev_full = True
        else:
            prev_full = False
    labels = group_of_bin[bin_of]
    effects = values[:, None]
    classes = [EffectClass.from_members(k, np.flatnonzero(labels == k), effects, motions)
               for k in range(g + 1)]
    return classes, edges


# -- orchestration ----------------------------------------------------------

def _standardize(x: np.ndarray) -> np.ndarray:
    sd = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def _ordered_classes(labels, effects, motions):
    """Build classes with indices sorted by effect mean (stable renaming)."""
    raw = [np.flatnonzero(labels == k) for k in np.unique(labels)]
    means = [tuple(effects[m].mean(axis=0)) for m in raw]
    order = sorted(range(len(raw)), key=lambda i: means[i][::-1])
    classes = [EffectClass.from_members(new, raw[old], effects, motions)
               for new, old in enumerate(order)]
    new_labels = np.empty(len(labels), dtype=int)
    for c in classes:
        new_labels[c.members] = c.index
    return classes, new_labels


def cluster_points(effects, motions, max_clusters: int, seed: int, *,
                   standardize: bool = False, bin_rule: str = DEFAULT_BIN_RULE,
                   n_init: int = 30, max_iter: int = 300):
    """Cluster an effect matrix; returns ``(classes, labels, report)``."""
    effects = np.asarray(effects, dtype=float)
    if effects.ndim == 1:
        effects = effects[:, None]
    if max_clusters < 2:
        raise ValueError("max_clusters must be >= 2")
    if len(effects) < max_clusters:
        raise ValueError(f"need at least {max_clusters} samples, got {len(effects)}")
    if np.all(effects == effects[0]):
        raise DegenerateData("all effects are identical")

    if effects.shape[1] == 1:
        classes, edges = histogram_bin(effects[:, 0], bin_rule, motions)
        labels = np.empty(len(effects), dtype=int)
        for c in classes:
            labels[c.members] = c.index
        report = ClusteringReport("histogram", len(classes), seed,
                                  bin_edges=[float(e) for e in edges])
        return classes, labels, report

    space = _standardize(effects) if standardize else effects
    n_distinct = len(np.unique(space, axis=0))
    D = pairwise_distances(space)
    scores: dict[int, float] = {}
    partitions = {}
    for k in range(2, min(max_clusters, n_distinct) + 1):
        assign, _ = kmeans(space, k, n_init=n_init, max_iter=max_iter,
                           rng=substream(seed, "kmeans", k))
        if len(np.unique(assign)) < 2:
            continue
        scores[k] = silhouette(space, assign, D)
        partitions[k] = assign
    # strict improvement only, so ties keep the smaller k
    best_k = max(scores, key=lambda k: (scores[k], -k))
    classes, labels = _ordered_classes(partitions[best_k], effects, motions)
    report = ClusteringReport("kmeans", best_k, seed, scores, standardized=standardize)
    return classes, labels, report


def cluster_effects(sample_set: SampleSet, max_clusters: int = 10, seed: int = 0, *,
                    standardize: bool = False, bin_rule: str = DEFAULT_BIN_RULE):
    """Partition a sample set into effect classes.

    Returns ``(classes, labeled_set, report)``; ``labeled_set`` is a copy of the
    input with every sample's ``label`` filled in.
    """
    classes, labels, report = cluster_points(
        sample_set.effects(), sample_set.motions(), max_clusters, seed,
        standardize=standardize, bin_rule=bin_rule)
    return classes, sample_set.with_labels(labels), report


def classes_from_labels(sample_set: SampleSet) -> list[EffectClass]:
    """Rebuild effect classes from an already labeled sample set."""
    labels = np.array(sample_set.labels())
    if any(lbl is None for lbl in labels):
        raise ValueError("sample set is not labeled")
    labels = labels.astype(int)
    effects, motions = sample_set.effects(), sample_set.motions()
    return [EffectClass.from_members(int(k), np.flatnonzero(labels == k), effects, motions)
            for k in np.unique(labels)]


@dataclass
class NoiseDimensionReport:
    noise_scale: float
    base_features: tuple[str, ...]
    noisy_features: tuple[str, ...]
    base: ClusteringReport
    noisy: ClusteringReport
    merged: dict[int, list[int]]

    @property
    def base_k(self) -> int:
        return self.base.chosen_k

    @property
    def noisy_k(self) -> int:
        return self.noisy.chosen_k

    def to_dict(self) -> dict:
        return {
            "noise_scale": self.noise_scale,
            "base_features": list(self.base_features),
            "noisy_features": list(self.noisy_features),
            "base": self.base.to_dict(),
            "noisy": self.noisy.to_dict(),
            "merged": {str(k): v for k, v in self.merged.items()},
        }


def noise_dimension_experiment(sample_set: SampleSet, max_clusters: int = 10,
                               seed: int = 0, noise_scale: float = 5.0,
                               noise_feature: str = "x",
                               base_features=("y", "z")) -> NoiseDimensionReport:
    """Cluster with and without an extra random effect feature.

    The simulator never moves the robot laterally, so ``noise_feature`` is
    replaced by Gaussian noise of standard deviation ``noise_scale``.
    ``merged`` maps every class of the noisy run to the base classes whose
    members mostly ended up in it.
    """
    full = sample_set.full_effects()
    motions = sample_set.motions()
    base_cols = [OBS_NAMES.index(f) for f in base_features]
    base_eff = full[:, base_cols]
    noise = substream(seed, "noise-dimension").normal(0.0, 1.0, size=len(full)) * noise_scale
    noisy_eff = np.column_stack([noise, base_eff])

    _, base_labels, base_rep = cluster_points(base_eff, motions, max_clusters, seed)
    _, noisy_labels, noisy_rep = cluster_points(noisy_eff, motions, max_clusters, seed)

    merged: dict[int, list[int]] = {int(k): [] for k in np.unique(noisy_labels)}
    for b in np.unique(base_labels):
        target = np.bincount(noisy_labels[base_labels == b]).argmax()
        merged[int(target)].append(int(b))
    return NoiseDimensionReport(noise_scale, tuple(base_features),
                                (noise_feature, *base_features), base_rep, noisy_rep, merged)


def histogram_table(values, bin_rule: str = DEFAULT_BIN_RULE):
    """``(bin_left, bin_right, count)`` rows for a per-dimension histogram."""
    values = np.asarray(values, dtype=float).ravel()
    edges = _bin_edges(values, bin_rule)
    counts, _ = np.histogram(values, bins=edges)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i]))
            for i in range(len(counts))]
