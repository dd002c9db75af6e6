"""Hard partitions: PAM, agglomerative hierarchical clustering, k-means.

Cluster labels are 1..C. Every method numbers its clusters in order of first
appearance (individual 0 is always in cluster 1), and every tie between equal
costs or distances goes to the smallest index.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dissimilarity import Dataset, as_array
from .errors import (
    IngestionError,
    KindMismatchError,
    UndefinedSilhouetteError,
    ValidationError,
)

LINKAGES = ("average", "complete", "single", "ward")


@dataclass(frozen=True)
class Partition:
    """Hard cluster assignment with labels ``1..c``, every cluster nonempty."""

    z: np.ndarray
    c: int = 0

    def __post_init__(self):
        z = np.array(self.z, dtype=int)
        if z.ndim != 1 or z.size == 0:
            raise ValidationError("partition must be a non-empty 1-D label vector")
        c = self.c or int(z.max())
        if z.min() < 1 or z.max() > c:
            raise ValidationError(f"labels must lie in 1..{c}")
        counts = np.bincount(z, minlength=c + 1)[1:]
        if np.any(counts == 0):
            empty = (np.flatnonzero(counts == 0) + 1).tolist()
            raise ValidationError(f"clusters {empty} are empty")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.z, minlength=self.c + 1)[1:]

    @classmethod
    def from_zero_based(cls, labels) -> "Partition":
        return cls(np.asarray(labels) + 1)


def canonical(labels) -> np.ndarray:
    """Renumber arbitrary labels 1..C in order of first appearance."""
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    lookup = {lab: k + 1 for k, lab in enumerate(order.tolist())}
    return np.array([lookup[v] for v in labels.tolist()], dtype=int)


def labels_of(z) -> tuple[np.ndarray, int]:
    """Zero-based labels and cluster count from a Partition or a label array.

    A raw label array may leave some clusters empty; C is then its largest label.
    """
    if isinstance(z, Partition):
        return z.z - 1, z.c
    z = np.asarray(z, dtype=int)
    return z - 1, int(z.max())


def _check_count(n: int, c: int) -> None:
    if not 1 <= c <= n:
        raise ValidationError(f"cluster count must satisfy 1 <= C <= N={n}, got {c}")


# --- PAM --------------------------------------------------------------------


@dataclass(frozen=True)
class PamResult:
    partition: Partition
    medoids: np.ndarray
    cost: float
    build_cost: float
    swaps: int


def _pam_cost(d: np.ndarray, medoids) -> float:
    return float(d[:, medoids].min(axis=1).sum())


def pam_fit(m, c: int, seed=None) -> PamResult:
    """k-medoids by BUILD then SWAP.

    BUILD picks the medoid minimising the row sum, then greedily adds the
    point that lowers the total cost most. SWAP repeatedly performs the best
    medoid/non-medoid exchange while it strictly lowers the total distance of
    points to their nearest medoid. Ties always go to the lowest index, so the
    output depends only on ``m``; ``seed`` is accepted for interface symmetry
    with the randomised methods.
    """
    d = as_array(m)
    n = d.shape[0]
    _check_count(n, c)
    scale = float(d.sum()) or 1.0
    eps = 1e-12 * scale

    medoids = [int(np.argmin(d.sum(axis=1)))]
    nearest = d[:, medoids[0]].copy()
    while len(medoids) < c:
        gain = np.maximum(nearest[:, None] - d, 0.0).sum(axis=0)
        gain[medoids] = -np.inf
        h = int(np.argmax(gain))
        medoids.append(h)
        nearest = np.minimum(nearest, d[:, h])
    build_cost = float(nearest.sum())

    cost = build_cost
    swaps = 0
    while c < n:
        best = (cost - eps, None, None)
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        for slot in range(c):
            others = medoids[:slot] + medoids[slot + 1:]
            rest = d[:, others].min(axis=1) if others else np.full(n, np.inf)
            totals = np.minimum(rest[:, None], d).sum(axis=0)
            totals[is_medoid] = np.inf
            h = int(np.argmin(totals))
            if totals[h] < best[0]:
                best = (float(totals[h]), slot, h)
        if best[1] is None:
            break
        medoids[best[1]] = best[2]
        cost = _pam_cost(d, medoids)
        swaps += 1

    medoids_arr = np.array(medoids)
    assign = np.argmin(d[:, medoids_arr], axis=1)
    # a medoid always belongs to its own cluster, even at distance ties
    assign[medoids_arr] = np.arange(c)
    labels = canonical(assign)
    return PamResult(Partition(labels, c), medoids_arr, cost, build_cost, swaps)


def pam(m, c: int, seed=None) -> Partition:
    return pam_fit(m, c, seed).partition


# --- hierarchical -----------------------------------------------------------


def _lance_williams(method, dik, djk, dij, ni, nj, nk):
    if method == "average":
        return (ni * dik + nj * djk) / (ni + nj)
    if method == "complete":
        return np.maximum(dik, djk)
    if method == "single":
        return np.minimum(dik, djk)
    if method == "ward":
        return ((ni + nk) * dik + (nj + nk) * djk - nk * dij) / (ni + nj + nk)
    raise ValidationError(f"unknown linkage {method!r}; choose from {LINKAGES}")


def linkage_tree(m, linkage: str = "average", stop_at: int = 1):
    """Agglomerate with the Lance-Williams recurrence.

    Returns ``(merges, members)``. ``merges`` is a list of
    ``(i, j, height, size)`` tuples naming the representative rows joined
    at each step (``i < j``; cluster ``j`` is absorbed into ``i``).
    ``members`` maps each surviving representative to its individuals.
    Ward is applied to the dissimilarities as given, without squaring.
    """
    if linkage not in LINKAGES:
        raise ValidationError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")
    d = as_array(m).astype(float, copy=True)
    n = d.shape[0]
    _check_count(n, stop_at)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    members = {i: [i] for i in range(n)}
    work = np.where(np.triu(np.ones((n, n), dtype=bool), 1), d, np.inf)
    merges = []
    for _ in range(n - stop_at):
        flat = int(np.argmin(work))
        i, j = divmod(flat, n)
        height = work[i, j]
        others = np.flatnonzero(active)
        others = others[(others != i) & (others != j)]
        new = _lance_williams(linkage, d[i, others], d[j, others], d[i, j],
                              size[i], size[j], size[others])
        d[i, others] = new
        d[others, i] = new
        lo = others < i
        work[others[lo], i] = new[lo]
        work[i, others[~lo]] = new[~lo]
        work[j, :] = np.inf
        work[:, j] = np.inf
        active[j] = False
        size[i] += size[j]
        members[i].extend(members.pop(j))
        merges.append((i, j, float(height), int(size[i])))
    return merges, members


def hierarchical(m, c: int, linkage: str = "average") -> Partition:
    """Agglomerative clustering cut at ``c`` clusters."""
    n = as_array(m).shape[0]
    _check_count(n, c)
    _, members = linkage_tree(m, linkage, stop_at=c)
    assign = np.empty(n, dtype=int)
    for k, rep in enumerate(sorted(members)):
        assign[members[rep]] = k
    return Partition(canonical(assign), c)


# --- k-means ----------------------------------------------------------------


@dataclass(frozen=True)
class KMeansResult:
    partition: Partition
    centers: np.ndarray
    wss: float
    restart: int
    iterations: int


def _kmeanspp(x, c, rng):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, c):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _lloyd(x, centers, max_iter):
    c = centers.shape[0]
    labels = None
    for it in range(1, max_iter + 1):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=c)
        while np.any(counts == 0):
            # reseed the empty cluster at the point farthest from its centre,
            # taken only from clusters that can spare a member
            k = int(np.flatnonzero(counts == 0)[0])
            spread = d2[np.arange(len(new)), new].copy()
            spread[counts[new] < 2] = -1.0
            far = int(np.argmax(spread))
            new[far] = k
            d2[far, :] = 0.0
            counts = np.bincount(new, minlength=c)
        centers = np.array([x[new == k].mean(axis=0) for k in range(c)])
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
    wss = float(((x - centers[labels]) ** 2).sum())
    return labels, centers, wss, it


def kmeans_fit(data, c: int, seed=0, restarts: int = 10, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm from k-means++ starts; keeps the lowest-WSS restart.

    Restart ``r`` draws from its own child of ``seed`` so runs do not depend
    on scheduling order; exact WSS ties go to the lower restart index.
    """
    if isinstance(data, Dataset):
        if data.kind != "continuous":
            raise KindMismatchError("k-means is defined here only for continuous features")
        x = data.x
    else:
        x = np.asarray(data, dtype=float)
    n = x.shape[0]
    _check_count(n, c)
    if restarts < 1:
        raise ValidationError("restarts must be a positive integer")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(restarts)
    best = None
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        labels, centers, wss, it = _lloyd(x, _kmeanspp(x, c, rng), max_iter)
        if best is None or (wss, r) < (best[2], best[3]):
            best = (labels, centers, wss, r, it)
    labels, centers, wss, r, it = best
    relabeled = canonical(labels)
    order = [int(labels[np.flatnonzero(relabeled == k)[0]]) for k in range(1, c + 1)]
    return KMeansResult(Partition(relabeled, c), centers[order], wss, r, it)


def kmeans(data, c: int, seed=0, restarts: int = 10) -> Partition:
    return kmeans_fit(data, c, seed, restarts).partition


# --- silhouette -------------------------------------------------------------


def silhouette_width(m, z, i: int) -> float:
    """Classic silhouette of individual ``i``: (b - a) / max(a, b).

    ``a`` is the mean dissimilarity to the other members of i's cluster and
    ``b`` the smallest mean dissimilarity to any other nonempty cluster. A
    sole member of its cluster gets 0, as does the degenerate a = b = 0.
    """
    d = as_array(m)
    labels, c = labels_of(z)
    if c < 2:
        raise UndefinedSilhouetteError("silhouette needs at least two clusters")
    own = labels[i]
    mates = labels == own
    mates[i] = False
    if not mates.any():
        return 0.0
    a = d[i, mates].mean()
    b = np.inf
    for k in range(c):
        if k == own:
            continue
        sel = labels == k
        if sel.any():
            b = min(b, d[i, sel].mean())
    if not np.isfinite(b):
        raise UndefinedSilhouetteError("silhouette needs at least two nonempty clusters")
    top = max(a, b)
    return 0.0 if top == 0 else float((b - a) / top)


# --- file format ------------------------------------------------------------


def save_partition(z, path) -> None:
    """Write ``index,label`` lines; ``z`` may be a Partition or a 1-based label array."""
    labels = z.z if isinstance(z, Partition) else np.asarray(z, dtype=int)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for i, lab in enumerate(labels, start=1):
            fh.write(f"{i},{int(lab)}\n")


def load_partition(path) -> Partition:
    path = Path(path)
    labels = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestionError(str(exc), path) from exc
    for lineno, ln in enumerate(lines, start=1):
        if not ln.strip():
            continue
        parts = ln.split(",")
        try:
            idx, lab = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise IngestionError(f"expected 'index,label', got {ln!r}", path, lineno) from None
        if idx != len(labels) + 1:
            raise IngestionError(f"expected index {len(labels) + 1}, got {idx}", path, lineno)
        labels.append(lab)
    return Partition(np.array(labels))
