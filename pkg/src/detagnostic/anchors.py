"""KMeans re-clustering of anchor priors from training-set box statistics.

Object sizes are taken at the model input resolution (resizing does not
preserve aspect ratio), clustered with seeded k-means++ initialization and
Lloyd iterations, and scored by the mean best center-aligned IoU between
the data and the resulting anchors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .boxes import aligned_iou
from .coco import DatasetIndex
from .errors import ValidationError

DISTANCES = ("euclidean", "iou")


@dataclass(frozen=True)
class BoxDims:
    """Object width/height in pixels at the model input resolution."""

    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValidationError(f"dims must be positive, got {self.w}x{self.h}")


@dataclass(frozen=True)
class AnchorSet:
    """Clustered anchor priors, sorted by area ascending.

    ``head_groups`` partitions the anchors contiguously; until
    :func:`assign_to_heads` is applied it holds a single group.
    """

    anchors: tuple[tuple[float, float], ...]
    quality: float
    head_groups: tuple[tuple[tuple[float, float], ...], ...]

    @property
    def k(self) -> int:
        return len(self.anchors)

    def __post_init__(self):
        areas = [w * h for w, h in self.anchors]
        if any(a > b for a, b in zip(areas, areas[1:])):
            raise ValidationError("anchors must be sorted by area ascending")
        flat = tuple(a for g in self.head_groups for a in g)
        if flat != self.anchors:
            raise ValidationError("head_groups must partition anchors contiguously")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "quality": self.quality,
            "anchors": [[w, h] for w, h in self.anchors],
            "head_groups": [[[w, h] for w, h in g] for g in self.head_groups],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnchorSet":
        return cls(
            anchors=tuple((float(w), float(h)) for w, h in data["anchors"]),
            quality=float(data["quality"]),
            head_groups=tuple(
                tuple((float(w), float(h)) for w, h in g) for g in data["head_groups"]
            ),
        )


@dataclass(frozen=True)
class KMeansTrace:
    """Diagnostics from one clustering run.

    ``objective_history`` records the within-cluster objective after each
    assignment step (squared euclidean distance, or 1 - IoU in iou mode).
    """

    init_centroids: tuple[tuple[float, float], ...]
    objective_history: tuple[float, ...]
    n_iterations: int


def collect_box_dims(
    index: DatasetIndex,
    target_resolution: tuple[int, int],
    split: str = "train",
) -> list[BoxDims]:
    """Box sizes after resizing each image to the target resolution.

    Width and height scale independently (aspect ratio intentionally not
    preserved), so a box stretches exactly as the detector will see it.
    """
    target_w, target_h = target_resolution
    if target_w <= 0 or target_h <= 0:
        raise ValidationError(f"target resolution must be positive, got {target_resolution}")
    wanted = {im.image_id: im for im in index.images_in_split(split)}
    dims = []
    for ann in index.annotations:
        image = wanted.get(ann.image_id)
        if image is None:
            continue
        dims.append(
            BoxDims(
                w=ann.box.w * target_w / image.width,
                h=ann.box.h * target_h / image.height,
            )
        )
    return dims


def _as_array(dims: Sequence[BoxDims]) -> np.ndarray:
    return np.array([(d.w, d.h) for d in dims], dtype=np.float64)


def _pairwise(points: np.ndarray, centroids: np.ndarray, distance: str) -> np.ndarray:
    """Distance from every point to every centroid, shape (n, k)."""
    if distance == "euclidean":
        diff = points[:, None, :] - centroids[None, :, :]
        return np.einsum("nkd,nkd->nk", diff, diff)
    pw, ph = points[:, 0][:, None], points[:, 1][:, None]
    cw, ch = centroids[:, 0][None, :], centroids[:, 1][None, :]
    inter = np.minimum(pw, cw) * np.minimum(ph, ch)
    union = pw * ph + cw * ch - inter
    return 1.0 - inter / union


def _kmeans_pp_init(points: np.ndarray, k: int, distance: str, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++: spread initial centroids proportionally to distance."""
    n = len(points)
    centroids = np.empty((k, 2), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    if k == 1:
        return centroids
    closest = _pairwise(points, centroids[:1], distance)[:, 0]
    for j in range(1, k):
        weights = closest if distance == "euclidean" else closest**2
        total = weights.sum()
        if total > 0:
            idx = rng.choice(n, p=weights / total)
        else:
            idx = int(rng.integers(n))  # all points coincide with a centroid
        centroids[j] = points[idx]
        if j + 1 < k:
            closest = np.minimum(closest, _pairwise(points, centroids[j : j + 1], distance)[:, 0])
    return centroids


def _repair_empty(
    centroids: np.ndarray,
    labels: np.ndarray,
    points: np.ndarray,
    own_dist: np.ndarray,
) -> None:
    """Re-seed each empty centroid at the point farthest from its own centroid."""
    own = own_dist.copy()
    for j in range(len(centroids)):
        if np.any(labels == j):
            continue
        far = int(np.argmax(own))
        centroids[j] = points[far]
        own[far] = -1.0


def cluster_details(
    dims: Sequence[BoxDims],
    k: int,
    distance: str = "euclidean",
    seed: int = 42,
    max_iters: int = 300,
) -> tuple[AnchorSet, KMeansTrace]:
    """Run the clustering and return the anchors plus run diagnostics."""
    if distance not in DISTANCES:
        raise ValidationError(f"unknown distance {distance!r}, expected one of {DISTANCES}")
    if k < 1:
        raise ValidationError(f"k must be at least 1, got {k}")
    if len(dims) < k:
        raise ValidationError(f"need at least k={k} samples, got {len(dims)}")

    points = _as_array(dims)
    # Canonical point order makes the run invariant to input permutation.
    points = points[np.lexsort((points[:, 1], points[:, 0]))]
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, distance, rng)
    init = tuple((float(w), float(h)) for w, h in centroids)

    prev_labels = None
    history: list[float] = []
    iterations = 0
    for _ in range(max_iters):
        dist = _pairwise(points, centroids, distance)
        labels = dist.argmin(axis=1)
        own_dist = dist[np.arange(len(points)), labels]
        history.append(float(own_dist.sum()))
        iterations += 1
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        prev_labels = labels
        for j in range(k):
            members = points[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
        _repair_empty(centroids, labels, points, own_dist)

    order = np.argsort(centroids[:, 0] * centroids[:, 1], kind="stable")
    anchors = tuple((float(w), float(h)) for w, h in centroids[order])
    anchor_set = AnchorSet(
        anchors=anchors,
        quality=anchor_quality(dims, anchors),
        head_groups=(anchors,),
    )
    return anchor_set, KMeansTrace(
        init_centroids=init,
        objective_history=tuple(history),
        n_iterations=iterations,
    )


def kmeans_cluster(
    dims: Sequence[BoxDims],
    k: int,
    distance: str = "euclidean",
    seed: int = 42,
    max_iters: int = 300,
) -> AnchorSet:
    """Cluster box sizes into ``k`` anchor priors. Deterministic given the seed."""
    anchor_set, _ = cluster_details(dims, k, distance=distance, seed=seed, max_iters=max_iters)
    return anchor_set


def anchor_quality(
    dims: Sequence[BoxDims], anchors: Sequence[tuple[float, float]]
) -> float:
    """Mean over samples of the best center-aligned IoU with any anchor."""
    if not dims or not anchors:
        raise ValidationError("dims and anchors must both be non-empty")
    points = _as_array(dims)
    arr = np.array(anchors, dtype=np.float64)
    best = 1.0 - _pairwise(points, arr, "iou").min(axis=1)
    return float(best.mean())


def best_anchor_iou(dims: BoxDims, anchors: Sequence[tuple[float, float]]) -> float:
    """Best center-aligned IoU of a single size sample against the anchors."""
    return max(aligned_iou(dims.w, dims.h, w, h) for w, h in anchors)


def assign_to_heads(anchor_set: AnchorSet, num_heads: int) -> AnchorSet:
    """Split anchors into contiguous per-head groups by ascending area.

    Small scales go to the first (highest-resolution) head; when the count
    does not divide evenly the remainder goes to the last group.
    """
    if num_heads < 1:
        raise ValidationError("num_heads must be at least 1")
    if num_heads > anchor_set.k:
        raise ValidationError(
            f"num_heads={num_heads} exceeds anchor count k={anchor_set.k}"
        )
    base = anchor_set.k // num_heads
    groups = []
    start = 0
    for head in range(num_heads):
        size = base if head < num_heads - 1 else anchor_set.k - start
        groups.append(anchor_set.anchors[start : start + size])
        start += size
    return replace(anchor_set, head_groups=tuple(groups))
