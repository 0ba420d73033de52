"""COCO annotation ingestion, dataset statistics, and regime classification.

Annotation files are the standard COCO JSON layout (``images``,
``annotations``, ``categories``), one file per split. Parsing validates
referential integrity and box geometry up front so every downstream module
can assume a well-formed index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .boxes import BoundingBox
from .errors import AnnotationParseError, ReferentialIntegrityError, ValidationError

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ImageInfo:
    image_id: int
    width: int
    height: int
    split: str


@dataclass(frozen=True)
class Category:
    category_id: int
    name: str


@dataclass(frozen=True)
class Annotation:
    annotation_id: int
    image_id: int
    category_id: int
    box: BoundingBox


@dataclass(frozen=True)
class DatasetIndex:
    """Validated, immutable view of one dataset's annotations.

    Invariants (enforced by :func:`parse_coco`): unique image / category /
    annotation ids, every annotation references an existing image and
    category, and every box lies fully inside its image.
    """

    name: str
    images: tuple[ImageInfo, ...]
    categories: tuple[Category, ...]
    annotations: tuple[Annotation, ...]

    @cached_property
    def image_by_id(self) -> Mapping[int, ImageInfo]:
        return {im.image_id: im for im in self.images}

    @cached_property
    def category_by_id(self) -> Mapping[int, Category]:
        return {c.category_id: c for c in self.categories}

    def images_in_split(self, split: str) -> tuple[ImageInfo, ...]:
        return tuple(im for im in self.images if im.split == split)

    def to_coco_dict(self) -> dict:
        """Export back to the COCO layout. Requires a single-split index."""
        splits = {im.split for im in self.images}
        if len(splits) > 1:
            raise ValidationError(
                f"cannot serialize a mixed-split index (splits: {sorted(splits)})"
            )
        return {
            "images": [
                {"id": im.image_id, "width": im.width, "height": im.height}
                for im in self.images
            ],
            "annotations": [
                {
                    "id": a.annotation_id,
                    "image_id": a.image_id,
                    "category_id": a.category_id,
                    "bbox": [a.box.x, a.box.y, a.box.w, a.box.h],
                }
                for a in self.annotations
            ],
            "categories": [
                {"id": c.category_id, "name": c.name} for c in self.categories
            ],
        }

    def to_coco_json(self) -> str:
        return json.dumps(self.to_coco_dict(), sort_keys=True)


@dataclass(frozen=True)
class DatasetStats:
    """Per-dataset aggregates: one row of the corpus statistics table.

    Size percentages are absent (``None``) when the measured splits contain
    no annotations. Values are kept at full precision; rounding happens only
    at display time.
    """

    num_classes: int
    num_train_images: int
    num_val_images: int
    avg_object_width_pct: float | None
    avg_object_height_pct: float | None
    boxes_per_image_mean: float | None

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "num_train_images": self.num_train_images,
            "num_val_images": self.num_val_images,
            "avg_object_width_pct": self.avg_object_width_pct,
            "avg_object_height_pct": self.avg_object_height_pct,
            "boxes_per_image_mean": self.boxes_per_image_mean,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DatasetStats":
        try:
            return cls(**{f: data[f] for f in cls.__dataclass_fields__})
        except KeyError as e:
            raise ValidationError(f"stats are missing field {e.args[0]!r}") from e


@dataclass(frozen=True)
class RegimeThresholds:
    """Cutoffs for regime classification.

    ``small_object_pct`` bounds the geometric mean of the average relative
    object width/height; the image-count thresholds split datasets into
    small (at most ``small_threshold`` train images) and large (more than
    ``large_threshold``).
    """

    small_object_pct: float = 5.0
    large_threshold: int = 4000
    small_threshold: int = 1000

    def __post_init__(self):
        if self.small_threshold > self.large_threshold:
            raise ValidationError(
                "small_threshold must not exceed large_threshold "
                f"({self.small_threshold} > {self.large_threshold})"
            )
        if self.small_object_pct <= 0:
            raise ValidationError("small_object_pct must be positive")

    @classmethod
    def from_dict(cls, data: Mapping) -> "RegimeThresholds":
        return cls(**dict(data))


@dataclass(frozen=True)
class RegimeLabel:
    """Raw regime flags for one dataset.

    ``small_dataset`` and ``small_object`` are independent and may both be
    set; ``large_dataset`` and ``small_dataset`` are mutually exclusive by
    construction. Use :meth:`exclusive` for the single-group view used in
    corpus breakdowns.
    """

    small_dataset: bool
    small_object: bool
    large_dataset: bool

    def __post_init__(self):
        if self.small_dataset and self.large_dataset:
            raise ValidationError("small_dataset and large_dataset are exclusive")

    def exclusive(self) -> "RegimeLabel":
        """Collapse to at most one flag: small-object wins over dataset size."""
        if self.small_object:
            return RegimeLabel(False, True, False)
        if self.large_dataset:
            return RegimeLabel(False, False, True)
        if self.small_dataset:
            return RegimeLabel(True, False, False)
        return self

    @property
    def group(self) -> str:
        """Name of the exclusive group this label falls into."""
        ex = self.exclusive()
        if ex.small_object:
            return "small_object"
        if ex.large_dataset:
            return "large_dataset"
        if ex.small_dataset:
            return "small_dataset"
        return "general"

    def to_dict(self) -> dict:
        return {
            "small_dataset": self.small_dataset,
            "small_object": self.small_object,
            "large_dataset": self.large_dataset,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RegimeLabel":
        return cls(
            small_dataset=bool(data.get("small_dataset", False)),
            small_object=bool(data.get("small_object", False)),
            large_dataset=bool(data.get("large_dataset", False)),
        )


def _decode(raw: bytes | str) -> str:
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise AnnotationParseError(f"not valid UTF-8: {e.reason}", e.start) from e


def parse_coco(raw: bytes | str, split: str = "train", name: str = "dataset") -> DatasetIndex:
    """Parse a COCO-format annotation document into a validated index.

    All images in the document get tagged with ``split``. Annotation order
    in the file is preserved.
    """
    if split not in SPLITS:
        raise ValidationError(f"unknown split {split!r}, expected one of {SPLITS}")
    text = _decode(raw)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[: e.pos].encode("utf-8"))
        raise AnnotationParseError(f"malformed JSON: {e.msg}", offset) from e

    if not isinstance(doc, dict):
        raise ValidationError("top-level JSON value must be an object")
    for key in ("images", "annotations", "categories"):
        if key not in doc or not isinstance(doc[key], list):
            raise ValidationError(f"missing or non-array {key!r} section")

    images: list[ImageInfo] = []
    seen_images: set[int] = set()
    for entry in doc["images"]:
        image_id = _require(entry, "id", "images")
        width = _require(entry, "width", "images")
        height = _require(entry, "height", "images")
        if image_id in seen_images:
            raise ValidationError(f"duplicate image id {image_id}")
        if not (width > 0 and height > 0):
            raise ValidationError(f"image {image_id} has non-positive size {width}x{height}")
        seen_images.add(image_id)
        images.append(ImageInfo(image_id, width, height, split))

    categories: list[Category] = []
    seen_cats: set[int] = set()
    for entry in doc["categories"]:
        category_id = _require(entry, "id", "categories")
        cat_name = _require(entry, "name", "categories")
        if category_id in seen_cats:
            raise ValidationError(f"duplicate category id {category_id}")
        seen_cats.add(category_id)
        categories.append(Category(category_id, cat_name))

    image_by_id = {im.image_id: im for im in images}
    annotations: list[Annotation] = []
    seen_anns: set[int] = set()
    for entry in doc["annotations"]:
        ann_id = _require(entry, "id", "annotations")
        image_id = _require(entry, "image_id", "annotations")
        category_id = _require(entry, "category_id", "annotations")
        bbox = _require(entry, "bbox", "annotations")
        if ann_id in seen_anns:
            raise ValidationError(f"duplicate annotation id {ann_id}")
        seen_anns.add(ann_id)
        if image_id not in image_by_id:
            raise ReferentialIntegrityError(
                f"annotation {ann_id} references missing image id {image_id}"
            )
        if category_id not in seen_cats:
            raise ReferentialIntegrityError(
                f"annotation {ann_id} references missing category id {category_id}"
            )
        if not (isinstance(bbox, list) and len(bbox) == 4):
            raise ValidationError(f"annotation {ann_id} bbox must be [x, y, w, h]")
        x, y, w, h = (float(v) for v in bbox)
        if w <= 0 or h <= 0:
            raise ValidationError(
                f"annotation {ann_id} has non-positive box dimension {w}x{h}"
            )
        if x < 0 or y < 0:
            raise ValidationError(f"annotation {ann_id} box origin out of bounds")
        image = image_by_id[image_id]
        if x + w > image.width or y + h > image.height:
            raise ValidationError(
                f"annotation {ann_id} box exceeds image {image_id} bounds"
            )
        annotations.append(Annotation(ann_id, image_id, category_id, BoundingBox(x, y, w, h)))

    return DatasetIndex(
        name=name,
        images=tuple(images),
        categories=tuple(categories),
        annotations=tuple(annotations),
    )


def _require(entry, key: str, section: str):
    if not isinstance(entry, dict) or key not in entry:
        raise ValidationError(f"{section} entry missing required field {key!r}")
    return entry[key]


def compute_stats(
    index: DatasetIndex, size_splits: Sequence[str] = ("train",)
) -> DatasetStats:
    """Aggregate per-dataset statistics.

    Object-size percentages and boxes-per-image are arithmetic means over the
    annotations of ``size_splits`` (train only by default); image counts
    always come from the split tags.
    """
    num_train = len(index.images_in_split("train"))
    num_val = len(index.images_in_split("val"))

    measured = {
        im.image_id: im for im in index.images if im.split in tuple(size_splits)
    }
    width_pcts: list[float] = []
    height_pcts: list[float] = []
    per_image_counts = {image_id: 0 for image_id in measured}
    for ann in index.annotations:
        image = measured.get(ann.image_id)
        if image is None:
            continue
        width_pcts.append(100.0 * ann.box.w / image.width)
        height_pcts.append(100.0 * ann.box.h / image.height)
        per_image_counts[ann.image_id] += 1

    if width_pcts:
        avg_w = sum(width_pcts) / len(width_pcts)
        avg_h = sum(height_pcts) / len(height_pcts)
    else:
        avg_w = avg_h = None
    boxes_mean = (
        sum(per_image_counts.values()) / len(per_image_counts) if measured else None
    )
    return DatasetStats(
        num_classes=len(index.categories),
        num_train_images=num_train,
        num_val_images=num_val,
        avg_object_width_pct=avg_w,
        avg_object_height_pct=avg_h,
        boxes_per_image_mean=boxes_mean,
    )


def stats_from_splits(
    train: DatasetIndex, val: DatasetIndex | None = None
) -> DatasetStats:
    """Combine separately parsed split files into one stats row.

    Split files commonly reuse the same id space, so they are never merged
    into a single index; counts are simply taken per file. Size statistics
    come from the train split.
    """
    base = compute_stats(train, size_splits=("train",))
    num_val = len(val.images) if val is not None else 0
    return replace(base, num_val_images=num_val)


def classify_regime(
    stats: DatasetStats, thresholds: RegimeThresholds | None = None
) -> RegimeLabel:
    """Assign regime flags from a stats row.

    A dataset has small objects when the geometric mean of its average
    relative width and height falls below ``small_object_pct``; it is large
    or small by its train-image count.
    """
    t = thresholds or RegimeThresholds()
    if stats.avg_object_width_pct is None or stats.avg_object_height_pct is None:
        small_object = False
    else:
        gm = math.sqrt(stats.avg_object_width_pct * stats.avg_object_height_pct)
        small_object = gm < t.small_object_pct
    large = stats.num_train_images > t.large_threshold
    small = stats.num_train_images <= t.small_threshold
    return RegimeLabel(small_dataset=small, small_object=small_object, large_dataset=large)


def classify_many(
    stats_by_name: Mapping[str, DatasetStats],
    thresholds: RegimeThresholds | None = None,
    exclusive: bool = False,
) -> dict[str, RegimeLabel]:
    """Classify a whole corpus at once; optionally collapse to exclusive groups."""
    labels = {
        dataset: classify_regime(s, thresholds) for dataset, s in stats_by_name.items()
    }
    if exclusive:
        labels = {dataset: label.exclusive() for dataset, label in labels.items()}
    return labels
