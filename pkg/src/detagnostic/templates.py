"""Dataset-agnostic model templates and training-plan instantiation.

A template pre-commits an architecture family, input geometry, training
tricks, and scheduler thresholds so that a new dataset can be trained
without per-dataset tuning. Instantiating a template against a dataset
resolves the data-dependent parts (anchor re-clustering, dataset stats)
into a self-contained plan document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .anchors import (
    DISTANCES,
    AnchorSet,
    assign_to_heads,
    collect_box_dims,
    kmeans_cluster,
)
from .coco import DatasetIndex, DatasetStats, compute_stats
from .controller import ControllerConfig
from .corpus import SIZE_GROUPS
from .errors import TemplateNotFoundError, ValidationError

PLAN_VERSION = 1

TRICKS = ("anchor_recluster", "multiscale", "modified_dcn")

TEMPLATE_NAMES = ("ssd-mobilenetv2", "atss-mobilenetv2", "vfnet-resnet50")


@dataclass(frozen=True)
class AugmentationPlan:
    """Named augmentation switches; magnitudes stay with the trainer."""

    random_crop: bool = True
    horizontal_flip: bool = True
    photometric_distortion: bool = True

    def to_dict(self) -> dict:
        return {
            "random_crop": self.random_crop,
            "horizontal_flip": self.horizontal_flip,
            "photometric_distortion": self.photometric_distortion,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentationPlan":
        return cls(**data)


@dataclass(frozen=True)
class AnchorPolicy:
    """How to re-cluster anchors when a template asks for it."""

    k: int = 8
    num_heads: int = 2
    distance: str = "iou"
    seed: int = 42

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be at least 1, got {self.k}")
        if not (1 <= self.num_heads <= self.k):
            raise ValidationError(
                f"num_heads must be in [1, k={self.k}], got {self.num_heads}"
            )
        if self.distance not in DISTANCES:
            raise ValidationError(
                f"distance must be one of {DISTANCES}, got {self.distance!r}"
            )

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "num_heads": self.num_heads,
            "distance": self.distance,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnchorPolicy":
        return cls(**data)


@dataclass(frozen=True)
class ModelTemplate:
    """One pre-committed architecture recipe."""

    name: str
    regime: str
    input_resolution: tuple[int, int]
    gflops: float
    pretrain_provenance: str
    tricks: frozenset[str]
    augmentation_plan: AugmentationPlan
    scheduler_defaults: ControllerConfig
    multiscale: tuple[tuple[int, int], ...] | None = None
    anchor_policy: AnchorPolicy | None = None

    def __post_init__(self):
        if self.regime not in SIZE_GROUPS:
            raise ValidationError(
                f"regime must be one of {SIZE_GROUPS}, got {self.regime!r}"
            )
        w, h = self.input_resolution
        if w <= 0 or h <= 0:
            raise ValidationError("input_resolution must be positive")
        unknown = set(self.tricks) - set(TRICKS)
        if unknown:
            raise ValidationError(f"unknown tricks: {sorted(unknown)}")
        if ("anchor_recluster" in self.tricks) != (self.anchor_policy is not None):
            raise ValidationError(
                "anchor_policy must be present exactly when the "
                "anchor_recluster trick is set"
            )
        if ("multiscale" in self.tricks) != (self.multiscale is not None):
            raise ValidationError(
                "multiscale scales must be present exactly when the "
                "multiscale trick is set"
            )
        if self.multiscale is not None:
            if self.input_resolution not in self.multiscale:
                raise ValidationError(
                    "multiscale list must include the base resolution"
                )
            for sw, sh in self.multiscale:
                if sw <= 0 or sh <= 0:
                    raise ValidationError("multiscale resolutions must be positive")

    @property
    def scales(self) -> tuple[tuple[int, int], ...]:
        """All training scales: the multiscale list, or just the base."""
        if self.multiscale is not None:
            return self.multiscale
        return (self.input_resolution,)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "regime": self.regime,
            "input_resolution": list(self.input_resolution),
            "gflops": self.gflops,
            "pretrain_provenance": self.pretrain_provenance,
            "tricks": sorted(self.tricks),
            "augmentation_plan": self.augmentation_plan.to_dict(),
            "scheduler_defaults": self.scheduler_defaults.to_dict(),
            "multiscale": (
                None
                if self.multiscale is None
                else [list(s) for s in self.multiscale]
            ),
            "anchor_policy": (
                None if self.anchor_policy is None else self.anchor_policy.to_dict()
            ),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelTemplate":
        try:
            return cls(
                name=data["name"],
                regime=data["regime"],
                input_resolution=tuple(data["input_resolution"]),
                gflops=data["gflops"],
                pretrain_provenance=data["pretrain_provenance"],
                tricks=frozenset(data["tricks"]),
                augmentation_plan=AugmentationPlan.from_dict(
                    data["augmentation_plan"]
                ),
                scheduler_defaults=ControllerConfig.from_dict(
                    data["scheduler_defaults"]
                ),
                multiscale=(
                    None
                    if data.get("multiscale") is None
                    else tuple(tuple(s) for s in data["multiscale"])
                ),
                anchor_policy=(
                    None
                    if data.get("anchor_policy") is None
                    else AnchorPolicy.from_dict(data["anchor_policy"])
                ),
            )
        except KeyError as e:
            raise ValidationError(f"template is missing field {e.args[0]!r}") from e


# Scheduler thresholds below are this library's defaults, not published
# values; iteration patiences assume roughly 100-1000 iterations per epoch
# on mid-sized datasets.
_SCHEDULER_DEFAULTS = ControllerConfig(
    min_delta=1e-4,
    lr_patience=3,
    lr_iteration_patience=1000,
    lr_factor=0.1,
    min_lr=1e-6,
    stop_patience=8,
    stop_iteration_patience=3000,
    warmup_epochs=0,
)

# Multiscale lists are the base resolution +/- ~15%, snapped to multiples
# of 16; the exact steps are this library's choice.
_BUILTINS = (
    ModelTemplate(
        name="ssd-mobilenetv2",
        regime="fast",
        input_resolution=(864, 864),
        gflops=9.36,
        pretrain_provenance="ImageNet-21k -> COCO",
        tricks=frozenset({"anchor_recluster"}),
        augmentation_plan=AugmentationPlan(),
        scheduler_defaults=_SCHEDULER_DEFAULTS,
        anchor_policy=AnchorPolicy(k=8, num_heads=2, distance="iou", seed=42),
    ),
    ModelTemplate(
        name="atss-mobilenetv2",
        regime="medium",
        input_resolution=(992, 736),
        gflops=20.86,
        pretrain_provenance="ImageNet-21k -> COCO",
        tricks=frozenset({"multiscale"}),
        augmentation_plan=AugmentationPlan(),
        scheduler_defaults=_SCHEDULER_DEFAULTS,
        multiscale=((848, 624), (992, 736), (1136, 848)),
    ),
    ModelTemplate(
        name="vfnet-resnet50",
        regime="accurate",
        input_resolution=(1344, 800),
        gflops=347.78,
        pretrain_provenance="COCO",
        tricks=frozenset({"multiscale", "modified_dcn"}),
        augmentation_plan=AugmentationPlan(),
        scheduler_defaults=_SCHEDULER_DEFAULTS,
        multiscale=((1136, 672), (1344, 800), (1552, 928)),
    ),
)


def builtin_templates() -> tuple[ModelTemplate, ...]:
    """The three registered templates, fastest first."""
    return _BUILTINS


def get_template(name: str) -> ModelTemplate:
    """Look up a builtin template by name."""
    for template in _BUILTINS:
        if template.name == name:
            return template
    raise TemplateNotFoundError(
        f"unknown template {name!r}; available: {', '.join(TEMPLATE_NAMES)}"
    )


@dataclass(frozen=True)
class TrainingPlan:
    """A resolved, self-contained training recipe for one dataset."""

    template_name: str
    input_resolution: tuple[int, int]
    scheduler: ControllerConfig
    augmentation: AugmentationPlan
    dataset_name: str
    dataset_stats: DatasetStats
    anchors: AnchorSet | None = None
    multiscale: tuple[tuple[int, int], ...] | None = None

    def to_dict(self) -> dict:
        return {
            "v": PLAN_VERSION,
            "template_name": self.template_name,
            "input_resolution": list(self.input_resolution),
            "scheduler": self.scheduler.to_dict(),
            "augmentation": self.augmentation.to_dict(),
            "dataset_name": self.dataset_name,
            "dataset_stats": self.dataset_stats.to_dict(),
            "anchors": None if self.anchors is None else self.anchors.to_dict(),
            "multiscale": (
                None
                if self.multiscale is None
                else [list(s) for s in self.multiscale]
            ),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingPlan":
        if data.get("v") != PLAN_VERSION:
            raise ValidationError(
                f"unsupported plan version {data.get('v')!r}"
            )
        try:
            return cls(
                template_name=data["template_name"],
                input_resolution=tuple(data["input_resolution"]),
                scheduler=ControllerConfig.from_dict(data["scheduler"]),
                augmentation=AugmentationPlan.from_dict(data["augmentation"]),
                dataset_name=data["dataset_name"],
                dataset_stats=DatasetStats.from_dict(data["dataset_stats"]),
                anchors=(
                    None
                    if data.get("anchors") is None
                    else AnchorSet.from_dict(data["anchors"])
                ),
                multiscale=(
                    None
                    if data.get("multiscale") is None
                    else tuple(tuple(s) for s in data["multiscale"])
                ),
            )
        except KeyError as e:
            raise ValidationError(f"plan is missing field {e.args[0]!r}") from e

    @classmethod
    def from_json(cls, serialized: str | bytes) -> "TrainingPlan":
        try:
            data = json.loads(serialized)
        except json.JSONDecodeError as e:
            raise ValidationError(f"plan is not valid JSON: {e.msg}") from e
        if not isinstance(data, dict):
            raise ValidationError("plan must be a JSON object")
        return cls.from_dict(data)


def instantiate(template: ModelTemplate, index: DatasetIndex) -> TrainingPlan:
    """Resolve a template against a dataset into a TrainingPlan.

    When the template asks for anchor re-clustering, the train-split box
    dimensions are clustered at the template resolution and the resulting
    anchors are embedded; everything else is copied so the plan needs no
    further dataset access.
    """
    if not index.images_in_split("train"):
        raise ValidationError(
            f"dataset {index.name!r} has no train images to instantiate from"
        )
    stats = compute_stats(index)
    anchors = None
    if template.anchor_policy is not None:
        policy = template.anchor_policy
        dims = collect_box_dims(index, template.input_resolution)
        anchor_set = kmeans_cluster(
            dims, k=policy.k, distance=policy.distance, seed=policy.seed
        )
        anchors = assign_to_heads(anchor_set, policy.num_heads)
    return TrainingPlan(
        template_name=template.name,
        input_resolution=template.input_resolution,
        scheduler=template.scheduler_defaults,
        augmentation=template.augmentation_plan,
        dataset_name=index.name,
        dataset_stats=stats,
        anchors=anchors,
        multiscale=template.multiscale,
    )


def resize_geometry(
    image_size: tuple[int, int],
    template: ModelTemplate,
    scale: tuple[int, int] | None = None,
) -> tuple[float, float]:
    """Per-axis scale factors mapping an image onto a template resolution.

    Axes are scaled independently; aspect ratio is not preserved. ``scale``
    selects one of the template's training scales (default: the base
    resolution).
    """
    w, h = image_size
    if w <= 0 or h <= 0:
        raise ValidationError(f"image size must be positive, got {image_size}")
    target = template.input_resolution if scale is None else tuple(scale)
    if target not in template.scales:
        raise ValidationError(
            f"scale {target} is not one of the template's scales {template.scales}"
        )
    tw, th = target
    return (tw / w, th / h)
