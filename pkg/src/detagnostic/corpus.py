"""Corpus-level aggregation of per-dataset AP and leaderboard rendering.

Every dataset contributes equally to the headline average; regime subsets
(small datasets, small-object datasets, large datasets) get their own
unweighted means. AP values are fractions in [0, 1] internally; the percent
convention of result tables applies only at I/O boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .coco import RegimeLabel
from .errors import ValidationError

SIZE_GROUPS = ("fast", "medium", "accurate")


@dataclass(frozen=True)
class CorpusRecord:
    """One model's AP on every dataset of the corpus, with regime labels."""

    model_name: str
    per_dataset_ap: Mapping[str, float]
    regime: Mapping[str, RegimeLabel]
    size_group: str | None = None

    def __post_init__(self):
        for dataset, ap in self.per_dataset_ap.items():
            if not (0.0 <= ap <= 1.0):
                raise ValidationError(
                    f"AP for {dataset!r} must be a fraction in [0, 1], got {ap}"
                )
            if dataset not in self.regime:
                raise ValidationError(f"dataset {dataset!r} has no regime label")
        if self.size_group is not None and self.size_group not in SIZE_GROUPS:
            raise ValidationError(
                f"size_group must be one of {SIZE_GROUPS}, got {self.size_group!r}"
            )

    @classmethod
    def from_percent(
        cls,
        model_name: str,
        per_dataset_ap_pct: Mapping[str, float],
        regime: Mapping[str, RegimeLabel],
        size_group: str | None = None,
    ) -> "CorpusRecord":
        return cls(
            model_name=model_name,
            per_dataset_ap={k: v / 100.0 for k, v in per_dataset_ap_pct.items()},
            regime=regime,
            size_group=size_group,
        )


@dataclass(frozen=True)
class CorpusMetrics:
    """Unweighted corpus means; a subset mean is absent when its subset is empty."""

    avg_ap: float
    avg_ap_small_datasets: float | None
    avg_ap_small_objects: float | None
    avg_ap_large_datasets: float | None

    def to_percent_dict(self) -> dict:
        def pct(v):
            return None if v is None else 100.0 * v

        return {
            "avg_ap": pct(self.avg_ap),
            "avg_ap_small_datasets": pct(self.avg_ap_small_datasets),
            "avg_ap_small_objects": pct(self.avg_ap_small_objects),
            "avg_ap_large_datasets": pct(self.avg_ap_large_datasets),
        }


def aggregate(record: CorpusRecord) -> CorpusMetrics:
    """Reduce one record to corpus metrics by plain arithmetic means."""
    if not record.per_dataset_ap:
        raise ValidationError("cannot aggregate an empty record")

    def subset_mean(flag: str) -> float | None:
        values = [
            ap
            for dataset, ap in record.per_dataset_ap.items()
            if getattr(record.regime[dataset], flag)
        ]
        return sum(values) / len(values) if values else None

    all_values = list(record.per_dataset_ap.values())
    return CorpusMetrics(
        avg_ap=sum(all_values) / len(all_values),
        avg_ap_small_datasets=subset_mean("small_dataset"),
        avg_ap_small_objects=subset_mean("small_object"),
        avg_ap_large_datasets=subset_mean("large_dataset"),
    )


def _ordered(records: Sequence[CorpusRecord]) -> list[tuple[CorpusRecord, CorpusMetrics]]:
    if not records:
        return []
    universe = set(records[0].per_dataset_ap)
    for r in records[1:]:
        if set(r.per_dataset_ap) != universe:
            missing = sorted(universe - set(r.per_dataset_ap))
            extra = sorted(set(r.per_dataset_ap) - universe)
            raise ValidationError(
                f"record {r.model_name!r} dataset set differs: "
                f"missing {missing}, extra {extra}"
            )
    rows = [(r, aggregate(r)) for r in records]
    group_rank = {g: i for i, g in enumerate(SIZE_GROUPS)}
    rows.sort(
        key=lambda rm: (
            group_rank.get(rm[0].size_group, len(SIZE_GROUPS)),
            -rm[1].avg_ap,
            rm[0].model_name,
        )
    )
    return rows


def render_leaderboard(records: Sequence[CorpusRecord], as_json: bool = False) -> str:
    """Format records as a ranked table (text or JSON).

    Rows are ordered by average AP descending within each model-size group;
    values are rounded to one decimal at display only.
    """
    rows = _ordered(records)

    def cell(v: float | None) -> str:
        return "-" if v is None else f"{100.0 * v:.1f}"

    if as_json:
        payload = [
            {
                "model": r.model_name,
                "size_group": r.size_group,
                **{k: (None if v is None else round(v, 1)) for k, v in m.to_percent_dict().items()},
            }
            for r, m in rows
        ]
        return json.dumps(payload, indent=2)

    header = ("model", "group", "avg_ap", "small_datasets", "small_objects", "large_datasets")
    table = [header]
    for r, m in rows:
        table.append(
            (
                r.model_name,
                r.size_group or "-",
                cell(m.avg_ap),
                cell(m.avg_ap_small_datasets),
                cell(m.avg_ap_small_objects),
                cell(m.avg_ap_large_datasets),
            )
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for n, row in enumerate(table):
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def parse_corpus(raw: bytes | str) -> tuple[CorpusRecord, ...]:
    """Parse a corpus results file.

    Expected shape::

        {
          "regimes": {"<dataset>": {"small_dataset": ..., "small_object": ...,
                                    "large_dataset": ...}},
          "models": [{"name": "...", "size_group": "fast"|"medium"|"accurate",
                      "ap_percent": {"<dataset>": 52.9, ...}}, ...]
        }

    AP values are percents, matching how results tables are published.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ValidationError(f"corpus file is not valid JSON: {e.msg}") from e
    if not isinstance(data, dict):
        raise ValidationError("corpus file must be a JSON object")
    for section in ("regimes", "models"):
        if section not in data:
            raise ValidationError(f"corpus file is missing section {section!r}")
    if not isinstance(data["regimes"], dict) or not isinstance(data["models"], list):
        raise ValidationError("corpus file sections have wrong types")
    try:
        regimes = {
            name: RegimeLabel.from_dict(label)
            for name, label in data["regimes"].items()
        }
    except (TypeError, KeyError) as e:
        raise ValidationError(f"malformed regime label: {e}") from e
    records = []
    for i, model in enumerate(data["models"]):
        if not isinstance(model, dict) or "name" not in model or "ap_percent" not in model:
            raise ValidationError(f"models[{i}] must have 'name' and 'ap_percent'")
        if not isinstance(model["ap_percent"], dict) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool)
            for v in model["ap_percent"].values()
        ):
            raise ValidationError(f"models[{i}].ap_percent must map datasets to numbers")
        records.append(
            CorpusRecord.from_percent(
                model_name=model["name"],
                per_dataset_ap_pct=model["ap_percent"],
                regime=regimes,
                size_group=model.get("size_group"),
            )
        )
    return tuple(records)
