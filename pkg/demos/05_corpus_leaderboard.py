"""Aggregate per-dataset results into a regime-aware leaderboard.

A single overall mean hides where a model is weak. Grouping datasets by
regime (small dataset / small objects / large dataset) and averaging per
group shows which model to pick for which situation.
"""

from detagnostic import (
    CorpusRecord,
    RegimeLabel,
    aggregate,
    render_leaderboard,
)

# Six benchmark datasets with their regime labels (normally these come
# from classify_regime on the annotation files; written inline here).
regimes = {
    "screws":    RegimeLabel(small_dataset=True, small_object=False, large_dataset=False),
    "leaves":    RegimeLabel(small_dataset=True, small_object=False, large_dataset=False),
    "rivets":    RegimeLabel(small_dataset=False, small_object=True, large_dataset=False),
    "grains":    RegimeLabel(small_dataset=False, small_object=True, large_dataset=False),
    "parking":   RegimeLabel(small_dataset=False, small_object=False, large_dataset=True),
    "shelves":   RegimeLabel(small_dataset=False, small_object=False, large_dataset=True),
}

# Validation AP (percent) per model per dataset. The fast model wins on
# the big easy sets; the accurate model pulls ahead on small objects.
results = {
    "tiny-det":  {"screws": 61.0, "leaves": 55.2, "rivets": 30.1,
                  "grains": 35.8, "parking": 90.2, "shelves": 84.0},
    "mid-det":   {"screws": 66.4, "leaves": 59.0, "rivets": 42.5,
                  "grains": 47.2, "parking": 91.8, "shelves": 86.1},
    "heavy-det": {"screws": 70.1, "leaves": 63.3, "rivets": 55.0,
                  "grains": 58.9, "parking": 92.4, "shelves": 87.5},
}
size_groups = {"tiny-det": "fast", "mid-det": "medium", "heavy-det": "accurate"}

records = tuple(
    CorpusRecord.from_percent(model, per_dataset, regimes, size_groups[model])
    for model, per_dataset in results.items()
)

# Per-model metrics: the overall mean plus one mean per regime bucket.
for record in records:
    metrics = aggregate(record).to_percent_dict()
    print(f"{record.model_name:9s} avg {metrics['avg_ap']:.1f}  "
          f"small-data {metrics['avg_ap_small_datasets']:.1f}  "
          f"small-obj {metrics['avg_ap_small_objects']:.1f}  "
          f"large {metrics['avg_ap_large_datasets']:.1f}")

print()

# The leaderboard sorts inside each speed group, so the table reads as
# "best fast model, best medium model, best accurate model".
print(render_leaderboard(records))

# The gap that matters: going from the fast to the accurate model buys
# ~24 points on small objects but only ~2 on the large datasets.
tiny = aggregate(records[0]).to_percent_dict()
heavy = aggregate(records[2]).to_percent_dict()
print(f"\nsmall-object gain fast->accurate: "
      f"{heavy['avg_ap_small_objects'] - tiny['avg_ap_small_objects']:+.1f}")
print(f"large-dataset gain fast->accurate: "
      f"{heavy['avg_ap_large_datasets'] - tiny['avg_ap_large_datasets']:+.1f}")
