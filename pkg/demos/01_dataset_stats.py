"""Parse COCO annotations, compute dataset statistics, classify the regime.

Every downstream choice (which template, which tricks) keys off a handful
of numbers: class count, train-set size, and average object size relative
to the image. This script builds a small dataset inline and walks through
that pipeline.
"""

import json
import random

from detagnostic import classify_regime, compute_stats, parse_coco

rng = random.Random(0)

# A miniature annotation file: 40 images, 2 classes, a few boxes each.
# Box sizes are drawn small relative to the 1280x960 frames.
images = [{"id": i, "width": 1280, "height": 960} for i in range(1, 41)]
categories = [{"id": 1, "name": "screw"}, {"id": 2, "name": "washer"}]
annotations = []
for image in images:
    for _ in range(rng.randint(1, 5)):
        w = rng.uniform(30, 90)
        h = rng.uniform(30, 90)
        annotations.append({
            "id": len(annotations) + 1,
            "image_id": image["id"],
            "category_id": rng.choice([1, 2]),
            "bbox": [rng.uniform(0, 1280 - w), rng.uniform(0, 960 - h), w, h],
        })

doc = json.dumps({"images": images, "categories": categories,
                  "annotations": annotations})

# parse_coco validates structure and referential integrity as it reads
index = parse_coco(doc, split="train", name="fasteners")
print(f"parsed {len(annotations)} boxes over {len(images)} images")

stats = compute_stats(index)
print(f"classes:           {stats.num_classes}")
print(f"train images:      {stats.num_train_images}")
print(f"avg object width:  {stats.avg_object_width_pct:.1f}% of image")
print(f"avg object height: {stats.avg_object_height_pct:.1f}% of image")
print(f"boxes per image:   {stats.boxes_per_image_mean:.2f}")

# The regime label drives template selection: small datasets want longer
# patience, small objects want higher input resolution, large datasets can
# afford less frequent validation.
label = classify_regime(stats)
print(f"raw flags:         {label.to_dict()}")
print(f"exclusive group:   {label.exclusive().group}")

# The geometric mean of the relative sizes is what the small-object rule
# tests, so very elongated boxes do not trip it on one axis alone.
geomean = (stats.avg_object_width_pct * stats.avg_object_height_pct) ** 0.5
print(f"size geomean:      {geomean:.2f}% (small-object cutoff is 5%)")
