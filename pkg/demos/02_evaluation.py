"""Score detections with COCO-style average precision.

AP@[0.5:0.95] is the mean over ten IoU thresholds of the area under an
interpolated precision/recall curve, averaged over classes. The demo
scores a perfect submission, then degrades it step by step to show how
the metric responds.
"""

import json
import random

from detagnostic import (
    BoundingBox,
    Detection,
    coco_map,
    iou,
    parse_coco,
)

rng = random.Random(7)

images = [{"id": i, "width": 640, "height": 480} for i in (1, 2, 3)]
categories = [{"id": 1, "name": "vehicle"}]
annotations = []
for image in images:
    for _ in range(3):
        w, h = rng.uniform(50, 120), rng.uniform(40, 100)
        annotations.append({
            "id": len(annotations) + 1,
            "image_id": image["id"],
            "category_id": 1,
            "bbox": [rng.uniform(0, 640 - w), rng.uniform(0, 480 - h), w, h],
        })
index = parse_coco(
    json.dumps({"images": images, "categories": categories,
                "annotations": annotations}),
    split="val", name="traffic",
)

def detections_from(boxes, score=0.9):
    return [Detection(a["image_id"], 1, BoundingBox(*box), score)
            for a, box in zip(annotations, boxes)]

# 1) Echo the ground truth exactly: every threshold is satisfied.
exact = detections_from([a["bbox"] for a in annotations])
print(f"perfect submission:   AP@[0.5:0.95] = "
      f"{coco_map(exact, index, split='val').ap_50_95:.3f}")

# 2) Shift every box by a third of its width. IoU drops to ~0.5, so the
# strict thresholds (0.75+) stop matching while the loose ones still do.
shifted = detections_from([
    [a["bbox"][0] + a["bbox"][2] / 3, a["bbox"][1], a["bbox"][2], a["bbox"][3]]
    for a in annotations
])
result = coco_map(shifted, index, split="val")
sample = annotations[0]["bbox"]
overlap = iou(BoundingBox(*sample),
              BoundingBox(sample[0] + sample[2] / 3, sample[1],
                          sample[2], sample[3]))
print(f"shifted by w/3:       AP@[0.5:0.95] = {result.ap_50_95:.3f} "
      f"(each pair overlaps at IoU {overlap:.3f})")
for threshold in (0.5, 0.75, 0.95):
    per_class = result.per_threshold[threshold]
    print(f"    AP@{threshold:.2f} = {per_class[1]:.3f}")

# 3) Add confident false positives: precision collapses at every recall
# level even though all true boxes are still found.
noisy = exact + [
    Detection(1, 1, BoundingBox(500, 400, 60, 50), 1.0),
    Detection(2, 1, BoundingBox(10, 10, 40, 40), 1.0),
]
print(f"with 2 confident FPs: AP@[0.5:0.95] = "
      f"{coco_map(noisy, index, split='val').ap_50_95:.3f}")

# 4) The same FPs at low confidence cost almost nothing: they rank last,
# and the curve up to full recall is unchanged.
timid = exact + [
    Detection(1, 1, BoundingBox(500, 400, 60, 50), 0.05),
    Detection(2, 1, BoundingBox(10, 10, 40, 40), 0.05),
]
print(f"with 2 timid FPs:     AP@[0.5:0.95] = "
      f"{coco_map(timid, index, split='val').ap_50_95:.3f}")
