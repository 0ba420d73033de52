"""Resolve a model template against a dataset into a full training plan.

A template commits to an architecture, input resolution, augmentation,
and scheduler defaults. Instantiating it against a dataset fills in the
data-dependent parts (statistics, re-clustered anchors) and yields a
self-contained, serializable plan.
"""

import json
import random

from detagnostic import (
    builtin_templates,
    get_template,
    instantiate,
    parse_coco,
    resize_geometry,
)

# The three built-in templates trade accuracy against compute.
print("available templates:")
for template in builtin_templates():
    w, h = template.input_resolution
    tricks = ", ".join(sorted(template.tricks)) or "none"
    print(f"    {template.name:18s} {template.regime:8s} {w}x{h:4d} "
          f"{template.gflops:7.2f} GFLOPs  tricks: {tricks}")

# A small synthetic dataset to instantiate against.
rng = random.Random(3)
images = [{"id": i, "width": 800, "height": 600} for i in range(1, 31)]
annotations = []
for image in images:
    for _ in range(rng.randint(2, 6)):
        w, h = rng.uniform(20, 70), rng.uniform(25, 80)
        annotations.append({
            "id": len(annotations) + 1, "image_id": image["id"],
            "category_id": 1,
            "bbox": [rng.uniform(0, 800 - w), rng.uniform(0, 600 - h), w, h],
        })
index = parse_coco(
    json.dumps({"images": images, "categories": [{"id": 1, "name": "part"}],
                "annotations": annotations}),
    split="train", name="parts",
)

# The SSD template carries an anchor policy, so instantiation runs the
# KMeans re-clustering at the template's input resolution.
plan = instantiate(get_template("ssd-mobilenetv2"), index)
print(f"\nplan for {plan.dataset_name!r} with {plan.template_name}:")
print(f"    input resolution: {plan.input_resolution}")
print(f"    anchors ({plan.anchors.k}, quality {plan.anchors.quality:.3f}):")
for group_index, group in enumerate(plan.anchors.head_groups, start=1):
    sizes = ", ".join(f"{w:.0f}x{h:.0f}" for w, h in group)
    print(f"        head {group_index}: {sizes}")
print(f"    scheduler: lr_patience={plan.scheduler.lr_patience}, "
      f"lr_iteration_patience={plan.scheduler.lr_iteration_patience}")

# Plans round-trip through JSON, so the training job needs no dataset
# access to reproduce the exact configuration.
restored_resolution = json.loads(plan.to_json())["input_resolution"]
print(f"    round-trips through JSON (resolution {restored_resolution})")

# resize_geometry gives the per-axis scale factors onto the template
# resolution; multiscale templates accept any of their listed scales.
vfnet = get_template("vfnet-resnet50")
fx, fy = resize_geometry((800, 600), vfnet)
print(f"\n800x600 onto {vfnet.name} base scale: x{fx:.2f} / x{fy:.2f}")
fx, fy = resize_geometry((800, 600), vfnet, scale=vfnet.multiscale[0])
print(f"800x600 onto its smallest train scale: x{fx:.2f} / x{fy:.2f}")
