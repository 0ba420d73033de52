"""Umbrella command-line interface.

Subcommands: ``stats`` (dataset statistics + regime), ``eval`` (COCO-style
AP), ``corpus`` (multi-dataset leaderboard), ``anchors`` (anchor
re-clustering), ``template`` (training-plan instantiation), ``serve``
(controller sidecar). Exit codes: 0 success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .anchors import DISTANCES, assign_to_heads, cluster_details, collect_box_dims
from .coco import classify_regime, compute_stats, parse_coco, stats_from_splits
from .corpus import parse_corpus, render_leaderboard
from .errors import DetagnosticError
from .evaluation import AP_MODES, coco_map, parse_detections
from .sidecar import make_tcp_server, serve_stdio
from .templates import TEMPLATE_NAMES, builtin_templates, get_template, instantiate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        resolution = (int(w), int(h))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected WIDTHxHEIGHT (e.g. 864x864), got {text!r}"
        ) from None
    if resolution[0] <= 0 or resolution[1] <= 0:
        raise argparse.ArgumentTypeError("resolution must be positive")
    return resolution


def _print_json(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _fmt(value: float | None, suffix: str = "") -> str:
    return "n/a" if value is None else f"{value:.1f}{suffix}"


def cmd_stats(args) -> int:
    name = args.name or Path(args.annotations).stem
    train = parse_coco(_read(args.annotations), split="train", name=name)
    if args.val_annotations:
        val = parse_coco(_read(args.val_annotations), split="val", name=name)
        stats = stats_from_splits(train, val)
    else:
        stats = compute_stats(train)
    label = classify_regime(stats)
    if args.json:
        _print_json(
            {
                "name": name,
                "stats": stats.to_dict(),
                "regime": label.to_dict(),
                "regime_group": label.exclusive().group,
            }
        )
        return EXIT_OK
    flags = label.to_dict()
    print(f"dataset: {name}")
    print(f"classes: {stats.num_classes}")
    print(f"train images: {stats.num_train_images}")
    print(f"val images: {stats.num_val_images}")
    print(
        "avg object size (w x h): "
        f"{_fmt(stats.avg_object_width_pct, '%')} x {_fmt(stats.avg_object_height_pct, '%')}"
    )
    boxes = stats.boxes_per_image_mean
    print(f"boxes per image: {'n/a' if boxes is None else f'{boxes:.2f}'}")
    active = ", ".join(k for k, v in flags.items() if v) or "none"
    print(f"regime flags: {active}")
    print(f"regime group: {label.exclusive().group}")
    return EXIT_OK


def cmd_eval(args) -> int:
    index = parse_coco(_read(args.gt), split=args.split, name=Path(args.gt).stem)
    detections = parse_detections(_read(args.dets))
    result = coco_map(detections, index, split=args.split, mode=args.mode)
    if result.ap_50_95 is None:
        raise DetagnosticError("no ground-truth classes in the requested split")
    if args.json:
        _print_json(result.to_dict(per_class=args.per_class))
        return EXIT_OK
    print(f"AP@[0.50:0.95]: {result.ap_50_95:.4f}")
    for threshold in sorted(result.per_threshold):
        per = result.per_threshold[threshold]
        mean = sum(per.values()) / len(per)
        print(f"  AP@{threshold:.2f}: {mean:.4f}")
    if args.per_class:
        for cat, ap in sorted(result.per_class.items()):
            label = index.category_by_id[cat].name
            print(f"  class {label}: {ap:.4f}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    records = parse_corpus(_read(args.records))
    print(render_leaderboard(records, as_json=args.json))
    return EXIT_OK


def cmd_anchors(args) -> int:
    index = parse_coco(_read(args.annotations), split="train")
    dims = collect_box_dims(index, args.resolution)
    anchor_set, trace = cluster_details(
        dims, args.k, distance=args.distance, seed=args.seed
    )
    if args.heads > 1:
        anchor_set = assign_to_heads(anchor_set, args.heads)
    if args.json:
        _print_json({**anchor_set.to_dict(), "iterations": trace.n_iterations})
        return EXIT_OK
    print(f"k={anchor_set.k} anchors at {args.resolution[0]}x{args.resolution[1]}:")
    for w, h in anchor_set.anchors:
        print(f"  {w:8.2f} x {h:8.2f}")
    print(f"mean best IoU: {anchor_set.quality:.4f}")
    print(f"converged in {trace.n_iterations} iterations")
    return EXIT_OK


def cmd_template(args) -> int:
    if args.list:
        for template in builtin_templates():
            w, h = template.input_resolution
            print(
                f"{template.name}  regime={template.regime}  "
                f"resolution={w}x{h}  gflops={template.gflops}"
            )
        return EXIT_OK
    if not args.name or not args.annotations:
        print(
            "error: --name and --annotations are required unless --list is given",
            file=sys.stderr,
        )
        return EXIT_USAGE
    template = get_template(args.name)
    index = parse_coco(
        _read(args.annotations), split="train", name=Path(args.annotations).stem
    )
    plan = instantiate(template, index)
    text = json.dumps(plan.to_dict(), indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"wrote plan to {args.output}")
    else:
        print(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    if args.port is not None:
        try:
            server = make_tcp_server(args.host, args.port, snapshot_dir=args.snapshot_dir)
        except OSError as e:
            print(f"detagnostic: cannot bind {args.host}:{args.port}: {e}", file=sys.stderr)
            return EXIT_DATA
        with server:
            try:
                server.serve_forever()
            except KeyboardInterrupt:
                pass
        return EXIT_OK
    return serve_stdio(snapshot_dir=args.snapshot_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detagnostic",
        description="Dataset-agnostic detection training toolkit.",
    )
    parser.add_argument(
        "--version", action="version", version=f"detagnostic {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics and regime labels")
    p.add_argument("--annotations", required=True, help="COCO train annotations file")
    p.add_argument("--val-annotations", help="COCO val annotations file")
    p.add_argument("--name", help="dataset display name (default: file stem)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="COCO-style AP of a detections file")
    p.add_argument("--gt", required=True, help="COCO annotations file")
    p.add_argument("--dets", required=True, help="COCO results JSON array")
    p.add_argument("--split", default="val", choices=("train", "val", "test"))
    p.add_argument("--mode", default="coco101", choices=AP_MODES)
    p.add_argument("--per-class", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("corpus", help="multi-dataset leaderboard")
    p.add_argument("--records", required=True, help="corpus results JSON file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("anchors", help="re-cluster anchors for a dataset")
    p.add_argument("--annotations", required=True, help="COCO train annotations file")
    p.add_argument("--k", type=int, required=True, help="number of anchors")
    p.add_argument("--distance", default="iou", choices=DISTANCES)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--heads", type=int, default=1, help="split anchors over N heads")
    p.add_argument(
        "--resolution",
        type=_parse_resolution,
        default=(864, 864),
        help="target WIDTHxHEIGHT (default 864x864)",
    )
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("template", help="instantiate a training plan")
    p.add_argument("--name", choices=TEMPLATE_NAMES, help="template name")
    p.add_argument("--annotations", help="COCO train annotations file")
    p.add_argument("-o", "--output", help="write the plan JSON here")
    p.add_argument("--list", action="store_true", help="list builtin templates")
    p.set_defaults(func=cmd_template)

    p = sub.add_parser("serve", help="controller sidecar (NDJSON protocol)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--stdio", action="store_true", help="serve one stdio session (default)")
    mode.add_argument("--port", type=int, help="serve TCP sessions on this port")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--snapshot-dir", help="flush session snapshots here on close")
    p.set_defaults(func=cmd_serve)

    return parser


def entrypoint(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as e:
        print(f"detagnostic: {e}", file=sys.stderr)
        return EXIT_DATA
    except DetagnosticError as e:
        print(f"detagnostic: {e}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(entrypoint())


if __name__ == "__main__":
    main()
