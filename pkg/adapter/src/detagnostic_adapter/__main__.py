"""Mock training loop demonstrating sidecar integration.

Example::

    python -m detagnostic_adapter --curve plateau_after:5 --iters 10 \\
        --server ./detagnostic
"""

import argparse
import json
import sys

from .client import AdapterError, ProtocolError, ServerCrashError, run_session
from .curves import CurveError, parse_curve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detagnostic_adapter",
        description="drive a synthetic training curve against a detagnostic sidecar",
    )
    parser.add_argument(
        "--curve", required=True,
        help="pattern[:param], e.g. improving, plateau_after:5, noisy:0.05, step_every:4",
    )
    parser.add_argument("--iters", type=int, default=10,
                        help="iterations per epoch (default 10)")
    parser.add_argument("--epochs", type=int, default=30,
                        help="maximum epochs (default 30)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--server", default="detagnostic",
                        help="sidecar executable (default: detagnostic on PATH)")
    parser.add_argument("--template", help="hello with this model template")
    parser.add_argument("--config", help="hello with this controller config (JSON)")
    parser.add_argument("--lr0", type=float, default=0.01)
    parser.add_argument("--json", action="store_true",
                        help="dump the transcript and outcome as JSON")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        curve = parse_curve(args.curve, iterations_per_epoch=args.iters,
                            max_epochs=args.epochs, seed=args.seed)
    except CurveError as e:
        print(f"detagnostic_adapter: {e}", file=sys.stderr)
        return 2
    config = None
    if args.config is not None:
        try:
            config = json.loads(args.config)
        except json.JSONDecodeError as e:
            print(f"detagnostic_adapter: --config is not valid JSON: {e.msg}",
                  file=sys.stderr)
            return 2
    try:
        result = run_session(curve, args.server, config=config,
                             template=args.template, lr0=args.lr0)
    except ServerCrashError as e:
        print(f"detagnostic_adapter: {e}", file=sys.stderr)
        if e.stderr.strip():
            print(e.stderr.rstrip(), file=sys.stderr)
        return 3
    except (ProtocolError, AdapterError, OSError) as e:
        print(f"detagnostic_adapter: {e}", file=sys.stderr)
        return 1

    if args.json:
        print(json.dumps({
            "transcript": [
                {"request": e.request, "response": e.response}
                for e in result.transcript
            ],
            "outcome": {
                "stopped_at": result.outcome.stopped_at,
                "lr_history": list(result.outcome.lr_history),
                "best_metric": result.outcome.best_metric,
                "epochs_run": result.outcome.epochs_run,
            },
        }, sort_keys=True))
        return 0

    for entry in result.decisions():
        request, response = entry.request, entry.response
        note = response["action"]
        if response["action"] == "reduce_lr":
            note = f"reduce_lr to {response['new_lr']:g}"
        elif response.get("should_checkpoint"):
            note = "continue (checkpoint)"
        print(f"epoch {request['epoch']:3d}  val_ap {request['val_ap']:.4f}"
              f"  lr {request['lr']:g}  -> {note}")
    outcome = result.outcome
    ending = (f"stopped at epoch {outcome.stopped_at}"
              if outcome.stopped_at else "ran the full curve")
    best = "n/a" if outcome.best_metric is None else f"{outcome.best_metric:.4f}"
    print(f"session: {outcome.epochs_run} epochs, "
          f"{len(outcome.lr_history)} lr reduction(s), best {best}, {ending}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
