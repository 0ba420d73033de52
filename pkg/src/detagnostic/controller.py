"""Adaptive training controller: ReduceOnPlateau + Early Stopping where every
trigger is gated by both an epoch patience and an iteration patience.

Epoch counts alone are a poor plateau signal when datasets differ wildly in
iterations per epoch: a small dataset burns through its epoch patience after
only a handful of optimizer steps. Each trigger therefore requires both a
minimum number of non-improving epochs and a minimum number of iterations
accumulated since the last improvement. Setting the iteration patiences to
zero recovers the classic epoch-only behavior exactly.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, replace

from .errors import LifecycleError, SequencingError, SnapshotError, ValidationError

SNAPSHOT_VERSION = 1

ACTION_CONTINUE = "continue"
ACTION_REDUCE_LR = "reduce_lr"
ACTION_STOP = "stop"


@dataclass(frozen=True)
class ControllerConfig:
    """Plateau/stop thresholds.

    The documented convention is ``stop_patience >= lr_patience`` so that
    LR reductions fire before stopping; violating it is allowed but warned
    about. Improvement means the metric exceeds the best seen by strictly
    more than ``min_delta``.
    """

    metric_mode: str = "max"
    min_delta: float = 1e-4
    lr_patience: int = 3
    lr_iteration_patience: int = 0
    lr_factor: float = 0.1
    min_lr: float = 1e-6
    stop_patience: int = 8
    stop_iteration_patience: int = 0
    warmup_epochs: int = 0

    def __post_init__(self):
        if self.metric_mode != "max":
            raise ValidationError("only metric_mode='max' is supported")
        if not (0.0 < self.lr_factor < 1.0):
            raise ValidationError(f"lr_factor must be in (0, 1), got {self.lr_factor}")
        for field in ("lr_patience", "lr_iteration_patience", "stop_patience",
                      "stop_iteration_patience", "warmup_epochs"):
            if getattr(self, field) < 0:
                raise ValidationError(f"{field} must be non-negative")
        if self.min_delta < 0:
            raise ValidationError("min_delta must be non-negative")
        if self.min_lr < 0:
            raise ValidationError("min_lr must be non-negative")
        if self.stop_patience < self.lr_patience:
            warnings.warn(
                "stop_patience < lr_patience: stopping may preempt LR reductions",
                stacklevel=2,
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ControllerConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class EpochReport:
    """What the trainer reports after each validation pass."""

    epoch: int
    iterations_in_epoch: int
    val_metric: float
    current_lr: float

    def __post_init__(self):
        if self.epoch < 1:
            raise ValidationError(f"epoch index starts at 1, got {self.epoch}")
        if self.iterations_in_epoch < 1:
            raise ValidationError("iterations_in_epoch must be at least 1")
        if not (0.0 <= self.val_metric <= 1.0) or not math.isfinite(self.val_metric):
            raise ValidationError(f"val_metric must be in [0, 1], got {self.val_metric}")
        if self.current_lr <= 0:
            raise ValidationError(f"current_lr must be positive, got {self.current_lr}")


@dataclass(frozen=True)
class ControllerState:
    """Plateau bookkeeping between epochs. Stopped is absorbing."""

    best_metric: float | None = None
    best_epoch: int | None = None
    epochs_since_improve: int = 0
    iters_since_improve: int = 0
    current_lr: float | None = None
    reductions_applied: int = 0
    stopped: bool = False
    last_epoch: int = 0


@dataclass(frozen=True)
class Decision:
    """Controller verdict for one epoch."""

    action: str
    best_metric: float
    should_checkpoint: bool
    new_lr: float | None = None


def observe_epoch(
    state: ControllerState, config: ControllerConfig, report: EpochReport
) -> tuple[ControllerState, Decision]:
    """Fold one epoch report into the state and emit a decision.

    An improving epoch resets both patience counters and requests a
    checkpoint. A non-improving epoch advances the counters, then checks
    stopping before LR reduction; each trigger requires both its epoch and
    its iteration threshold. Warmup epochs are exempt from counting.
    """
    if state.stopped:
        raise LifecycleError("controller already stopped; no further observations")
    if report.epoch != state.last_epoch + 1:
        raise SequencingError(
            f"expected epoch {state.last_epoch + 1}, got {report.epoch}"
        )

    improved = state.best_metric is None or (
        report.val_metric > state.best_metric + config.min_delta
    )
    if improved:
        new_state = replace(
            state,
            best_metric=report.val_metric,
            best_epoch=report.epoch,
            epochs_since_improve=0,
            iters_since_improve=0,
            current_lr=report.current_lr,
            last_epoch=report.epoch,
        )
        return new_state, Decision(
            action=ACTION_CONTINUE,
            best_metric=report.val_metric,
            should_checkpoint=True,
        )

    best = state.best_metric
    if report.epoch <= config.warmup_epochs:
        new_state = replace(
            state, current_lr=report.current_lr, last_epoch=report.epoch
        )
        return new_state, Decision(
            action=ACTION_CONTINUE, best_metric=best, should_checkpoint=False
        )

    epochs_since = state.epochs_since_improve + 1
    iters_since = state.iters_since_improve + report.iterations_in_epoch

    if epochs_since >= config.stop_patience and iters_since >= config.stop_iteration_patience:
        new_state = replace(
            state,
            epochs_since_improve=epochs_since,
            iters_since_improve=iters_since,
            current_lr=report.current_lr,
            stopped=True,
            last_epoch=report.epoch,
        )
        return new_state, Decision(
            action=ACTION_STOP, best_metric=best, should_checkpoint=False
        )

    if (
        epochs_since >= config.lr_patience
        and iters_since >= config.lr_iteration_patience
        and report.current_lr > config.min_lr
    ):
        new_lr = max(report.current_lr * config.lr_factor, config.min_lr)
        new_state = replace(
            state,
            epochs_since_improve=0,
            iters_since_improve=0,
            current_lr=new_lr,
            reductions_applied=state.reductions_applied + 1,
            last_epoch=report.epoch,
        )
        return new_state, Decision(
            action=ACTION_REDUCE_LR,
            best_metric=best,
            should_checkpoint=False,
            new_lr=new_lr,
        )

    new_state = replace(
        state,
        epochs_since_improve=epochs_since,
        iters_since_improve=iters_since,
        current_lr=report.current_lr,
        last_epoch=report.epoch,
    )
    return new_state, Decision(
        action=ACTION_CONTINUE, best_metric=best, should_checkpoint=False
    )


def snapshot(state: ControllerState) -> str:
    """Serialize state to a versioned JSON document."""
    return json.dumps({"v": SNAPSHOT_VERSION, **asdict(state)}, sort_keys=True)


def restore(serialized: str | bytes) -> ControllerState:
    """Inverse of :func:`snapshot`; raises :class:`SnapshotError` on bad input."""
    try:
        data = json.loads(serialized)
    except json.JSONDecodeError as e:
        raise SnapshotError(f"snapshot is not valid JSON: {e.msg}") from e
    if not isinstance(data, dict):
        raise SnapshotError("snapshot must be a JSON object")
    version = data.pop("v", None)
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {version!r}")
    fields = set(ControllerState.__dataclass_fields__)
    if set(data) != fields:
        raise SnapshotError(
            f"snapshot fields mismatch: missing {sorted(fields - set(data))}, "
            f"unexpected {sorted(set(data) - fields)}"
        )
    return ControllerState(**data)


class TrainingController:
    """Stateful convenience wrapper around :func:`observe_epoch`.

    Single-writer: observations must be applied sequentially. Distinct
    instances are independent.
    """

    def __init__(self, config: ControllerConfig | None = None,
                 state: ControllerState | None = None):
        self.config = config or ControllerConfig()
        self.state = state or ControllerState()

    def observe(self, report: EpochReport) -> Decision:
        self.state, decision = observe_epoch(self.state, self.config, report)
        return decision

    @property
    def stopped(self) -> bool:
        return self.state.stopped

    def to_json(self) -> str:
        """Session snapshot: config plus state, resumable across processes."""
        return json.dumps(
            {
                "v": SNAPSHOT_VERSION,
                "config": self.config.to_dict(),
                "state": json.loads(snapshot(self.state)),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, serialized: str | bytes) -> "TrainingController":
        try:
            data = json.loads(serialized)
        except json.JSONDecodeError as e:
            raise SnapshotError(f"snapshot is not valid JSON: {e.msg}") from e
        if not isinstance(data, dict) or data.get("v") != SNAPSHOT_VERSION:
            raise SnapshotError("unsupported session snapshot")
        try:
            config = ControllerConfig.from_dict(data["config"])
            state = restore(json.dumps(data["state"]))
        except (KeyError, TypeError, ValidationError) as e:
            raise SnapshotError(f"malformed session snapshot: {e}") from e
        return cls(config=config, state=state)
