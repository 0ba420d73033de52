"""Synthetic validation-AP curves used as training-loop stimuli.

A curve spec deterministically expands into a per-epoch metric tape, so a
mock training run is reproducible from (spec, controller config) alone.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

PATTERNS = ("improving", "plateau_after", "noisy", "step_every")

# the tape ramps linearly inside this band and is clamped to it
_FLOOR = 0.1
_CEIL = 0.9


class CurveError(ValueError):
    """Malformed curve specification."""


@dataclass(frozen=True)
class CurveSpec:
    """One synthetic metric curve.

    ``param`` is the pattern's argument: the last improving epoch for
    ``plateau_after``, the noise sigma for ``noisy``, the improvement
    period for ``step_every``; ``improving`` takes none.
    """

    pattern: str
    param: float | None = None
    iterations_per_epoch: int = 10
    max_epochs: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise CurveError(
                f"pattern must be one of {PATTERNS}, got {self.pattern!r}"
            )
        if self.max_epochs < 1:
            raise CurveError("max_epochs must be >= 1")
        if self.iterations_per_epoch < 1:
            raise CurveError("iterations_per_epoch must be >= 1")
        if self.pattern == "improving":
            if self.param is not None:
                raise CurveError("improving takes no parameter")
        elif self.param is None:
            raise CurveError(f"{self.pattern} requires a parameter")
        elif self.pattern in ("plateau_after", "step_every"):
            if self.param != int(self.param) or self.param < 1:
                raise CurveError(f"{self.pattern} parameter must be an integer >= 1")
        elif self.pattern == "noisy" and not self.param > 0:
            raise CurveError("noisy sigma must be > 0")

    def _ramp(self, epoch: int) -> float:
        return _FLOOR + (_CEIL - _FLOOR) * epoch / self.max_epochs

    def tape(self) -> tuple[float, ...]:
        """The full metric sequence, one value per epoch."""
        rng = random.Random(self.seed)
        values = []
        for epoch in range(1, self.max_epochs + 1):
            if self.pattern == "improving":
                value = self._ramp(epoch)
            elif self.pattern == "plateau_after":
                value = self._ramp(min(epoch, int(self.param)))
            elif self.pattern == "step_every":
                period = int(self.param)
                value = self._ramp(period * (epoch // period))
            else:
                value = self._ramp(epoch) + rng.gauss(0.0, self.param)
            values.append(min(_CEIL, max(0.0, value)))
        return tuple(values)


def parse_curve(text: str, iterations_per_epoch: int = 10,
                max_epochs: int = 30, seed: int = 0) -> CurveSpec:
    """Parse the CLI form ``pattern`` or ``pattern:param``."""
    pattern, sep, raw = text.partition(":")
    param = None
    if sep:
        try:
            param = float(raw)
        except ValueError:
            raise CurveError(f"curve parameter must be numeric, got {raw!r}")
    return CurveSpec(
        pattern=pattern,
        param=param,
        iterations_per_epoch=iterations_per_epoch,
        max_epochs=max_epochs,
        seed=seed,
    )
