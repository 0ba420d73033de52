"""Drive the plateau controller through a stalling training run.

Classic ReduceOnPlateau and EarlyStopping count stale *epochs*, which
punishes small datasets where an epoch is only a handful of iterations.
This controller additionally requires a stale *iteration* budget before
acting, so the same patience setting behaves consistently across dataset
sizes.
"""

from detagnostic import (
    ControllerConfig,
    EpochReport,
    TrainingController,
    restore,
    snapshot,
)

# A run that improves early, then stalls, with one late recovery.
tape = [0.20, 0.31, 0.38, 0.38, 0.38, 0.38, 0.38, 0.38,
        0.45, 0.45, 0.45, 0.45, 0.45, 0.45, 0.45, 0.45, 0.45, 0.45]


def drive(config, iterations_per_epoch, verbose=True):
    controller = TrainingController(config)
    lr = 0.01
    for epoch, val_ap in enumerate(tape, start=1):
        decision = controller.observe(
            EpochReport(epoch, iterations_per_epoch, val_ap, lr)
        )
        note = decision.action
        if decision.action == "reduce_lr":
            lr = decision.new_lr
            note = f"reduce_lr -> {lr:g}"
        elif decision.should_checkpoint:
            note = "continue + checkpoint"
        if verbose:
            print(f"    epoch {epoch:2d}  val_ap {val_ap:.2f}  {note}")
        if decision.action == "stop":
            return epoch
    return None


# 1) Reduce-on-plateau: two stale epochs trigger a reduction, and each
# reduction resets the staleness counter, so reductions fire every other
# stale epoch until the metric improves again.
print("reduce on plateau (lr_patience=2):")
reducer = ControllerConfig(lr_patience=2, stop_patience=8)
drive(reducer, iterations_per_epoch=200)
print()

# 2) Early stopping on a tiny dataset: 5 iterations per epoch. The lr is
# pinned (min_lr equals the initial rate), so staleness accrues straight
# toward the stop patience and training dies one epoch before the
# recovery at epoch 9.
print("classic early stopping (stop_patience=5, tiny epochs):")
classic = ControllerConfig(lr_patience=2, stop_patience=5, min_lr=0.01)
stopped = drive(classic, iterations_per_epoch=5)
print(f"    -> stopped at epoch {stopped}, one epoch before the recovery\n")

# The same epoch patience, but stopping also waits for 100 stale
# iterations. At 5 iterations per epoch that is 20 epochs of slack, so
# the run survives to the 0.45 recovery.
print("iteration-aware early stopping (same patience + 100-iteration floor):")
patient = ControllerConfig(lr_patience=2, lr_iteration_patience=100,
                           stop_patience=5, stop_iteration_patience=100,
                           min_lr=0.01)
stopped = drive(patient, iterations_per_epoch=5, verbose=False)
print(f"    -> stopped at epoch {stopped} (None = ran the whole tape)\n")

# 3) Controller state is a small JSON document, so a training job can be
# preempted and resumed without replaying its history.
controller = TrainingController(patient)
for epoch, val_ap in enumerate(tape[:6], start=1):
    controller.observe(EpochReport(epoch, 5, val_ap, 0.01))
saved = snapshot(controller.state)
print(f"snapshot after epoch 6: {saved}")

resumed = TrainingController(patient, state=restore(saved))
decision = resumed.observe(EpochReport(7, 5, tape[6], 0.01))
print(f"resumed controller continues at epoch 7: action={decision.action}, "
      f"best={decision.best_metric}")
