"""Speak the sidecar protocol: the controller behind one JSON line per epoch.

A training process does not import this library; it runs
``detagnostic serve --stdio`` and exchanges newline-delimited JSON. This
demo drives a Session object directly so the raw wire traffic is visible.
The subprocess form is identical, line for line.
"""

import json

from detagnostic import Session

session = Session()


def exchange(payload):
    request = json.dumps(payload, sort_keys=True)
    response = session.handle_line(request)
    print(f">> {request}")
    print(f"<< {response}")
    return json.loads(response)


# 1) hello resolves the controller config; a template name is enough.
exchange({"kind": "hello", "template": "ssd-mobilenetv2"})

# 2) One epoch_end per epoch. The tape improves twice and then plateaus;
# the trainer reports its current lr and obeys what comes back.
lr = 0.01
tape = [0.30, 0.42, 0.42, 0.42, 0.42]
for epoch, val_ap in enumerate(tape, start=1):
    decision = exchange({
        "kind": "epoch_end", "epoch": epoch, "iterations": 40,
        "val_ap": val_ap, "lr": lr,
    })
    if decision["action"] == "reduce_lr":
        lr = decision["new_lr"]

# 3) Malformed requests get one error line each and do not advance or
# poison the session; the error names the offending field.
exchange({"kind": "epoch_end", "epoch": "six", "iterations": 40,
          "val_ap": 0.42, "lr": lr})

# 4) A snapshot is a restorable state document, useful before preemption.
exchange({"kind": "snapshot_request"})

# 5) bye closes the session cleanly.
exchange({"kind": "bye"})

print()
print("the same conversation over a subprocess:")
print("    detagnostic serve --stdio")
print("and the reference trainer-side client:")
print("    python -m detagnostic_adapter --curve plateau_after:5 "
      "--iters 10 --server ./detagnostic")
