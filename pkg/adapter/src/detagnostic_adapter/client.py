"""Stdio client for the sidecar protocol.

Spawns ``<server> serve --stdio``, walks a synthetic curve through
hello -> epoch_end ... -> bye, and obeys the decisions: a ``reduce_lr``
updates the reported learning rate, a ``stop`` ends the loop. The raw
request and response lines are kept verbatim so transcripts can be compared
byte-for-byte against another implementation.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from typing import Sequence

from .curves import CurveSpec


class AdapterError(Exception):
    """Base class for client-side failures."""


class ProtocolError(AdapterError):
    """The server replied with an error or an unreadable line."""


class ServerCrashError(AdapterError):
    """The server process died mid-session."""

    def __init__(self, returncode: int | None, stderr: str):
        super().__init__(
            f"server exited with code {returncode}"
            + (f": {stderr.strip()}" if stderr.strip() else "")
        )
        self.returncode = returncode
        self.stderr = stderr


@dataclass(frozen=True)
class Exchange:
    """One request/response pair, parsed and as raw wire lines."""

    request: dict
    request_line: str
    response: dict
    response_line: str


@dataclass(frozen=True)
class SessionOutcome:
    stopped_at: int | None
    lr_history: tuple[float, ...]
    best_metric: float | None
    epochs_run: int


@dataclass(frozen=True)
class SessionResult:
    transcript: tuple[Exchange, ...]
    outcome: SessionOutcome

    def decisions(self) -> tuple[Exchange, ...]:
        return tuple(
            e for e in self.transcript if e.request.get("kind") == "epoch_end"
        )


def _crash(proc: subprocess.Popen) -> ServerCrashError:
    try:
        proc.stdin.close()
    except OSError:
        pass
    try:
        proc.wait(timeout=10)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait()
    stderr = proc.stderr.read() if proc.stderr else ""
    return ServerCrashError(proc.returncode, stderr)


def _exchange(proc: subprocess.Popen, transcript: list, payload: dict) -> dict:
    line = json.dumps(payload, sort_keys=True)
    try:
        proc.stdin.write(line + "\n")
        proc.stdin.flush()
    except (BrokenPipeError, OSError):
        raise _crash(proc) from None
    reply = proc.stdout.readline()
    if reply == "":
        raise _crash(proc)
    reply = reply.rstrip("\n")
    try:
        parsed = json.loads(reply)
    except json.JSONDecodeError:
        raise ProtocolError(f"server sent a non-JSON line: {reply!r}")
    if not isinstance(parsed, dict):
        raise ProtocolError(f"server sent a non-object line: {reply!r}")
    transcript.append(Exchange(payload, line, parsed, reply))
    if parsed.get("kind") == "error":
        raise ProtocolError(
            f"{parsed.get('code', 'unknown')}: {parsed.get('message', '')}"
        )
    return parsed


def run_session(
    curve: CurveSpec,
    server: str | Sequence[str],
    config: dict | None = None,
    template: str | None = None,
    lr0: float = 0.01,
) -> SessionResult:
    """Drive one full mock training session against a server command.

    ``server`` is the sidecar executable (or argv prefix); ``serve --stdio``
    is appended. ``config``/``template`` are forwarded in the hello.
    """
    if config is not None and template is not None:
        raise AdapterError("config and template are mutually exclusive")
    argv = list(server) if not isinstance(server, str) else [server]
    argv += ["serve", "--stdio"]
    hello: dict = {"kind": "hello"}
    if template is not None:
        hello["template"] = template
    if config is not None:
        hello["config"] = dict(config)

    proc = subprocess.Popen(
        argv,
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    transcript: list[Exchange] = []
    try:
        _exchange(proc, transcript, hello)
        lr = lr0
        lr_history: list[float] = []
        stopped_at = None
        best_metric = None
        epochs_run = 0
        for epoch, val_ap in enumerate(curve.tape(), start=1):
            decision = _exchange(proc, transcript, {
                "kind": "epoch_end",
                "epoch": epoch,
                "iterations": curve.iterations_per_epoch,
                "val_ap": val_ap,
                "lr": lr,
            })
            epochs_run = epoch
            best_metric = decision.get("best_metric", best_metric)
            action = decision.get("action")
            if action == "reduce_lr":
                lr = decision["new_lr"]
                lr_history.append(lr)
            elif action == "stop":
                stopped_at = epoch
                break
        _exchange(proc, transcript, {"kind": "bye"})
        proc.stdin.close()
        returncode = proc.wait(timeout=30)
        stderr = proc.stderr.read()
        if returncode != 0:
            raise ServerCrashError(returncode, stderr)
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()
    return SessionResult(
        transcript=tuple(transcript),
        outcome=SessionOutcome(
            stopped_at=stopped_at,
            lr_history=tuple(lr_history),
            best_metric=best_metric,
            epochs_run=epochs_run,
        ),
    )
