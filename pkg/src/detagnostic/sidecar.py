"""Newline-delimited JSON sidecar exposing the training controller.

A training process speaks one session per connection (or one session over
stdio): ``hello`` resolves a controller config, each ``epoch_end`` yields a
``decision`` line, ``snapshot_request`` returns a resumable state document,
``bye`` closes cleanly. Every request line gets exactly one response line,
in order; error responses leave the session open. Blank lines are ignored.

The trainer normally reports ``val_ap`` itself. If ``hello`` carries a
``gt_path``, the session instead accepts a ``dets_path`` per epoch and
computes the metric with the evaluator.
"""

from __future__ import annotations

import json
import socketserver
import sys
import uuid
from pathlib import Path

from . import controller as _controller
from .coco import parse_coco
from .controller import TrainingController
from .errors import (
    AnnotationParseError,
    LifecycleError,
    SequencingError,
    TemplateNotFoundError,
    ValidationError,
)
from .evaluation import coco_map, parse_detections
from .templates import get_template

MAX_LINE_BYTES = 64 * 1024

KINDS = ("hello", "epoch_end", "snapshot_request", "bye")

ERR_BAD_JSON = "bad_json"
ERR_BAD_SCHEMA = "bad_schema"
ERR_BAD_SEQUENCE = "bad_sequence"
ERR_LIFECYCLE = "lifecycle"
ERR_DATA = "data_error"

_HELLO_FIELDS = {"kind", "template", "config", "gt_path", "gt_split"}
_EPOCH_FIELDS = {"kind", "epoch", "iterations", "val_ap", "lr", "dets_path"}


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True)


def _error(code: str, message: str) -> str:
    return _dump({"kind": "error", "code": code, "message": message})


class _Reject(Exception):
    """Internal: carries an error response for the current request line."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def _require_int(msg: dict, field: str, minimum: int) -> int:
    value = msg.get(field)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise _Reject(
            ERR_BAD_SCHEMA, f"epoch_end.{field}: expected integer >= {minimum}"
        )
    return value


def _require_number(msg: dict, field: str) -> float:
    value = msg.get(field)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise _Reject(ERR_BAD_SCHEMA, f"epoch_end.{field}: expected number")
    return float(value)


class Session:
    """One protocol session wrapping one controller.

    Single-writer: feed lines sequentially. ``close`` flushes a state
    snapshot to ``snapshot_dir`` (when configured) and is idempotent; the
    server calls it on ``bye`` and on EOF.
    """

    def __init__(self, snapshot_dir: str | Path | None = None,
                 session_id: str | None = None):
        self.snapshot_dir = None if snapshot_dir is None else Path(snapshot_dir)
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.controller: TrainingController | None = None
        self.closed = False
        self._eval_index = None
        self._eval_split = "val"

    def handle_line(self, line: str | bytes) -> str:
        """Process one request line, return exactly one response line."""
        if self.closed:
            return _error(ERR_LIFECYCLE, "session closed")
        raw = line.encode("utf-8") if isinstance(line, str) else line
        if len(raw) > MAX_LINE_BYTES:
            return _error(
                ERR_BAD_JSON, f"line exceeds {MAX_LINE_BYTES} bytes"
            )
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            return _error(ERR_BAD_JSON, f"line is not valid UTF-8: {e.reason}")
        try:
            msg = json.loads(text)
        except json.JSONDecodeError as e:
            return _error(ERR_BAD_JSON, f"invalid JSON: {e.msg}")
        if not isinstance(msg, dict):
            return _error(ERR_BAD_SCHEMA, "message: expected a JSON object")
        kind = msg.get("kind")
        if kind is None:
            return _error(ERR_BAD_SCHEMA, "kind: required")
        if kind not in KINDS:
            return _error(ERR_BAD_SCHEMA, f"kind: unknown kind {kind!r}")
        try:
            if kind == "hello":
                return self._on_hello(msg)
            if kind == "epoch_end":
                return self._on_epoch_end(msg)
            if kind == "snapshot_request":
                return self._on_snapshot_request()
            return self._on_bye()
        except _Reject as e:
            return _error(e.code, e.message)

    def _on_hello(self, msg: dict) -> str:
        if self.controller is not None:
            if self.controller.stopped:
                raise _Reject(ERR_LIFECYCLE, "training already stopped")
            raise _Reject(ERR_BAD_SEQUENCE, "hello already received")
        unknown = set(msg) - _HELLO_FIELDS
        if unknown:
            raise _Reject(
                ERR_BAD_SCHEMA, f"hello.{sorted(unknown)[0]}: unknown field"
            )
        if "template" in msg and "config" in msg:
            raise _Reject(
                ERR_BAD_SCHEMA, "hello: template and config are mutually exclusive"
            )
        if "template" in msg:
            if not isinstance(msg["template"], str):
                raise _Reject(ERR_BAD_SCHEMA, "hello.template: expected string")
            try:
                config = get_template(msg["template"]).scheduler_defaults
            except TemplateNotFoundError as e:
                raise _Reject(ERR_BAD_SCHEMA, f"hello.template: {e}") from e
        elif "config" in msg:
            if not isinstance(msg["config"], dict):
                raise _Reject(ERR_BAD_SCHEMA, "hello.config: expected object")
            try:
                config = _controller.ControllerConfig.from_dict(msg["config"])
            except (ValidationError, TypeError) as e:
                raise _Reject(ERR_BAD_SCHEMA, f"hello.config: {e}") from e
        else:
            config = _controller.ControllerConfig()
        if "gt_path" in msg:
            if not isinstance(msg["gt_path"], str):
                raise _Reject(ERR_BAD_SCHEMA, "hello.gt_path: expected string")
            split = msg.get("gt_split", "val")
            if not isinstance(split, str):
                raise _Reject(ERR_BAD_SCHEMA, "hello.gt_split: expected string")
            try:
                raw = Path(msg["gt_path"]).read_bytes()
            except OSError as e:
                raise _Reject(ERR_DATA, f"cannot read gt_path: {e}") from e
            try:
                self._eval_index = parse_coco(raw, split=split)
            except (AnnotationParseError, ValidationError) as e:
                raise _Reject(ERR_DATA, f"gt_path: {e}") from e
            self._eval_split = split
        elif "gt_split" in msg:
            raise _Reject(ERR_BAD_SCHEMA, "hello.gt_split: requires gt_path")
        self.controller = TrainingController(config)
        return _dump({"kind": "ack", "config": config.to_dict()})

    def _on_epoch_end(self, msg: dict) -> str:
        if self.controller is None:
            raise _Reject(ERR_BAD_SEQUENCE, "hello must precede epoch_end")
        unknown = set(msg) - _EPOCH_FIELDS
        if unknown:
            raise _Reject(
                ERR_BAD_SCHEMA, f"epoch_end.{sorted(unknown)[0]}: unknown field"
            )
        epoch = _require_int(msg, "epoch", 1)
        iterations = _require_int(msg, "iterations", 1)
        lr = _require_number(msg, "lr")
        if "val_ap" in msg and "dets_path" in msg:
            raise _Reject(
                ERR_BAD_SCHEMA, "epoch_end: val_ap and dets_path are mutually exclusive"
            )
        if "dets_path" in msg:
            val_ap = self._evaluate(msg["dets_path"])
        elif "val_ap" in msg:
            val_ap = _require_number(msg, "val_ap")
        else:
            raise _Reject(ERR_BAD_SCHEMA, "epoch_end.val_ap: required")
        try:
            report = _controller.EpochReport(
                epoch=epoch,
                iterations_in_epoch=iterations,
                val_metric=val_ap,
                current_lr=lr,
            )
        except ValidationError as e:
            raise _Reject(ERR_BAD_SCHEMA, f"epoch_end: {e}") from e
        try:
            decision = self.controller.observe(report)
        except SequencingError as e:
            raise _Reject(ERR_BAD_SEQUENCE, str(e)) from e
        except LifecycleError as e:
            raise _Reject(ERR_LIFECYCLE, str(e)) from e
        payload = {
            "kind": "decision",
            "action": decision.action,
            "best_metric": decision.best_metric,
            "should_checkpoint": decision.should_checkpoint,
        }
        if decision.new_lr is not None:
            payload["new_lr"] = decision.new_lr
        return _dump(payload)

    def _evaluate(self, dets_path) -> float:
        if not isinstance(dets_path, str):
            raise _Reject(ERR_BAD_SCHEMA, "epoch_end.dets_path: expected string")
        if self._eval_index is None:
            raise _Reject(
                ERR_BAD_SCHEMA,
                "epoch_end.dets_path: no gt_path was configured in hello",
            )
        try:
            raw = Path(dets_path).read_bytes()
        except OSError as e:
            raise _Reject(ERR_DATA, f"cannot read dets_path: {e}") from e
        try:
            detections = parse_detections(raw)
            result = coco_map(detections, self._eval_index, split=self._eval_split)
        except (AnnotationParseError, ValidationError) as e:
            raise _Reject(ERR_DATA, f"dets_path: {e}") from e
        if result.ap_50_95 is None:
            raise _Reject(ERR_DATA, "no ground-truth classes to evaluate")
        return result.ap_50_95

    def _on_snapshot_request(self) -> str:
        if self.controller is None:
            raise _Reject(ERR_BAD_SEQUENCE, "hello must precede snapshot_request")
        return _dump(
            {"kind": "snapshot", "snapshot": json.loads(self.controller.to_json())}
        )

    def _on_bye(self) -> str:
        self.close()
        return _dump({"kind": "ack"})

    def close(self) -> None:
        """Mark the session closed and flush a snapshot if configured."""
        if self.closed:
            return
        self.closed = True
        if self.snapshot_dir is not None and self.controller is not None:
            self.snapshot_dir.mkdir(parents=True, exist_ok=True)
            path = self.snapshot_dir / f"{self.session_id}.json"
            path.write_text(self.controller.to_json(), encoding="utf-8")


def handle_line(session: Session, line: str | bytes) -> str:
    """Functional entry point: one request line in, one response line out."""
    return session.handle_line(line)


def _read_line(rfile) -> tuple[bytes | None, bool]:
    """Read one line; returns (line without newline, oversized flag).

    ``None`` means EOF. Oversized lines are drained to the next newline so
    the stream stays synchronized.
    """
    raw = rfile.readline(MAX_LINE_BYTES + 2)
    if raw == b"":
        return None, False
    if len(raw) > MAX_LINE_BYTES + 1 and not raw.endswith(b"\n"):
        while True:
            chunk = rfile.readline(MAX_LINE_BYTES)
            if chunk == b"" or chunk.endswith(b"\n"):
                break
        return raw, True
    return raw.rstrip(b"\r\n"), False


def serve_stream(rfile, wfile, session: Session) -> None:
    """Run one session over binary line streams until EOF."""
    try:
        while True:
            line, oversized = _read_line(rfile)
            if line is None:
                break
            if oversized:
                response = _error(
                    ERR_BAD_JSON, f"line exceeds {MAX_LINE_BYTES} bytes"
                )
            else:
                if not line.strip():
                    continue
                response = session.handle_line(line)
            wfile.write(response.encode("utf-8") + b"\n")
            wfile.flush()
    finally:
        session.close()


def serve_stdio(snapshot_dir: str | Path | None = None) -> int:
    """Serve exactly one session over stdin/stdout; returns exit code 0."""
    session = Session(snapshot_dir=snapshot_dir, session_id=f"stdio-{uuid.uuid4().hex[:12]}")
    serve_stream(sys.stdin.buffer, sys.stdout.buffer, session)
    return 0


class _SidecarServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, snapshot_dir=None):
        self.snapshot_dir = snapshot_dir
        super().__init__(address, _SidecarHandler)


class _SidecarHandler(socketserver.StreamRequestHandler):
    def handle(self):
        session = Session(
            snapshot_dir=self.server.snapshot_dir,
            session_id=f"tcp-{uuid.uuid4().hex[:12]}",
        )
        try:
            serve_stream(self.rfile, self.wfile, session)
        except (BrokenPipeError, ConnectionResetError):
            session.close()


def make_tcp_server(host: str, port: int,
                    snapshot_dir: str | Path | None = None) -> _SidecarServer:
    """Bind a threading TCP server; one isolated session per connection.

    Bind failures propagate as OSError. The caller owns the lifecycle
    (``serve_forever`` / ``shutdown``).
    """
    return _SidecarServer((host, port), snapshot_dir=snapshot_dir)


def serve_tcp(host: str, port: int,
              snapshot_dir: str | Path | None = None) -> int:
    """Serve TCP sessions until interrupted; returns exit code 0."""
    with make_tcp_server(host, port, snapshot_dir=snapshot_dir) as server:
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return 0
