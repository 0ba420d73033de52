"""Sidecar protocol: framing, schema errors, decision parity, transports."""

import io
import json
import random
import socket
import subprocess
import sys
import threading

import pytest

from detagnostic import (
    ControllerConfig,
    EpochReport,
    Session,
    TrainingController,
    coco_map,
    get_template,
    handle_line,
    make_tcp_server,
    serve_stream,
)
from detagnostic.sidecar import MAX_LINE_BYTES

from generators import random_eval_instance, random_tape


def send(session, payload):
    """One request dict in, one response dict out."""
    return json.loads(session.handle_line(json.dumps(payload)))


def hello(session, **extra):
    return send(session, {"kind": "hello", **extra})


def epoch(session, epoch, val_ap, lr=0.01, iterations=10, **extra):
    return send(session, {
        "kind": "epoch_end", "epoch": epoch, "iterations": iterations,
        "val_ap": val_ap, "lr": lr, **extra,
    })


class TestHello:
    def test_default_hello_acks_with_resolved_config(self):
        response = hello(Session())
        assert response["kind"] == "ack"
        assert response["config"] == ControllerConfig().to_dict()

    def test_template_hello_resolves_scheduler_defaults(self):
        response = hello(Session(), template="vfnet-resnet50")
        expected = get_template("vfnet-resnet50").scheduler_defaults.to_dict()
        assert response["config"] == expected

    def test_config_hello_echoes_full_config(self):
        response = hello(Session(), config={"lr_patience": 2, "stop_patience": 9})
        assert response["config"]["lr_patience"] == 2
        assert response["config"]["stop_patience"] == 9
        # defaults are filled in so the trainer sees the effective values
        assert response["config"]["lr_factor"] == 0.1

    def test_unknown_template_is_schema_error(self):
        response = hello(Session(), template="resnet-9000")
        assert response == {
            "kind": "error", "code": "bad_schema",
            "message": response["message"],
        }
        assert "hello.template" in response["message"]

    def test_template_and_config_conflict(self):
        response = hello(Session(), template="vfnet-resnet50", config={})
        assert response["code"] == "bad_schema"
        assert "mutually exclusive" in response["message"]

    def test_unknown_field_named_in_error(self):
        response = hello(Session(), budget=5)
        assert response["code"] == "bad_schema"
        assert "hello.budget" in response["message"]

    def test_bad_config_value_is_schema_error(self):
        response = hello(Session(), config={"lr_factor": 2.0})
        assert response["code"] == "bad_schema"

    def test_second_hello_is_sequence_error(self):
        session = Session()
        hello(session)
        assert hello(session)["code"] == "bad_sequence"

    def test_error_leaves_session_usable(self):
        session = Session()
        assert hello(session, template="nope")["code"] == "bad_schema"
        assert hello(session)["kind"] == "ack"
        assert epoch(session, 1, 0.5)["kind"] == "decision"


class TestFraming:
    def test_invalid_json(self):
        response = json.loads(Session().handle_line(b"{oops"))
        assert response["code"] == "bad_json"

    def test_invalid_utf8(self):
        response = json.loads(Session().handle_line(b"\xff\xfe{}"))
        assert response["code"] == "bad_json"

    def test_non_object_payload(self):
        response = json.loads(Session().handle_line(b"[1, 2]"))
        assert response["code"] == "bad_schema"

    def test_missing_and_unknown_kind(self):
        assert send(Session(), {})["code"] == "bad_schema"
        response = send(Session(), {"kind": "train_faster"})
        assert response["code"] == "bad_schema"
        assert "train_faster" in response["message"]

    def test_oversized_line_rejected(self):
        big = json.dumps({"kind": "hello", "gt_split": "x" * MAX_LINE_BYTES})
        response = json.loads(Session().handle_line(big))
        assert response["code"] == "bad_json"
        assert "exceeds" in response["message"]

    def test_handle_line_never_raises_on_junk(self):
        rng = random.Random(1234)
        session = Session()
        for _ in range(200):
            n = rng.randint(0, 40)
            junk = bytes(rng.randrange(256) for _ in range(n))
            response = json.loads(session.handle_line(junk))
            assert response["kind"] in ("error", "ack")

    def test_functional_entry_point(self):
        session = Session()
        response = json.loads(handle_line(session, '{"kind": "hello"}'))
        assert response["kind"] == "ack"


class TestEpochEnd:
    def test_requires_hello_first(self):
        session = Session()
        assert epoch(session, 1, 0.5)["code"] == "bad_sequence"

    def test_field_errors_carry_paths(self):
        session = Session()
        hello(session)
        bad = send(session, {"kind": "epoch_end", "epoch": "one",
                             "iterations": 10, "val_ap": 0.5, "lr": 0.01})
        assert bad["code"] == "bad_schema"
        assert "epoch_end.epoch" in bad["message"]
        bad = send(session, {"kind": "epoch_end", "epoch": 1,
                             "iterations": 10, "val_ap": True, "lr": 0.01})
        assert "epoch_end.val_ap" in bad["message"]
        bad = epoch(session, 1, 0.5, tricks=True)
        assert "epoch_end.tricks" in bad["message"]

    def test_val_ap_required_without_evaluator(self):
        session = Session()
        hello(session)
        bad = send(session, {"kind": "epoch_end", "epoch": 1,
                             "iterations": 10, "lr": 0.01})
        assert bad["code"] == "bad_schema"
        assert "val_ap" in bad["message"]

    def test_out_of_range_metric_is_schema_error(self):
        session = Session()
        hello(session)
        assert epoch(session, 1, 1.5)["code"] == "bad_schema"

    def test_out_of_order_epoch_is_sequence_error(self):
        session = Session()
        hello(session)
        epoch(session, 1, 0.5)
        response = epoch(session, 5, 0.6)
        assert response["code"] == "bad_sequence"
        # the failed observation did not advance the session
        assert epoch(session, 2, 0.6)["kind"] == "decision"

    @pytest.mark.filterwarnings("ignore::UserWarning")
    def test_epoch_end_after_stop_is_lifecycle_error(self):
        session = Session()
        hello(session, config={"lr_patience": 9, "stop_patience": 1,
                               "stop_iteration_patience": 0})
        epoch(session, 1, 0.5)
        stopped = epoch(session, 2, 0.5)
        assert stopped["action"] == "stop"
        assert epoch(session, 3, 0.9)["code"] == "lifecycle"
        assert hello(session)["code"] == "lifecycle"

    def test_decision_payload_matches_library(self):
        rng = random.Random(31337)
        for _ in range(30):
            config_kwargs = {
                "lr_patience": rng.randint(1, 3),
                "stop_patience": rng.randint(3, 6),
                "lr_iteration_patience": rng.choice([0, 20]),
                "stop_iteration_patience": rng.choice([0, 50]),
            }
            tape = random_tape(rng)
            session = Session()
            hello(session, config=config_kwargs)
            controller = TrainingController(ControllerConfig(**config_kwargs))
            lr = 0.01
            for n, metric in enumerate(tape, start=1):
                report = EpochReport(n, 10, metric, lr)
                wire = epoch(session, n, metric, lr=lr)
                decision = controller.observe(report)
                expected = {
                    "kind": "decision",
                    "action": decision.action,
                    "best_metric": decision.best_metric,
                    "should_checkpoint": decision.should_checkpoint,
                }
                if decision.new_lr is not None:
                    expected["new_lr"] = decision.new_lr
                    lr = decision.new_lr
                assert wire == expected
                if decision.action == "stop":
                    break


class TestSnapshotAndBye:
    def test_snapshot_is_restorable(self):
        session = Session()
        hello(session)
        epoch(session, 1, 0.4)
        epoch(session, 2, 0.6)
        response = send(session, {"kind": "snapshot_request"})
        assert response["kind"] == "snapshot"
        clone = TrainingController.from_json(json.dumps(response["snapshot"]))
        assert clone.state.best_metric == 0.6
        assert clone.state.last_epoch == 2

    def test_snapshot_requires_hello(self):
        assert send(Session(), {"kind": "snapshot_request"})["code"] == "bad_sequence"

    def test_bye_closes_session(self):
        session = Session()
        hello(session)
        assert send(session, {"kind": "bye"}) == {"kind": "ack"}
        assert send(session, {"kind": "hello"})["code"] == "lifecycle"

    def test_close_flushes_snapshot_file(self, tmp_path):
        session = Session(snapshot_dir=tmp_path, session_id="s1")
        hello(session)
        epoch(session, 1, 0.55)
        session.close()
        session.close()  # idempotent
        saved = (tmp_path / "s1.json").read_text(encoding="utf-8")
        clone = TrainingController.from_json(saved)
        assert clone.state.best_metric == 0.55

    def test_no_snapshot_before_hello(self, tmp_path):
        session = Session(snapshot_dir=tmp_path, session_id="s2")
        session.close()
        assert not (tmp_path / "s2.json").exists()


class TestEvaluatorMode:
    def write_instance(self, tmp_path, seed=7):
        rng = random.Random(seed)
        index, detections, det_dicts, _ = random_eval_instance(rng)
        gt_file = tmp_path / "gt.json"
        gt_file.write_text(index.to_coco_json(), encoding="utf-8")
        dets_file = tmp_path / "dets.json"
        dets_file.write_text(json.dumps(det_dicts), encoding="utf-8")
        expected = coco_map(detections, index, split="val").ap_50_95
        return gt_file, dets_file, expected

    def test_dets_path_computes_metric(self, tmp_path):
        gt_file, dets_file, expected = self.write_instance(tmp_path)
        assert expected is not None
        session = Session()
        hello(session, gt_path=str(gt_file), gt_split="val")
        response = send(session, {
            "kind": "epoch_end", "epoch": 1, "iterations": 10,
            "lr": 0.01, "dets_path": str(dets_file),
        })
        assert response["kind"] == "decision"
        assert response["best_metric"] == pytest.approx(expected)

    def test_missing_gt_file_is_data_error(self, tmp_path):
        response = hello(Session(), gt_path=str(tmp_path / "absent.json"))
        assert response["code"] == "data_error"

    def test_malformed_gt_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"images": []}', encoding="utf-8")
        assert hello(Session(), gt_path=str(bad))["code"] == "data_error"

    def test_gt_split_requires_gt_path(self):
        assert hello(Session(), gt_split="val")["code"] == "bad_schema"

    def test_missing_dets_file_is_data_error(self, tmp_path):
        gt_file, _, _ = self.write_instance(tmp_path)
        session = Session()
        hello(session, gt_path=str(gt_file))
        response = send(session, {
            "kind": "epoch_end", "epoch": 1, "iterations": 10,
            "lr": 0.01, "dets_path": str(tmp_path / "nope.json"),
        })
        assert response["code"] == "data_error"
        # recoverable: the same epoch can be resubmitted
        retry = epoch(session, 1, 0.3)
        assert retry["kind"] == "decision"

    def test_dets_path_without_gt_is_schema_error(self, tmp_path):
        session = Session()
        hello(session)
        response = send(session, {
            "kind": "epoch_end", "epoch": 1, "iterations": 10,
            "lr": 0.01, "dets_path": str(tmp_path / "d.json"),
        })
        assert response["code"] == "bad_schema"

    def test_val_ap_and_dets_path_conflict(self, tmp_path):
        gt_file, dets_file, _ = self.write_instance(tmp_path)
        session = Session()
        hello(session, gt_path=str(gt_file))
        response = send(session, {
            "kind": "epoch_end", "epoch": 1, "iterations": 10,
            "lr": 0.01, "val_ap": 0.5, "dets_path": str(dets_file),
        })
        assert response["code"] == "bad_schema"


def run_stream(lines, session=None):
    """Feed raw bytes through serve_stream, return response lines."""
    rfile = io.BytesIO(lines)
    wfile = io.BytesIO()
    serve_stream(rfile, wfile, session or Session())
    return wfile.getvalue().decode("utf-8").splitlines()


class TestStreamTransport:
    def test_one_response_per_request_in_order(self):
        requests = [
            {"kind": "hello"},
            {"kind": "epoch_end", "epoch": 1, "iterations": 5,
             "val_ap": 0.3, "lr": 0.01},
            {"kind": "snapshot_request"},
            {"kind": "bye"},
        ]
        raw = b"".join(json.dumps(r).encode() + b"\n" for r in requests)
        responses = [json.loads(l) for l in run_stream(raw)]
        assert [r["kind"] for r in responses] == [
            "ack", "decision", "snapshot", "ack",
        ]

    def test_blank_lines_ignored(self):
        raw = b'\n  \n{"kind": "hello"}\n\n{"kind": "bye"}\n'
        assert len(run_stream(raw)) == 2

    def test_oversized_line_then_recovery(self):
        # the oversized line is drained; the next request still parses
        raw = (b'{"pad": "' + b"x" * MAX_LINE_BYTES + b'"}\n'
               + b'{"kind": "hello"}\n')
        responses = [json.loads(l) for l in run_stream(raw)]
        assert responses[0]["code"] == "bad_json"
        assert responses[1]["kind"] == "ack"

    def test_eof_without_bye_flushes_snapshot(self, tmp_path):
        session = Session(snapshot_dir=tmp_path, session_id="eof")
        raw = (b'{"kind": "hello"}\n'
               b'{"kind": "epoch_end", "epoch": 1, "iterations": 5,'
               b' "val_ap": 0.42, "lr": 0.01}\n')
        run_stream(raw, session)
        saved = (tmp_path / "eof.json").read_text(encoding="utf-8")
        clone = TrainingController.from_json(saved)
        assert clone.state.best_metric == 0.42
        assert clone.state.last_epoch == 1


class TestStdioTransport:
    def test_subprocess_session(self):
        requests = [{"kind": "hello", "template": "ssd-mobilenetv2"}]
        for n, metric in enumerate([0.2, 0.3, 0.31], start=1):
            requests.append({"kind": "epoch_end", "epoch": n,
                             "iterations": 50, "val_ap": metric, "lr": 0.01})
        requests.append({"kind": "bye"})
        stdin = "".join(json.dumps(r) + "\n" for r in requests)
        proc = subprocess.run(
            [sys.executable, "-m", "detagnostic", "serve", "--stdio"],
            input=stdin, capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0
        responses = [json.loads(l) for l in proc.stdout.splitlines()]
        assert len(responses) == 5
        assert responses[0]["kind"] == "ack"
        assert all(r["kind"] == "decision" for r in responses[1:4])
        assert responses[2]["best_metric"] == 0.3
        assert responses[-1] == {"kind": "ack"}


class TestTcpTransport:
    def test_concurrent_sessions_are_isolated(self):
        server = make_tcp_server("127.0.0.1", 0)
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            tapes = {
                "a": [0.1, 0.2, 0.2, 0.2],
                "b": [0.5, 0.5, 0.5, 0.5],
            }
            socks = {k: socket.create_connection(("127.0.0.1", port), timeout=10)
                     for k in tapes}
            files = {k: s.makefile("rwb") for k, s in socks.items()}

            def ask(key, payload):
                files[key].write(json.dumps(payload).encode() + b"\n")
                files[key].flush()
                return json.loads(files[key].readline())

            config = {"lr_patience": 2, "stop_patience": 9}
            for key in tapes:
                assert ask(key, {"kind": "hello", "config": config})["kind"] == "ack"
            # interleave the two sessions epoch by epoch
            wire = {k: [] for k in tapes}
            for n in range(4):
                for key, tape in tapes.items():
                    wire[key].append(ask(key, {
                        "kind": "epoch_end", "epoch": n + 1, "iterations": 10,
                        "val_ap": tape[n], "lr": 0.01,
                    }))
            for key in tapes:
                assert ask(key, {"kind": "bye"}) == {"kind": "ack"}
                files[key].close()
                socks[key].close()

            # each connection behaves exactly like a serial local session
            for key, tape in tapes.items():
                local = Session()
                hello(local, config=config)
                for n, metric in enumerate(tape, start=1):
                    assert epoch(local, n, metric) == wire[key][n - 1]
        finally:
            server.shutdown()
            server.server_close()
            thread.join(timeout=10)
