import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from nin_dsm.cli import EXIT_CORRUPT_LEDGER, EXIT_SCHEMA, main
from nin_dsm.engine import METRICS_COLUMNS, Engine
from nin_dsm.scenario import bundled_scenario_path, load_scenario
from nin_dsm.sm import LedgerEvent, replay

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "walkthrough_ledger.jsonl"


def run_walkthrough():
    engine = Engine(load_scenario(bundled_scenario_path("walkthrough")))
    engine.run()
    return engine


class TestWalkthrough:
    def test_matches_golden_ledger(self):
        engine = run_walkthrough()
        golden = GOLDEN.read_text().splitlines()
        assert engine.ledger_lines == golden

    def test_reruns_are_byte_identical(self):
        a, b = run_walkthrough(), run_walkthrough()
        assert a.ledger_lines == b.ledger_lines
        assert a.metrics_rows == b.metrics_rows
        assert a.snapshot() == b.snapshot()

    def test_narrative_shape(self):
        engine = run_walkthrough()
        events = [json.loads(line) for line in engine.ledger_lines]
        kinds = [e["kind"] for e in events]
        # the mission-critical session registers and is never renotified later
        notices = [
            e["payload"]["sn_id"] for e in events if e["kind"] == "REALLOC_NOTICE"
        ]
        assert notices.count("SN-1") == 1
        # intent-based pre-reservation lands before the mobile unit registers
        intent_seq = next(e["seq"] for e in events if e["kind"] == "INTENT")
        agv_register_seq = next(
            e["seq"]
            for e in events
            if e["kind"] == "REGISTER" and e["payload"]["demand"]["sn_id"] == "SN-3"
        )
        assert intent_seq < agv_register_seq
        assert kinds.count("COMMIT") >= 4
        assert "DEGRADE" not in kinds

    def test_mission_critical_block_never_moves(self):
        engine = run_walkthrough()
        for line in engine.ledger_lines:
            event = json.loads(line)
            if event["kind"] != "COMMIT":
                continue
            allocs = {
                a["sn_id"]: a for a in event["payload"]["plan"]["allocations"]
            }
            if "SN-1" in allocs:
                assert (allocs["SN-1"]["start_mhz"], allocs["SN-1"]["width_mhz"]) == (3700, 10)

    def test_sensing_width_squeezes_then_recovers(self):
        engine = run_walkthrough()
        widths = []
        for line in engine.ledger_lines:
            event = json.loads(line)
            if event["kind"] == "COMMIT":
                for a in event["payload"]["plan"]["allocations"]:
                    if a["sn_id"] == "SN-2":
                        widths.append(a["width_mhz"])
        assert widths == [60, 58, 60, 60]

    def test_peak_utilization(self):
        engine = run_walkthrough()
        best = max(row["utilization"] for row in engine.metrics_rows)
        assert best == pytest.approx(0.98)

    def test_replay_equals_live(self):
        engine = run_walkthrough()
        events = [
            LedgerEvent.from_json(json.loads(line)) for line in engine.ledger_lines
        ]
        assert replay(events).snapshot() == engine.snapshot()

    def test_metrics_rows_cover_all_columns(self):
        engine = run_walkthrough()
        for row in engine.metrics_rows:
            assert set(METRICS_COLUMNS) <= set(row)


class TestEngineControls:
    def make_scenario(self, tmp_path, mutate):
        doc = json.loads(Path(bundled_scenario_path("walkthrough")).read_text())
        mutate(doc)
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(doc))
        return path

    def test_end_at_zero_produces_no_ledger(self, tmp_path):
        path = self.make_scenario(
            tmp_path, lambda d: d.__setitem__("events", [{"at_ms": 0, "action": "END"}])
        )
        engine = Engine(load_scenario(path))
        engine.run()
        assert engine.ledger_lines == []

    def test_until_stops_early(self):
        engine = Engine(load_scenario(bundled_scenario_path("walkthrough")))
        engine.run(until_ms=5000)
        assert engine.now <= 5000
        kinds = [json.loads(l)["kind"] for l in engine.ledger_lines]
        assert "INTENT" not in kinds  # the call happens at 10 s

    def test_call_agv_returns_false_while_busy(self):
        engine = Engine(load_scenario(bundled_scenario_path("walkthrough")))
        engine.run(until_ms=11000)
        assert not engine.call_agv()

    def test_toggle_unknown_agent(self):
        engine = Engine(load_scenario(bundled_scenario_path("walkthrough")))
        assert not engine.toggle_sensing("SN-99", False)


class TestCli:
    def test_sim_writes_outputs(self, tmp_path):
        runner = CliRunner()
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            [
                "sim",
                "--scenario",
                str(bundled_scenario_path("walkthrough")),
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        with open(out / "metrics.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows and list(rows[0]) == list(METRICS_COLUMNS)
        ledger_lines = (out / "ledger.jsonl").read_text().splitlines()
        assert ledger_lines == GOLDEN.read_text().splitlines()
        snapshot = json.loads((out / "snapshot.json").read_text())
        assert snapshot["epoch"] >= 1
        assert (out / "allocation_timeline.png").stat().st_size > 0
        assert (out / "utilization.png").stat().st_size > 0

    def test_sim_rejects_bad_scenario(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"seed": 1}))
        runner = CliRunner()
        result = runner.invoke(main, ["sim", "--scenario", str(bad), "--out", str(tmp_path / "o")])
        assert result.exit_code == EXIT_SCHEMA

    def test_replay_round_trip(self, tmp_path):
        runner = CliRunner()
        out = tmp_path / "out"
        runner.invoke(
            main,
            [
                "sim",
                "--scenario",
                str(bundled_scenario_path("walkthrough")),
                "--out",
                str(out),
                "--no-figures",
            ],
        )
        result = runner.invoke(main, ["replay", "--ledger", str(out / "ledger.jsonl")])
        assert result.exit_code == 0
        assert json.loads(result.output) == json.loads((out / "snapshot.json").read_text())

    def test_replay_detects_corruption(self, tmp_path):
        lines = GOLDEN.read_text().splitlines()
        del lines[4]
        mangled = tmp_path / "ledger.jsonl"
        mangled.write_text("\n".join(lines) + "\n")
        runner = CliRunner()
        result = runner.invoke(main, ["replay", "--ledger", str(mangled)])
        assert result.exit_code == EXIT_CORRUPT_LEDGER

    def test_sim_until_flag(self, tmp_path):
        runner = CliRunner()
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            [
                "sim",
                "--scenario",
                str(bundled_scenario_path("walkthrough")),
                "--until",
                "3000",
                "--out",
                str(out),
                "--no-figures",
            ],
        )
        assert result.exit_code == 0
        kinds = [
            json.loads(l)["kind"]
            for l in (out / "ledger.jsonl").read_text().splitlines()
        ]
        assert "INTENT" not in kinds
