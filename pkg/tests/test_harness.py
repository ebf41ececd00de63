import json
import math
import os

import pytest

from selfreg import cli, harness
from selfreg.errors import EngineInvariantError, SelfRegError
from selfreg.harness import TraceEvent, compute_metrics
from selfreg.world_sim import parse_scenario, serialize_scenario

from builders import equifinality_doc, symmetric_trio_doc

DEFAULT_SCENARIO = os.path.join(
    os.path.dirname(__file__), "..", "src", "selfreg", "scenarios", "default.json"
)


def small_trio():
    return parse_scenario(symmetric_trio_doc(horizon=300))


def synthetic_event(tick, root, roots=("a", "b"), idle=False, **kw):
    snapshot = {
        r: {"discrepancy": 1.0, "velocity": 0.0, "valence": 0.1, "reservoir": 5.0}
        for r in roots
    }
    return TraceEvent(
        tick=tick,
        selected_means=None if idle else f"act_{root}",
        pursued_root_need=None if idle else root,
        sigma=kw.get("sigma", 1.0),
        override_boost=0.0,
        override_ticks_left=0,
        switched=kw.get("switched", False),
        forced_switch=kw.get("forced", False),
        abandoned=kw.get("abandoned", ()),
        resource=0.0,
        roots=snapshot,
    )


class TestRunEpisode:
    def test_trace_length_equals_horizon(self):
        doc = symmetric_trio_doc(horizon=100)
        trace = harness.run_episode(parse_scenario(doc), 0)
        assert len(trace) == 100
        assert [ev.tick for ev in trace] == list(range(100))

    def test_steps_override(self):
        trace = harness.run_episode(small_trio(), 0, steps=25)
        assert len(trace) == 25

    def test_byte_identical_traces_for_equal_inputs(self):
        scn = small_trio()
        a = harness.dump_trace(harness.run_episode(scn, 5))
        b = harness.dump_trace(harness.run_episode(scn, 5))
        assert a == b

    def test_different_seeds_differ(self):
        scn = small_trio()
        a = harness.dump_trace(harness.run_episode(scn, 1))
        b = harness.dump_trace(harness.run_episode(scn, 2))
        assert a != b

    def test_attribution_total(self):
        trace = harness.run_episode(small_trio(), 3)
        roots = set(trace[0].roots)
        for ev in trace:
            if ev.selected_means is None:
                assert ev.pursued_root_need is None
            else:
                assert ev.pursued_root_need in roots

    def test_block_event_reroutes_pursuit(self):
        scn = parse_scenario(equifinality_doc(with_backup=True))
        trace = harness.run_episode(scn, 11)
        assert trace[49].selected_means == "m1"
        assert "m2" in {trace[t].selected_means for t in (50, 51, 52)}


class TestComputeMetrics:
    def test_monomania_of_two_to_one_split(self):
        trace = [synthetic_event(0, "a"), synthetic_event(1, "a"), synthetic_event(2, "b")]
        m = compute_metrics(trace)
        assert m.monomania_index == pytest.approx(2 / 3)

    def test_single_need_boundary(self):
        trace = [synthetic_event(t, "a") for t in range(10)]
        m = compute_metrics(trace)
        assert m.monomania_index == 1.0
        assert m.allocation_entropy == 0.0

    def test_even_split_entropy_one(self):
        trace = [synthetic_event(t, "a" if t % 2 == 0 else "b") for t in range(10)]
        m = compute_metrics(trace)
        assert m.allocation_entropy == pytest.approx(1.0)
        assert m.monomania_index == pytest.approx(0.5)

    def test_monomania_within_bounds(self):
        trace = harness.run_episode(small_trio(), 0)
        m = compute_metrics(trace)
        roots = len(trace[0].roots)
        assert 1 / roots <= m.monomania_index <= 1.0
        assert 0.0 <= m.allocation_entropy <= 1.0

    def test_idle_fraction_and_counts(self):
        trace = [
            synthetic_event(0, "a", switched=True),
            synthetic_event(1, None, idle=True),
            synthetic_event(2, "b", switched=True, forced=True, abandoned=("a",)),
            synthetic_event(3, "b"),
        ]
        m = compute_metrics(trace)
        assert m.idle_fraction == pytest.approx(0.25)
        assert m.switch_count == 2
        assert m.forced_switch_count == 1
        assert m.abandonment_count == 1

    def test_empty_trace_rejected(self):
        with pytest.raises(SelfRegError):
            compute_metrics([])

    def test_round_trip_metrics_identical(self, tmp_path):
        trace = harness.run_episode(small_trio(), 7)
        path = tmp_path / "trace.jsonl"
        harness.write_trace(trace, str(path))
        reloaded = harness.load_trace(str(path))
        assert compute_metrics(reloaded) == compute_metrics(trace)


class TestValidateScenario:
    def test_shipped_default_scenario_is_ok(self):
        with open(DEFAULT_SCENARIO, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        assert harness.validate_scenario(doc) == []

    def test_event_after_horizon_flagged(self):
        doc = symmetric_trio_doc(horizon=100)
        doc["events"] = [{"tick": 101, "type": "reward", "salience": 1.0}]
        assert harness.validate_scenario(doc) != []

    def test_out_of_range_p_true_flagged(self):
        doc = symmetric_trio_doc(horizon=100)
        doc["means"][0]["p_true"] = {"need_a": 1.3}
        assert harness.validate_scenario(doc) != []


class TestSweep:
    def test_one_row_per_seed(self):
        scn = parse_scenario(symmetric_trio_doc(horizon=120))
        rows = harness.sweep(scn, range(10))
        assert len(rows) == 10
        assert [r["seed"] for r in rows] == list(range(10))

    def test_duplicate_seed_identical_rows(self):
        scn = parse_scenario(symmetric_trio_doc(horizon=120))
        rows = harness.sweep(scn, [4, 4])
        assert rows[0] == rows[1]

    def test_aggregate_mean_is_arithmetic(self):
        scn = parse_scenario(symmetric_trio_doc(horizon=120))
        rows = harness.sweep(scn, range(4))
        mean = sum(r["monomania_index"] for r in rows) / len(rows)
        assert mean == pytest.approx(
            math.fsum(r["monomania_index"] for r in rows) / 4, rel=1e-12
        )


class TestCli:
    def _write_scenario(self, tmp_path, doc):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(doc))
        return str(path)

    def test_run_writes_trace_and_metrics(self, tmp_path, capsys):
        scn = self._write_scenario(tmp_path, symmetric_trio_doc(horizon=80))
        trace_path = tmp_path / "trace.jsonl"
        metrics_path = tmp_path / "metrics.json"
        code = cli.main([
            "run", "--scenario", scn, "--seed", "3",
            "--trace", str(trace_path), "--metrics", str(metrics_path),
        ])
        assert code == 0
        assert len(trace_path.read_text().splitlines()) == 80
        metrics = json.loads(metrics_path.read_text())
        assert "monomania_index" in metrics
        summary = json.loads(capsys.readouterr().out.strip())
        assert summary["ticks"] == 80

    def test_run_steps_overrides_horizon(self, tmp_path, capsys):
        scn = self._write_scenario(tmp_path, symmetric_trio_doc(horizon=80))
        trace_path = tmp_path / "trace.jsonl"
        code = cli.main(["run", "--scenario", scn, "--steps", "10",
                         "--trace", str(trace_path)])
        assert code == 0
        assert len(trace_path.read_text().splitlines()) == 10

    def test_run_is_reproducible_at_file_level(self, tmp_path, capsys):
        scn = self._write_scenario(tmp_path, symmetric_trio_doc(horizon=60))
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        cli.main(["run", "--scenario", scn, "--seed", "5", "--trace", str(p1)])
        cli.main(["run", "--scenario", scn, "--seed", "5", "--trace", str(p2)])
        assert p1.read_bytes() == p2.read_bytes()

    def test_validate_ok_and_failure_exit_codes(self, tmp_path, capsys):
        good = self._write_scenario(tmp_path, symmetric_trio_doc(horizon=50))
        assert cli.main(["validate", "--scenario", good]) == 0
        bad_doc = symmetric_trio_doc(horizon=50)
        bad_doc["goals"] = bad_doc["goals"][:1]  # single root
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(bad_doc))
        assert cli.main(["validate", "--scenario", str(bad)]) == 1

    def test_invalid_scenario_on_run_exits_one(self, tmp_path, capsys):
        doc = symmetric_trio_doc(horizon=50)
        doc["means"][0]["p_true"] = {"need_a": 2.0}
        path = self._write_scenario(tmp_path, doc)
        assert cli.main(["run", "--scenario", path]) == 1

    def test_runtime_invariant_violation_exits_two(self, tmp_path, monkeypatch, capsys):
        scn = self._write_scenario(tmp_path, symmetric_trio_doc(horizon=50))

        def boom(*args, **kwargs):
            raise EngineInvariantError("synthetic failure")

        monkeypatch.setattr(harness, "run_episode", boom)
        assert cli.main(["run", "--scenario", scn]) == 2

    def test_sweep_writes_one_row_per_seed(self, tmp_path, capsys):
        scn = self._write_scenario(tmp_path, symmetric_trio_doc(horizon=60))
        out = tmp_path / "rows.jsonl"
        code = cli.main(["sweep", "--scenario", scn, "--seeds", "0..4",
                         "--out", str(out)])
        assert code == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert [r["seed"] for r in rows] == [0, 1, 2, 3, 4]

    def test_parse_error_exits_one(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert cli.main(["validate", "--scenario", str(path)]) == 1
        assert cli.main(["run", "--scenario", str(path)]) == 1


def test_scenario_round_trip_is_stable():
    scn = parse_scenario(symmetric_trio_doc(horizon=50))
    doc1 = serialize_scenario(scn)
    doc2 = serialize_scenario(parse_scenario(doc1))
    assert doc1 == doc2
    assert harness.validate_scenario(doc2) == []
