"""Command-line behaviour: exit codes, file outputs, manifests, and replay."""

import json

import numpy as np
import pytest

from lllround import parse_instance
from lllround.cli import BENCH_COLUMNS, main


def gen(tmp_path, *extra, kind="set-cover", seed=3, name="inst.json"):
    out = tmp_path / name
    code = main(["gen", "--kind", kind, "--seed", str(seed), "--out", str(out), *extra])
    assert code == 0
    return out


class TestGen:
    def test_writes_instance_and_manifest(self, tmp_path, capsys):
        out = gen(tmp_path)
        instance = parse_instance(out.read_text())
        assert instance.m > 0
        manifest = json.loads((tmp_path / "inst.json.manifest.json").read_text())
        assert manifest["seed"] == 3
        assert manifest["command"][0] == "gen"
        assert manifest["outputs"] == [str(out)]
        assert "wrote covering instance" in capsys.readouterr().out

    def test_same_seed_same_bytes(self, tmp_path):
        a = gen(tmp_path, name="a.json")
        b = gen(tmp_path, name="b.json")
        assert a.read_bytes() == b.read_bytes()

    @pytest.mark.parametrize("kind", ["facility", "hypergraph"])
    def test_other_kinds(self, tmp_path, kind):
        out = gen(tmp_path, kind=kind, name=f"{kind}.json")
        assert parse_instance(out.read_text()).m > 0

    def test_unknown_kind_is_usage_error(self, tmp_path):
        code = main(["gen", "--kind", "tsp", "--out", str(tmp_path / "x.json")])
        assert code == 2

    def test_impossible_generation_is_usage_error(self, tmp_path, capsys):
        code = main([
            "gen", "--kind", "set-cover", "--n-elems", "12", "--n-sets", "2",
            "--max-set-size", "3", "--demand", "5", "--out", str(tmp_path / "x.json"),
        ])
        assert code == 2
        assert "cannot generate" in capsys.readouterr().err


class TestRound:
    def test_derandomize_output_document(self, tmp_path, capsys):
        inst = gen(tmp_path)
        out = tmp_path / "rounded.json"
        code = main(["round", str(inst), "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert set(doc) == {"z", "objectives", "lambda", "phi_trace", "feasible"}
        assert doc["feasible"] is True
        assert all(isinstance(v, int) for v in doc["z"])
        instance = parse_instance(inst.read_text())
        z = np.array(doc["z"], dtype=float)
        assert np.all(instance.a_matrix @ z >= instance.demands - 1e-9)
        assert doc["objectives"][0] == pytest.approx(float(instance.costs[0] @ z))
        trace = doc["phi_trace"]
        assert trace and all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))
        stdout = capsys.readouterr().out
        assert "ratio=" in stdout
        assert "feasible=True" in stdout

    def test_standard_mode_has_empty_trace(self, tmp_path):
        inst = gen(tmp_path)
        out = tmp_path / "std.json"
        code = main(["round", str(inst), "--mode", "standard", "--seed", "5",
                     "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["phi_trace"] == []

    def test_ingested_solution_is_used(self, tmp_path):
        inst_path = gen(tmp_path)
        instance = parse_instance(inst_path.read_text())
        x = np.full(instance.n, float(instance.demands.max()))
        point = tmp_path / "point.json"
        point.write_text(json.dumps({"x": x.tolist(), "objective": float(x.sum())}))
        out = tmp_path / "rounded.json"
        assert main(["round", str(inst_path), "--solution", str(point),
                     "--out", str(out)]) == 0

    def test_infeasible_solution_exits_3(self, tmp_path):
        inst_path = gen(tmp_path)
        instance = parse_instance(inst_path.read_text())
        point = tmp_path / "point.json"
        point.write_text(json.dumps({"x": [0.0] * instance.n, "objective": 0.0}))
        code = main(["round", str(inst_path), "--solution", str(point),
                     "--out", str(tmp_path / "r.json")])
        assert code == 3

    def test_malformed_solution_exits_2(self, tmp_path, capsys):
        inst_path = gen(tmp_path)
        point = tmp_path / "point.json"
        point.write_text(json.dumps({"y": [1, 2]}))
        code = main(["round", str(inst_path), "--solution", str(point),
                     "--out", str(tmp_path / "r.json")])
        assert code == 2
        assert "--solution must be JSON" in capsys.readouterr().err

    def test_mode_instance_mismatch_exits_2(self, tmp_path):
        cover = gen(tmp_path)
        graph = gen(tmp_path, kind="hypergraph", name="graph.json")
        assert main(["round", str(cover), "--mode", "mip",
                     "--out", str(tmp_path / "a.json")]) == 2
        assert main(["round", str(graph), "--out", str(tmp_path / "b.json")]) == 2

    def test_mip_mode_reports_trials(self, tmp_path, capsys):
        graph = gen(tmp_path, kind="hypergraph", name="graph.json")
        out = tmp_path / "mip.json"
        code = main(["round", str(graph), "--mode", "mip", "--seed", "1",
                     "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert set(doc) == {
            "value", "target_t42", "target_t44", "trials_used", "t_trace", "success",
        }
        assert doc["success"] is True
        assert "trials_used=" in capsys.readouterr().out

    def test_bootstrap_mode(self, tmp_path):
        graph = gen(tmp_path, kind="hypergraph", name="graph.json")
        out = tmp_path / "boot.json"
        assert main(["round", str(graph), "--mode", "bootstrap",
                     "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["success"] is True
        assert len(doc["t_trace"]) >= 1

    def test_missing_instance_file_exits_2(self, tmp_path):
        assert main(["round", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "r.json")]) == 2


class TestVerify:
    def test_tail_checks_pass(self, tmp_path, capsys):
        target = tmp_path / "anything.json"
        target.write_text("{}")
        assert main(["verify", str(target), "--which", "tail"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_covering_instance_passes_all_checks(self, tmp_path, capsys):
        inst = gen(tmp_path)
        assert main(["verify", str(inst)]) == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("PASS")]
        assert len(lines) >= 4  # domination, branch bits, both correlation directions

    def test_minimax_instance_lll_check(self, tmp_path, capsys):
        graph = gen(tmp_path, kind="hypergraph", name="graph.json")
        assert main(["verify", str(graph), "--which", "lll"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_which_kind_mismatch_exits_2(self, tmp_path):
        cover = gen(tmp_path)
        graph = gen(tmp_path, kind="hypergraph", name="graph.json")
        assert main(["verify", str(cover), "--which", "lll"]) == 2
        assert main(["verify", str(graph), "--which", "phi"]) == 2

    def test_injected_fault_writes_fixture_and_fixture_replays_clean(
        self, tmp_path, capsys, monkeypatch
    ):
        inst = gen(tmp_path)
        fixture_path = tmp_path / "bad.json"
        import lllround.cip as cip_module

        real = cip_module.success_lower_bound
        monkeypatch.setattr(cip_module, "success_lower_bound", lambda state: 2.0)
        code = main(["verify", str(inst), "--which", "phi", "--out", str(fixture_path)])
        assert code == 1
        stdout = capsys.readouterr().out
        assert "FAIL" in stdout
        assert f"counterexample written to {fixture_path}" in stdout
        assert fixture_path.exists()

        monkeypatch.setattr(cip_module, "success_lower_bound", real)
        assert main(["verify", str(fixture_path)]) == 0
        replay_out = capsys.readouterr().out
        assert "PASS" in replay_out and "FAIL" not in replay_out

    def test_budget_cap_exits_4(self, tmp_path, monkeypatch):
        inst = gen(tmp_path, "--n-sets", "12")
        monkeypatch.setenv("LLLROUND_BUDGET_BITS", "8")
        assert main(["verify", str(inst), "--which", "phi"]) == 4

    def test_unreadable_target_exits_2(self, tmp_path):
        assert main(["verify", str(tmp_path / "absent.json")]) == 2


class TestBenchAndReplay:
    def test_bench_csv_shape_and_envelope(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code = main(["bench", "--sizes", "1,2", "--seeds", "0,1", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == ",".join(BENCH_COLUMNS)
        assert len(lines) == 5
        ratio_col = BENCH_COLUMNS.index("ratio")
        envelope_col = BENCH_COLUMNS.index("envelope")
        for line in lines[1:]:
            fields = line.split(",")
            assert float(fields[ratio_col]) >= 1.0 - 1e-9
            assert float(fields[ratio_col]) <= float(fields[envelope_col])
        manifest = json.loads((tmp_path / "bench.csv.manifest.json").read_text())
        assert len(manifest["wall_times"]) == 4
        assert "worst ratio/envelope" in capsys.readouterr().out

    def test_replay_reproduces_bench_bytes(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--sizes", "1,2", "--seeds", "0", "--out", str(out)]) == 0
        original = out.read_bytes()
        out.unlink()
        assert main(["replay", str(tmp_path / "bench.csv.manifest.json")]) == 0
        assert out.read_bytes() == original

    def test_replay_reproduces_gen_and_round_bytes(self, tmp_path):
        inst = gen(tmp_path, seed=9)
        rounded = tmp_path / "rounded.json"
        assert main(["round", str(inst), "--out", str(rounded)]) == 0
        inst_bytes = inst.read_bytes()
        round_bytes = rounded.read_bytes()
        inst.unlink()
        rounded.unlink()
        assert main(["replay", str(tmp_path / "inst.json.manifest.json")]) == 0
        assert inst.read_bytes() == inst_bytes
        assert main(["replay", str(tmp_path / "rounded.json.manifest.json")]) == 0
        assert rounded.read_bytes() == round_bytes

    def test_replay_missing_manifest_exits_2(self, tmp_path):
        assert main(["replay", str(tmp_path / "absent.manifest.json")]) == 2

    def test_bad_lambda_list_exits_2(self, tmp_path):
        inst = gen(tmp_path)
        assert main(["round", str(inst), "--lambda", "a,b",
                     "--out", str(tmp_path / "r.json")]) == 2
