import csv
import json

import numpy as np
import pytest

from nashbp.cli import ScenarioSpec, build_parser, load_scenario, main, scenario_batch
from nashbp.instance import GeneratorParams, generate_instance, load_instance, save_instance


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def batch(tmp_path):
    out = tmp_path / "inst"
    assert main(["generate", "S1", "--count", "2", "--out", str(out)]) == 0
    return sorted(out.glob("S1_*.json"))


class TestScenario:
    def test_s1_grid(self):
        spec = load_scenario("S1")
        assert len(spec.points()) == 27
        assert {pt["n_users"] for pt in spec.points()} == {12}

    def test_s3_single(self):
        spec = load_scenario("S3")
        (pt, rep), = spec.batch()
        assert (pt["n_users"], pt["n_units"], pt["k"], pt["capacity"]) == (1000, 50, 5, 20)
        assert (pt["w_max"], pt["omega"]) == (15, 5)

    def test_replicates(self):
        doc = {"n_users": 12, "n_units": [4, 8], "k": 2, "capacity": 5, "w_max": 10,
               "omega": 10, "replicates": 3}
        assert len(ScenarioSpec.from_dict(doc).batch()) == 6
        doc["replicates"] = 0
        assert ScenarioSpec.from_dict(doc).batch() == []

    def test_bad_scenario(self):
        with pytest.raises(ValueError, match="colour"):
            ScenarioSpec.from_dict({"colour": 1})
        with pytest.raises(ValueError, match="n_units"):
            ScenarioSpec.from_dict({"n_users": 3, "instances": 1})

    def test_batch_is_reproducible(self):
        spec = load_scenario("S1")
        a = [inst for *_, inst in scenario_batch(spec)]
        b = [inst for *_, inst in scenario_batch(spec)]
        assert all(x == y for x, y in zip(a, b))


class TestGenerate:
    def test_writes_instances_and_manifest(self, batch):
        assert len(batch) == 2
        index = json.loads((batch[0].parent / "index.json").read_text())
        assert [e["file"] for e in index["entries"]] == [p.name for p in batch]
        side = json.loads((batch[0].parent / "index.json.manifest.json").read_text())
        assert "created" in side and "created" not in index

    def test_zero_replicates(self, tmp_path):
        scen = tmp_path / "empty.json"
        scen.write_text(json.dumps({"n_users": 5, "n_units": 2, "k": 1, "capacity": 5,
                                    "w_max": 10, "omega": 10, "replicates": 0}))
        assert main(["generate", str(scen), "--out", str(tmp_path / "out")]) == 0
        assert json.loads((tmp_path / "out" / "index.json").read_text())["entries"] == []


class TestEval:
    def test_mirror_row(self, batch, tmp_path):
        out = tmp_path / "e.csv"
        assert main(["eval", str(batch[0]), "--out", str(out)]) == 0
        (row,) = rows(out)
        assert row["source"] == "mirror-bp" and row["converged"] == "1"
        assert list(row) == ["instance_id", "x_bitmask_or_hash", "source", "W", "N", "Osat", "F",
                             "energy", "converged"]

    def test_sampled_reproducible(self, batch, tmp_path):
        for name in ("a.csv", "b.csv"):
            main(["eval", str(batch[0]), "--estimator", "sampled", "--sample-size", "100",
                  "--seed", "4", "--out", str(tmp_path / name)])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_exact_too_large(self, tmp_path, capsys):
        path = tmp_path / "big.json"
        save_instance(generate_instance(GeneratorParams(1000, 50, 5, 20, 15, 5.0, seed=0)), path)
        assert main(["eval", str(path), "--estimator", "exact", "--out", str(tmp_path / "x.csv")]) == 2
        assert "n_users <= 16" in capsys.readouterr().err

    def test_fixed_t(self, batch, tmp_path):
        out = tmp_path / "f.csv"
        t = "1" * 12
        assert main(["eval", str(batch[0]), "--estimator", "fixed-t", "--t", t, "--out", str(out)]) == 0
        exact = tmp_path / "g.csv"
        main(["eval", str(batch[0]), "--estimator", "exact", "--t", t, "--out", str(exact)])
        assert rows(out)[0]["source"] == "fixed-t-bp" and rows(exact)[0]["source"] == "exact"

    def test_bad_x(self, batch, tmp_path):
        assert main(["eval", str(batch[0]), "--x", "10", "--out", str(tmp_path / "x.csv")]) == 2


class TestCompare:
    def test_rows_per_sample_size(self, batch, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["compare", *map(str, batch), "--sample-sizes", "10", "100", "1000",
                     "--out", str(out)]) == 0
        got = rows(out)
        assert len(got) == 6
        assert [r["S"] for r in got[:3]] == ["10", "100", "1000"]

    def test_single_instance(self, batch, tmp_path):
        out = tmp_path / "c.csv"
        main(["compare", str(batch[0]), "--out", str(out)])
        assert len(rows(out)) == 3


class TestOptimize:
    def test_greedy(self, batch, tmp_path):
        out = tmp_path / "g.csv"
        assert main(["optimize", str(batch[0]), "--method", "greedy", "--out", str(out)]) == 0
        got = rows(out)
        n_units = load_instance(batch[0]).n_units
        assert len(got) == n_units
        assert list(got[0]) == ["step", "unit_off", "O_before", "O_after", "drop_abs",
                                "drop_rel_cum"]

    def test_exhaustive(self, batch, tmp_path):
        out = tmp_path / "x.csv"
        assert main(["optimize", str(batch[0]), "--method", "exhaustive", "--estimator", "exact",
                     "--out", str(out)]) == 0
        n_units = load_instance(batch[0]).n_units
        assert len(rows(out)) == 2 ** n_units
        best = json.loads((tmp_path / "x.best.json").read_text())
        assert len(best["x"]) == n_units

    def test_unknown_method(self, batch, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["optimize", str(batch[0]), "--method", "annealing", "--out", str(tmp_path / "o")])
        assert exc.value.code == 2


class TestDeterminism:
    def test_every_command_byte_identical(self, tmp_path):
        outputs = []
        for run in ("a", "b"):
            d = tmp_path / run
            main(["generate", "S1", "--count", "2", "--out", str(d / "inst")])
            inst = str(d / "inst" / "S1_00000.json")
            main(["eval", inst, "--estimator", "sampled", "--sample-size", "50", "--out", str(d / "e.csv")])
            main(["compare", inst, "--sample-sizes", "10", "20", "--out", str(d / "c.csv")])
            main(["optimize", inst, "--method", "greedy", "--out", str(d / "g.csv")])
            files = ["inst/S1_00000.json", "inst/S1_00001.json", "inst/index.json", "e.csv",
                     "c.csv", "g.csv"]
            outputs.append([(d / f).read_bytes() for f in files])
        assert outputs[0] == outputs[1]

    def test_parser_lists_commands(self):
        text = build_parser().format_help()
        for cmd in ("generate", "eval", "compare", "optimize"):
            assert cmd in text
