import csv
import io
import json
import math

import numpy as np
import pytest

import disctree.cli as cli
from disctree import (
    DensitySpec,
    DiscKernel,
    EvalConfig,
    ImageSpec,
    build,
    evaluate_all,
    from_density,
    from_particles,
    with_images,
)


def write_particles(path, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x", "q"])
        writer.writerows(rows)


def write_targets(path, ys):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["y"])
        for y in ys:
            writer.writerow([repr(float(y))])


def parse_values_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    assert header == ["y", "E"]
    return [(float(y), float(e)) for y, e in reader]


class TestEvaluate:
    def test_single_particle_hand_value(self, tmp_path, capsys):
        particles = tmp_path / "p.csv"
        targets = tmp_path / "t.csv"
        write_particles(particles, [(0.0, 1.0)])
        write_targets(targets, [0.5])
        code = cli.main(
            ["evaluate", "--particles", str(particles), "--targets", str(targets)]
        )
        captured = capsys.readouterr()
        assert code == 0
        rows = parse_values_csv(captured.out)
        assert rows == [(0.5, pytest.approx(1.0 - 0.5 / math.sqrt(0.26), rel=1e-15))]
        summary = json.loads(captured.err.strip().splitlines()[-1])
        assert summary["n_charges"] == 1
        assert summary["method"] == "tree"

    def test_seventeen_digit_round_trip(self, tmp_path, capsys):
        particles = tmp_path / "p.csv"
        out = tmp_path / "field.csv"
        rng = np.random.default_rng(40)
        rows = list(zip(rng.uniform(0, 1, 200), rng.uniform(-1, 1, 200)))
        write_particles(particles, [(repr(float(x)), repr(float(q))) for x, q in rows])
        code = cli.main(
            ["evaluate", "--particles", str(particles), "--out", str(out)]
        )
        assert code == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["n_targets"] == 200
        system = from_particles(rows)
        kernel = DiscKernel(0.1)
        config = EvalConfig()
        tree = build(system, kernel, config)
        want = evaluate_all(tree, kernel, config, system, system.xs, threads=None)
        got = parse_values_csv(out.read_text())
        np.testing.assert_array_equal([e for _, e in got], want.values)
        np.testing.assert_array_equal([y for y, _ in got], system.xs)

    def test_density_input(self, tmp_path, capsys):
        spec_path = tmp_path / "density.json"
        doc = {
            "domain": [0.0, 1.0],
            "cells": 8,
            "values": [1.0e-11] * 8,
            "quadrature_order": 4,
        }
        spec_path.write_text(json.dumps(doc))
        targets = tmp_path / "t.csv"
        write_targets(targets, [0.25, 0.75])
        code = cli.main(
            ["evaluate", "--density", str(spec_path), "--targets", str(targets)]
        )
        captured = capsys.readouterr()
        assert code == 0
        rows = parse_values_csv(captured.out)
        system = from_density(DensitySpec((0.0, 1.0), 8, [1.0e-11] * 8, 4))
        kernel = DiscKernel(0.1)
        config = EvalConfig()
        tree = build(system, kernel, config)
        want = evaluate_all(
            tree, kernel, config, system, np.array([0.25, 0.75]), threads=None
        )
        assert [e for _, e in rows] == [pytest.approx(v) for v in want.values]

    def test_images_match_library(self, tmp_path, capsys):
        particles = tmp_path / "p.csv"
        targets = tmp_path / "t.csv"
        rows = [(0.2, 1.0), (0.6, -0.5)]
        write_particles(particles, rows)
        write_targets(targets, [0.4])
        code = cli.main(
            [
                "evaluate",
                "--particles",
                str(particles),
                "--targets",
                str(targets),
                "--images",
                "lower",
                "--gap",
                "1.0",
            ]
        )
        captured = capsys.readouterr()
        assert code == 0
        system = with_images(
            from_particles(rows),
            ImageSpec(gap_length=1.0, reflect_lower=True, reflect_upper=False),
        )
        kernel = DiscKernel(0.1)
        config = EvalConfig()
        tree = build(system, kernel, config)
        want = evaluate_all(tree, kernel, config, system, np.array([0.4]), threads=None)
        got = parse_values_csv(captured.out)
        assert got[0][1] == want.values[0]
        summary = json.loads(captured.err.strip().splitlines()[-1])
        assert summary["n_charges"] == 4

    def test_random_instance_reproducible(self, capsys):
        assert cli.main(["evaluate", "--n", "100", "--seed", "3"]) == 0
        first = capsys.readouterr().out
        assert cli.main(["evaluate", "--n", "100", "--seed", "3"]) == 0
        second = capsys.readouterr().out
        assert first == second
        assert first != ""


class TestDataErrors:
    def test_missing_file(self, capsys):
        code = cli.main(["evaluate", "--particles", "/no/such/file.csv"])
        assert code == 3
        assert "error:" in capsys.readouterr().err

    def test_wrong_header(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        path.write_text("a,b\n1,2\n")
        code = cli.main(["evaluate", "--particles", str(path)])
        assert code == 3
        assert "line 1" in capsys.readouterr().err

    def test_non_numeric_row_reports_line(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        path.write_text("x,q\n0.1,1.0\nbogus,2.0\n")
        code = cli.main(["evaluate", "--particles", str(path)])
        assert code == 3
        assert "line 3" in capsys.readouterr().err

    def test_non_finite_value(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        path.write_text("x,q\nnan,1.0\n")
        assert cli.main(["evaluate", "--particles", str(path)]) == 3
        capsys.readouterr()

    def test_empty_particles(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        path.write_text("x,q\n")
        assert cli.main(["evaluate", "--particles", str(path)]) == 3
        capsys.readouterr()

    def test_two_sources_rejected(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        write_particles(path, [(0.1, 1.0)])
        code = cli.main(["evaluate", "--particles", str(path), "--n", "10"])
        assert code == 3
        capsys.readouterr()

    def test_images_without_gap(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        write_particles(path, [(0.1, 1.0)])
        code = cli.main(
            ["evaluate", "--particles", str(path), "--images", "lower"]
        )
        assert code == 3
        capsys.readouterr()

    def test_malformed_density_json(self, tmp_path, capsys):
        path = tmp_path / "density.json"
        path.write_text("{not json")
        assert cli.main(["evaluate", "--density", str(path)]) == 3
        capsys.readouterr()

    def test_density_missing_fields(self, tmp_path, capsys):
        path = tmp_path / "density.json"
        path.write_text(json.dumps({"domain": [0, 1]}))
        code = cli.main(["evaluate", "--density", str(path)])
        assert code == 3
        assert "missing fields" in capsys.readouterr().err

    def test_bad_target_field_count(self, tmp_path, capsys):
        particles = tmp_path / "p.csv"
        targets = tmp_path / "t.csv"
        write_particles(particles, [(0.1, 1.0)])
        targets.write_text("y\n0.1,0.2\n")
        code = cli.main(
            ["evaluate", "--particles", str(particles), "--targets", str(targets)]
        )
        assert code == 3
        capsys.readouterr()


class TestUsageErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["evaluate", "--n", "10", "--rd", "-1"],
            ["evaluate", "--n", "10", "--rd", "zero"],
            ["evaluate", "--n", "10", "--theta", "1.5"],
            ["evaluate", "--n", "10", "--tol", "0"],
            ["evaluate", "--n", "10", "--images", "lower", "--gap", "-2"],
            ["evaluate", "--no-such-flag"],
            ["bench", "--sizes", "10,abc"],
            ["no-such-subcommand"],
        ],
    )
    def test_exit_two(self, argv, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
        assert info.value.code == 2
        capsys.readouterr()


class TestInternalErrors:
    def test_unexpected_exception_maps_to_four(self, tmp_path, capsys, monkeypatch):
        def boom(*args, **kwargs):
            raise RuntimeError("invariant violated")

        monkeypatch.setattr(cli, "build", boom)
        path = tmp_path / "p.csv"
        write_particles(path, [(0.1, 1.0)])
        code = cli.main(["evaluate", "--particles", str(path)])
        assert code == 4
        assert "internal error" in capsys.readouterr().err


class TestAccuracy:
    def test_table1_preset_json(self, capsys):
        code = cli.main(["accuracy", "--table1", "--format", "json"])
        captured = capsys.readouterr()
        assert code == 0
        records = json.loads(captured.out)
        assert [r["p"] for r in records] == [5, 10, 15, 20]
        errs = [r["relative_error"] for r in records]
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_small_run_csv(self, capsys):
        code = cli.main(["accuracy", "--n", "500", "--seed", "1"])
        captured = capsys.readouterr()
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(captured.out)))
        assert len(rows) == 1
        assert int(rows[0]["n"]) == 500
        # sanity level for the default p=10, theta=1/3 configuration; the
        # near-cancelling references inflate the max at small n
        assert float(rows[0]["max_relative"]) < 1e-3
        assert float(rows[0]["avg_relative"]) < 1e-6

    def test_reproducible(self, capsys):
        assert cli.main(["accuracy", "--n", "300", "--seed", "7"]) == 0
        first = capsys.readouterr().out
        assert cli.main(["accuracy", "--n", "300", "--seed", "7"]) == 0
        assert capsys.readouterr().out == first


class TestBenchAndScan:
    def test_bench_smoke_json(self, capsys):
        code = cli.main(
            ["bench", "--sizes", "200,400", "--repeats", "1", "--format", "json"]
        )
        captured = capsys.readouterr()
        assert code == 0
        records = json.loads(captured.out)
        assert [r["n"] for r in records] == [200, 400]
        for rec in records:
            assert rec["tree_eval_min_ms"] > 0
            assert rec["direct_eval_min_ms"] > 0

    def test_depth_scan_smoke(self, capsys, tmp_path):
        out = tmp_path / "scan.csv"
        code = cli.main(
            [
                "depth-scan",
                "--n",
                "1000",
                "--capacities",
                "200,25",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        capsys.readouterr()
        rows = list(csv.DictReader(io.StringIO(out.read_text())))
        assert [int(r["leaf_capacity"]) for r in rows] == [200, 25]
        assert int(rows[0]["depth"]) < int(rows[1]["depth"])
