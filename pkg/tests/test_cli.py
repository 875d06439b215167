import json
import os

import numpy as np
from rieszmin.cli import main
from rieszmin.energy import load_configuration_csv


def write_config(tmp_path, name="config.json", **overrides):
    config = {
        "seed": 11,
        "kernel": {"variant": "power_law", "alpha": 1.0, "beta": 2.0, "dim": 2},
        "measure": {"type": "uniform_box", "lo": [0, 0], "hi": [1, 1]},
        "n": 25,
        "dim": 2,
        "n_list": [16, 64],
        "minimize": {"restarts": 4, "max_iters": 400},
        "trace": {"mc_samples": 20000},
    }
    config.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


def result_payload(path):
    with open(path) as fh:
        return json.load(fh)["result"]


class TestCheckKernel:
    def test_power_law_passes_with_exit_zero(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code = main(["check-kernel", "--config", cfg, "--out", str(tmp_path / "out")])
        assert code == 0
        assert "PASS" in capsys.readouterr().out
        assert (tmp_path / "out" / "assumptions.json").exists()

    def test_invalid_kernel_exits_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path, kernel={"variant": "power_law", "alpha": -4.0,
                                             "beta": 2.0, "dim": 2})
        code = main(["check-kernel", "--config", cfg, "--out", str(tmp_path / "out")])
        assert code == 2

    def test_witness_block_populates_h4(self, tmp_path):
        cfg = write_config(
            tmp_path,
            kernel={"variant": "morse", "c1": 4.0, "c2": 1.0, "l1": 0.5, "l2": 2.0,
                    "dim": 2},
            witness={"type": "uniform_ball", "center": [0, 0], "radius": 3.0},
            check_scheme={"h4_samples": 20000},
        )
        out = tmp_path / "out"
        code = main(["check-kernel", "--config", cfg, "--out", str(out)])
        assert code == 0
        payload = result_payload(out / "assumptions.json")
        assert payload["h4_witness_energy"] < 0


class TestQuantize:
    def test_row_count_matches_n(self, tmp_path):
        cfg = write_config(tmp_path, n=100)
        out = tmp_path / "out"
        assert main(["quantize", "--config", cfg, "--out", str(out)]) == 0
        loaded = load_configuration_csv(out / "quantized.csv")
        assert loaded.n == 100

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["quantize", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["quantize", "--config", cfg, "--out", str(out2)]) == 0
        assert (out1 / "quantized.csv").read_bytes() == (out2 / "quantized.csv").read_bytes()
        assert result_payload(out1 / "quantize.json") == result_payload(out2 / "quantize.json")

    def test_sidecar_reports_dropped_cells(self, tmp_path):
        cfg = write_config(tmp_path, n=10)
        out = tmp_path / "out"
        assert main(["quantize", "--config", cfg, "--out", str(out)]) == 0
        payload = result_payload(out / "quantize.json")
        assert payload["l"] == 4
        assert payload["dropped"] == 16 - 10

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["quantize", "--config", cfg, "--out", str(out1), "--seed", "5"])
        main(["quantize", "--config", cfg, "--out", str(out2), "--seed", "6"])
        assert (out1 / "quantized.csv").read_text() != (out2 / "quantized.csv").read_text()


class TestMinimize:
    def test_pair_energy_in_json(self, tmp_path):
        cfg = write_config(tmp_path, n=2, minimize={"restarts": 8})
        out = tmp_path / "out"
        assert main(["minimize", "--config", cfg, "--out", str(out)]) == 0
        payload = result_payload(out / "minimize.json")
        assert abs(payload["energy"] - (-0.25)) < 1e-9

    def test_invalid_kernel_parameters_exit_two(self, tmp_path):
        cfg = write_config(tmp_path, kernel={"variant": "morse", "c1": -1.0, "c2": 1.0,
                                             "l1": 1.0, "l2": 1.0, "dim": 2})
        assert main(["minimize", "--config", cfg, "--out", str(tmp_path / "out")]) == 2

    def test_history_length_bounded_by_max_iters(self, tmp_path):
        cfg = write_config(tmp_path, n=6, minimize={"restarts": 2, "max_iters": 50})
        out = tmp_path / "out"
        assert main(["minimize", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "history.csv").read_text().splitlines()
        assert len(lines) - 1 <= 50  # at most one row per iteration

    def test_svg_written_only_for_2d_with_flag(self, tmp_path):
        cfg = write_config(tmp_path, n=4)
        out1 = tmp_path / "plain"
        main(["minimize", "--config", cfg, "--out", str(out1)])
        assert not (out1 / "minimized.svg").exists()
        out2 = tmp_path / "svg"
        main(["minimize", "--config", cfg, "--out", str(out2), "--svg"])
        assert (out2 / "minimized.svg").exists()
        cfg1 = write_config(tmp_path, name="c1.json",
                            kernel={"variant": "power_law", "alpha": 1.0, "beta": 2.0,
                                    "dim": 1},
                            dim=1, n=4)
        out3 = tmp_path / "svg1d"
        main(["minimize", "--config", cfg1, "--out", str(out3), "--svg"])
        assert not (out3 / "minimized.svg").exists()


class TestTrace:
    def test_csv_has_one_row_per_n(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["trace", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "trace.csv").read_text().splitlines()
        assert len(lines) == 1 + 2
        assert lines[0].startswith("n,energy_quantized")

    def test_empty_n_list_is_usage_error(self, tmp_path):
        cfg = write_config(tmp_path, n_list=[])
        assert main(["trace", "--config", cfg, "--out", str(tmp_path / "out")]) == 1

    def test_svg_emitted_for_2d_with_flag(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["trace", "--config", cfg, "--out", str(out), "--svg"]) == 0
        assert (out / "trace.svg").exists()


class TestDiagnose:
    def test_optimal_pair_spread(self, tmp_path):
        cfg = write_config(tmp_path, n=2, minimize={"restarts": 8})
        out = tmp_path / "out"
        main(["minimize", "--config", cfg, "--out", str(out)])
        code = main(["diagnose", "--config", cfg, str(out / "minimized.csv"),
                     "--out", str(out)])
        assert code == 0
        payload = result_payload(out / "diagnose.json")
        assert payload["el"]["potential_spread"] <= 1e-12

    def test_two_cluster_file_is_dichotomy(self, tmp_path):
        rng = np.random.default_rng(0)
        a = rng.uniform(-0.01, 0.01, size=(60, 2))
        b = rng.uniform(-0.01, 0.01, size=(40, 2)) + [30.0, 0.0]
        pts = np.vstack([a, b])
        lines = ["2,100"] + [f"{x:.17g},{y:.17g}" for x, y in pts]
        path = tmp_path / "two.csv"
        path.write_text("\n".join(lines) + "\n")
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["diagnose", "--config", cfg, str(path), "--out", str(out)]) == 0
        payload = result_payload(out / "diagnose.json")
        assert payload["clusters"]["classification"] == "dichotomy-like"

    def test_malformed_csv_reports_line(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("2,2\n0.0,0.0\nnot,numbers\n")
        cfg = write_config(tmp_path)
        code = main(["diagnose", "--config", cfg, str(path), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "bad.csv:3" in capsys.readouterr().err


class TestUserInit:
    def test_minimize_from_user_start(self, tmp_path):
        from rieszmin.energy import Configuration, save_configuration_csv

        save_configuration_csv(Configuration([[0.0, 0.0], [2.0, 0.0]]),
                               tmp_path / "start.csv")
        cfg = write_config(tmp_path, n=2,
                           minimize={"restarts": 3,
                                     "init": {"kind": "user", "path": "start.csv"}})
        out = tmp_path / "out"
        assert main(["minimize", "--config", cfg, "--out", str(out)]) == 0
        payload = result_payload(out / "minimize.json")
        assert abs(payload["energy"] - (-0.25)) < 1e-9


class TestTraceDeterminism:
    def test_trace_payload_byte_stable(self, tmp_path):
        cfg = write_config(tmp_path, n_list=[9, 16])
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["trace", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["trace", "--config", cfg, "--out", str(out2)]) == 0
        assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()
        assert result_payload(out1 / "trace.json") == result_payload(out2 / "trace.json")


class TestParsing:
    def test_missing_config_file(self, capsys):
        assert main(["quantize", "--config", "/does/not/exist.json"]) == 1

    def test_unknown_command_is_usage_error(self):
        assert main(["explode", "--config", "x.json"]) == 1

    def test_cloud_measure_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(400, 2))
        cloud = tmp_path / "cloud.csv"
        cloud.write_text("\n".join(f"{x:.17g},{y:.17g}" for x, y in pts) + "\n")
        cfg = write_config(tmp_path, measure={"type": "cloud", "path": "cloud.csv",
                                              "dim": 2}, n=16)
        out = tmp_path / "out"
        assert main(["quantize", "--config", cfg, "--out", str(out)]) == 0
        assert load_configuration_csv(out / "quantized.csv").n == 16

    def test_density_measure_from_expression(self, tmp_path):
        cfg = write_config(
            tmp_path,
            measure={"type": "density", "expr": "np.exp(-8*((x0-0.5)**2+(x1-0.5)**2))",
                     "lo": [0, 0], "hi": [1, 1], "normalize": True,
                     "cells_per_axis": 64},
            n=9,
        )
        out = tmp_path / "out"
        assert main(["quantize", "--config", cfg, "--out", str(out)]) == 0
        loaded = load_configuration_csv(out / "quantized.csv")
        # representatives concentrate near the gaussian bump center
        assert np.linalg.norm(loaded.points.mean(axis=0) - [0.5, 0.5]) < 0.1
