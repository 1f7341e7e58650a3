import json
import subprocess
import sys

import numpy as np
import pytest

from qatkit.cli import load_config_file, main, parse_quant
from qatkit.quantize import read_clip_table


def run_cli(*args):
    return main(list(args))


class TestParseQuant:
    def test_none(self):
        assert parse_quant("none") is None

    def test_int_schemes(self):
        spec = parse_quant("int-hadamard:4")
        assert spec.scheme == "int-hadamard" and spec.bits == 4 and spec.clip_factor > 0
        assert parse_quant("int-plain:3").bits == 3

    def test_floor_with_grid(self):
        spec = parse_quant("floor-toy:0.25")
        assert spec.scheme == "floor-toy" and spec.grid == 0.25

    def test_mxfp4(self):
        assert parse_quant("mxfp4").scheme == "mxfp4"

    def test_bad_scheme(self):
        with pytest.raises(ValueError):
            parse_quant("int-hadamard")  # missing bits
        with pytest.raises(ValueError):
            parse_quant("foo:4")


class TestCalibrateClip:
    def test_three_row_monotone_table(self, tmp_path, capsys):
        out = tmp_path / "cal"
        # low-resolution settings keep the test quick; monotonicity is robust
        code = run_cli("calibrate-clip", "--bits", "2,3,4", "--out", str(out),
                       "--n-grid", "48", "--quadrature", "20001")
        assert code == 0
        table = read_clip_table(out / "clip_factors.tsv")
        assert list(table) == [2, 3, 4]
        ks = [table[b][0] for b in (2, 3, 4)]
        assert ks[0] < ks[1] < ks[2]
        assert len(capsys.readouterr().out.strip().splitlines()) == 3

    def test_rerun_identical_bytes(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert run_cli("calibrate-clip", "--bits", "3", "--out", str(out),
                           "--n-grid", "32", "--quadrature", "10001") == 0
        assert (out1 / "clip_factors.tsv").read_bytes() == (out2 / "clip_factors.tsv").read_bytes()
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()

    def test_out_of_range_bits_rejected(self, tmp_path, capsys):
        assert run_cli("calibrate-clip", "--bits", "9", "--out", str(tmp_path / "x")) == 2
        assert "range" in capsys.readouterr().err


class TestToyPareto:
    def test_balance_points(self, tmp_path):
        out = tmp_path / "toy"
        code = run_cli("toy-pareto", "--lambdas", "1,3", "--alpha", "0.05",
                       "--steps", "5000", "--out", str(out))
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        by_lam = {r["lambda"]: r for r in summary["results"]}
        assert abs(by_lam[1.0]["final_x"] - 0.25) <= 1e-6
        assert abs(by_lam[3.0]["final_x"] - 0.125) <= 1e-6
        assert by_lam[1.0]["pareto_grad_abs"] <= 1e-8
        assert by_lam[1.0]["ste_grad_abs"] >= 0.499
        # per-lambda traces with header + one row per step
        trace = (out / "trace_lambda1.csv").read_text().strip().splitlines()
        assert len(trace) == 5001

    def test_lambda_zero_drifts_to_half(self, tmp_path):
        out = tmp_path / "toy0"
        assert run_cli("toy-pareto", "--lambdas", "0", "--alpha", "0.05",
                       "--steps", "4000", "--out", str(out)) == 0
        res = json.loads((out / "summary.json").read_text())["results"][0]
        # plain descent settles at the unquantized minimum with a
        # straight-through residual that never vanishes
        assert abs(res["final_x"] - 0.5) <= 1e-6
        assert res["ste_grad_abs"] >= 0.499

    def test_determinism_and_roundtrip_floats(self, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert run_cli("toy-pareto", "--lambdas", "0.5", "--steps", "500",
                           "--out", str(out)) == 0
            outs.append((out / "summary.json").read_bytes())
        assert outs[0] == outs[1]
        from qatkit.experiments import run_toy_pareto

        res = run_toy_pareto(0.5, lr=0.05, steps=500)
        doc = json.loads(outs[0])
        assert doc["results"][0]["final_x"] == res.final_x  # exact round trip


class TestQuadratic:
    @pytest.mark.filterwarnings("ignore:zero-variance data")
    def test_sanity_lane_unquantized_sgd(self, tmp_path):
        # kappa = 1: SGD at the optimal step size contracts to the minimizer
        out = tmp_path / "quad"
        code = run_cli(
            "quadratic", "--kappas", "1", "--dim", "16", "--steps", "200",
            "--opt", "sgd", "--quant", "none", "--lr", "1.0", "--seed", "0,1",
            "--grad-clip", "0", "--out", str(out),
        )
        assert code == 0
        cells = json.loads((out / "summary.json").read_text())["cells"]
        assert cells[0]["mean_final_gap"] < 1e-10

    def test_trajectory_csv_shape(self, tmp_path):
        out = tmp_path / "quad2"
        code = run_cli(
            "quadratic", "--kappas", "10", "--dim", "8", "--steps", "50",
            "--opt", "adamw", "--quant", "int-hadamard:4", "--seed", "3",
            "--out", str(out),
        )
        assert code == 0
        traj = (out / "traj_kappa10_adamw_seed3.csv").read_text().strip().splitlines()
        assert traj[0] == "pc1,pc2"
        assert len(traj) == 51  # header + one row per step
        assert all(len(row.split(",")) == 2 for row in traj[1:])
        trace = (out / "trace_kappa10_adamw_seed3.csv").read_text().strip().splitlines()
        assert len(trace) == 51

    def test_unknown_optimizer_rejected(self, tmp_path, capsys):
        assert run_cli("quadratic", "--opt", "prodigy", "--out", str(tmp_path / "x")) == 2
        assert "prodigy" in capsys.readouterr().err

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_failure_exit_code_with_snapshot(self, tmp_path):
        out = tmp_path / "blowup"
        code = run_cli(
            "quadratic", "--kappas", "1", "--dim", "8", "--steps", "50",
            "--opt", "sgd", "--quant", "none", "--lr", "1e200", "--seed", "0",
            "--grad-clip", "0", "--out", str(out),
        )
        assert code == 3
        # the config snapshot was written before the run started
        assert (out / "config.json").exists()


class TestConvergence:
    def test_quadratic_lane_monotone_means(self, tmp_path):
        out = tmp_path / "conv"
        code = run_cli(
            "convergence", "--objective", "quadratic", "--dim", "6", "--kappa", "5",
            "--quant", "none", "--lambda", "0", "--noise-std", "0",
            "--steps", "100,1000,10000", "--seed", "0,1", "--out", str(out),
        )
        assert code == 0
        doc = json.loads((out / "summary.json").read_text())
        means = [h["seed_mean"] for h in doc["per_horizon"]]
        assert means[0] > means[1] > means[2]

    def test_alpha_rule(self, tmp_path):
        out = tmp_path / "conv2"
        code = run_cli(
            "convergence", "--objective", "quadratic", "--dim", "4", "--kappa", "2",
            "--quant", "floor-toy:0.25", "--lambda", "1", "--noise-std", "0.05",
            "--steps", "100,1000,10000", "--seed", "0", "--out", str(out),
        )
        assert code == 0
        doc = json.loads((out / "summary.json").read_text())
        lhat = doc["lipschitz"]
        for h in doc["per_horizon"]:
            assert h["alpha"] == min(1.0 / lhat, 1.0 / np.sqrt(h["T"]))

    def test_horizon_span_validated(self, tmp_path, capsys):
        assert run_cli("convergence", "--steps", "100,1000", "--out", str(tmp_path / "x")) == 2
        assert "decades" in capsys.readouterr().err

    def test_determinism(self, tmp_path):
        blobs = []
        for name in ("c1", "c2"):
            out = tmp_path / name
            assert run_cli(
                "convergence", "--objective", "rosenbrock", "--dim", "4",
                "--quant", "floor-toy:0.25", "--steps", "50,500,5000",
                "--seed", "0,1", "--out", str(out),
            ) == 0
            blobs.append((out / "summary.json").read_bytes())
        assert blobs[0] == blobs[1]


def test_quadratic_determinism(tmp_path):
    blobs = []
    for name in ("q1", "q2"):
        out = tmp_path / name
        assert run_cli(
            "quadratic", "--kappas", "10", "--dim", "8", "--steps", "100",
            "--opt", "adamw,cage-adamw-dec", "--seed", "0,1", "--out", str(out),
        ) == 0
        blobs.append((out / "summary.json").read_bytes())
    assert blobs[0] == blobs[1]


class TestFitScaling:
    @pytest.fixture()
    def synth_csv(self, tmp_path):
        from qatkit.numerics import make_rng
        from qatkit.scaling import synthesize_scaling_data, write_scaling_csv

        data = synthesize_scaling_data(
            A=0.8, alpha=0.34, B=1.5, beta=0.28, E=1.2,
            eff_by_group={("fp16", "FP"): 1.0, ("m4", "4"): 0.7, ("m2", "2"): 0.5},
            noise=0.005, rng=make_rng((500, 0)),
        )
        path = tmp_path / "losses.csv"
        write_scaling_csv(path, data)
        return path

    def test_recovery_via_cli(self, tmp_path, synth_csv, capsys):
        out = tmp_path / "fit"
        assert run_cli("fit-scaling", "--input", str(synth_csv), "--out", str(out)) == 0
        doc = json.loads((out / "fit.json").read_text())
        assert abs(doc["A"] / 0.8 - 1) <= 0.10
        assert abs(doc["alpha"] / 0.34 - 1) <= 0.10
        effs = {(e["method"], e["P"]): e["eff"] for e in doc["eff"]}
        assert abs(effs[("m4", "4")] - 0.7) <= 0.05
        assert abs(effs[("m2", "2")] - 0.5) <= 0.05
        printed = capsys.readouterr().out
        assert "residual_rms" in printed and "m2" in printed

    def test_fp_only_file(self, tmp_path):
        path = tmp_path / "fp.csv"
        path.write_text(
            "method,P,N,D,loss\n"
            + "\n".join(f"m,FP,{n},{d},{2.0 + 0.8 / n ** 0.3 + 1.5 / d ** 0.3}"
                        for n in (10, 100, 1000) for d in (100, 1000, 10000))
            + "\n"
        )
        out = tmp_path / "fit"
        assert run_cli("fit-scaling", "--input", str(path), "--out", str(out)) == 0
        doc = json.loads((out / "fit.json").read_text())
        assert doc["eff"] == []  # no fitted groups; FP is pinned at 1

    def test_missing_fp_group_rejected(self, tmp_path, capsys):
        path = tmp_path / "nofp.csv"
        path.write_text(
            "method,P,N,D,loss\n"
            + "\n".join(f"m,4,{n},{d},2.5\nm2,4,{n},{d},2.6" for n in (10, 100) for d in (100, 1000))
            + "\n"
        )
        assert run_cli("fit-scaling", "--input", str(path), "--out", str(tmp_path / "f")) == 2
        assert "FP" in capsys.readouterr().err

    def test_malformed_csv_line_number(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("method,P,N,D,loss\nm,FP,10,100,2.0\nm,FP,oops,100,2.0\n")
        assert run_cli("fit-scaling", "--input", str(path), "--out", str(tmp_path / "f")) == 2
        assert ":3" in capsys.readouterr().err

    def test_missing_input_flag(self, tmp_path, capsys):
        assert run_cli("fit-scaling", "--out", str(tmp_path / "f")) == 2
        assert "input" in capsys.readouterr().err

    def test_determinism(self, tmp_path, synth_csv):
        blobs = []
        for name in ("f1", "f2"):
            out = tmp_path / name
            assert run_cli("fit-scaling", "--input", str(synth_csv), "--out", str(out)) == 0
            blobs.append((out / "fit.json").read_bytes())
        assert blobs[0] == blobs[1]


class TestConfigFile:
    def test_config_loads_and_cli_overrides(self, tmp_path):
        cfg = tmp_path / "toy.cfg"
        cfg.write_text("# toy settings\nlambdas = 1\nalpha = 0.05\nsteps = 400\n")
        out = tmp_path / "toy"
        assert run_cli("toy-pareto", "--config", str(cfg), "--steps", "600", "--out", str(out)) == 0
        snap = json.loads((out / "config.json").read_text())
        assert snap["steps"] == [600]  # CLI wins
        assert snap["alpha"] == 0.05  # config supplies the rest
        assert snap["lambdas"] == [1.0]

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("lambdas = 1\nwarp_factor = 9\n")
        assert run_cli("toy-pareto", "--config", str(cfg), "--out", str(tmp_path / "x")) == 2
        assert "warp_factor" in capsys.readouterr().err

    def test_malformed_line_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("lambdas 1\n")
        with pytest.raises(ValueError, match="key = value"):
            load_config_file(cfg)

    def test_snapshot_written_before_results(self, tmp_path):
        out = tmp_path / "snap"
        assert run_cli("toy-pareto", "--lambdas", "1", "--steps", "50", "--out", str(out)) == 0
        snap = json.loads((out / "config.json").read_text())
        assert snap["subcommand"] == "toy-pareto"
        assert snap["out"] == str(out)


def test_module_entrypoint_smoke(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "qatkit", "toy-pareto", "--lambdas", "2",
         "--steps", "100", "--out", str(tmp_path / "m")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "lambda=2" in proc.stdout
