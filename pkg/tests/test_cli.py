import numpy as np
import pytest

from sedkit.cli import main
from sedkit.formats import pfm_read, pfm_write, pgm_read, pgm_write
from sedkit.metrics import eval_report
from sedkit.synth import gen_scene

SMALL_CFG = """
width = 32
height = 32
d_max = 8
epochs = 4
seed = 5
"""


def write_cfg(tmp_path, text=SMALL_CFG):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


class TestSynthCommand:
    def test_writes_scene_files(self, tmp_path, capsys):
        out = tmp_path / "scene"
        assert main(["synth", "--seed", "2", "--out-dir", str(out),
                     "--width", "48", "--height", "32", "--d-max", "8"]) == 0
        scene = gen_scene(2, 48, 32, 8)
        disp = pfm_read(out / "disp.pfm").samples
        np.testing.assert_array_equal(disp, scene.disparity.astype(np.float32))
        np.testing.assert_array_equal(pgm_read(out / "valid.pgm") > 0, scene.valid)
        assert (out / "left.pgm").exists() and (out / "right.pgm").exists()

    def test_shift_scene(self, tmp_path):
        out = tmp_path / "shifted"
        assert main(["synth", "--seed", "1", "--out-dir", str(out),
                     "--width", "32", "--height", "32", "--shift", "3"]) == 0
        disp = pfm_read(out / "disp.pfm").samples
        np.testing.assert_array_equal(disp, 3.0)


class TestEvalCommand:
    def test_matches_library(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        gt = rng.uniform(0, 10, size=(8, 8)).astype(np.float32)
        dh = (gt + rng.normal(scale=0.5, size=(8, 8))).astype(np.float32)
        sigma = np.abs(rng.normal(size=(8, 8))).astype(np.float32)
        valid = rng.random((8, 8)) < 0.9
        pfm_write(tmp_path / "dhat.pfm", dh)
        pfm_write(tmp_path / "gt.pfm", gt)
        pfm_write(tmp_path / "sigma.pfm", sigma)
        pgm_write(tmp_path / "valid.pgm", valid.astype(np.uint8) * 255)

        assert main(["eval", "--dhat", str(tmp_path / "dhat.pfm"),
                     "--gt", str(tmp_path / "gt.pfm"),
                     "--sigma", str(tmp_path / "sigma.pfm"),
                     "--valid", str(tmp_path / "valid.pgm")]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        header = lines[0].split(",")
        row = dict(zip(header, lines[1].split(",")))

        rep = eval_report(dh.astype(np.float64), gt.astype(np.float64),
                          sigma.astype(np.float64), valid)
        assert float(row["epe"]) == rep.epe
        assert float(row["d1"]) == rep.d1
        assert float(row["auc_estimated"]) == rep.auc_estimated
        assert float(row["auc_estimated_x100"]) == 100.0 * rep.auc_estimated
        assert int(row["n_valid"]) == rep.n_valid

    def test_perfect_prediction(self, tmp_path, capsys):
        gt = np.full((4, 4), 2.0, dtype=np.float32)
        zeros = np.zeros((4, 4), dtype=np.float32)
        pfm_write(tmp_path / "gt.pfm", gt)
        pfm_write(tmp_path / "sigma.pfm", zeros)
        assert main(["eval", "--dhat", str(tmp_path / "gt.pfm"),
                     "--gt", str(tmp_path / "gt.pfm"),
                     "--sigma", str(tmp_path / "sigma.pfm")]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[1].split(",")[0] == "0.0"

    def test_missing_file_is_runtime_error(self, tmp_path, capsys):
        assert main(["eval", "--dhat", "nope.pfm", "--gt", "nope.pfm",
                     "--sigma", "nope.pfm"]) == 1
        assert "error:" in capsys.readouterr().err


class TestTrainCommand:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = write_cfg(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["train", "--config", cfg, "--out-dir", str(out1)]) == 0
        assert main(["train", "--config", cfg, "--out-dir", str(out2)]) == 0
        for name in ("head.bin", "diagnostics.csv", "report.csv", "roc.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        header = (out1 / "diagnostics.csv").read_text().splitlines()[0]
        assert header == "step,level,L_log,L_div,pct,mu,b"

    def test_bad_config_fails(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "nonsense = 1\n")
        assert main(["train", "--config", cfg, "--out-dir", str(tmp_path / "x")]) == 1

    def test_warm_start_from_saved_head(self, tmp_path):
        from sedkit.head import load_head
        cfg = write_cfg(tmp_path)
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["train", "--config", cfg, "--out-dir", str(first)]) == 0
        assert main(["train", "--config", cfg, "--out-dir", str(second),
                     "--init-head", str(first / "head.bin")]) == 0
        a = load_head(first / "head.bin")
        b = load_head(second / "head.bin")
        assert a.layer_sizes() == b.layer_sizes()
        # continued training moved the weights
        assert any(not np.array_equal(wa, wb)
                   for wa, wb in zip(a.weights, b.weights))


class TestHistCommand:
    def test_single_input_format(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        a = np.abs(rng.normal(size=(16, 16))).astype(np.float32)
        pfm_write(tmp_path / "a.pfm", a)
        assert main(["hist", "--values", str(tmp_path / "a.pfm")]) == 0
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        assert lines[0] == "bin_index,center,mass"
        assert len(lines) == 12  # header + 11 bins
        total = sum(float(l.split(",")[2]) for l in lines[1:])
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_multi_input_pairwise_kl(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        a = np.abs(rng.normal(size=(16, 16))).astype(np.float32)
        b = np.abs(rng.normal(size=(16, 16))).astype(np.float32)
        pfm_write(tmp_path / "a.pfm", a)
        pfm_write(tmp_path / "b.pfm", b)
        assert main(["hist", "--values", str(tmp_path / "a.pfm"),
                     str(tmp_path / "b.pfm")]) == 0
        out = capsys.readouterr().out
        assert out.startswith("input,bin_index,center,mass")
        assert "ref,other,kl" in out
        mass_by_input = {}
        for row in out.splitlines():
            parts = row.split(",")
            if len(parts) == 4 and parts[0].isdigit():
                mass_by_input.setdefault(parts[0], 0.0)
                mass_by_input[parts[0]] += float(parts[3])
        for total in mass_by_input.values():
            assert total == pytest.approx(1.0, abs=1e-9)
        kl_lines = [l for l in out.splitlines() if len(l.split(",")) == 3
                    and l.split(",")[0].isdigit()]
        assert len(kl_lines) == 2
        assert all(float(l.split(",")[2]) >= 0.0 for l in kl_lines)


class TestGradcheckCommand:
    def test_passes_with_few_instances(self, capsys):
        assert main(["gradcheck", "--instances", "2"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 5
        assert "FAIL" not in out


class TestUsageErrors:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_required_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth"])
        assert exc.value.code == 2
