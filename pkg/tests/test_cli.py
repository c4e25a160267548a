import json

import numpy as np
import pytest

from dbarkit.bie import read_scattering_csv
from dbarkit.cli import main, read_config
from dbarkit.core import InvalidArgument
from dbarkit.forward import read_dn_csv


class TestConfig:
    def test_parse(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text(
            "# ellipse for the clean run\n"
            "energy = -1.0\n"
            "ellipse-a = 11\n"
            "n_modes = 16   # modes\n"
            "\n")
        cfg = read_config(p)
        assert cfg == {"energy": "-1.0", "ellipse_a": "11", "n_modes": "16"}

    def test_malformed(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("just words\n")
        with pytest.raises(InvalidArgument):
            read_config(p)


def manifest_of(outdir):
    data = json.loads((outdir / "manifest.json").read_text())
    assert {"command", "timestamp", "versions", "parameters",
            "outputs"} <= set(data)
    assert "dbarkit" in data["versions"]
    return data


class TestGreenEval:
    def test_produces_csv_png_manifest(self, tmp_path):
        out = tmp_path / "g"
        rc = main(["green-eval", "--outdir", str(out), "--n", "24",
                   "--zmax", "1.5", "--lam", "1+1j"])
        assert rc == 0
        for name in ("green.csv", "green_re.png", "green_im.png",
                     "manifest.json"):
            assert (out / name).exists()
        data = manifest_of(out)
        assert data["command"] == "green-eval"
        assert data["parameters"]["n"] == 24
        assert "green_re" in data["extras"]
        lines = (out / "green.csv").read_text().splitlines()
        assert lines[0] == "x1,x2,re,im"
        assert len(lines) == 24 * 24 + 1

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("n = 16\nzmax = 1.2\n")
        out = tmp_path / "g2"
        rc = main(["green-eval", "--config", str(cfg), "--outdir", str(out),
                   "--n", "8"])
        assert rc == 0
        data = manifest_of(out)
        assert data["parameters"]["n"] == 8        # flag wins
        assert data["parameters"]["zmax"] == 1.2   # config used


class TestPipelineCommands:
    def test_simulate_scatter_reconstruct_zero_case(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["simulate-dn", "--outdir", str(out), "--case", "zero",
                   "--mesh-refine", "4", "--n-modes", "4",
                   "--noise", "5e-5", "--seed", "3"])
        assert rc == 0
        Lq = read_dn_csv(out / "dn_q.csv")
        assert Lq.n_modes == 4
        assert (out / "dn_q_noisy.csv").exists()

        # the zero case uses the analytic reference as data: t vanishes
        rc = main(["scatter", "--outdir", str(out),
                   "--dn", str(out / "dn_ref.csv"),
                   "--dn-ref", str(out / "dn_ref.csv"),
                   "--ellipse-a", "3.0", "--ellipse-b", "3.0",
                   "--lambda-m", "5", "--n-radial", "8", "--nb", "20"])
        assert rc == 0
        t = read_scattering_csv(out / "scattering_truncated.csv")
        assert np.all(t.values == 0.0)
        assert (out / "scattering_re.png").exists()

        rc = main(["reconstruct-q", "--outdir", str(out),
                   "--scattering", str(out / "scattering_truncated.csv"),
                   "--n-recon", "3"])
        assert rc == 0
        rows = (out / "recon_q.csv").read_text().splitlines()
        assert rows[0] == "x,y,value_re,value_im"
        vals = np.array([float(r.split(",")[2]) for r in rows[1:]])
        assert np.max(np.abs(vals)) < 1e-12

        rc = main(["reconstruct-sigma", "--outdir", str(out),
                   "--scattering", str(out / "scattering_truncated.csv"),
                   "--n-recon", "3", "--boundary-value", "1.0"])
        assert rc == 0
        rows = (out / "recon_sigma.csv").read_text().splitlines()
        sig = np.array([float(r.split(",")[2]) for r in rows[1:]])
        assert np.allclose(sig, 1.0)

    def test_scatter_requires_dn(self, tmp_path):
        rc = main(["scatter", "--outdir", str(tmp_path / "x")])
        assert rc == 2


class TestScanCommand:
    def test_tiny_scan_with_resume(self, tmp_path):
        out = tmp_path / "scan"
        args = ["scan-exceptional", "--outdir", str(out),
                "--alpha-min", "0", "--alpha-max", "1", "--n-alpha", "2",
                "--lam-min", "1.4", "--lam-max", "1.8", "--n-lambda", "2",
                "--m", "5", "--guard", "0.01"]
        assert main(args) == 0
        body = (out / "scan.csv").read_text().splitlines()
        assert body[0].startswith("i_alpha,i_lambda")
        assert len(body) == 5
        data = manifest_of(out)
        assert "blowup_cells" in data["extras"]
        # resume: nothing left to compute, file preserved
        assert main(args + ["--resume", "1"]) == 0
        assert len((out / "scan.csv").read_text().splitlines()) == 5
        assert (out / "scan.png").exists()

    def test_scan_deterministic(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["scan-exceptional", "--outdir", str(out),
                         "--alpha-min", "-5", "--alpha-max", "5",
                         "--n-alpha", "2", "--lam-min", "1.5",
                         "--lam-max", "1.9", "--n-lambda", "2",
                         "--m", "5", "--guard", "0.01"]) == 0
            outs.append((out / "scan.csv").read_bytes())
        assert outs[0] == outs[1]
