"""CLI plumbing: config validation, task runs, manifests, determinism, SVG."""

import json
import os

import pytest

from nonbloch.cli import ConfigError, ExperimentConfig, main, run
from nonbloch.svg import SvgError, read_csv


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentConfig.from_dict({"preset": "fig2a", "lattice_size": 50})

    def test_unknown_task_rejected(self):
        with pytest.raises(ConfigError, match="unknown task"):
            ExperimentConfig.from_dict({"preset": "fig2a", "tasks": ["spectrum"]})

    def test_needs_exactly_one_model_source(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(
                {"preset": "fig2a", "model": {"coeffs": []}}
            )

    def test_unknown_healing_key_rejected(self):
        with pytest.raises(ConfigError, match="healing"):
            ExperimentConfig.from_dict(
                {"preset": "fig6a", "healing": {"gamma0": 1.0}}
            )

    def test_unknown_tolerance_rejected(self):
        with pytest.raises(ConfigError, match="tolerance"):
            ExperimentConfig.from_dict(
                {"preset": "fig2a", "tolerances": {"lambda": 0.1}}
            )

    def test_empty_tasks_noop(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"preset": "fig2a", "out": str(tmp_path)})
        assert run(cfg) == 0
        assert not (tmp_path / "manifest.json").exists()


class TestRun:
    def test_spectra_and_saddles(self, tmp_path):
        cfg = ExperimentConfig.from_dict({
            "preset": "fig2b",
            "tasks": ["spectra", "saddles"],
            "L": 40,
            "out": str(tmp_path),
        })
        assert run(cfg, check=True) == 0
        assert (tmp_path / "spectra" / "spectrum.csv").exists()
        assert (tmp_path / "spectra" / "gbz.csv").exists()
        assert (tmp_path / "saddles" / "saddles.csv").exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["ok"] is True
        assert manifest["versions"]["nonbloch"]
        assert len(manifest["config_sha256"]) == 64

    def test_byte_identical_reruns(self, tmp_path):
        def once(sub):
            cfg = ExperimentConfig.from_dict({
                "preset": "fig2a",
                "tasks": ["saddles", "spectra"],
                "L": 30,
                "out": str(tmp_path / sub),
            })
            assert run(cfg) == 0
            return (
                (tmp_path / sub / "saddles" / "saddles.csv").read_bytes(),
                (tmp_path / sub / "spectra" / "spectrum.csv").read_bytes(),
            )

        assert once("a") == once("b")

    def test_failing_task_sets_status(self, tmp_path, capsys):
        cfg = ExperimentConfig.from_dict({
            "preset": "figS3a",  # multiband: thimble classification refuses
            "tasks": ["thimbles"],
            "out": str(tmp_path),
        })
        assert run(cfg) == 1
        err = capsys.readouterr().err
        assert "thimbles" in err
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["ok"] is False
        assert manifest["failed_task"] == "thimbles"


class TestMain:
    def test_run_via_argv(self, tmp_path):
        out = str(tmp_path / "r")
        assert main(["run", "--preset", "fig2b", "--task", "saddles",
                     "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "saddles", "saddles.csv"))

    def test_bad_config_file(self, tmp_path, capsys):
        bad = tmp_path / "cfg.json"
        bad.write_text("{not json")
        assert main(["run", "--config", str(bad), "--task", "saddles"]) == 1
        assert "config" in capsys.readouterr().err

    def test_config_file_plus_overrides(self, tmp_path):
        cfgfile = tmp_path / "cfg.json"
        cfgfile.write_text(json.dumps({"preset": "fig2a", "L": 30}))
        out = str(tmp_path / "o")
        assert main(["run", "--config", str(cfgfile), "--task", "spectra",
                     "--out", out]) == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["config"]["L"] == 30

    def test_plot_spectra(self, tmp_path):
        out = str(tmp_path / "r")
        main(["run", "--preset", "fig2b", "--task", "spectra", "--L", "30",
              "--out", out])
        svg = str(tmp_path / "spectra.svg")
        assert main(["plot", os.path.join(out, "spectra", "spectrum.csv"),
                     "--kind", "spectra", "--out", svg]) == 0
        text = open(svg).read()
        assert text.startswith("<svg") and "</svg>" in text
        assert "Im E" in text

    def test_plot_malformed_csv(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("re,im,kind\n1.0,2.0\n")
        assert main(["plot", str(bad), "--kind", "spectra",
                     "--out", str(tmp_path / "x.svg")]) == 1
        assert "line 2" in capsys.readouterr().err


class TestCsvReader:
    def test_schema_mismatch(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("a,b\n1,2\n")
        with pytest.raises(SvgError, match="line 1"):
            read_csv(str(f), ("t", "x"))

    def test_reads_numbers_and_strings(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("x,kind\n1.5,obc\n2.5,pbc\n")
        data = read_csv(str(f))
        assert data["x"] == [1.5, 2.5]
        assert data["kind"] == ["obc", "pbc"]
