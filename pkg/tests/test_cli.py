import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import write_config
from stormlens import cli
from stormlens._io import atomic_write_text
from stormlens.config import ConfigError, PipelineConfig


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def report_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("report")
    cfg = write_config(tmp)
    assert cli.main(["report", "--config", str(cfg), "--jobs", "1"]) == 0
    return tmp / "out"


class TestReport:
    def test_all_artifacts(self, report_dir):
        names = {str(p.relative_to(report_dir)) for p in report_dir.rglob("*") if p.is_file()}
        expected = {
            "attention_summary_hashtag.csv", "attention_summary_bigram.csv", "join_errors.csv",
            "decay_fits.csv", "decay_model_comparison.csv", "posterior_reg1.csv", "posterior_reg2.csv",
            "posterior_reg3.csv", "regress_skipped.csv", "attention_map_2017.geojson", "radar_table.csv",
        }
        assert expected <= names
        assert any(n.startswith("attention_share/harvey_2017") for n in names)
        assert not any(".tmp" in n for n in names)

    def test_join_error_reported(self, report_dir):
        text = (report_dir / "join_errors.csv").read_text()
        assert text.startswith("storm,season,error\n") and "Katia" in text

    def test_summary_rows(self, report_dir):
        lines = (report_dir / "attention_summary_hashtag.csv").read_text().splitlines()
        assert lines[0] == "storm,season,integrated,max_rate,deaths,damage_usd,q99_days,q90_days"
        assert len(lines) == 1 + 6

    def test_posterior_schema(self, report_dir):
        lines = (report_dir / "posterior_reg1.csv").read_text().splitlines()
        assert lines[0] == "param,mean,sd,mc_error,hpd_2.5,hpd_97.5,n_eff,Rhat"
        assert [l.split(",")[0] for l in lines[1:]] == ["a0", "a_death", "a_damage", "sigma"]

    def test_geojson(self, report_dir):
        import geojson

        doc = json.loads((report_dir / "attention_map_2017.geojson").read_text())
        assert geojson.loads(json.dumps(doc)).is_valid
        assert len(doc["features"]) == 2 * 6
        assert len({f["properties"]["k"] for f in doc["features"]}) == 1

    def test_share_series(self, report_dir):
        text = (report_dir / "attention_share" / "maria_2017.csv").read_text().splitlines()
        assert text[0] == "date,bigram_rate,unigram_rate,share"
        vals = [float(l.split(",")[3]) for l in text[1:] if l.split(",")[3] not in ("", "nan")]
        assert vals and all(0 <= v <= 1 for v in vals)


class TestCommands:
    def test_ingest(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code, out, _ = run(["ingest", "--config", str(cfg)], capsys)
        assert code == 0
        from stormlens.corpus import read_counts

        rows = read_counts(tmp_path / "out" / "counts.tsv")
        assert any(r.gram == "#hurricaneharvey" for r in rows)
        assert "counts.tsv" in out

    def test_missing_impacts_names_path(self, tmp_path, capsys):
        missing = tmp_path / "nowhere" / "impacts.csv"
        cfg = write_config(tmp_path, impacts=str(missing))
        code, _, err = run(["metrics", "--config", str(cfg)], capsys)
        assert code != 0
        payload = json.loads(err.strip().splitlines()[-1])
        assert str(missing) in payload["message"] and payload["command"] == "metrics"
        assert not (tmp_path / "out").exists()

    def test_unknown_command(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code, _, err = run(["plot", "--config", str(cfg)], capsys)
        assert code != 0 and "invalid choice" in err
        with pytest.raises(ConfigError, match="unknown command"):
            cli.run_pipeline(cfg, "plot")

    def test_seed_required(self, tmp_path, capsys):
        cfg = write_config(tmp_path, sampler={"chains": 2, "draws": 50, "burn_in": 50, "seed": None})
        code, _, err = run(["fit-decay", "--config", str(cfg)], capsys)
        assert code == cli.EXIT_USAGE and "seed" in err
        code, _, _ = run(["fit-decay", "--config", str(cfg), "--seed", "3", "--jobs", "1"], capsys)
        assert code == 0

    def test_bad_config_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, colour="blue")
        code, _, err = run(["metrics", "--config", str(cfg)], capsys)
        assert code == cli.EXIT_USAGE and "colour" in err

    def test_missing_config(self, tmp_path, capsys):
        code, _, err = run(["metrics", "--config", str(tmp_path / "none.json")], capsys)
        assert code == cli.EXIT_USAGE and json.loads(err)["error"] == "ConfigError"

    def test_scale_flag(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert run(["map", "--config", str(cfg), "--scale-max-degrees", "2"], capsys)[0] == 0
        doc = json.loads((tmp_path / "out" / "attention_map_2017.geojson").read_text())
        top = max(f["properties"]["max_rate"] for f in doc["features"])
        assert doc["features"][0]["properties"]["k"] * top == pytest.approx(2.0)

    def test_storm_filter(self, tmp_path, capsys):
        cfg = write_config(tmp_path, storms=["Harvey", "Irma"])
        assert run(["metrics", "--config", str(cfg)], capsys)[0] == 0
        lines = (tmp_path / "out" / "attention_summary_bigram.csv").read_text().splitlines()
        assert [l.split(",")[0] for l in lines[1:]] == ["Harvey", "Irma"]


class TestDeterminism:
    @pytest.mark.parametrize("command", ["regress", "fit-decay"])
    def test_byte_identical(self, tmp_path, capsys, command):
        outputs = []
        for i, jobs in enumerate(("1", "2")):
            (tmp_path / str(i)).mkdir()
            cfg = write_config(tmp_path / str(i),
                               regress={"models": ["reg1", "per_category"], "dump_chains": True})
            assert run([command, "--config", str(cfg), "--jobs", jobs], capsys)[0] == 0
            root = tmp_path / str(i) / "out"
            outputs.append({str(p.relative_to(root)): p.read_bytes() for p in root.rglob("*") if p.is_file()})
        assert outputs[0] == outputs[1] and outputs[0]


class TestAtomicity:
    def test_failed_run_writes_nothing(self, tmp_path, capsys, monkeypatch):
        def broken(cfg, args, out):
            cli.cmd_metrics(cfg, args, out)
            raise cli.PipelineError("boom after staging")

        monkeypatch.setitem(cli.HANDLERS, "report", broken)
        cfg = write_config(tmp_path)
        code, _, err = run(["report", "--config", str(cfg)], capsys)
        assert code == cli.EXIT_FAILURE and "boom" in err
        assert not (tmp_path / "out").exists()

    def test_interrupted_write_leaves_old_file(self, tmp_path, monkeypatch):
        target = tmp_path / "a.csv"
        target.write_text("old\n")

        def fail(*a, **k):
            raise OSError("disk full")

        monkeypatch.setattr(os, "replace", fail)
        with pytest.raises(OSError):
            atomic_write_text(target, "new\n")
        assert target.read_text() == "old\n"
        assert [p.name for p in tmp_path.iterdir()] == ["a.csv"]


class TestHelpAndConfig:
    def test_help_lists_defaults(self):
        proc = subprocess.run([sys.executable, "-m", "stormlens.cli", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        for needle in ("window_days   365", '"chains": 8', '"draws": 2000', "max_half_width_deg", "--jobs",
                       "--scale-max-degrees", "STORMLENS_LOG", "report"):
            assert needle in proc.stdout

    def test_relative_paths(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"counts": "data/x.tsv", "output_dir": "o"}))
        cfg = PipelineConfig.load(tmp_path / "c.json")
        assert cfg.counts == tmp_path / "data" / "x.tsv"
        with pytest.raises(ConfigError, match="does not exist"):
            cfg.require("counts")
        with pytest.raises(ConfigError, match="does not set 'hurdat2'"):
            cfg.require("hurdat2")
        assert cfg.decay.min_consecutive_days == 6 and cfg.window_days == 365

    def test_log_env(self, tmp_path):
        cfg = write_config(tmp_path)
        env = dict(os.environ, STORMLENS_LOG="INFO")
        proc = subprocess.run([sys.executable, "-m", "stormlens.cli", "metrics", "--config", str(cfg)],
                              capture_output=True, text=True, env=env)
        assert proc.returncode == 0 and "Katia" in proc.stderr
