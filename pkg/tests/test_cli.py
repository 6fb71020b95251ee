"""Tests for command routing, exit codes and the end-to-end pipeline."""

import csv
import json

import pytest

from dstg_grounding.cli import main, video_seed
from dstg_grounding.dataset import load_dataset


@pytest.fixture
def gen_config_file(tmp_path):
    path = tmp_path / "gen.json"
    path.write_text(json.dumps({"num_frames": 16, "num_objects": 3}), encoding="utf-8")
    return path


def _gen(tmp_path, gen_config_file, name="data.jsonl", num_videos=4, *extra):
    out = tmp_path / name
    argv = ["gen", "--out", str(out), "--num-videos", str(num_videos), "--config", str(gen_config_file), *extra]
    assert main(argv) == 0
    return out


class TestGen:
    """Test dataset generation from the command line."""

    def test_seeded(self, tmp_path, gen_config_file):
        """The master seed is recorded and video ids are numbered."""
        out = _gen(tmp_path, gen_config_file, "data.jsonl", 3, "--seed", "42")
        samples, manifest = load_dataset(out)
        assert manifest.seed == 42
        assert [s.video_id for s in samples] == ["vid-00000", "vid-00001", "vid-00002"]
        assert samples[1].seed == video_seed(42, 1)

    def test_same_seed_same_bytes(self, tmp_path, gen_config_file):
        """One seed writes identical files."""
        a = _gen(tmp_path, gen_config_file, "a.jsonl", 3, "--seed", "5")
        b = _gen(tmp_path, gen_config_file, "b.jsonl", 3, "--seed", "5")
        assert a.read_bytes() == b.read_bytes()

    def test_workers_same_bytes(self, tmp_path, gen_config_file):
        """Worker processes do not change the output."""
        a = _gen(tmp_path, gen_config_file, "a.jsonl", 4, "--seed", "5")
        b = _gen(tmp_path, gen_config_file, "b.jsonl", 4, "--seed", "5", "--workers", "2")
        assert a.read_bytes() == b.read_bytes()

    def test_unseeded_records_seed(self, tmp_path, gen_config_file):
        """Without --seed a drawn seed is still recorded."""
        _, manifest = load_dataset(_gen(tmp_path, gen_config_file, "data.jsonl", 2))
        assert isinstance(manifest.seed, int)


class TestStats:
    """Test the stats command."""

    def test_stats(self, dataset_file, capsys):
        """Statistics are printed for a dataset file."""
        assert main(["stats", "--data", str(dataset_file)]) == 0
        assert "Total:" in capsys.readouterr().out


class TestExitCodes:
    """Test usage and validation failures."""

    @pytest.mark.parametrize("argv", [
        [],
        ["eval", "--pred", "p.jsonl", "--out", "r.json"],
        ["stats", "--data", "d.jsonl", "--bogus"],
        ["gen", "--out", "d.jsonl", "--num-videos", "0"],
        ["report", "--pred", "p", "--data", "d", "--out", "o", "--workers", "0"],
    ])
    def test_usage_errors(self, argv, capsys):
        """Misuse exits with 2 and a message on stderr."""
        assert main(argv) == 2
        assert "Error:" in capsys.readouterr().err

    def test_json_errors(self, capsys):
        """--json-errors writes a JSON payload to stderr."""
        assert main(["--json-errors", "eval", "--pred", "p.jsonl", "--out", "r.json"]) == 2
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert payload["error"] == "UsageError"
        assert payload["exit_code"] == 2
        assert "--gt" in payload["message"]

    def test_missing_file(self, tmp_path, capsys):
        """A missing input file exits with 1."""
        assert main(["stats", "--data", str(tmp_path / "none.jsonl")]) == 1
        assert "not found" in capsys.readouterr().err

    def test_bad_config(self, tmp_path):
        """An out-of-range config value exits with 1."""
        config = tmp_path / "gen.json"
        config.write_text(json.dumps({"jitter_frac": 0.9}))
        assert main(["gen", "--out", str(tmp_path / "d.jsonl"), "--num-videos", "1", "--config", str(config)]) == 1

    def test_corrupt_dataset(self, tmp_path):
        """A malformed dataset exits with 1."""
        data = tmp_path / "bad.jsonl"
        data.write_text("{not json\n")
        assert main(["stats", "--data", str(data)]) == 1

    def test_version(self, capsys):
        """--version exits cleanly."""
        assert main(["--version"]) == 0
        assert "dstg" in capsys.readouterr().out


class TestPipeline:
    """Test gen, train, ground, eval and report chained through files."""

    def test_end_to_end(self, tmp_path, gen_config_file, tiny_config_file):
        """Every stage succeeds and grounding is reproducible."""
        data = _gen(tmp_path, gen_config_file, "data.jsonl", 10, "--seed", "1")
        ckpt = tmp_path / "model.ckpt"
        log = tmp_path / "train.jsonl"
        assert main(["train", "--data", str(data), "--config", str(tiny_config_file), "--out", str(ckpt),
                     "--log", str(log), "--seed", "3", "--feature-cache", str(tmp_path / "feat.db")]) == 0
        assert ckpt.exists()
        assert log.read_text().count("\n") == 6

        preds = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            assert main(["ground", "--data", str(data), "--ckpt", str(ckpt), "--out", str(out),
                         "--dump-graph", str(tmp_path / "graphs")]) == 0
            preds.append(out)
        assert preds[0].read_bytes() == preds[1].read_bytes()
        assert len(list((tmp_path / "graphs").glob("*.graph.json"))) == 10

        report = tmp_path / "eval.json"
        cases = tmp_path / "cases.csv"
        assert main(["eval", "--pred", str(preds[0]), "--gt", str(data), "--out", str(report),
                     "--export-csv", str(cases), "--columns", "video_id", "viou"]) == 0
        data_report = json.loads(report.read_text())
        assert data_report["schema"] == "eval/1"
        assert data_report["num_cases"] >= 10
        assert data_report["missing"] == []
        assert 0.0 <= data_report["m_viou"] <= 1.0
        assert data_report["manifest"]["seed"] == 3
        with open(cases, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["video_id", "viou"]
        assert len(rows) == data_report["num_cases"] + 1

        site = tmp_path / "site"
        assert main(["report", "--pred", str(preds[0]), "--data", str(data), "--out", str(site),
                     "--workers", "2"]) == 0
        assert (site / "index.html").exists()
        assert (site / "vid-00000_0.png").exists()

    def test_eval_split(self, tmp_path, gen_config_file):
        """eval on an empty prediction file scores zero and lists every case as missing."""
        data = _gen(tmp_path, gen_config_file, "data.jsonl", 3, "--seed", "2")
        preds = tmp_path / "empty.jsonl"
        preds.write_text("")
        report = tmp_path / "eval.json"
        assert main(["eval", "--pred", str(preds), "--gt", str(data), "--out", str(report), "--split", "all"]) == 0
        result = json.loads(report.read_text())
        assert result["m_viou"] == 0.0
        assert len(result["missing"]) == result["num_cases"]
