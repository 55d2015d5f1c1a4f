import json

import numpy as np
import pytest

from hogdiff import cli, datasets, pipeline, sde
from hogdiff.graph_core import Graph
from conftest import complete, er_graph

TINY_CONFIG = {
    "version": 1,
    "seed": 5,
    "dataset": {"generator": "community_small", "count": 8, "data_seed": 1, "holdout": 4},
    "model": {"hidden_dim": 8, "time_dim": 4, "n_gcn_layers": 1},
    "train": {"steps": 6, "batch_size": 4, "feature_cap": 4},
    "sample": {"steps": 5, "num": 6},
}


def write_config(tmp_path, cfg=TINY_CONFIG, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_stats(tmp_path, capsys):
    path = tmp_path / "k4.graphs.jsonl"
    datasets.save([complete(4)], path)
    assert cli.main(["stats", "--input", str(path), "--max-p", "3", "--format", "json"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["2-simplices"] == 4 and rec["3-simplices"] == 1 and rec["graphs"] == 1
    empty = tmp_path / "empty.graphs.jsonl"
    empty.write_text("")
    assert cli.main(["stats", "--input", str(empty)]) == 2
    assert cli.main(["stats", "--input", str(tmp_path / "missing")]) == 2


def test_filter(tmp_path, capsys):
    forest = tmp_path / "forest.graphs.jsonl"
    datasets.save([Graph.from_edges(5, [(0, 1), (1, 2), (3, 4)])], forest)
    assert cli.main(["filter", "--input", str(forest), "--kind", "cell", "--output", str(tmp_path / "f")]) == 0
    assert "kept_edge_fraction=0.000000" in capsys.readouterr().out

    rng = np.random.default_rng(0)
    src = tmp_path / "er.graphs.jsonl"
    datasets.save([er_graph(10, 0.3, rng) for _ in range(5)], src)
    for kind in ("cell", "periphery"):
        assert cli.main(["filter", "--input", str(src), "--kind", kind, "--output", str(tmp_path / kind)]) == 0
    orig = datasets.load(src)
    core, per = datasets.load(tmp_path / "cell"), datasets.load(tmp_path / "periphery")
    for g, c, p in zip(orig, core, per):
        assert not ((c.A != 0) & (p.A != 0)).any()
        np.testing.assert_array_equal((c.A != 0) | (p.A != 0), g.A != 0)
    with pytest.raises(SystemExit) as info:
        cli.main(["filter", "--input", str(src), "--kind", "bogus", "--output", "x"])
    assert info.value.code == 2


def test_bad_configs(tmp_path):
    out = str(tmp_path / "run")
    for bad in (
        {**TINY_CONFIG, "extra": 1},
        {**TINY_CONFIG, "version": 2},
        {k: v for k, v in TINY_CONFIG.items() if k != "seed"},
        {**TINY_CONFIG, "model": {"width": 3}},
        {**TINY_CONFIG, "windows": {"K": 2, "splits": [1.5]}},
    ):
        assert cli.main(["train", "--config", write_config(tmp_path, bad), "--out-dir", out]) == 2


def test_train_sample_eval_are_deterministic(tmp_path, capsys):
    cfg = write_config(tmp_path)
    runs = []
    for name, threads in (("a", "1"), ("b", "4")):
        out = tmp_path / name
        assert cli.main(["--threads", threads, "train", "--config", cfg, "--out-dir", str(out)]) == 0
        assert cli.main(["--threads", threads, "sample", "--config", cfg, "--ckpt-dir", str(out),
                         "--out", str(out / "samples.graphs.jsonl")]) == 0
        runs.append(out)
    a, b = runs
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    assert (a / "samples.graphs.jsonl").read_bytes() == (b / "samples.graphs.jsonl").read_bytes()
    assert len(datasets.load(a / "samples.graphs.jsonl")) == 6
    man = json.loads((a / "manifest.json").read_text())
    assert man["seed"] == 5 and set(man["files"]) >= {"segment1.ckpt", "segment2.ckpt", "train.graphs.jsonl"}

    capsys.readouterr()
    report = tmp_path / "rep.json"
    ref = str(a / "reference.graphs.jsonl")
    assert cli.main(["eval", "--generated", ref, "--reference", ref, "--output", str(report)]) == 0
    assert all(v == 0 for v in json.loads(report.read_text())["values"].values())
    assert "Deg." in capsys.readouterr().out

    assert cli.main(["sample", "--config", cfg, "--ckpt-dir", str(a), "--num", "3",
                     "--out", str(tmp_path / "three.graphs.jsonl")]) == 0
    assert len(datasets.load(tmp_path / "three.graphs.jsonl")) == 3
    other = write_config(tmp_path, {**TINY_CONFIG, "seed": 6}, "other.json")
    assert cli.main(["sample", "--config", other, "--ckpt-dir", str(a), "--out", str(tmp_path / "x")]) == 2


def test_env_threads(tmp_path, monkeypatch):
    monkeypatch.setenv("HOGDIFF_THREADS", "0")
    assert cli.main(["verify", "--suite", "topology"]) == 2
    monkeypatch.setenv("HOGDIFF_THREADS", "2")
    assert cli.main(["verify", "--suite", "topology"]) == 0


def test_divergence_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise pipeline.TrainingDivergence("loss diverged at step 3", 3)
    monkeypatch.setattr(pipeline, "train_segment", boom)
    assert cli.main(["train", "--config", write_config(tmp_path), "--out-dir", str(tmp_path / "r")]) == 3


def test_ablate(tmp_path, capsys):
    out = tmp_path / "abl"
    assert cli.main(["ablate", "--config", write_config(tmp_path), "--guides", "cell,noise",
                     "--num", "3", "--out-dir", str(out)]) == 0
    rows = json.loads((out / "ablation.json").read_text())
    assert [r["guide"] for r in rows] == ["cell", "noise"]
    assert all({"Deg.", "Clus.", "Orbit"} <= set(r["report"]["values"]) for r in rows)


def test_verify(capsys):
    assert cli.main(["verify", "--suite", "topology"]) == 0
    out = capsys.readouterr().out
    assert "topology." in out and "sde." not in out and "model." not in out


def test_verify_all_passes(capsys):
    assert cli.main(["verify"]) == 0


def test_verify_catches_drift_sign_bug(monkeypatch, capsys):
    real = sde.bridge_drift
    monkeypatch.setattr(sde, "bridge_drift", lambda x, t, seg: -real(x, t, seg))
    assert cli.main(["verify", "--suite", "sde"]) == 1
    out = capsys.readouterr().out
    assert "FAIL  sde.drift_identity" in out
    assert "failing checks:" in out and "drift_identity" in out.splitlines()[-1]
