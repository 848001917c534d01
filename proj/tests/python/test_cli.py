import json
import subprocess

from conftest import MNIST


def run(cli, *args):
    return subprocess.run([cli, *map(str, args)], capture_output=True, text=True)


def test_train_generate_inspect(cli, tmp_path):
    model = tmp_path / "m.nsn"
    r = run(cli, "train", "--idx", MNIST, "--limit", 80, "--max-iters", 5, "--seed", 4, "--out", model, "--quiet")
    assert r.returncode == 0, r.stderr
    manifest = json.loads((tmp_path / "m.nsn.manifest.json").read_text())
    assert manifest["command"] == "train"
    assert len(manifest["model"]["layers"]) == 3
    assert manifest["dataset_fingerprint"]

    out1, out2 = tmp_path / "a.png", tmp_path / "b.png"
    assert run(cli, "generate", "--model", model, "--count", 9, "--out", out1).returncode == 0
    assert run(cli, "generate", "--model", model, "--count", 9, "--out", out2).returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    gen = json.loads((tmp_path / "a.png.manifest.json").read_text())
    assert gen["config"]["seed"] == 4 and gen["config"]["count"] == 9

    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\ncount = 2\ndelta1 = 3\n")
    out3 = tmp_path / "c.png"
    r = run(cli, "generate", "--config", cfg, "--model", model, "--delta1", 6, "--out", out3)
    assert r.returncode == 0, r.stderr
    c = json.loads((tmp_path / "c.png.manifest.json").read_text())["config"]
    assert c["count"] == 2 and c["delta1"] == 6.0

    r = run(cli, "inspect", "--model", model, "--out", tmp_path / "i.json")
    assert r.returncode == 0 and "13x13" in r.stdout

    r = run(cli, "inpaint", "--model", model, "--idx", MNIST, "--offset", 2000, "--count", 3,
            "--out", tmp_path / "inp.png")
    assert r.returncode == 0, r.stderr
    res = json.loads((tmp_path / "inp.png.manifest.json").read_text())["results"]
    assert res["images"] == 3 and res["mse_mean_image_baseline"] is not None

    assert run(cli, "arith", "--model", model, "--expr", "0+", "--out", tmp_path / "x.png").returncode == 2
    assert run(cli, "sample-layer", "--model", model, "--layer", 0, "--out", tmp_path / "x.png").returncode == 2


def test_usage_errors(cli, tmp_path):
    assert run(cli).returncode == 2
    assert run(cli, "train", "--out", tmp_path / "m.nsn").returncode == 2
    assert run(cli, "train", "--idx", tmp_path / "missing.gz", "--out", tmp_path / "m.nsn").returncode == 2
    assert run(cli, "generate", "--model", tmp_path / "none.nsn", "--out", tmp_path / "x.png").returncode == 2


def test_runtime_failure(cli, tmp_path):
    bad = tmp_path / "bad.nsn"
    bad.write_bytes(b"not a model at all")
    assert run(cli, "generate", "--model", bad, "--out", tmp_path / "x.png").returncode == 1
