import json
import subprocess
import sys

import numpy as np
import pytest

from relugeom import __version__
from relugeom.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bound_plain_output(capsys):
    code, out, _ = run(["bound", "2,2,1"], capsys)
    assert code == 0 and out.splitlines()[0] == "8"
    code, out, _ = run(["bound", "--arch", "2,1,1"], capsys)
    assert out.splitlines()[0] == "4"


def test_bound_json_embeds_metadata(capsys):
    code, out, _ = run(["bound", "2,4,4,1", "--json", "--seed", "3"], capsys)
    doc = json.loads(out)
    assert doc["result"]["bound"] == "352"
    assert doc["version"] == __version__ and doc["seed"] == 3
    assert doc["config"]["arch_pos"] == [2, 4, 4, 1] and doc["wall_time"] >= 0


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["bound", "2,x,1"])
    assert info.value.code == 2
    assert "cannot parse architecture" in capsys.readouterr().err
    code, _, err = run(["bound"], capsys)
    assert code == 2 and "architecture" in err
    with pytest.raises(SystemExit) as info:
        main(["regions", "--arch", "2,3,1", "--mode", "fuzzy"])
    assert info.value.code == 2


def test_io_error_exit_4(capsys, tmp_path):
    code, _, err = run(["ot", str(tmp_path / "missing.json")], capsys)
    assert code == 4 and "i/o error" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["ot", str(bad)], capsys)[0] == 4


def test_regions_exact_and_sampled(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, _, _ = run(["regions", "--arch", "2,4,4,1", "--box=-1,1,-1,1", "--seed", "2",
                      "--out", str(out), "--svg", str(tmp_path / "r.svg")], capsys)
    exact = json.loads(out.read_text())["result"]
    assert code == 0 and exact["within_bound"] and exact["bound"] == "352"
    code, stdout, _ = run(["regions", "--arch", "2,4,4,1", "--seed", "2", "--mode", "sampled",
                           "--resolution", "128"], capsys)
    sampled = json.loads(stdout)["result"]
    assert sampled["count"] <= exact["count"]
    assert (tmp_path / "r.svg").read_text().count("<polygon") == exact["count"]


def test_regions_single_region_model(capsys, tmp_path):
    from relugeom.net import Mlp, NetworkArch

    mlp = Mlp(NetworkArch((2, 2, 1)), (np.eye(2), np.ones((1, 2))), (np.full(2, 5.0), np.zeros(1)))
    mlp.save(tmp_path / "net.json")
    code, out, _ = run(["regions", "--model", str(tmp_path / "net.json")], capsys)
    assert json.loads(out)["result"]["count"] == 1


def test_curve_commands(capsys, tmp_path):
    code, out, _ = run(["curve", "segment"], capsys)
    assert json.loads(out)["result"]["rl_complexity"] == 1
    counts = []
    for order in (3, 4):
        _, out, _ = run(["curve", "peano", "--order", str(order), "--arch", "2,4,4,1"], capsys)
        res = json.loads(out)["result"]
        counts.append(res["rl_complexity"])
        assert res["verdict"]["verdict"] == "NotDecidedByBound"
    assert 3.5 <= counts[1] / counts[0] <= 4.5
    csv = tmp_path / "s.csv"
    run(["curve", "spiral", "--T", "3.0", "--n", "50", "--csv", str(csv)], capsys)
    assert len(csv.read_text().splitlines()) == 50


def test_ot_command(capsys, tmp_path):
    inst = tmp_path / "inst.json"
    inst.write_text(json.dumps({"sites": [[0.2, 0.2], [0.8, 0.3], [0.5, 0.8]],
                                "masses": [0.5, 0.3, 0.2]}))
    out = tmp_path / "o.json"
    code, _, _ = run(["ot", str(inst), "--out", str(out), "--svg", str(tmp_path / "p.svg")], capsys)
    res = json.loads(out.read_text())["result"]
    assert code == 0 and res["converged"] and res["cost"] > 0
    assert np.allclose(res["areas"], [0.5, 0.3, 0.2], atol=1e-6)
    code, _, _ = run(["ot", str(inst), "--max-iter", "1", "--tol", "1e-14"], capsys)
    assert code == 3


def test_train_and_generate_are_reproducible(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": {"kind": "height_field", "n_samples": 200},
                               "encoder": [3, 8, 2], "epochs": 5, "seed": 4}))
    outputs = []
    for k in range(2):
        d = tmp_path / f"m{k}"
        code, out, _ = run(["train-ae", str(cfg), "--model-dir", str(d)], capsys)
        assert code == 0 and json.loads(out)["seed"] == 4
        gen = tmp_path / f"g{k}.csv"
        code, _, _ = run(["generate", "--model", str(d / "model.json"), "--data",
                          str(d / "data.csv"), "--n", "30", "--seed", "1", "--csv", str(gen)], capsys)
        assert code == 0
        outputs.append(((d / "model.json").read_bytes(), gen.read_bytes()))
    assert outputs[0] == outputs[1]
    assert len(outputs[0][1].splitlines()) == 30


def test_train_rejects_bad_config(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": {"kind": "teapot"}}))
    assert run(["train-ae", str(cfg)], capsys)[0] == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "relugeom.cli", "bound", "2,2,1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("8")
