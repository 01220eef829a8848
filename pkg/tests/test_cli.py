import json

import pytest

from xtplt.cli import main, parse_predictions, substreams
from xtplt.data import load_xmlc


@pytest.fixture
def synth_files(tmp_path):
    path = tmp_path / "all.txt"
    assert main(["synth", "--model", "dependent", "--m", "12", "--n", "600", "--seed", "7", "-o", str(path)]) == 0
    lines = path.read_text().splitlines()
    train, test = tmp_path / "train.txt", tmp_path / "test.txt"
    train.write_text("\n".join(["400 3 12", *lines[1:401]]) + "\n")
    test.write_text("\n".join(["200 3 12", *lines[401:]]) + "\n")
    return tmp_path, train, test


def test_synth_writes_sidecar(synth_files):
    tmp, _, _ = synth_files
    meta = json.loads((tmp / "all.txt.meta.json").read_text())
    assert meta["config"]["seed"] == 7 and meta["config"]["n"] == 600 and meta["model"] == "dependent"
    assert len(load_xmlc(tmp / "all.txt")) == 600


def test_seeded_training_is_byte_identical(synth_files):
    tmp, train, _ = synth_files
    outs = []
    for name in ("a.bin", "b.bin"):
        args = ["train", str(train), "-o", str(tmp / name), "--algo", "plt", "--tree", "kmeans", "--arity", "2",
                "--max-leaves", "4", "--dim", "6", "--lr", "0.1", "--l2", "0.003", "--epochs", "2",
                "--threads", "1", "--seed", "42"]
        assert main(args) == 0
        outs.append((tmp / name).read_bytes())
    assert outs[0] == outs[1]


def test_train_predict_eval_cycle(synth_files, capsys):
    tmp, train, test = synth_files
    model = tmp / "h.bin"
    assert main(["train", str(train), "-o", str(model), "--algo", "hsm", "--pickone", "expand",
                 "--tree", "huffman", "--tfidf", "--seed", "1"]) == 0
    preds = tmp / "p.txt"
    assert main(["predict", str(model), str(test), "-k", "3", "-o", str(preds)]) == 0
    rows = preds.read_text().splitlines()
    assert len(rows) == 200
    label, score = rows[0].split()[0].split(":")
    assert 0 <= int(label) < 12 and 0 < float(score) <= 1
    capsys.readouterr()
    assert main(["eval", str(test), "--predictions", str(preds), "-k", "1", "3"]) == 0
    from_file = capsys.readouterr().out
    assert main(["eval", str(test), "--model", str(model), "-k", "1", "3"]) == 0
    assert capsys.readouterr().out == from_file


def test_eval_of_oracle_predictions_is_optimal(tmp_path, capsys):
    data = tmp_path / "d.txt"
    data.write_text("2 2 3\n0,2 0:1\n1 1:1\n")
    preds = tmp_path / "p.txt"
    preds.write_text("2:1 0:1\n1:1 0:0.5\n")
    assert main(["eval", str(data), "--predictions", str(preds), "-k", "1"]) == 0
    assert "p@1=1.0" in capsys.readouterr().out
    assert parse_predictions(preds) == [[2, 0], [1, 0]]


def test_batch_mode_and_tree_command(synth_files, capsys):
    tmp, train, test = synth_files
    assert main(["train", str(train), "-o", str(tmp / "b.bin"), "--mode", "batch", "--tree", "complete"]) == 0
    assert main(["tree", str(train), "--tree", "huffman", "-o", str(tmp / "t.txt")]) == 0
    assert (tmp / "t.txt").read_text().startswith("tree 1 ")
    assert main(["train", str(train), "-o", str(tmp / "c.bin"), "--tree-file", str(tmp / "t.txt")]) == 0


def test_verify_command(capsys):
    assert main(["verify", "--suite", "proposition1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS proposition1") and "regret = 0.1999999" in out


def test_exit_codes(tmp_path, capsys):
    assert main(["train"]) == 1
    assert main(["bogus"]) == 1
    assert main(["train", str(tmp_path / "missing.txt"), "-o", str(tmp_path / "m")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 2\n5 0:1\n")
    assert main(["train", str(bad), "-o", str(tmp_path / "m")]) == 2
    assert "line 2" in capsys.readouterr().err
    good = tmp_path / "good.txt"
    good.write_text("1 2 2\n0 0:1\n")
    assert main(["train", str(good), "-o", str(tmp_path / "m"), "--arity", "1"]) == 1
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"garbage\n")
    assert main(["predict", str(junk), str(good)]) == 2


def test_verify_failure_exit_code(monkeypatch):
    from xtplt import verify
    monkeypatch.setitem(verify.SUITES, "ucs", lambda: {"passed": False})
    assert main(["verify", "--suite", "ucs"]) == 3


def test_substreams_distinct_and_stable():
    a = substreams(42)
    assert a == substreams(42)
    assert len(set(a.values())) == 4
    assert a != substreams(43)
