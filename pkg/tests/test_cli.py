import numpy as np
import pytest

from tlpsynth import NicWorkloadConfig, Trace, decode_image, make_corpus, read_png, write_png
from tlpsynth.cli import cli_dispatch
from tlpsynth.generators import random_image
from tlpsynth.trace_model import read_trace, write_trace

W = 16


@pytest.fixture
def corpus_dir(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    for sid, img in make_corpus(NicWorkloadConfig(seed=3, n_transfers=20), 4, W):
        write_png(d / f"{sid}.png", img)
    return d


def test_encode_decode(tmp_path, capsys):
    t = Trace([4, 16, 300], [0, 1, 1])
    write_trace(tmp_path / "t.csv", t)
    assert cli_dispatch(["encode", "--in", str(tmp_path / "t.csv"), "--out",
                         str(tmp_path / "t.png"), "--width", "512"]) == 0
    assert read_png(tmp_path / "t.png").width == 512
    assert cli_dispatch(["decode", "--in", str(tmp_path / "t.png")]) == 0
    assert capsys.readouterr().out == "dir,bytes\n0,4\n1,16\n1,300\n"


def test_usage_errors(capsys):
    assert cli_dispatch([]) == 2
    assert cli_dispatch(["frobnicate"]) == 2
    assert cli_dispatch(["encode", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_domain_errors(tmp_path, capsys):
    (tmp_path / "t.csv").write_text("dir,bytes\n0,70000\n")
    assert cli_dispatch(["encode", "--in", str(tmp_path / "t.csv"), "--out",
                         str(tmp_path / "t.png")]) == 1
    err = capsys.readouterr()
    assert "line 2" in err.err and err.out == ""
    assert cli_dispatch(["decode", "--in", str(tmp_path / "nope.png")]) == 1


def test_normalize_npy(tmp_path):
    raw = np.zeros((4, 4, 3))
    raw[0, 0] = (0, 9, 200.4)
    np.save(tmp_path / "r.npy", raw)
    assert cli_dispatch(["normalize", "--in", str(tmp_path / "r.npy"), "--out",
                         str(tmp_path / "n.png")]) == 0
    assert tuple(read_png(tmp_path / "n.png").pixels[0, 0]) == (0, 9, 255)


def test_generate(tmp_path):
    assert cli_dispatch(["generate", "--kind", "nic", "--seed", "1", "--transfers", "5",
                         "--out", str(tmp_path / "n.csv"), "--width", "16"]) == 0
    assert len(read_trace(tmp_path / "n.csv")) > 20
    assert cli_dispatch(["generate", "--kind", "random", "--images", "3", "--width", "8",
                         "--out", str(tmp_path / "imgs")]) == 0
    assert len(list((tmp_path / "imgs").glob("*.png"))) == 3


def test_calibrate_lambda_one_is_identity(tmp_path, corpus_dir, capsys):
    g = tmp_path / "g.png"
    write_png(g, random_image(5, W))
    assert cli_dispatch(["calibrate", "--gen", str(g), "--corpus", str(corpus_dir),
                         "--lambda", "1", "--out", str(tmp_path / "c.png"), "--width", str(W)]) == 0
    assert read_png(tmp_path / "c.png") == read_png(g)
    match_id, _, replaced = capsys.readouterr().out.strip().split(",")
    assert match_id.startswith("corpus-") and replaced == "0"


def test_calibrate_against_real(tmp_path, corpus_dir):
    g = tmp_path / "g.png"
    write_png(g, random_image(5, W))
    real = corpus_dir / "corpus-0001.png"
    assert cli_dispatch(["calibrate", "--gen", str(g), "--real", str(real), "--lambda", "0",
                         "--out", str(tmp_path / "c.png"), "--width", str(W)]) == 0
    assert read_png(tmp_path / "c.png") == read_png(real)


def test_match_and_index(tmp_path, corpus_dir, capsys):
    src = corpus_dir / "corpus-0002.png"
    assert cli_dispatch(["match", "--gen", str(src), "--corpus", str(corpus_dir),
                         "--width", str(W)]) == 0
    assert capsys.readouterr().out.startswith("corpus-0002,")
    assert cli_dispatch(["index", "--corpus", str(corpus_dir), "--width", str(W)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and len(lines[0].split(",")) == 1 + 3 * W


def test_metrics_single_row(tmp_path, corpus_dir, capsys):
    a, b = corpus_dir / "corpus-0000.png", corpus_dir / "corpus-0001.png"
    assert cli_dispatch(["metrics", "--synth", str(a), "--real", str(b), "--kind", "te"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1 and out[0].startswith("te,")
    assert cli_dispatch(["metrics", "--synth", str(a), str(b), "--real", str(b), str(a),
                         "--kind", "fd", "--header"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("metric,") and out[1].startswith("fd,0.0,FD(naive)")


def test_pipeline_command(tmp_path, corpus_dir):
    g = tmp_path / "g.png"
    write_png(g, random_image(5, W))
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"corpus = {corpus_dir}\nout = {tmp_path / 'out'}\nwidth = {W}\n"
                   "lambda = 1e-8\nbeta = 1/12,1/6,1/2,1/6,1/12\n")
    assert cli_dispatch(["pipeline", str(g), "--config", str(cfg)]) == 0
    report = (tmp_path / "out" / "report.csv").read_text()
    assert "# beta = 0.08333333333333333,0.16666666666666666,0.5," in report
    # flags override the file
    assert cli_dispatch(["pipeline", str(g), "--config", str(cfg), "--lambda", "1"]) == 0
    assert "# lambda = 1.0" in (tmp_path / "out" / "report.csv").read_text()
    assert cli_dispatch(["pipeline", str(tmp_path / "missing.png"), "--config", str(cfg)]) == 1
    assert cli_dispatch(["pipeline", str(g), "--config", str(cfg),
                         "--corpus", str(tmp_path / "nowhere")]) == 1
