import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from asrforge.audio_io import AudioBuffer, write_wav
from asrforge.cli import main
from asrforge.corpus_manager import UtteranceRecord, read_manifest, write_hypotheses, write_manifest
from asrforge.ctc_engine import write_logits
from asrforge.subword_bpe import BpeModel, encode_sentence
from asrforge.vad import FrameProbabilities, write_speech_probs

from .conftest import FIXTURES

SR = 16000


def run(*argv):
    return main([str(a) for a in argv])


def bursts(*seconds):
    """Alternating silence/tone seconds, starting with silence."""
    parts = []
    for i, sec in enumerate(seconds):
        n = int(sec * SR)
        if i % 2:
            t = np.arange(n) / SR
            parts.append(0.3 * np.sin(2 * np.pi * (180 + 40 * i) * t))
        else:
            parts.append(np.zeros(n))
    return AudioBuffer(np.concatenate(parts), SR)


def voiced_logits(ids, V, frames=2):
    rows = []
    for i in ids:
        for _ in range(frames):
            r = np.zeros(V)
            r[i] = 12.0
            rows.append(r)
        b = np.zeros(V)
        b[0] = 12.0
        rows.append(b)
    return np.array(rows)


def test_vad_then_chunk(tmp_path, capsys):
    write_wav(bursts(1, 5, 2, 8, 1), tmp_path / "a.wav")
    assert run("vad", "--in", tmp_path / "a.wav", "--out", tmp_path / "a.probs") == 0
    assert (tmp_path / "a.probs").read_text().startswith("#frame_ms=30 hop_ms=10")
    assert run("chunk", "--probs", tmp_path / "a.probs", "--min", 3, "--max", 32, "--thresh", 0.70) == 0
    chunks = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert len(chunks) == 2
    for c in chunks:
        assert 3.0 <= c["end_s"] - c["start_s"] <= 32.0
        assert c["mean_speech_prob"] >= 0.70
        assert c["source_id"] == "a"
    assert chunks[0]["start_s"] == pytest.approx(1.0, abs=0.03)
    assert chunks[1]["end_s"] == pytest.approx(16.0, abs=0.03)


def test_pipeline_ingest_vad_chunk_stats(tmp_path, capsys):
    raw = tmp_path / "raw"
    raw.mkdir()
    speech = 0.0
    for i, layout in enumerate([(1, 5, 2, 7, 1), (0.5, 12, 1), (2, 4, 1.5, 3.5, 1, 6, 0.5)]):
        write_wav(bursts(*layout), raw / f"f{i}.wav")
        speech += sum(layout[1::2])
    w = tmp_path / "work"
    w.mkdir()
    assert run("ingest", "--in", raw, "--lang", "urdu", "--dataset", "syn", "--out", w / "m.jsonl") == 0
    assert run("vad", "--manifest", w / "m.jsonl", "--out-dir", w / "probs", "--jobs", 2) == 0
    assert run("chunk", "--manifest", w / "m.jsonl", "--probs-dir", w / "probs", "--out", w / "chunks.jsonl",
               "--wav-dir", w / "chunks", "--manifest-out", w / "chunks.jsonl.manifest", "--jobs", 2) == 0
    capsys.readouterr()
    assert run("stats", "--manifest", w / "chunks.jsonl.manifest", "--digits", 4, "--csv", w / "s.csv") == 0
    out = capsys.readouterr().out
    recs = read_manifest(w / "chunks.jsonl.manifest")
    assert len(recs) == 6
    assert all(os.path.exists(r.audio_path) for r in recs)
    total = sum(r.duration_s for r in recs)
    # a frame partly overlapping either edge of a burst can fire, so allow one frame per side
    assert abs(total - speech) <= len(recs) * 2 * 0.03
    assert out.splitlines()[1].split()[:3] == ["Urdu", f"{total / 3600:.4f}", "hrs"]


def test_bpe_train_512(tmp_path, capsys):
    model = tmp_path / "fa.bpe"
    assert run("bpe-train", "--vocab", 512, "--lang", "persian", "--corpus", FIXTURES / "persian_corpus.txt",
               "--out", model, "--table-out", tmp_path / "fa.syms") == 0
    assert capsys.readouterr().out.startswith("pieces\t512\n")
    assert len(BpeModel.load(model).pieces) == 512
    assert len((tmp_path / "fa.syms").read_text(encoding="utf-8").splitlines()) == 515
    first = model.read_bytes()
    run("bpe-train", "--vocab", 512, "--lang", "persian", "--corpus", FIXTURES / "persian_corpus.txt", "--out", model)
    assert model.read_bytes() == first


def test_score_identical_is_zero(tmp_path, capsys):
    lines = (FIXTURES / "arabic_corpus.txt").read_text(encoding="utf-8").splitlines()[:50]
    recs = [UtteranceRecord(f"u{i}", "x.wav", 1.0, "arabic", "cv", "test", transcript=t) for i, t in enumerate(lines)]
    write_manifest(recs, tmp_path / "test.jsonl")
    write_hypotheses({r.id: r.transcript for r in recs}, tmp_path / "out.tsv")
    assert run("score", "--refs", tmp_path / "test.jsonl", "--hyps", tmp_path / "out.tsv",
               "--csv", tmp_path / "r.csv") == 0
    out = capsys.readouterr().out
    assert out.startswith("mode: subword")
    assert "0.0" in out.splitlines()[2].split()
    assert ",0.000000," in (tmp_path / "r.csv").read_text()


def test_score_missing_hypothesis_exit_code(tmp_path, capsys):
    recs = [UtteranceRecord("u0", "x.wav", 1.0, "urdu", "cv", "test", transcript="a")]
    write_manifest(recs, tmp_path / "t.jsonl")
    (tmp_path / "h.tsv").write_text("", encoding="utf-8")
    assert run("score", "--refs", tmp_path / "t.jsonl", "--hyps", tmp_path / "h.tsv") == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: MissingHypothesis:")
    assert "\n" not in err


def test_missing_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        run("vad", "--in", "a.wav")
    assert exc.value.code == 2
    assert "--out" in capsys.readouterr().err


def test_bad_choice_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        run("normalize", "--lang", "klingon")
    assert exc.value.code == 2


def test_data_error_names_module_error(tmp_path, capsys):
    (tmp_path / "bad.probs").write_text("#frame_ms=30 hop_ms=10\n0.5\n1.5\n")
    assert run("chunk", "--probs", tmp_path / "bad.probs") == 1
    assert "OutOfRangeProbability" in capsys.readouterr().err


def test_normalize_stdin(monkeypatch, capsys):
    import io

    monkeypatch.setattr(sys, "stdin", io.StringIO("كتاب،  خوب\n"))
    assert run("normalize", "--lang", "persian") == 0
    assert capsys.readouterr().out == "کتاب خوب\n"


def _probs_file(path, seconds=6.0, p=0.75):
    n = int(seconds * 100) - 2
    write_speech_probs(FrameProbabilities(np.full(n, p), 30, 10), path)


def test_config_precedence(tmp_path, capsys):
    _probs_file(tmp_path / "a.probs")
    cfg = tmp_path / "run.ini"

    cfg.write_text("[DEFAULT]\nthresh = 0.9\n")
    run("chunk", "--config", cfg, "--probs", tmp_path / "a.probs")
    assert capsys.readouterr().out == ""  # DEFAULT section applies

    cfg.write_text("[DEFAULT]\nthresh = 0.9\n[chunk]\nthresh = 0.7\n")
    run("chunk", "--config", cfg, "--probs", tmp_path / "a.probs")
    assert len(capsys.readouterr().out.splitlines()) == 1  # subcommand section beats DEFAULT

    run("chunk", "--config", cfg, "--probs", tmp_path / "a.probs", "--thresh", "0.8")
    assert capsys.readouterr().out == ""  # flag beats both


def test_config_missing_file(tmp_path, capsys):
    assert run("stats", "--config", tmp_path / "nope.ini", "--manifest", "m") == 1
    assert "IoFailure" in capsys.readouterr().err


def test_effective_config_logged(tmp_path, caplog):
    _probs_file(tmp_path / "a.probs")
    with caplog.at_level("INFO", logger="asrforge"):
        run("chunk", "--probs", tmp_path / "a.probs", "--seed", 9, "--out", tmp_path / "c.jsonl")
    header = next(r.getMessage() for r in caplog.records if "config" in r.getMessage())
    assert '"seed": 9' in header and '"thresh": 0.7' in header


def test_split_reruns_are_byte_identical(tmp_path):
    rng = np.random.default_rng(3)
    recs = [UtteranceRecord(f"u{i:04d}", "x.wav", float(d), "urdu", "cv", "train", transcript="t")
            for i, d in enumerate(rng.integers(2, 9, 400))]  # ties, so the seed matters
    write_manifest(recs, tmp_path / "m.jsonl")
    outs = []
    for k in range(2):
        assert run("split", "--manifest", tmp_path / "m.jsonl", "--ratios", "train=4.23,valid=0.73",
                   "--seed", 42, "--out", tmp_path / f"s{k}.jsonl") == 0
        outs.append((tmp_path / f"s{k}.jsonl").read_bytes())
    assert outs[0] == outs[1]
    run("split", "--manifest", tmp_path / "m.jsonl", "--ratios", "train=4.23,valid=0.73",
        "--seed", 43, "--out", tmp_path / "s2.jsonl")
    assert (tmp_path / "s2.jsonl").read_bytes() != outs[0]


def test_split_requires_one_target(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("split", "--manifest", "m", "--out", "o", "--ratios", "train=1", "--hours", "train=1")
    assert exc.value.code == 2


def test_encode_decode_roundtrip(tmp_path, persian_model, persian_lines, capsys):
    persian_model.save(tmp_path / "m.bpe")
    persian_model.table.save(tmp_path / "m.syms")
    sents = persian_lines[:5]
    (tmp_path / "in.txt").write_text("\n".join(sents) + "\n", encoding="utf-8")
    assert run("encode", "--model", tmp_path / "m.bpe", "--in", tmp_path / "in.txt") == 0
    encoded = [[int(x) for x in l.split()] for l in capsys.readouterr().out.splitlines()]
    assert encoded == [encode_sentence(persian_model, s) for s in sents]

    ldir = tmp_path / "logits"
    ldir.mkdir()
    for i, ids in enumerate(encoded):
        write_logits(voiced_logits(ids, len(persian_model.table)), ldir / f"u{i}.ctcl")
    for beam in (0, 16):
        assert run("decode", "--table", tmp_path / "m.syms", "--logits-dir", ldir, "--beam", beam) == 0
        got = dict(l.split("\t") for l in capsys.readouterr().out.splitlines())
        assert [got[f"u{i}"] for i in range(5)] == sents


def test_ctc_loss_worked_example(tmp_path, capsys):
    write_logits(np.zeros((2, 2)), tmp_path / "a.ctcl")
    assert run("ctc-loss", "--logits", tmp_path / "a.ctcl", "--target", "1") == 0
    out = dict(l.split("\t") for l in capsys.readouterr().out.splitlines())
    assert float(out["loss"]) == pytest.approx(-math.log(0.75), abs=1e-12)
    assert run("ctc-loss", "--logits", tmp_path / "a.ctcl", "--target", "1 1") == 0
    assert "feasible\t0" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "asrforge", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("asrforge ")
    res = subprocess.run([sys.executable, "-m", "asrforge", "encode"], capture_output=True, text=True)
    assert res.returncode == 2
