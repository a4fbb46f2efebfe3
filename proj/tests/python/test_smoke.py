import math
import pathlib

import numpy as np
import pytest

import wesinger2 as ws


def tone(hz, seconds=0.5, sr=24000):
    t = np.arange(int(seconds * sr)) / sr
    return 0.5 * np.sin(2 * math.pi * hz * t)


def test_mel_shape_and_peak():
    cfg = ws.FeatureConfig()
    mel = ws.compute_mel(tone(440.0), cfg)
    assert mel.shape == (12000 // 240, 80)
    assert np.isfinite(mel).all()
    centre = mel[mel.shape[0] // 2]
    assert centre.max() > math.log(cfg.log_floor) + 5


def test_f0_and_keys():
    f0, voiced = ws.estimate_f0(tone(220.0))
    core = np.asarray(f0)[5:-5][np.asarray(voiced)[5:-5]]
    assert len(core) > 0
    assert abs(np.median(core) - 220.0) < 2.0
    assert ws.hz_to_piano_key(440.0) == 49
    assert ws.piano_key_to_hz(49) == pytest.approx(440.0)
    assert ws.quantize_to_piano_keys([27.5, 5000.0, 1e5]) == [1, 88, 88]
    filled = ws.interpolate_f0([0.0, 200.0, 0.0, 300.0, 0.0], [False, True, False, True, False])
    assert list(filled) == pytest.approx([200.0, 200.0, 250.0, 300.0, 300.0])


def test_score_and_schedule():
    notes = ws.parse_score("a 69 0 500\nSP R 500 700\n")
    assert notes == [("a", 69, 0.0, 500.0), ("SP", None, 500.0, 700.0)]
    assert ws.note_frames(25.0, 10.0) == 3
    assert ws.lr_at(0, total_steps=100, warmup_steps=10) == pytest.approx(0.0, abs=1e-12)
    assert ws.lr_at(10, total_steps=100, warmup_steps=10) == pytest.approx(8e-4)
    assert ws.lr_at(5, phase="finetune", total_steps=100, warmup_steps=10) == pytest.approx(1e-4)


def test_metrics():
    ref = tone(220.0, 1.0)
    assert ws.mel_distortion(ref, ref) == pytest.approx(0.0, abs=1e-12)
    assert ws.f0_rmse(tone(233.0, 1.0), ref) == pytest.approx(13.0, abs=2.0)


def test_errors_carry_codes():
    with pytest.raises(ws.WeSingerError) as info:
        ws.parse_score("")
    assert info.value.code == "ParseError"


def test_train_and_synthesize(tmp_path: pathlib.Path):
    corpus = tmp_path / "corpus"
    assert ws.make_toy_corpus(corpus, singers=2, clips=1, seconds=2.0, seed=3) == 2
    assert ws.prepare_cache(corpus / "manifest.jsonl", tmp_path / "cache") == 2
    config = tmp_path / "tiny.toml"
    config.write_text(
        "[acoustic]\nhidden = 16\nn_heads = 2\nn_encoder_blocks = 1\nn_decoder_blocks = 2\nffn_hidden = 32\n"
        "[vocoder]\nhidden = 16\n"
        "[train]\npreset = \"desk\"\nbatch_size = 2\nwarmup_steps = 2\ntotal_steps = 10\ncheckpoint_every = 1000\nlog_every = 1\n"
    )
    am = ws.train(config, tmp_path / "cache", tmp_path / "am", vocoder=False, steps=2)
    voc = ws.train(config, tmp_path / "cache", tmp_path / "voc", vocoder=True, steps=2)
    assert am["last_step"] == 2 and voc["last_step"] == 2
    assert pathlib.Path(am["metrics_csv"]).read_text().count("\n") == 3
    score = "a 69 0 500\nSP R 500 700\nb 71 700 1000\n"
    audio, sr = ws.synthesize(am["checkpoint"], voc["checkpoint"], score, "singer0")
    assert sr == 24000
    assert np.isfinite(audio).all()
    assert abs(len(audio) - 24000) <= 240
