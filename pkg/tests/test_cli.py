import json
import sys

import numpy as np
import pytest

from vcmcodec.cli import main
from vcmcodec.imageio import read_image

COPY_CODEC = (
    f"{sys.executable} -c \"import shutil,sys; shutil.copy(sys.argv[1], sys.argv[2])\""
    " {input} {output}"
)


def run(*argv):
    return main(list(argv))


@pytest.fixture
def clip_dir(tmp_path):
    out = tmp_path / "clip"
    code = run(
        "synth", "--out", str(out), "--shape", "disk", "--dims", "64x64",
        "--frames", "8", "--start", "16,32", "--velocity", "2,1",
        "--size", "6", "--seed", "3",
    )
    assert code == 0
    return out


def test_synth_writes_frames_and_sidecar(clip_dir):
    frames = sorted(clip_dir.glob("*.pgm"))
    assert len(frames) == 8
    assert (clip_dir / "keypoints.vcmf").exists()
    img = read_image(frames[0])
    assert img.shape == (64, 64)


def test_full_pipeline_flow(tmp_path, clip_dir):
    container = tmp_path / "clip.vcmc"
    assert run("encode", str(clip_dir), "--out", str(container)) == 0

    traj_path = tmp_path / "traj.json"
    assert run("decode-features", str(container), "--out", str(traj_path)) == 0
    doc = json.loads(traj_path.read_text())
    assert doc["n_frames"] == 8 and doc["n_points"] == 16
    assert len(doc["positions"]) == 8

    recon_dir = tmp_path / "recon"
    assert run("decode", str(container), "--out", str(recon_dir)) == 0
    assert len(sorted(recon_dir.glob("*.pgm"))) == 8

    report_path = tmp_path / "report.json"
    assert run(
        "eval", str(container), "--truth", str(clip_dir), "--out", str(report_path)
    ) == 0
    report = json.loads(report_path.read_text())
    assert report["mean_ssim"] >= 0.90
    assert report["total_kbps"] == pytest.approx(
        report["feature_kbps"] + report["video_kbps"], abs=1e-9
    )


def test_encode_is_deterministic(tmp_path, clip_dir):
    a = tmp_path / "a.vcmc"
    b = tmp_path / "b.vcmc"
    assert run("encode", str(clip_dir), "--out", str(a)) == 0
    assert run("encode", str(clip_dir), "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_decode_features_from_stripped_container(tmp_path, clip_dir):
    from vcmcodec.container import LAYER_FEATURE, read_container

    container = tmp_path / "clip.vcmc"
    assert run("encode", str(clip_dir), "--out", str(container)) == 0
    data = container.read_bytes()
    feature_len = len(read_container(data).layer(LAYER_FEATURE))
    stripped = tmp_path / "stripped.vcmc"
    stripped.write_bytes(data[: 14 + 9 + feature_len])

    out_full = tmp_path / "full.json"
    out_stripped = tmp_path / "stripped.json"
    assert run("decode-features", str(container), "--out", str(out_full)) == 0
    assert run("decode-features", str(stripped), "--out", str(out_stripped)) == 0
    assert json.loads(out_full.read_text()) == json.loads(out_stripped.read_text())

    # but full video decode must fail loudly on the stripped file
    assert run("decode", str(stripped), "--out", str(tmp_path / "nope")) == 1


def test_external_codec_env_override(tmp_path, clip_dir, monkeypatch):
    monkeypatch.setenv("VCM_KEYFRAME_CODEC", f"{COPY_CODEC} :: {COPY_CODEC}")
    container = tmp_path / "ext.vcmc"
    assert run("encode", str(clip_dir), "--out", str(container)) == 0
    recon_dir = tmp_path / "recon"
    assert run("decode", str(container), "--out", str(recon_dir)) == 0
    key = read_image(sorted(recon_dir.glob("*.pgm"))[0])
    truth = read_image(sorted(clip_dir.glob("*.pgm"))[0])
    assert np.array_equal(key, truth)


def test_learned_backend_via_weights_path(tmp_path, clip_dir):
    from vcmcodec.nnet import random_synthesis_weights

    weights_path = tmp_path / "weights.vcmw"
    random_synthesis_weights(1, 16, seed=11).save(weights_path)
    container = tmp_path / "clip.vcmc"
    assert run("encode", str(clip_dir), "--out", str(container)) == 0
    recon_dir = tmp_path / "recon_learned"
    assert run(
        "decode", str(container), "--out", str(recon_dir), "--backend", str(weights_path)
    ) == 0
    assert len(sorted(recon_dir.glob("*.pgm"))) == 8


def test_errors_are_machine_parsable(tmp_path, capsys):
    assert run("decode", str(tmp_path / "missing.vcmc"), "--out", str(tmp_path / "x")) == 1
    assert "error code=" in capsys.readouterr().err

    bad = tmp_path / "bad.vcmc"
    bad.write_bytes(b"not a container at all")
    assert run("decode-features", str(bad)) == 1
    err = capsys.readouterr().err
    assert "error code=CORRUPT_STREAM" in err


def test_synth_rejects_escaping_path(tmp_path, capsys):
    code = run(
        "synth", "--out", str(tmp_path / "clip"), "--dims", "32x32",
        "--frames", "32", "--start", "16,16", "--velocity", "4,0", "--size", "5",
    )
    assert code == 1
    assert "error code=INVALID_CLIP_SPEC" in capsys.readouterr().err
