import json
import shutil

import numpy as np
import pytest

from sbsteg import pipeline
from sbsteg.cli import main
from sbsteg.config import desk_config, full_config, parse_config
from sbsteg.image_core import load_gray, load_image, save_image
from sbsteg.metrics import CSV_HEADER


def toy_config(tmp_path, **kw):
    base = dict(size=32, n_train=20, n_test=8, wavelet="haar", out=str(tmp_path / "run"),
                epochs=20, batch_size=4, group1=(8,), group2=(8,), group3=(8,),
                decoder=(8, 8), seed=3)
    base.update(kw)
    return desk_config(**base)


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory, desk_dir):
    d = tmp_path_factory.mktemp("toy")
    for p in sorted(desk_dir.glob("*.png"))[:40]:
        shutil.copy(p, d / p.name)
    return d


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory, toy_dir):
    out = tmp_path_factory.mktemp("toyrun")
    cfg = toy_config(out, dataset=str(toy_dir))
    split = pipeline.ingest_dataset(toy_dir, cfg)
    data = pipeline.load_split_arrays(split)
    res = pipeline.train(cfg, data=data)
    return cfg, split, data, res


def test_config_parsing():
    cfg = parse_config("""
        # desk run
        size = 48
        epochs = 7
        wavelet = HAAR
        channel = y
        subband = cA
        milestones = 3:0.5, 5:0.25
        group1 = 4, 4
        residual = yes
    """)
    assert cfg.size == 48 and cfg.train.epochs == 7 and cfg.wavelet == "haar"
    assert cfg.channel == "Y" and cfg.region == "cA" and cfg.residual
    assert cfg.train.milestones == ((3, 0.5), (5, 0.25)) and cfg.group1 == (4, 4)
    assert parse_config("preset = full").size == 250
    assert full_config().n_train == 4000 and full_config().train.epochs == 400
    assert desk_config().size == 64 and desk_config().n_train == 400


@pytest.mark.parametrize("text, msg", [("bogus = 1", "unknown key"), ("size 3", "key=value"),
                                       ("size = big", "bad value"), ("preset = huge", "preset")])
def test_config_errors(text, msg):
    with pytest.raises(ValueError, match=msg):
        parse_config(text)


def test_config_validation():
    with pytest.raises(ValueError, match="subband"):
        desk_config(region="cX").validate()
    with pytest.raises(ValueError, match="channel"):
        desk_config(channel="H").validate()


def test_ingest_split(toy_dir, tmp_path):
    cfg = toy_config(tmp_path)
    a = pipeline.ingest_dataset(toy_dir, cfg)
    b = pipeline.ingest_dataset(toy_dir, cfg)
    assert a == b
    assert len(a.train_covers) == len(a.train_secrets) == 10
    assert len(a.test_covers) == len(a.test_secrets) == 4
    everything = a.train_covers + a.train_secrets + a.test_covers + a.test_secrets
    assert len(set(everything)) == len(everything)
    other = pipeline.ingest_dataset(toy_dir, toy_config(tmp_path, seed=4))
    assert other.train_covers != a.train_covers


def test_ingest_loads_and_resizes(toy_dir, tmp_path):
    split = pipeline.ingest_dataset(toy_dir, toy_config(tmp_path, size=40))
    tc, ts, ec, es = pipeline.load_split_arrays(split)
    assert tc.shape == (10, 40, 40, 3) and ts.shape == (10, 40, 40)
    assert tc.dtype == ts.dtype == np.uint8
    assert ec.shape == (4, 40, 40, 3) and es.shape == (4, 40, 40)


def test_ingest_skips_undecodable(toy_dir, tmp_path):
    d = tmp_path / "imgs"
    shutil.copytree(toy_dir, d)
    (d / "0000_broken.png").write_bytes(b"\x89PNG not really")
    (d / "notes.txt").write_text("hello")
    with pytest.warns(UserWarning, match="skipping"):
        split = pipeline.ingest_dataset(d, toy_config(tmp_path, n_train=36, n_test=4))
    assert len(split.skipped) == 2


def test_ingest_errors(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(ValueError, match="empty"):
        pipeline.ingest_dataset(tmp_path / "empty", toy_config(tmp_path))
    (tmp_path / "bad").mkdir()
    (tmp_path / "bad" / "x.png").write_bytes(b"junk")
    with pytest.warns(UserWarning), pytest.raises(ValueError, match="no decodable"):
        pipeline.ingest_dataset(tmp_path / "bad", toy_config(tmp_path))


def test_arch_follows_region(tmp_path):
    a = pipeline.arch_for(toy_config(tmp_path, region="all"))
    assert (a.secret_channels, a.cover_channels) == (4, 4)
    a = pipeline.arch_for(toy_config(tmp_path, region="spatial"))
    assert (a.secret_channels, a.cover_channels, a.decoder_out) == (1, 1, 1)
    a = pipeline.arch_for(toy_config(tmp_path))
    assert (a.secret_channels, a.cover_channels) == (4, 1)


def test_toy_training_halves_loss(toy_run):
    cfg, _, _, res = toy_run
    assert len(res.losses) == cfg.train.epochs
    assert res.losses[-1] < 0.5 * res.losses[0]
    assert pipeline.read_loss_log(res.loss_log) == res.losses
    assert res.checkpoint.exists()


def test_training_is_deterministic(toy_run, tmp_path):
    cfg, split, data, res = toy_run
    again = pipeline.train(cfg, data=data, out=tmp_path / "again")
    assert again.checkpoint.read_bytes() == res.checkpoint.read_bytes()
    assert again.loss_log.read_bytes() == res.loss_log.read_bytes()


def test_non_finite_loss_aborts(toy_run, tmp_path, monkeypatch):
    cfg, _, data, _ = toy_run
    real = pipeline.forward_loss

    def poisoned(*a, **kw):
        g = real(*a, **kw)
        g.value = float("nan")
        return g

    monkeypatch.setattr(pipeline, "forward_loss", poisoned)
    with pytest.raises(FloatingPointError, match="epoch 1"):
        pipeline.train(cfg.with_overrides(epochs=2), data=data, out=tmp_path)


def test_file_round_trip_matches_memory(toy_run, tmp_path):
    cfg, split, data, res = toy_run
    cover, secret = data[2][0], data[3][0]
    save_image(tmp_path / "c.png", cover)
    save_image(tmp_path / "s.png", secret)
    stego_path, rep = pipeline.embed(tmp_path / "c.png", tmp_path / "s.png", res.checkpoint,
                                     tmp_path / "stego.png")
    assert rep.cl_psnr is not None and np.isfinite(rep.psnr)
    mem_stego = pipeline.embed_arrays(res.params, cover[None], secret[None])[0]
    np.testing.assert_array_equal(load_image(stego_path), mem_stego)
    sec_path, srep = pipeline.extract(stego_path, res.checkpoint, tmp_path / "rec.png",
                                      reference=tmp_path / "s.png")
    rec = load_gray(sec_path)
    assert rec.ndim == 2
    np.testing.assert_array_equal(rec, pipeline.extract_arrays(res.params, mem_stego[None])[0])
    assert srep is not None and srep.cl_psnr is None


def test_black_secret_gives_valid_stego(toy_run):
    _, _, data, res = toy_run
    stego = pipeline.embed_arrays(res.params, data[2][:2], np.zeros((2, 32, 32)))
    assert stego.dtype == np.uint8 and stego.shape == data[2][:2].shape


def test_size_mismatch(toy_run, tmp_path):
    _, _, data, res = toy_run
    save_image(tmp_path / "big.png", np.zeros((64, 64, 3), np.uint8))
    save_image(tmp_path / "bigs.png", np.zeros((64, 64), np.uint8))
    with pytest.raises(ValueError, match="checkpoint size"):
        pipeline.embed(tmp_path / "big.png", tmp_path / "bigs.png", res.checkpoint,
                       tmp_path / "o.png")
    save_image(tmp_path / "small.png", np.zeros((32, 32), np.uint8))
    with pytest.raises(ValueError, match="sizes differ"):
        pipeline.embed(tmp_path / "big.png", tmp_path / "small.png", res.checkpoint,
                       tmp_path / "o.png")


def test_evaluate_outputs(toy_run, tmp_path):
    cfg, split, data, res = toy_run
    a = pipeline.evaluate(split, res.checkpoint, tmp_path / "a")
    b = pipeline.evaluate(None, res.params, tmp_path / "b", data=data)
    assert set(a.summary) == set(pipeline.SUMMARY_COLUMNS)
    assert len(a.cover_reports) == len(a.secret_reports) == 4
    for name in ("cover", "secret", "summary"):
        assert a.paths[name].read_bytes() == b.paths[name].read_bytes()
    header = a.paths["cover"].read_text().splitlines()[0]
    assert tuple(header.split(",")) == CSV_HEADER
    assert "reference_full_scale" in a.paths["summary"].read_text()


def test_evaluate_empty(toy_run):
    _, _, data, res = toy_run
    empty = (data[0], data[1], data[2][:0], data[3][:0])
    with pytest.raises(ValueError, match="empty test set"):
        pipeline.evaluate(None, res.params, data=empty)


def test_ablate_isolates_failures(toy_run, tmp_path):
    cfg, _, data, _ = toy_run
    rows = pipeline.ablate(cfg.with_overrides(epochs=1), [("B", "cD"), ("B", "nowhere")],
                           data=data, out=tmp_path)
    assert [r.status for r in rows] == ["ok", "failed"]
    assert "nowhere" in rows[1].error
    lines = (tmp_path / "ablation.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("channel,subband,status,C_Err")


def test_capacity():
    assert pipeline.capacity_bpp((250, 250), (250, 250)) == 8.0
    with pytest.raises(ValueError, match="2 bpp"):
        pipeline.capacity_bpp((250, 250), (125, 125))
    assert (pipeline.capacity_report(desk_config(wavelet="haar"))["bpp"]
            == pipeline.capacity_report(desk_config(wavelet="dmey"))["bpp"] == 8.0)


def test_cli_capacity(capsys):
    assert main(["capacity", "--size", "250"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["bpp"] == 8.0 and out["cover"] == "250x250x3"


def test_cli_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["capacity", "--wavelet", "db4"])
    assert e.value.code == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and json.loads(err[0])["error"] == "UsageError"
    with pytest.raises(SystemExit) as e:
        main(["embed", "--cover", str(tmp_path / "nope.png"), "--secret", "x", "--checkpoint", "y"])
    assert e.value.code == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and json.loads(err[0])["error"] == "ImageReadError"


def test_cli_config_file_and_overrides(tmp_path, toy_dir, capsys):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(f"dataset = {toy_dir}\nsize = 32\nn_train = 20\nn_test = 8\n"
                        "epochs = 9\nwavelet = haar\ngroup1 = 4\ngroup2 = 4\ngroup3 = 4\n"
                        "decoder = 4\n")
    out = tmp_path / "cli"
    assert main(["train", "--config", str(cfg_file), "--epochs", "2", "--out", str(out)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert len(pipeline.read_loss_log(res["loss_log"])) == 2
    assert main(["evaluate", "--config", str(cfg_file), "--checkpoint", res["checkpoint"],
                 "--out", str(out / "eval")]) == 0
    summary = json.loads(capsys.readouterr().out)["summary"]
    assert set(summary) == set(pipeline.SUMMARY_COLUMNS)
    split = pipeline.ingest_dataset(toy_dir, desk_config(size=32, n_train=20, n_test=8))
    c, s = split.test_covers[0], split.test_secrets[0]
    with pytest.raises(SystemExit) as e:  # 64px images vs a 32px model
        main(["embed", "--cover", str(c), "--secret", str(s), "--checkpoint",
              res["checkpoint"], "--out", str(out / "st.png")])
    assert e.value.code == 1
    assert "checkpoint size" in json.loads(capsys.readouterr().err)["message"]
