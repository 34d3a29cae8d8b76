import numpy as np
import pytest

from mrcp.checkpoint import CheckpointError, checkpoint_bytes, load_checkpoint, save_checkpoint
from mrcp.datagen import NoiseSpec, generate_frames, read_dataset, write_dataset
from mrcp.graph import CommGraph, complete_graph
from mrcp.harness import (
    REFERENCE_RATIO,
    ConfigError,
    EpisodeLog,
    TrainConfig,
    evaluate_checkpoint,
    evaluate_frames,
    load_config,
    parse_config_text,
    results_table,
    run_training,
    simulate_exchange,
    train_frames,
)
from mrcp.harness.cli import main
from mrcp.harness.train import split_indices
from mrcp.metrics import MetricBundle
from mrcp.model import ModelConfig, init_params


@pytest.fixture(scope="module")
def tiny():
    return generate_frames("circle_inward", n_agents=3, n_frames=8, height=16, width=16, seed=0)


@pytest.fixture(scope="module")
def tiny_path(tmp_path_factory, tiny):
    path = tmp_path_factory.mktemp("data") / "tiny.mrcp"
    write_dataset(*tiny, path)
    return path


def depth(b):
    return b.abs_rel, b.sq_rel, b.rmse


def tiny_cfg(**kw):
    base = dict(variant="mp", channels=8, epochs=1, max_steps=4, eval_noisy="0,1")
    base.update(kw)
    return TrainConfig(**base)


def test_config_text_roundtrip():
    cfg = TrainConfig(variant="mp-att", lr=3e-4, share_levels=False, eval_noisy="0,2")
    assert parse_config_text(cfg.to_text()) == cfg


def test_config_comments_and_errors(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text("# comment\nvariant = mp   # trailing\n\nepochs=3\n")
    cfg = load_config(path, {"epochs": "5"})
    assert cfg.variant == "mp" and cfg.epochs == 5
    with pytest.raises(ConfigError):
        parse_config_text("bogus = 1")
    with pytest.raises(ConfigError):
        parse_config_text("epochs = many")
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")


@pytest.mark.parametrize("kw", [dict(epochs=0), dict(train_noisy=4), dict(eval_noisy="0,9"), dict(split=1.0)])
def test_config_invariants(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw).validate(3)


def test_split_is_deterministic_and_disjoint():
    tr, ev = split_indices(10, 3)
    assert (tr, ev) == split_indices(10, 3)
    assert len(tr) == 8 and len(ev) == 2 and not set(tr) & set(ev)


def test_zero_learning_rate_keeps_initial_parameters(tiny):
    frames, man = tiny
    res = train_frames(tiny_cfg(lr=0.0), frames, man)
    init = init_params(res.model_cfg, 0)
    assert all(np.array_equal(init[k].data, res.params[k].data) for k in init)


def test_same_seed_same_log(tiny):
    frames, man = tiny
    a = train_frames(tiny_cfg(), frames, man)
    b = train_frames(tiny_cfg(), frames, man)
    assert a.log.to_tsv() == b.log.to_tsv()
    assert a.losses == b.losses


def test_tiny_run_halves_loss(tiny):
    frames, man = tiny
    cfg = tiny_cfg(epochs=100, max_steps=50, lr=1e-2, depth_scale=1.0, train_noisy=0)
    res = train_frames(cfg, frames, man)
    assert len(res.losses) == 50
    assert res.losses[-1] < 0.5 * res.losses[0]


def test_log_has_one_row_per_epoch_and_setting(tiny):
    frames, man = tiny
    res = train_frames(tiny_cfg(epochs=2, max_steps=0), frames, man)
    assert [(r[0], r[1]) for r in res.log.rows] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    text = res.log.to_tsv()
    assert EpisodeLog.from_tsv(text).to_tsv() == text


def test_config_dataset_mismatch_fails_before_training(tiny):
    frames, man = tiny
    with pytest.raises(ConfigError):
        train_frames(tiny_cfg(eval_noisy="0,4"), frames, man)
    with pytest.raises(ConfigError):
        train_frames(tiny_cfg(channels=3), frames, man)


def test_oracle_predictor_is_perfect(tiny):
    frames, man = tiny
    mcfg = ModelConfig("mp", channels=8, height=16, width=16, n_agents=3)
    out = evaluate_frames(None, mcfg, frames, range(8), [0, 2], NoiseSpec(), 1, man.max_depth,
                          predictor=lambda fr, imgs: fr.depth)
    assert all(out[s].abs_rel == 0.0 and out[s].rmse == 0.0 for s in (0, 2))
    scfg = ModelConfig("mp", channels=8, height=16, width=16, n_agents=3, task="segmentation")
    out = evaluate_frames(None, scfg, frames, range(8), [1], NoiseSpec(), 1, None,
                          predictor=lambda fr, imgs: fr.seg)
    assert out[1].miou == 1.0


def test_checkpoint_roundtrip_and_errors(tmp_path):
    params = init_params(ModelConfig("mp-att", channels=4, height=16, width=16, heads=2), 5)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, params)
    back = load_checkpoint(path)
    assert list(back) == list(params)
    assert all(np.array_equal(back[k], params[k].data) for k in back)
    raw = path.read_bytes()
    path.write_bytes(raw[:-9] + raw[-4:])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    assert checkpoint_bytes({"s": np.float64(2.0)})[-12:-4] == np.float64(2.0).tobytes()


def test_run_training_writes_artifacts_and_eval_matches(tmp_path, tiny_path):
    cfg = tiny_cfg(dataset=str(tiny_path), out_dir=str(tmp_path / "run"))
    res = run_training(cfg)
    ckpt = tmp_path / "run" / "model.ckpt"
    assert ckpt.exists() and (tmp_path / "run" / "log.tsv").exists()
    assert (tmp_path / "run" / "timing.tsv").exists()
    first = evaluate_checkpoint(ckpt, tiny_path, "mp", [0, 1])
    again = evaluate_checkpoint(ckpt, tiny_path, "mp", [0, 1])
    assert [depth(first[s]) for s in (0, 1)] == [depth(again[s]) for s in (0, 1)]
    assert depth(first[0]) == depth(res.log.final()[0])
    with pytest.raises(ConfigError):
        evaluate_checkpoint(ckpt, tiny_path, "mp-pose", [0])


def test_bandwidth_arithmetic():
    cfg = ModelConfig(channels=32, height=64, width=64)
    rep = simulate_exchange(complete_graph(5), cfg, 4)
    assert rep.message_bytes == 8192 and rep.raw_bytes == 49152
    assert rep.ratio == 1 / 6
    assert rep.total_message_bytes == 8192 * 20
    assert "0.417" in rep.to_text()
    assert abs(REFERENCE_RATIO - 2.5 / 6) < 1e-15


def test_bandwidth_empty_graph_and_levels():
    cfg = ModelConfig(channels=16, height=32, width=32, levels=2)
    assert simulate_exchange(CommGraph(3, frozenset()), cfg, 2).total_message_bytes == 0
    rep = simulate_exchange(complete_graph(3), cfg, 2)
    assert rep.total_message_bytes == 16 * 4 * 4 * 2 * 2 * 6
    assert rep.total_message_bytes == sum(rep.link_bytes.values()) * rep.levels


def test_report_table_layout():
    log = EpisodeLog("mp-pose")
    log.append(0, 0, 1.0, MetricBundle(0.1, 0.2, 0.3))
    log.append(0, 2, 1.0, MetricBundle(0.4, 0.5, 0.6))
    other = EpisodeLog("baseline", [(0, 0, 1.0, 0.2, 0.3, 0.4, float("nan"))])
    text = results_table([log, other])
    lines = text.splitlines()
    assert lines[0].split()[:3] == ["variant", "Abs", "Rel"]
    assert len(lines) == 4
    assert lines[2].startswith("mp-pose") and lines[3].startswith("baseline")
    for name in ("Abs Rel", "Sq Rel", "RMSE", "mIoU"):
        assert name in lines[0]


def test_cli_gen_data(tmp_path, capsys):
    out = tmp_path / "d.mrcp"
    code = main(["gen-data", "--preset", "circle_inward", "--agents", "5", "--frames", "8",
                 "--height", "16", "--width", "16", "--out", str(out)])
    assert code == 0 and out.exists()
    _, man = read_dataset(out)
    assert man.frame_count == 8 and man.agent_count == 5


def test_cli_usage_codes(capsys):
    assert main(["eval", "--help"]) == 0
    assert "usage" in capsys.readouterr().out
    assert main(["train", "--config", "missing.cfg"]) == 2
    assert "missing.cfg" in capsys.readouterr().err
    assert main(["train", "--config", "x.cfg", "--bogus"]) == 2
    assert main(["report", "/nonexistent/log.tsv"]) == 1


def test_cli_train_eval_report(tmp_path, tiny_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text(f"dataset = {tiny_path}\nvariant = mp\nchannels = 8\nepochs = 1\nmax_steps = 2\n")
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out-dir", str(run), "--set", "eval_noisy=0"]) == 0
    assert main(["eval", str(run / "model.ckpt"), str(tiny_path), "--noisy-cameras", "0", "1"]) == 0
    assert main(["report", str(run / "log.tsv")]) == 0
    assert main(["bandwidth", "--config", str(cfg)]) == 0
    assert "reference ratio" in capsys.readouterr().out
