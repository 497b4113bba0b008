"""
Tests for Adam, the alternating training step, checkpoints and resumption.
"""

import json
from unittest.mock import patch

import numpy as np
import pytest

from swgan_inpaint.core.tensor import Tensor, no_grad
from swgan_inpaint.errors import ChecksumError, ConfigError, GradientError, NonFiniteLossError, ShapeError
from swgan_inpaint.ml.losses import LOG_KEYS
from swgan_inpaint.ml.optim import AdamState, adam_step
from swgan_inpaint.ml.trainer import (
    LOG_NAME,
    Trainer,
    load_checkpoint,
    summarize_training_log,
)
from swgan_inpaint.nn.layers import LayerParamSet
from swgan_inpaint.utils.config import RunConfig
from swgan_inpaint.utils.data_preparer import BatchLoader, resolve_entries
from swgan_inpaint.utils.masks import apply_mask, composite_reconstruction

from conftest import smoke_document, tiny_document, write_flat_faces, write_shared_mask


def scalar_params(value=0.0):
    return LayerParamSet({"w": Tensor(np.array([value]), requires_grad=True)})


def make_batch(seed=0, batch=2, size=16):
    rng = np.random.default_rng(seed)
    images = rng.uniform(-1, 1, size=(batch, 3, size, size))
    masks = np.ones((batch, 1, size, size))
    masks[:, :, 4:12, 3:10] = 0.0
    return images, masks


def make_loader(config):
    split = resolve_entries(config.data, config.train.seed)
    return BatchLoader(split.train, config.generator.input_size, config.masks, num_workers=1)


def snapshot(trainer):
    return {**trainer.generator.parameters("g.").snapshot(), **trainer.critic.parameters("d.").snapshot()}


def assert_same_params(a, b):
    assert a.keys() == b.keys()
    for name in a:
        assert a[name].tobytes() == b[name].tobytes(), name


def test_adam_zero_gradient_is_a_null_update():
    params = scalar_params(0.3)
    state = AdamState.for_params(params, lr=0.1)
    adam_step(params, state, {"w": np.zeros(1)})
    assert params["w"].data[0] == 0.3
    assert state.t == 1


def test_adam_first_step_moves_by_learning_rate():
    params = scalar_params(0.0)
    state = AdamState.for_params(params, lr=0.1)
    params["w"].grad = np.ones(1)
    adam_step(params, state)
    assert params["w"].data[0] == pytest.approx(-0.1, abs=1e-6)
    assert params["w"].grad is None
    params["w"].grad = np.ones(1)
    adam_step(params, state)
    assert params["w"].data[0] == pytest.approx(-0.2, abs=1e-6)


def test_adam_requires_every_gradient():
    params = LayerParamSet({"a": Tensor([1.0], requires_grad=True), "b": Tensor([2.0], requires_grad=True)})
    params["a"].grad = np.ones(1)
    with pytest.raises(GradientError) as excinfo:
        adam_step(params, AdamState.for_params(params, lr=0.1))
    assert "b" in str(excinfo.value)


def test_adam_state_round_trip_and_shape_check():
    params = scalar_params()
    state = AdamState.for_params(params, lr=0.01)
    params["w"].grad = np.array([0.5])
    adam_step(params, state)
    restored = AdamState.restore(state.metadata(), state.arrays("opt/"), "opt/", params)
    assert restored.t == 1
    assert np.array_equal(restored.m["w"], state.m["w"])
    assert np.array_equal(restored.v["w"], state.v["w"])
    wrong = LayerParamSet({"w": Tensor(np.zeros(3), requires_grad=True)})
    with pytest.raises(ShapeError):
        AdamState.restore(state.metadata(), state.arrays("opt/"), "opt/", wrong)


def test_train_step_report_and_invariants(tiny_config):
    trainer = Trainer(tiny_config)
    extractor_before = trainer.extractor.parameters().snapshot()
    c = tiny_config.train.clip_c
    for seed in range(3):
        report = trainer.train_step(*make_batch(seed))
        assert report.l_wp == pytest.approx(report.l_w_generator + report.l_sp, rel=1e-6, abs=1e-6)
        assert report.l_sp == pytest.approx(report.l1_term + report.perceptual_mse_term, rel=1e-6, abs=1e-6)
        assert np.isfinite(report.l_w_critic)
        assert max(np.max(np.abs(p.data)) for p in trainer.d_params) <= c
    assert trainer.step == 3
    assert trainer.g_state.t == 3
    assert trainer.d_state.t == 3
    for name, p in trainer.extractor.parameters().items():
        assert p.data.tobytes() == extractor_before[name].tobytes()
    assert trainer.generator.head.weight.dtype == np.float32


def test_train_step_runs_configured_critic_passes(tmp_path, image_dir):
    config = RunConfig.from_dict(tiny_document(tmp_path, train={"critic_steps_per_gen_step": 3}))
    trainer = Trainer(config)
    trainer.train_step(*make_batch())
    assert trainer.d_state.t == 3
    assert trainer.g_state.t == 1


def test_train_step_rejects_mismatched_batch(tiny_config):
    images, masks = make_batch()
    with pytest.raises(ShapeError):
        Trainer(tiny_config).train_step(images, masks[:1])


def test_identical_seeds_give_identical_parameters(tiny_config):
    first, second = Trainer(tiny_config), Trainer(tiny_config)
    for seed in range(3):
        first.train_step(*make_batch(seed))
        second.train_step(*make_batch(seed))
    assert_same_params(snapshot(first), snapshot(second))


def test_non_finite_loss_aborts_with_term_name(tiny_config):
    trainer = Trainer(tiny_config)
    nan = Tensor(np.float32(np.nan))
    with patch("swgan_inpaint.ml.trainer.perceptual_loss") as mock_loss:
        mock_loss.return_value = (nan, {"l1_term": nan, "perceptual_mse_term": nan})
        with pytest.raises(NonFiniteLossError) as excinfo:
            trainer.train_step(*make_batch())
    assert excinfo.value.term == "l_sp"
    assert excinfo.value.step == 0


def test_checkpoint_round_trip(tmp_path, tiny_config):
    trainer = Trainer(tiny_config)
    trainer.train_step(*make_batch())
    path = trainer.save_checkpoint(tmp_path / "ckpt.swgn")

    state = load_checkpoint(path)
    assert state.step == 1
    assert state.config.to_dict() == tiny_config.to_dict()
    fresh = Trainer(tiny_config)
    fresh.restore(state)
    assert fresh.step == 1
    assert fresh.g_state.t == 1
    assert_same_params(snapshot(fresh), snapshot(trainer))


def test_corrupted_checkpoint_leaves_trainer_untouched(tmp_path, tiny_config):
    trainer = Trainer(tiny_config)
    trainer.train_step(*make_batch())
    path = trainer.save_checkpoint(tmp_path / "ckpt.swgn")
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    path.write_bytes(bytes(raw))

    fresh = Trainer(tiny_config)
    before = snapshot(fresh)
    with pytest.raises(ChecksumError):
        fresh.load_checkpoint(path)
    assert fresh.step == 0
    assert_same_params(snapshot(fresh), before)


def test_run_writes_log_and_checkpoints(tmp_path, tiny_config):
    trainer = Trainer(tiny_config, make_loader(tiny_config))
    assert trainer.total_steps() == 4
    reports = trainer.run(tmp_path / "out")
    assert len(reports) == 4

    lines = [json.loads(line) for line in (tmp_path / "out" / LOG_NAME).read_text().splitlines()]
    assert [r["step"] for r in lines] == [1, 2, 3, 4]
    for record in lines:
        assert set(record) == set(LOG_KEYS) | {"wall_clock_s"}
        assert record["l_wp"] == pytest.approx(record["l_w_generator"] + record["l_sp"], rel=1e-6, abs=1e-6)
    names = sorted(p.name for p in (tmp_path / "out" / "checkpoints").iterdir())
    assert names == ["final.swgn", "step_000002.swgn", "step_000004.swgn"]

    summary = summarize_training_log(tmp_path / "out" / LOG_NAME)
    assert list(summary.columns) == ["first", "last", "min"]
    assert summary.loc["l_wp", "first"] == pytest.approx(lines[0]["l_wp"])
    assert summary.loc["l_wp", "last"] == pytest.approx(lines[-1]["l_wp"])


def test_resumed_run_matches_uninterrupted_run(tmp_path, image_dir):
    def config(max_steps):
        return RunConfig.from_dict(tiny_document(tmp_path, train={"epochs": 5, "max_steps": max_steps}))

    full = Trainer(config(10), make_loader(config(10)))
    full.run(tmp_path / "full")

    half = Trainer(config(5), make_loader(config(5)))
    half.run(tmp_path / "half")

    resumed = Trainer(config(10), make_loader(config(10)))
    resumed.load_checkpoint(tmp_path / "half" / "checkpoints" / "final.swgn")
    assert resumed.step == 5
    reports = resumed.run(tmp_path / "resumed")
    assert len(reports) == 5
    assert resumed.step == full.step == 10
    assert_same_params(snapshot(resumed), snapshot(full))

    full_log = (tmp_path / "full" / LOG_NAME).read_text().splitlines()
    resumed_log = (tmp_path / "resumed" / LOG_NAME).read_text().splitlines()
    for a, b in zip(full_log[5:], resumed_log):
        a, b = json.loads(a), json.loads(b)
        assert {k: a[k] for k in LOG_KEYS} == {k: b[k] for k in LOG_KEYS}


def test_resume_rejects_a_different_architecture_or_seed(tmp_path, image_dir):
    trainer = Trainer(RunConfig.from_dict(tiny_document(tmp_path)))
    trainer.train_step(*make_batch())
    path = trainer.save_checkpoint(tmp_path / "ckpt.swgn")

    wider = Trainer(RunConfig.from_dict(tiny_document(tmp_path, generator={"channels": [4, 16]})))
    with pytest.raises(ConfigError) as excinfo:
        wider.load_checkpoint(path)
    assert any("generator.channels" in p for p in excinfo.value.problems)
    assert wider.step == 0

    reseeded = Trainer(RunConfig.from_dict(tiny_document(tmp_path, train={"seed": 4})))
    with pytest.raises(ConfigError) as excinfo:
        reseeded.load_checkpoint(path)
    assert any("train.seed" in p for p in excinfo.value.problems)

    longer = Trainer(RunConfig.from_dict(tiny_document(tmp_path, train={"epochs": 9})))
    longer.load_checkpoint(path)
    assert longer.step == 1


def two_cluster_faces(count=8, size=16, seed=0):
    """Horizontal-stripe and vertical-stripe faces, both with zero mean intensity."""
    rng = np.random.default_rng(seed)
    stripes = np.where(np.arange(size) % 2 == 0, 0.8, -0.8)
    horizontal = np.broadcast_to(stripes[:, None], (size, size))
    vertical = np.broadcast_to(stripes[None, :], (size, size))
    faces = [horizontal if i % 2 == 0 else vertical for i in range(count)]
    images = np.stack([np.stack([f] * 3) for f in faces])
    return images + rng.normal(0, 0.02, size=images.shape)


def test_critic_gap_grows_against_frozen_generator(tmp_path, image_dir):
    config = RunConfig.from_dict(tiny_document(tmp_path, train={"dtype": "float64"}))
    trainer = Trainer(config)
    images = Tensor(two_cluster_faces())
    masks = Tensor(np.zeros((8, 1, 16, 16)))
    masked = apply_mask(images, masks)
    generator_before = trainer.generator.parameters().snapshot()

    def gap():
        with no_grad():
            fake = composite_reconstruction(images, masks, trainer.generator(masked, mode="eval"))
            return float(trainer.critic(images).data.mean() - trainer.critic(fake).data.mean())

    trainer.critic_step(images, masks, masked, dropout_seed=0)
    start = gap()
    for step in range(1, 200):
        trainer.critic_step(images, masks, masked, dropout_seed=step)
        assert np.isfinite(gap())
        assert max(np.max(np.abs(p.data)) for p in trainer.d_params) <= config.train.clip_c
    assert gap() > start
    for name, p in trainer.generator.parameters().items():
        assert np.array_equal(p.data, generator_before[name])


def moving_average(values, window=10):
    return np.convolve(np.asarray(values), np.ones(window) / window, mode="valid")


def assert_settles(series, slack=0.02):
    """Non-increasing up to ``slack`` of the starting level, and lower at the end."""
    assert np.all(np.diff(series) <= slack * series[0])
    assert series[-1] <= series[0]


@pytest.mark.slow
def test_loss_bookkeeping_over_a_long_run(tmp_path, image_dir):
    config = RunConfig.from_dict(
        tiny_document(tmp_path, loss={"lambda_w": 0.5, "lambda_sp": 2.0}, train={"epochs": 100, "max_steps": 300})
    )
    Trainer(config, make_loader(config)).run(tmp_path / "out")
    records = [json.loads(line) for line in (tmp_path / "out" / LOG_NAME).read_text().splitlines()]
    assert len(records) == 300
    for record in records:
        expected = 0.5 * record["l_w_generator"] + 2.0 * record["l_sp"]
        assert record["l_wp"] == pytest.approx(expected, rel=1e-6, abs=1e-6)
        assert record["l_sp"] == pytest.approx(record["l1_term"] + record["perceptual_mse_term"], rel=1e-6, abs=1e-6)


@pytest.mark.slow
def test_perceptual_loss_alone_falls_on_one_face(tmp_path):
    write_flat_faces(tmp_path / "images", 1, size=16, seed=2)
    write_shared_mask(tmp_path / "masks", size=16)
    document = tiny_document(
        tmp_path,
        generator={"dropout_rate": 0.0},
        loss={"lambda_w": 0.0},
        train={"batch_size": 1, "epochs": 200},
        data={"mask_dir": str(tmp_path / "masks"), "split_ratio": 1.0},
    )
    config = RunConfig.from_dict(document)
    reports = Trainer(config, make_loader(config)).run(tmp_path / "out")
    assert len(reports) == 200
    assert all(r.l_wp == pytest.approx(r.l_sp, rel=1e-6, abs=1e-9) for r in reports)
    l_sp = moving_average([r.l_sp for r in reports])
    assert_settles(l_sp)
    assert l_sp[-1] < l_sp[0]


@pytest.mark.slow
def test_overfit_smoke_run(tmp_path):
    """Masked-region error halves within 300 steps under the desk preset's loss."""
    config = RunConfig.from_dict(smoke_document(tmp_path))
    assert config.loss.perceptual_target == "ground_truth"
    loader = make_loader(config)
    trainer = Trainer(config, loader)
    images, masks = loader.load_batch(range(len(loader)))
    assert len(loader) == 8

    def masked_mae():
        with no_grad(), trainer.precision():
            prediction = trainer.generator(apply_mask(Tensor(images), Tensor(masks)), mode="eval")
            reconstruction = composite_reconstruction(Tensor(images), Tensor(masks), prediction).data
        missing = np.broadcast_to(masks == 0, images.shape)
        return float(np.mean(np.abs(reconstruction - images)[missing]))

    initial = masked_mae()
    reports = trainer.run()
    assert len(reports) == 300
    assert masked_mae() <= 0.5 * initial
    assert_settles(moving_average([r.l_sp for r in reports])[-100:])
