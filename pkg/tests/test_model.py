"""
Tests for the generator, critic, feature extractor and the parameter container.
"""

import hashlib
import struct

import numpy as np
import pytest

from swgan_inpaint.core.tensor import Tensor, backward
from swgan_inpaint.errors import ChecksumError, ConfigError, ContainerError, ShapeError, VersionError
from swgan_inpaint.ml.losses import combined_loss, perceptual_loss, wasserstein_generator_loss
from swgan_inpaint.nn import (
    Critic,
    FeatureExtractor,
    Generator,
    clip_critic_weights,
    extract_features,
)
from swgan_inpaint.nn.checkpoint import (
    CHECKPOINT_MAGIC,
    FEATURE_WEIGHTS_MAGIC,
    read_container,
    write_container,
)
from swgan_inpaint.utils.config import CriticConfig, FeatureExtractorConfig, GeneratorConfig
from swgan_inpaint.utils.masks import apply_mask, composite_reconstruction


def small_generator(depth=2, size=16, seed=0, **kwargs):
    config = GeneratorConfig(
        input_size=size, depth=depth, channels=[4, 6, 8, 8][:depth], kernel_size=3, **kwargs
    )
    return Generator(config, seed=seed)


def random_images(shape, seed=0):
    return Tensor(np.random.default_rng(seed).uniform(-1, 1, size=shape))


@pytest.mark.parametrize("depth", [2, 3, 4])
@pytest.mark.parametrize("size", [32, 64])
def test_generator_output_shape_and_range(depth, size):
    config = GeneratorConfig(input_size=size, depth=depth, channels=[4, 4, 8, 8][:depth])
    model = Generator(config, seed=1)
    out = model(random_images((1, 3, size, size)), mode="eval")
    assert out.shape == (1, 3, size, size)
    assert np.all(np.abs(out.data) < 1.0)


def test_generator_skip_alignment_recorded():
    model = small_generator(depth=3, size=32)
    assert model.skip_shapes == {1: (4, 32, 32), 2: (6, 16, 16), 3: (8, 8, 8)}


def test_generator_rejects_bad_input():
    model = small_generator()
    with pytest.raises(ShapeError):
        model(random_images((1, 3, 32, 32)))
    with pytest.raises(ValueError):
        model(random_images((1, 3, 16, 16)), mode="predict")


def test_zeroing_a_skip_changes_the_output():
    model = small_generator(seed=2)
    x = random_images((1, 3, 16, 16), seed=3)
    full = model(x).data
    for b in (1, 2):
        assert np.max(np.abs(full - model(x, drop_skips={b}).data)) > 0


def test_baseline_generator_ignores_skips():
    model = small_generator(seed=2, dilation_rate=1, use_skips=False)
    x = random_images((1, 3, 16, 16), seed=3)
    assert np.array_equal(model(x).data, model(x, drop_skips={1, 2}).data)


def test_generator_dropout_depends_on_seed_only_in_train_mode():
    model = small_generator(seed=4)
    x = random_images((2, 3, 16, 16), seed=5)
    assert np.array_equal(model(x, mode="eval", seed=1).data, model(x, mode="eval", seed=2).data)
    assert np.array_equal(model(x, mode="train", seed=1).data, model(x, mode="train", seed=1).data)
    assert not np.array_equal(model(x, mode="train", seed=1).data, model(x, mode="train", seed=2).data)


def test_every_generator_parameter_receives_gradient():
    model = small_generator(seed=6)
    critic = Critic(CriticConfig(depth=2, channels=[4, 8], kernel_size=3), 16, seed=7)
    extractor = FeatureExtractor(FeatureExtractorConfig(feature_channels=8))
    images = random_images((2, 3, 16, 16), seed=8)
    masks = np.ones((2, 1, 16, 16))
    masks[:, :, 4:12, 4:12] = 0.0
    masked = apply_mask(images, Tensor(masks))
    with critic.frozen():
        reconstruction = composite_reconstruction(images, Tensor(masks), model(masked, mode="train", seed=9))
        l_sp, _ = perceptual_loss(images, reconstruction, extractor)
        backward(combined_loss(wasserstein_generator_loss(critic(reconstruction)), l_sp))
    for name, p in model.parameters().items():
        assert p.grad is not None and np.linalg.norm(p.grad) > 0, name
    assert all(p.grad is None for p in critic.parameters())
    assert all(p.grad is None for p in extractor.parameters())


def test_generator_config_validation():
    with pytest.raises(ConfigError):
        GeneratorConfig(input_size=36, depth=4)
    with pytest.raises(ConfigError) as excinfo:
        GeneratorConfig(input_size=64, depth=4, channels=[8, 8], kernel_size=4)
    assert len(excinfo.value.problems) == 2


def test_critic_scores():
    critic = Critic(CriticConfig(), 64, seed=0)
    batch = random_images((5, 3, 64, 64))
    scores = critic(batch)
    assert scores.shape == (5,)
    duplicated = Tensor(np.repeat(batch.data[:1], 3, axis=0))
    assert np.all(critic(duplicated).data == critic(duplicated).data[0])
    with pytest.raises(ShapeError):
        critic(random_images((1, 3, 32, 32)))


def test_critic_scores_are_unconstrained():
    outside = 0
    for trial in range(100):
        critic = Critic(CriticConfig(depth=2, channels=[4, 8], kernel_size=3), 16, seed=trial)
        scores = critic(random_images((1, 3, 16, 16), seed=trial)).data
        outside += int(np.any((scores < 0) | (scores > 1)))
    assert outside > 0


def test_clip_critic_weights():
    critic = Critic(CriticConfig(depth=2, channels=[4, 8], kernel_size=3), 16, seed=1)
    params = critic.parameters()
    params["conv1.weight"].data[0, 0, 0, 0] = 0.5
    clip_critic_weights(params, 0.01)
    assert params["conv1.weight"].data[0, 0, 0, 0] == 0.01
    assert max(np.max(np.abs(p.data)) for p in params) <= 0.01
    before = params.snapshot()
    clip_critic_weights(params, 0.01)
    assert all(np.array_equal(before[n], p.data) for n, p in params.items())
    with pytest.raises(ValueError):
        clip_critic_weights(params, 0.0)


def test_extractor_shape_and_frozen_parameters():
    extractor = FeatureExtractor(FeatureExtractorConfig(feature_channels=64))
    image = Tensor(np.random.default_rng(0).uniform(-1, 1, size=(1, 3, 64, 64)), requires_grad=True)
    features = extract_features(image, extractor)
    assert features.shape == (1, 64, 16, 16)
    assert all(not p.requires_grad for p in extractor.parameters())
    backward(features.mean())
    assert image.grad is not None
    assert all(p.grad is None for p in extractor.parameters())


def test_extractor_is_sensitive_to_masked_region():
    extractor = FeatureExtractor(FeatureExtractorConfig(feature_channels=8))
    a = np.random.default_rng(1).uniform(-1, 1, size=(1, 3, 32, 32))
    b = a.copy()
    b[:, :, 8:16, 8:16] = 0.0
    diff = extractor(Tensor(a)).data - extractor(Tensor(b)).data
    assert np.max(np.abs(diff)) > 0


def test_extractor_rejects_bad_shapes():
    extractor = FeatureExtractor(FeatureExtractorConfig(feature_channels=8))
    with pytest.raises(ShapeError):
        extractor(Tensor(np.zeros((1, 1, 16, 16))))
    with pytest.raises(ShapeError):
        extractor(Tensor(np.zeros((1, 3, 18, 18))))


def test_extractor_weights_file_round_trip(tmp_path):
    source = FeatureExtractor(FeatureExtractorConfig(feature_channels=8, seed=5))
    path = tmp_path / "phi.fext"
    source.save_weights(path)
    loaded = FeatureExtractor(
        FeatureExtractorConfig(source="weights-file", weights_path=str(path), feature_channels=8)
    )
    for name, p in loaded.parameters().items():
        assert np.array_equal(p.data, source.parameters()[name].data)
        assert not p.requires_grad
    with pytest.raises(ContainerError):
        FeatureExtractor(
            FeatureExtractorConfig(source="weights-file", weights_path=str(path), feature_channels=16)
        )


def test_container_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    arrays = {
        "a": rng.normal(size=(3, 4)).astype(np.float32),
        "b/c": rng.normal(size=(2, 1, 5)),
        "scalar": np.array(1.5),
    }
    path = tmp_path / "model.swgn"
    write_container(path, CHECKPOINT_MAGIC, arrays, {"step": 7})
    metadata, loaded = read_container(path, CHECKPOINT_MAGIC)
    assert metadata == {"step": 7}
    assert list(loaded) == ["a", "b/c", "scalar"]
    for name, array in arrays.items():
        assert loaded[name].dtype == array.dtype
        assert loaded[name].tobytes() == array.tobytes()
    assert not (tmp_path / "model.swgn.tmp").exists()


def test_container_detects_corruption(tmp_path):
    path = tmp_path / "model.swgn"
    write_container(path, CHECKPOINT_MAGIC, {"w": np.ones((4, 4), dtype=np.float32)}, {})
    raw = bytearray(path.read_bytes())
    raw[-40] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ChecksumError):
        read_container(path, CHECKPOINT_MAGIC)


def test_container_rejects_wrong_magic_and_version(tmp_path):
    path = tmp_path / "model.swgn"
    write_container(path, CHECKPOINT_MAGIC, {"w": np.zeros(2)}, {})
    with pytest.raises(ContainerError):
        read_container(path, FEATURE_WEIGHTS_MAGIC)

    body = bytearray(path.read_bytes()[:-32])
    struct.pack_into("<I", body, 4, 99)
    path.write_bytes(bytes(body) + hashlib.sha256(bytes(body)).digest())
    with pytest.raises(VersionError):
        read_container(path, CHECKPOINT_MAGIC)
