import numpy as np
import pytest

from pndnet import BackboneConfig, ModelConfig, TrainConfig
from pndnet.data import AugmentConfig
from pndnet.synthetic import load_blob_corpus, make_blob_corpus


def tiny_model_config(**overrides) -> ModelConfig:
    """Desk-scale geometry used across tests: 32px crops, [8,16]+32 backbone."""
    defaults = dict(image_size=32, resize_size=36,
                    backbone=BackboneConfig(channels=(8, 16), out_channels=32))
    defaults.update(overrides)
    return ModelConfig(**defaults)


def fast_train_config(**overrides) -> TrainConfig:
    defaults = dict(epochs=2, seed=7)
    defaults.update(overrides)
    return TrainConfig(**defaults)


@pytest.fixture(scope="session")
def blob_corpus(tmp_path_factory):
    """Shared 16/8-image blob corpus: (dataset, plan, quadrants)."""
    root = tmp_path_factory.mktemp("blobs")
    make_blob_corpus(root, n_train=16, n_test=8, n_classes=4, image_size=64, seed=11)
    return load_blob_corpus(root)


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory):
    """One overfit model on the shared corpus, reused by several test modules."""
    from pndnet import train

    root = tmp_path_factory.mktemp("overfit_blobs")
    make_blob_corpus(root, n_train=16, n_test=8, n_classes=4, image_size=64, seed=3)
    dataset, plan, quadrants = load_blob_corpus(root)
    model_cfg = tiny_model_config()
    train_cfg = TrainConfig(epochs=120, seed=5)
    ckpt, history = train(model_cfg, dataset, plan, train_cfg, stop_at_train_accuracy=1.0)
    assert history[-1].train_accuracy == 1.0, "fixture model failed to overfit"
    return {"dataset": dataset, "plan": plan, "quadrants": quadrants,
            "checkpoint": ckpt, "history": history, "model_cfg": model_cfg,
            "train_cfg": train_cfg}


def no_augment() -> AugmentConfig:
    return AugmentConfig(rotation_deg=0.0, scale_delta=0.0, flip_p=0.0, blur_p=0.0)
