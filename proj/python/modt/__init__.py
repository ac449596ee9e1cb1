"""Mixture of decision trees: shallow CART experts behind a linear softmax gate."""

from ._core import (
    Dataset,
    Error,
    Model,
    TrainConfig,
    load_dataset,
    load_model,
    model_from_json,
)
from ._core import train as _train

__all__ = [
    "Dataset",
    "Error",
    "Model",
    "TrainConfig",
    "load_dataset",
    "load_model",
    "model_from_json",
    "train",
]


def train(dataset, config=None, **settings):
    """Fit a model. Keyword settings override fields of ``config``."""
    config = config if config is not None else TrainConfig()
    for key, value in settings.items():
        if not hasattr(config, key):
            raise TypeError(f"unknown setting {key!r}")
        setattr(config, key, value)
    return _train(dataset, config)
