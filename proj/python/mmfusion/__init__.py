"""Python bindings for the mmfusion multimodal interview classification library."""

import json as _json

from . import _core
from ._core import (
    Error,
    ConfigError,
    DataError,
    DegenerateDataError,
    ParameterError,
    ValidationError,
    SvmModel,
    accuracy,
    balanced_accuracy,
    classification_report,
    derive_labels,
    deterministic_embed,
    format_names,
    generate_corpus,
    mae,
    train_svm,
    window_indices,
)

__all__ = [
    "Error",
    "ConfigError",
    "DataError",
    "DegenerateDataError",
    "ParameterError",
    "ValidationError",
    "SvmModel",
    "accuracy",
    "balanced_accuracy",
    "classification_report",
    "derive_labels",
    "deterministic_embed",
    "format_names",
    "generate_corpus",
    "mae",
    "run",
    "train_svm",
    "window_indices",
]


def run(config):
    """Run an experiment. `config` is a dict or a path to a JSON config; returns the result as a dict."""
    if isinstance(config, dict):
        text = _core.run_config_text(_json.dumps(config))
    else:
        text = _core.run_config_file(str(config))
    return _json.loads(text)
