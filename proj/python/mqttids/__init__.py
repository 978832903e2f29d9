"""MQTT intrusion detection toolkit: synthetic data, seven classifiers, reports."""

import json

from ._mqttids import Model, MqttidsError, __version__, generate, methods, synth
from . import _mqttids

__all__ = ["Model", "MqttidsError", "__version__", "compare", "evaluate", "generate", "methods", "synth"]


def evaluate(y_true, y_pred, n_classes, label_names=()):
    """Confusion matrix and per-class/averaged metrics as a dict."""
    return json.loads(_mqttids.evaluate_json(y_true, y_pred, n_classes, list(label_names)))


def compare(config):
    """Runs the full comparison for a run-config dict and returns compare.json as a dict."""
    return json.loads(_mqttids.compare_json(json.dumps(config)))
