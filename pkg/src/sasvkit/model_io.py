"""Model serialization.

One JSON document per trained system: strategy name, embedding dim,
normalization policy, the flatten order of the J features (fixed
row-major, recorded for forward compatibility), the countermeasure
parameters, and the head parameters as flat arrays. Floats are written
with Python's shortest round-trip repr, so saving the same model twice
produces byte-identical files.
"""

import json
from pathlib import Path

import numpy as np

from .cm import CountermeasureClassifier
from .exceptions import UnsupportedStrategyError
from .heads import STRATEGIES, make_head

FORMAT_VERSION = 1


def _tolist(a):
    return np.asarray(a, dtype=np.float64).tolist()


def _head_params(head):
    name = head.strategy
    if name in ("matrix_linear", "diag_zero"):
        return {"w": _tolist(head.weights_), "b": float(head.bias_)}
    if name == "attention":
        return {
            "u1": _tolist(head.gate_u1_),
            "b1": float(head.gate_b1_),
            "u2": _tolist(head.gate_u2_),
            "b2": float(head.gate_b2_),
            "w": _tolist(head.weights_),
            "b": float(head.bias_),
        }
    if name == "conv":
        kp = head.kernel_params_
        return {
            "k5": _tolist(kp["k5"]),
            "b5": _tolist(kp["b5"]),
            "k1": _tolist(kp["k1"]),
            "b1": float(kp["b1"]),
            "w_out": _tolist(kp["w_out"]),
            "b_out": float(kp["b_out"]),
        }
    if name == "concat":
        n_layers = len(head.hidden_sizes) + 1
        return {
            "layers": [
                {"w": _tolist(head.layers_[f"w{i}"]), "b": _tolist(head.layers_[f"b{i}"])}
                for i in range(n_layers)
            ]
        }
    if name in ("prob_product", "score_sum"):
        return {}
    raise UnsupportedStrategyError(f"cannot serialize strategy {name!r}")


def _head_options(head):
    opts = {"normalize_asv": bool(head.normalize_asv)}
    if head.strategy in ("matrix_linear", "diag_zero", "attention"):
        opts["expansion"] = head.expansion
    if head.strategy == "conv":
        opts["channels"] = int(head.channels)
    if head.strategy == "concat":
        opts["hidden_sizes"] = [int(s) for s in head.hidden_sizes]
    if head.strategy == "score_sum":
        opts["minmax_normalize"] = bool(head.minmax_normalize)
    return opts


def save_model(head, path):
    cm = getattr(head, "cm_model_", None)
    doc = {
        "format_version": FORMAT_VERSION,
        "strategy": head.strategy,
        "dim": int(head.dim_),
        "flatten_order": "row-major",
        "options": _head_options(head),
        "cm": None,
        "head": _head_params(head),
    }
    if cm is not None:
        doc["cm"] = {
            "w0": _tolist(cm.w0_),
            "w1": _tolist(cm.w1_),
            "assist_weight": _tolist(cm.assist_weight_) if hasattr(cm, "assist_weight_") else None,
            "assist_bias": _tolist(cm.assist_bias_) if hasattr(cm, "assist_bias_") else None,
        }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != FORMAT_VERSION:
        raise UnsupportedStrategyError(f"unsupported model format version {doc.get('format_version')!r}")
    strategy = doc["strategy"]
    if strategy not in STRATEGIES:
        raise UnsupportedStrategyError(f"unknown strategy {strategy!r} in model file")
    if doc.get("flatten_order") != "row-major":
        raise UnsupportedStrategyError(f"unsupported flatten order {doc.get('flatten_order')!r}")
    dim = int(doc["dim"])
    opts = dict(doc.get("options", {}))

    cm = None
    if doc.get("cm") is not None:
        blob = doc["cm"]
        cm = CountermeasureClassifier.from_arrays(
            blob["w0"],
            blob["w1"],
            assist_weight=blob.get("assist_weight"),
            assist_bias=blob.get("assist_bias"),
        )

    kwargs = {"normalize_asv": opts.get("normalize_asv", True)}
    if strategy in ("matrix_linear", "diag_zero", "attention"):
        kwargs["expansion"] = opts.get("expansion", "matrix")
    if strategy == "conv":
        kwargs["channels"] = int(opts.get("channels", 8))
    if strategy == "concat":
        kwargs["hidden_sizes"] = tuple(int(s) for s in opts.get("hidden_sizes", (256, 128, 64)))
    if strategy == "score_sum":
        kwargs["minmax_normalize"] = bool(opts.get("minmax_normalize", False))
    head = make_head(strategy, cm_model=cm, **kwargs)

    head.cm_model_ = cm
    head.dim_ = dim
    head.n_features_in_ = 3 * dim
    head.classes_ = np.array([0, 1])
    params = doc["head"]
    if strategy in ("matrix_linear", "diag_zero"):
        head.weights_ = np.asarray(params["w"], dtype=np.float64)
        head.bias_ = float(params["b"])
    elif strategy == "attention":
        head.gate_u1_ = np.asarray(params["u1"], dtype=np.float64)
        head.gate_b1_ = float(params["b1"])
        head.gate_u2_ = np.asarray(params["u2"], dtype=np.float64)
        head.gate_b2_ = float(params["b2"])
        head.weights_ = np.asarray(params["w"], dtype=np.float64)
        head.bias_ = float(params["b"])
    elif strategy == "conv":
        head.kernel_params_ = {
            "k5": np.asarray(params["k5"], dtype=np.float64),
            "b5": np.asarray(params["b5"], dtype=np.float64),
            "k1": np.asarray(params["k1"], dtype=np.float64),
            "b1": np.float64(params["b1"]),
            "w_out": np.asarray(params["w_out"], dtype=np.float64),
            "b_out": np.float64(params["b_out"]),
        }
    elif strategy == "concat":
        layers = {}
        for i, layer in enumerate(params["layers"]):
            layers[f"w{i}"] = np.asarray(layer["w"], dtype=np.float64)
            layers[f"b{i}"] = np.asarray(layer["b"], dtype=np.float64)
        head.layers_ = layers
    return head
