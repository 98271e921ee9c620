"""The potential network: a small MLP mapping features to one scalar.

Hidden layers use a leaky rectifier (slope 0.01), the output is linear and
unconstrained.  Gradients are exact and analytic; the optimizer is
bias-corrected Adam.  Double precision throughout so finite-difference
checks hold tightly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureConfig, NormStats, features_for_samples

LEAKY_SLOPE = 0.01
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
MODEL_FORMAT_VERSION = 1


@dataclass
class PotentialModel:
    layer_dims: list[int]
    weights: list[np.ndarray]  # per layer, shape (fan_out, fan_in)
    biases: list[np.ndarray]  # per layer, shape (fan_out,)
    norm_stats: NormStats
    feature_config: FeatureConfig | None = None
    anchor_map: object | None = None  # anchor.AnchorMap once calibrated

    def __post_init__(self):
        if self.layer_dims[-1] != 1:
            raise ValueError("output dimension must be exactly 1")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_dims[k + 1], self.layer_dims[k]):
                raise ValueError(f"layer {k}: weight shape {w.shape} breaks dimension chain")
            if b.shape != (self.layer_dims[k + 1],):
                raise ValueError(f"layer {k}: bias shape {b.shape} breaks dimension chain")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def parameters(self) -> list[np.ndarray]:
        """Flat view [W0, b0, W1, b1, ...]; mutating entries mutates the model."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_model(
    layer_dims: list[int],
    seed: int,
    norm_stats: NormStats | None = None,
    feature_config: FeatureConfig | None = None,
) -> PotentialModel:
    """Seeded uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    if len(layer_dims) < 2:
        raise ValueError("need at least input and output dims")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    if norm_stats is None:
        norm_stats = NormStats.identity(layer_dims[0])
    return PotentialModel(
        layer_dims=list(layer_dims),
        weights=weights,
        biases=biases,
        norm_stats=norm_stats,
        feature_config=feature_config,
    )


def forward_batch(model: PotentialModel, matrix: np.ndarray):
    """Potentials for a batch of raw feature rows.

    Returns (values (n,), trace); the trace carries the activations needed
    by backward_batch.
    """
    x = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if x.shape[1] != model.input_dim:
        raise ValueError(f"expected {model.input_dim} features, got {x.shape[1]}")
    a = (x - model.norm_stats.mean) / model.norm_stats.std
    activations = [a]
    pre_acts = []
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pre_acts.append(z)
        a = z if k == last else np.where(z > 0, z, LEAKY_SLOPE * z)
        activations.append(a)
    return activations[-1][:, 0], (activations, pre_acts)


def forward(model: PotentialModel, features: np.ndarray) -> float:
    values, _ = forward_batch(model, np.asarray(features, dtype=np.float64)[None, :])
    return float(values[0])


def backward_batch(model: PotentialModel, trace, upstream: np.ndarray) -> list[np.ndarray]:
    """Gradients of sum_n upstream_n * v_n, in parameters() order."""
    activations, pre_acts = trace
    up = np.asarray(upstream, dtype=np.float64)
    delta = up[:, None]  # output layer is identity
    grads: list[np.ndarray] = [None] * (2 * len(model.weights))
    for k in range(len(model.weights) - 1, -1, -1):
        grads[2 * k] = delta.T @ activations[k]
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            da = delta @ model.weights[k]
            z = pre_acts[k - 1]
            delta = da * np.where(z > 0, 1.0, LEAKY_SLOPE)
    return grads


def potentials_for_samples(model: PotentialModel, samples) -> dict[str, float]:
    """Potential per image id, one batched pass; extracts features if needed."""
    fc = model.feature_config if model.feature_config is not None else FeatureConfig()
    feats = features_for_samples(samples, fc)
    ids = sorted(feats)
    values, _ = forward_batch(model, np.stack([feats[sid] for sid in ids]))
    return {sid: float(v) for sid, v in zip(ids, values)}


def backward(model: PotentialModel, features: np.ndarray, upstream: float) -> list[np.ndarray]:
    """Exact gradient of upstream * forward(model, features)."""
    _, trace = forward_batch(model, np.asarray(features, dtype=np.float64)[None, :])
    return backward_batch(model, trace, np.array([upstream]))


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update, in place; returns (params, state)."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    state.t += 1
    correction1 = 1.0 - ADAM_BETA1**state.t
    correction2 = 1.0 - ADAM_BETA2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * np.square(g)
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPS)
    return params, state


# ---------------------------------------------------------------------------
# Model file: one self-describing JSON document, decimal round-trip exact.

def _model_document(model: PotentialModel) -> dict:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_dims": list(model.layer_dims),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "activation": {"hidden": "leaky_relu", "slope": LEAKY_SLOPE, "output": "identity"},
        "norm_stats": {
            "mean": model.norm_stats.mean.tolist(),
            "std": model.norm_stats.std.tolist(),
        },
        "feature_config": None,
        "anchor_map": None,
    }
    if model.feature_config is not None:
        doc["feature_config"] = {
            "grid": model.feature_config.grid,
            "localmax_threshold": model.feature_config.localmax_threshold,
        }
    if model.anchor_map is not None:
        doc["anchor_map"] = {
            "slope": model.anchor_map.slope,
            "intercept": model.anchor_map.intercept,
        }
    return doc


def save_model(model: PotentialModel, path) -> None:
    text = json.dumps(_model_document(model), indent=2, sort_keys=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def load_model(path) -> PotentialModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    feature_config = None
    if doc.get("feature_config") is not None:
        fc = doc["feature_config"]
        feature_config = FeatureConfig(
            grid=int(fc["grid"]), localmax_threshold=float(fc["localmax_threshold"])
        )
    anchor_map = None
    if doc.get("anchor_map") is not None:
        from .anchor import AnchorMap  # deferred: anchor builds on this module

        am = doc["anchor_map"]
        anchor_map = AnchorMap(slope=float(am["slope"]), intercept=float(am["intercept"]))
    return PotentialModel(
        layer_dims=[int(d) for d in doc["layer_dims"]],
        weights=[np.array(w, dtype=np.float64) for w in doc["weights"]],
        biases=[np.array(b, dtype=np.float64) for b in doc["biases"]],
        norm_stats=NormStats(
            mean=np.array(doc["norm_stats"]["mean"], dtype=np.float64),
            std=np.array(doc["norm_stats"]["std"], dtype=np.float64),
        ),
        feature_config=feature_config,
        anchor_map=anchor_map,
    )
