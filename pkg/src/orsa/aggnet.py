"""Feedforward aggregation network: ReLU hidden layers, linear scalar output.

Parameters are a list of ``(weight, bias)`` pairs, one per layer, with
``weight`` of shape ``(fan_in, fan_out)``.  Inputs are row-major batches of
shape ``(m, input_dim)``; a single 1-D sample is accepted everywhere and
yields a scalar.
"""

import json
from dataclasses import dataclass

import numpy as np

CHECKPOINT_FORMAT = "orsa-aggnet"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    input_dim: int
    hidden: tuple = (64, 32)
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer widths must be >= 1")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def widths(self):
        return (self.input_dim,) + self.hidden + (1,)

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "activation": self.activation,
            "init_seed": self.init_seed,
        }


def init(config):
    """He-uniform weights (bound ``sqrt(6 / fan_in)``), zero biases."""
    rng = np.random.default_rng(config.init_seed)
    widths = config.widths
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / fan_in)
        params.append((rng.uniform(-bound, bound, (fan_in, fan_out)), np.zeros(fan_out)))
    return params


def _as_batch(params, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != params[0][0].shape[0]:
        raise ValueError(f"input has {x.shape[1]} features, network expects {params[0][0].shape[0]}")
    return x, single


def forward(params, x, return_cache=False):
    """Network output for a sample or a batch.

    With ``return_cache`` the per-layer inputs and pre-activations are
    returned too, for reuse by :func:`backward`.
    """
    h, single = _as_batch(params, x)
    inputs, pre = [], []
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
    y = h[:, 0]
    if single:
        y = float(y[0])
    if return_cache:
        return y, (inputs, pre)
    return y


def backward(params, x, upstream, cache=None):
    """Gradients of ``sum(upstream * forward(params, x))`` for every parameter.

    ``upstream`` is ``dL/dy_pred``, a scalar for a single sample or one
    value per row of a batch.
    """
    xb, _ = _as_batch(params, x)
    if cache is None:
        _, cache = forward(params, xb, return_cache=True)
    inputs, pre = cache
    delta = np.asarray(upstream, dtype=float).reshape(-1, 1)
    if delta.shape[0] != xb.shape[0]:
        raise ValueError(f"upstream has {delta.shape[0]} entries for {xb.shape[0]} samples")
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        w, _ = params[i]
        grads[i] = (inputs[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ w.T) * (pre[i - 1] > 0)
    return grads


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params, beta1=0.9, beta2=0.999, eps=1e-8):
    zeros = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    return AdamState(m=zeros, v=[(z0.copy(), z1.copy()) for z0, z1 in zeros],
                     beta1=beta1, beta2=beta2, eps=eps)


def adam_update(params, grads, state, step_size=1e-3):
    """One bias-corrected Adam step.  Returns new ``(params, state)``; inputs are not modified."""
    if len(grads) != len(params):
        raise ValueError("gradient and parameter layer counts differ")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1 - b1**t, 1 - b2**t
    new_params, new_m, new_v = [], [], []
    for p_layer, g_layer, m_layer, v_layer in zip(params, grads, state.m, state.v):
        p_out, m_out, v_out = [], [], []
        for p, g, m, v in zip(p_layer, g_layer, m_layer, v_layer):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            p_out.append(p - step_size * (m / c1) / (np.sqrt(v / c2) + state.eps))
            m_out.append(m)
            v_out.append(v)
        new_params.append(tuple(p_out))
        new_m.append(tuple(m_out))
        new_v.append(tuple(v_out))
    return new_params, AdamState(new_m, new_v, t, b1, b2, state.eps)


# -- checkpoints --------------------------------------------------------------
#
# JSON document:
#   {"format": "orsa-aggnet", "version": 1, "config": {...NetConfig...},
#    "layers": [{"weight_shape": [fan_in, fan_out], "weight": [row-major floats],
#                "bias": [floats]}, ...]}
# Floats are written with repr precision, so a load reproduces the
# parameters bit for bit.


def save_checkpoint(path, params, config):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "layers": [
            {"weight_shape": list(w.shape), "weight": w.ravel().tolist(), "bias": b.tolist()}
            for w, b in params
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_checkpoint(path):
    """Returns ``(params, NetConfig)``."""
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version {CHECKPOINT_VERSION} {CHECKPOINT_FORMAT} checkpoint")
    c = doc["config"]
    config = NetConfig(c["input_dim"], tuple(c["hidden"]), c["activation"], c["init_seed"])
    params = []
    for layer in doc["layers"]:
        w = np.array(layer["weight"], dtype=float).reshape(layer["weight_shape"])
        params.append((w, np.array(layer["bias"], dtype=float)))
    if [w.shape[1] for w, _ in params] != list(config.widths[1:]):
        raise ValueError(f"{path}: layer shapes disagree with the stored config")
    return params, config
