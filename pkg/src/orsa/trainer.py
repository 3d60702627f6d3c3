"""Outlier-robust stacked aggregation: selection, LOF weighting, training loop.

For every sample the member outputs are ranked, the ``k_s`` worst (or best)
are kept, and each kept member is weighted by its reciprocal LOF score
(computed over all ``N`` outputs of that sample, then renormalised over the
selection).  The network is trained on the weighted squared error

    L = sum_i w_i * (y_i - y_pred)**2

whose per-sample minimiser is the weighted mean ``sum_i w_i * y_i``.  The
weights never depend on the network, so selections, weights and targets
are computed once per sample and cached.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import aggnet
from .ensemble import SOFT_MIN, parse_mode, predict_ensemble, select_k
from .lof import lof_scores_batch, lof_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OrsaConfig:
    k_s: int
    k_lof: int
    mode: str = SOFT_MIN
    batch_size: int = 64
    steps: int = 25_000
    seed: int = 0
    metric_window: int = 5_000
    step_size: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "mode", parse_mode(self.mode))
        if self.k_s < 1 or self.k_lof < 1:
            raise ValueError(f"k_s and k_lof must be >= 1 (got {self.k_s}, {self.k_lof})")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.metric_window < 1:
            raise ValueError("metric_window must be >= 1")

    def check_devices(self, n_devices):
        """Reject ``k`` values that do not fit an ensemble of ``n_devices``."""
        if not self.k_s <= n_devices:
            raise ValueError(f"k_s={self.k_s} exceeds the number of devices ({n_devices})")
        if not self.k_lof <= n_devices - 1:
            raise ValueError(f"k_lof={self.k_lof} must be at most n_devices - 1 = {n_devices - 1}")

    def to_dict(self):
        return {
            "k_s": self.k_s,
            "k_lof": self.k_lof,
            "mode": self.mode,
            "batch_size": self.batch_size,
            "steps": self.steps,
            "seed": self.seed,
            "metric_window": self.metric_window,
            "step_size": self.step_size,
        }


def orsa_loss(y_pred, selected_values, weights):
    """Weighted squared error of ``y_pred`` against the selected member outputs.

    Broadcasts over leading axes: with ``(m, k)`` values and weights and
    ``(m,)`` predictions it returns one loss per sample.
    """
    values = np.asarray(selected_values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ValueError(f"values {values.shape} and weights {weights.shape} differ in shape")
    resid = values - np.asarray(y_pred, dtype=float)[..., None]
    return (weights * resid**2).sum(axis=-1)


def orsa_loss_grad(y_pred, selected_values, weights):
    """Derivative of :func:`orsa_loss` in ``y_pred``; the weights are constants."""
    values = np.asarray(selected_values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ValueError(f"values {values.shape} and weights {weights.shape} differ in shape")
    return 2.0 * (weights * (np.asarray(y_pred, dtype=float)[..., None] - values)).sum(axis=-1)


@dataclass
class SampleTargets:
    """Per-sample selection, weights and weighted-mean target."""

    indices: np.ndarray  # (m, k_s) member indices
    values: np.ndarray  # (m, k_s) member outputs
    weights: np.ndarray  # (m, k_s), rows sum to one
    target: np.ndarray  # (m,)
    n_devices: int

    def __len__(self):
        return len(self.target)

    def take(self, rows):
        return SampleTargets(
            self.indices[rows], self.values[rows], self.weights[rows], self.target[rows], self.n_devices
        )

    def weight_matrix(self):
        """Device x sample matrix of weights, zero where a device was not selected."""
        m = len(self)
        out = np.zeros((self.n_devices, m))
        out[self.indices, np.arange(m)[:, None]] = self.weights
        return out


def compute_targets(y_out, config):
    """Selection, weights and oracle target for a stack of member-output vectors.

    ``y_out`` has shape ``(m, N)``.  LOF is computed over all ``N`` outputs
    of each row, then the reciprocal scores of the selected members are
    renormalised to sum to one.
    """
    y_out = np.atleast_2d(np.asarray(y_out, dtype=float))
    n = y_out.shape[1]
    config.check_devices(n)
    idx, vals = select_k(y_out, config.k_s, config.mode)
    scores = lof_scores_batch(y_out, config.k_lof)
    w = lof_weights(scores, idx)
    return SampleTargets(idx, vals, w, (w * vals).sum(axis=1), n)


def oracle_target(y_out, config):
    """Minimiser of the weighted loss for one member-output vector."""
    y_out = np.asarray(y_out, dtype=float)
    if y_out.ndim != 1:
        raise ValueError("oracle_target takes a single output vector; use compute_targets for batches")
    return float(compute_targets(y_out[None, :], config).target[0])


def sample_targets(members, samples, config):
    return compute_targets(predict_ensemble(members, np.atleast_2d(samples)), config)


@dataclass
class StepRecord:
    loss: float
    selection: np.ndarray  # (N,) selection counts in this batch
    weighted: np.ndarray  # (N,) batch-mean weighted loss contribution
    equal: np.ndarray  # (N,) batch-mean contribution with w_i = 1/k_s


def _step_record(y_pred, targets):
    n = targets.n_devices
    m, k = targets.indices.shape
    sq = (targets.values - y_pred[:, None]) ** 2
    flat = targets.indices.ravel()
    selection = np.bincount(flat, minlength=n)
    weighted = np.bincount(flat, weights=(targets.weights * sq).ravel(), minlength=n) / m
    equal = np.bincount(flat, weights=sq.ravel(), minlength=n) / (k * m)
    return StepRecord(float(weighted.sum()), selection, weighted, equal)


def train_step(params, opt_state, batch, targets, config):
    """One optimiser update on a batch.

    ``targets`` holds the cached selection and weights for the batch rows
    (see :func:`sample_targets`).  The batch loss is the mean of the
    per-sample weighted losses.  Returns ``(params, opt_state, record)``.
    """
    batch = np.atleast_2d(batch)
    if len(batch) == 0:
        raise ValueError("empty batch")
    if len(targets) != len(batch):
        raise ValueError(f"{len(targets)} targets for a batch of {len(batch)}")
    y_pred, cache = aggnet.forward(params, batch, return_cache=True)
    upstream = orsa_loss_grad(y_pred, targets.values, targets.weights) / len(batch)
    grads = aggnet.backward(params, batch, upstream, cache)
    params, opt_state = aggnet.adam_update(params, grads, opt_state, config.step_size)
    return params, opt_state, _step_record(y_pred, targets)


@dataclass
class RunMetrics:
    """Per-step training records.

    ``selection``, ``weighted`` and ``equal`` have one row per step and one
    column per device.  ``heatmap`` is the device x sample weight matrix of
    the final step's batch, whose pooled row indices are ``heatmap_rows``.
    """

    loss: np.ndarray
    selection: np.ndarray
    weighted: np.ndarray
    equal: np.ndarray
    batch_size: int
    k_s: int
    heatmap: np.ndarray = None
    heatmap_rows: np.ndarray = None

    @property
    def steps(self):
        return len(self.loss)

    @property
    def n_devices(self):
        return self.selection.shape[1]

    def window_slice(self, window, stop=None):
        stop = self.steps if stop is None else stop
        if not 1 <= window <= stop <= self.steps:
            raise ValueError(
                f"window of {window} steps ending at {stop} does not fit {self.steps} recorded steps"
            )
        return slice(stop - window, stop)


def train(members, samples, config, net_config=None, targets=None, progress_every=0):
    """Fit the aggregation network on the pooled samples.

    Batches are drawn uniformly with replacement from ``samples`` (every
    device's inputs stacked).  Per-sample targets are computed once up
    front unless supplied.  Deterministic in ``config.seed`` and
    ``net_config.init_seed``.

    Returns ``(params, RunMetrics)``.
    """
    if hasattr(samples, "pooled_samples"):
        samples = samples.pooled_samples()
    samples = np.asarray(samples, dtype=float)
    config.check_devices(len(members))
    if net_config is None:
        net_config = aggnet.NetConfig(samples.shape[1], init_seed=config.seed)
    if net_config.input_dim != samples.shape[1]:
        raise ValueError(
            f"network expects {net_config.input_dim} features, samples have {samples.shape[1]}"
        )
    if targets is None:
        targets = sample_targets(members, samples, config)

    params = aggnet.init(net_config)
    state = aggnet.adam_init(params)
    rng = np.random.default_rng(config.seed)
    n, b = len(members), config.batch_size
    loss = np.empty(config.steps)
    selection = np.empty((config.steps, n), dtype=np.int64)
    weighted = np.empty((config.steps, n))
    equal = np.empty((config.steps, n))
    rows = None
    for step in range(config.steps):
        rows = rng.integers(0, len(samples), b)
        params, state, rec = train_step(params, state, samples[rows], targets.take(rows), config)
        loss[step] = rec.loss
        selection[step] = rec.selection
        weighted[step] = rec.weighted
        equal[step] = rec.equal
        if progress_every and (step + 1) % progress_every == 0:
            log.info("step %d loss %.6g", step + 1, loss[max(0, step - progress_every + 1):step + 1].mean())

    metrics = RunMetrics(
        loss, selection, weighted, equal, b, config.k_s,
        heatmap=targets.take(rows).weight_matrix(), heatmap_rows=rows,
    )
    return params, metrics


def selection_frequency(metrics, window=None, stop=None):
    """Per-device count of (sample, step) selections over the trailing ``window`` steps."""
    sl = metrics.window_slice(window or metrics.steps, stop)
    return metrics.selection[sl].sum(axis=0)


def loss_contributions(metrics, window=None, stop=None):
    """Per-device ``(weighted, equal)`` loss totals over the window.

    Each step contributes its batch-mean value, so summing ``weighted``
    over devices gives the summed loss trace over the same steps.
    """
    sl = metrics.window_slice(window or metrics.steps, stop)
    return metrics.weighted[sl].sum(axis=0), metrics.equal[sl].sum(axis=0)


def weight_heatmap(members, batch, config):
    """Device x sample weight matrix for a batch; columns sum to one."""
    return sample_targets(members, batch, config).weight_matrix()


def smoothed_loss(metrics, window=500):
    """Mean loss over consecutive non-overlapping windows of ``window`` steps."""
    n = metrics.steps // window
    if n == 0:
        raise ValueError(f"fewer than {window} recorded steps")
    return metrics.loss[: n * window].reshape(n, window).mean(axis=1)
