"""Fixed per-device ensemble members and best/worst-case selection."""

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ndtri

from . import synthgen

SOFT_MIN = "soft_min"
SOFT_MAX = "soft_max"
MODES = (SOFT_MIN, SOFT_MAX)

#: Standard deviation of the per-member model error of synthetic members.
DEFAULT_MEMBER_ERROR = 0.01
# keyed-hash stream reserved for member error (0-2 drive the device tables)
_ERROR_STREAM = 3

_MODE_ALIASES = {"min": SOFT_MIN, "max": SOFT_MAX, SOFT_MIN: SOFT_MIN, SOFT_MAX: SOFT_MAX}


def parse_mode(mode):
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}; expected min or max") from None


class EnsembleMember:
    """A device model: a deterministic map from samples ``(m, d)`` to outputs ``(m,)``."""

    def __init__(self, device_id, fn):
        self.device_id = device_id
        self._fn = fn

    def __call__(self, samples):
        return np.asarray(self._fn(np.atleast_2d(samples)), dtype=float)

    def __repr__(self):
        return f"{type(self).__name__}(device_id={self.device_id!r})"


class SyntheticMember(EnsembleMember):
    """Generator device function standing in for a fitted device model.

    The output is the device's noise-free function plus a model error of
    standard deviation ``error``, keyed on the sample so the member stays
    deterministic.  Without that error all regular members would coincide
    exactly and selection among them would reduce to the index tie-break.

    With ``noise=True`` the device's Gaussian term is kept as well, so an
    ``error=0`` member reproduces its generated table exactly.
    """

    def __init__(self, table, config, error=DEFAULT_MEMBER_ERROR, noise=False):
        if error < 0:
            raise ValueError("member error must be non-negative")
        self.label = table.label
        self.area = table.area
        self.key = table.key
        self.config = config
        self.error = error
        self.noise = noise
        super().__init__(table.device_id, self._evaluate)

    def _evaluate(self, samples):
        draws = synthgen.OffsetDraws.keyed(samples, self.key)
        y = synthgen.device_outputs(
            self.label, samples, self.config, self.area, draws, noise=self.noise
        )
        if self.error:
            y = y + self.error * ndtri(synthgen.keyed_uniform(samples, self.key, _ERROR_STREAM))
        return y


class TableMember(EnsembleMember):
    """Nearest-sample lookup over a device table."""

    def __init__(self, device_id, samples, outputs):
        samples = np.asarray(samples, dtype=float)
        outputs = np.asarray(outputs, dtype=float)
        if len(samples) == 0 or len(samples) != len(outputs):
            raise ValueError(f"device {device_id}: table must be non-empty and aligned")
        self._tree = cKDTree(samples)
        self._outputs = outputs
        super().__init__(device_id, self._lookup)

    def _lookup(self, samples):
        _, idx = self._tree.query(samples)
        return self._outputs[idx]


def synthetic_members(dataset, error=DEFAULT_MEMBER_ERROR, noise=False):
    return [SyntheticMember(t, dataset.config, error, noise) for t in dataset.devices]


def table_members(dataset):
    return [TableMember(t.device_id, t.samples, t.outputs) for t in dataset.devices]


def predict_ensemble(members, samples):
    """Member outputs, shape ``(m, N)`` for a batch or ``(N,)`` for one sample."""
    if not members:
        raise ValueError("ensemble has no members")
    s = np.asarray(samples, dtype=float)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    cols = []
    for member in members:
        try:
            y = member(s)
        except Exception as exc:
            raise ValueError(f"member {member.device_id} failed: {exc}") from exc
        if y.shape != (len(s),):
            raise ValueError(f"member {member.device_id} returned shape {y.shape}, expected ({len(s)},)")
        cols.append(y)
    out = np.stack(cols, axis=1)
    return out[0] if single else out


def select_k(y_out, k_s, mode=SOFT_MIN):
    """Indices and values of the ``k_s`` smallest (soft_min) or largest (soft_max) outputs.

    Values come back ascending for soft_min, descending for soft_max.  Ties
    go to the lower device index.  Accepts one output vector or a stack of
    them (one per row); the result has matching rank.
    """
    mode = parse_mode(mode)
    y = np.asarray(y_out, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    n = y.shape[1]
    if int(k_s) != k_s or not 1 <= k_s <= n:
        raise ValueError(f"k_s must be an integer in [1, {n}], got {k_s}")
    key = y if mode == SOFT_MIN else -y
    # stable sort keeps equal values in index order
    idx = np.argsort(key, axis=1, kind="stable")[:, :k_s]
    vals = np.take_along_axis(y, idx, axis=1)
    if single:
        return idx[0], vals[0]
    return idx, vals
