"""Artificial multi-device data with planted outlier devices.

Every device shares one analytic base function of the normalised inputs.
Regular devices add Gaussian noise; outlier devices add one of four offset
patterns of increasing subtlety:

``type1``  constant offset everywhere
``type2``  smooth bump offset inside a random box of the input cube
``type3``  the type-2 bump, switched on per sample with probability ``p1``
``type4``  the type-3 offset times a per-sample amplitude ``a``

Per-sample randomness (noise, the ``p1`` coin, the amplitude) is derived
from a keyed hash of the sample's bytes, so a device's output is a
deterministic function of its input.  That lets the ensemble members
reproduce the generated tables exactly.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

REGULAR = "regular"
OUTLIER_TYPES = ("type1", "type2", "type3", "type4")
LABELS = (REGULAR,) + OUTLIER_TYPES

# devices 21, 26, 20 and 0 carry outlier types 1-4 in the 30-device setup
ARTIFICIAL_ASSIGNMENT = {21: "type1", 26: "type2", 20: "type3", 0: "type4"}


@dataclass(frozen=True)
class BaseFunction:
    """Sum of sinusoids plus a separable quadratic.

    ``f(s) = bias + sum_j amp_j * sin(freq_j . s + phase_j) + linear . s + quadratic . s**2``
    """

    amplitudes: tuple
    frequencies: tuple  # one row of length input_dim per sinusoid
    phases: tuple
    linear: tuple
    quadratic: tuple
    bias: float = 0.0

    @property
    def input_dim(self):
        return len(self.linear)

    def __call__(self, samples):
        s = np.asarray(samples, dtype=float)
        freq = np.asarray(self.frequencies, dtype=float)
        out = np.sin(s @ freq.T + np.asarray(self.phases)) @ np.asarray(self.amplitudes)
        out = out + s @ np.asarray(self.linear) + (s * s) @ np.asarray(self.quadratic)
        return out + self.bias

    def lipschitz_bound(self):
        """Upper bound on the Euclidean Lipschitz constant over the cube."""
        freq = np.asarray(self.frequencies, dtype=float)
        amp = np.abs(np.asarray(self.amplitudes))
        return float(
            amp @ np.linalg.norm(freq, axis=1)
            + np.linalg.norm(self.linear)
            + 2 * np.linalg.norm(self.quadratic)
        )

    def to_dict(self):
        return {
            "amplitudes": list(self.amplitudes),
            "frequencies": [list(r) for r in self.frequencies],
            "phases": list(self.phases),
            "linear": list(self.linear),
            "quadratic": list(self.quadratic),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            amplitudes=tuple(float(v) for v in d["amplitudes"]),
            frequencies=tuple(tuple(float(v) for v in r) for r in d["frequencies"]),
            phases=tuple(float(v) for v in d["phases"]),
            linear=tuple(float(v) for v in d["linear"]),
            quadratic=tuple(float(v) for v in d["quadratic"]),
            bias=float(d.get("bias", 0.0)),
        )


def default_base(input_dim=2):
    """Fixed base function; ``|f| <= 1.5`` on the whole cube by construction."""
    if input_dim == 2:
        return BaseFunction(
            amplitudes=(0.45, 0.3, 0.15),
            frequencies=((2.0, 1.0), (-1.0, 2.5), (3.0, -1.5)),
            phases=(0.3, 1.1, -0.4),
            linear=(0.15, -0.1),
            quadratic=(0.1, -0.15),
        )
    rng = np.random.default_rng(20211)
    n_terms = 3
    amp = np.array([0.45, 0.3, 0.15])
    freq = rng.uniform(1.0, 3.0, (n_terms, input_dim)) * rng.choice([-1, 1], (n_terms, input_dim))
    freq /= np.sqrt(input_dim)
    lin = rng.uniform(-1, 1, input_dim)
    lin *= 0.25 / np.abs(lin).sum()
    quad = rng.uniform(-1, 1, input_dim)
    quad *= 0.25 / np.abs(quad).sum()
    return BaseFunction(
        amplitudes=tuple(amp),
        frequencies=tuple(tuple(r) for r in freq),
        phases=tuple(rng.uniform(-np.pi, np.pi, n_terms)),
        linear=tuple(lin),
        quadratic=tuple(quad),
    )


@dataclass(frozen=True)
class OffsetArea:
    """Axis-aligned box ``[lower, upper]`` in the normalised input cube."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, dtype=float), np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("area bounds must be 1-D and of equal length")
        if not np.all(lo < hi):
            raise ValueError("area needs lower < upper in every dimension")
        if np.any(lo < -1) or np.any(hi > 1):
            raise ValueError("area must lie inside [-1, 1]")

    @property
    def center(self):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return lo + (hi - lo) / 2

    def contains(self, samples):
        """Strict interior membership, one bool per sample."""
        s = np.atleast_2d(np.asarray(samples, dtype=float))
        return np.all((s > np.asarray(self.lower)) & (s < np.asarray(self.upper)), axis=1)

    def to_dict(self):
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(float(v) for v in d["lower"]), tuple(float(v) for v in d["upper"]))


def sample_area(rng, input_dim, width_range=(0.3, 0.8)):
    """Random box whose width per dimension is a fraction of the range [-1, 1]."""
    width = 2.0 * rng.uniform(*width_range, size=input_dim)
    lower = rng.uniform(-1.0, 1.0 - width)
    upper = np.minimum(lower + width, 1.0)
    return OffsetArea(tuple(lower), tuple(upper))


def _profile(u, tau):
    # normal density shifted/scaled to 1 at u=0 and 0 at |u|=1
    floor = np.exp(-0.5 / tau**2)
    return (np.exp(-0.5 * (u / tau) ** 2) - floor) / (1.0 - floor)


def smooth_offset(area, samples, tau=0.4):
    """Bump that is -1 at the area centre and 0 on and outside its boundary.

    Built as a product over dimensions of a truncated Gaussian profile of
    width ``tau`` (in units of the half-width of the box).
    """
    s = np.asarray(samples, dtype=float)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    lo, hi = np.asarray(area.lower), np.asarray(area.upper)
    half = (hi - lo) / 2
    u = (s - area.center) / half
    bump = np.prod(_profile(np.clip(u, -1.0, 1.0), tau), axis=1)
    out = np.where(area.contains(s), -bump, 0.0)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for an artificial dataset.

    ``outlier_assignment`` holds one label per device.  Outlier devices get
    no Gaussian noise unless ``outlier_noise`` is set.
    """

    n_devices: int = 30
    samples_per_device: int = 10_000
    outlier_assignment: tuple = None
    input_dim: int = 2
    noise_sigma: float = 0.1
    p1: float = 0.3
    scale_range: tuple = (-1.0, 1.0)
    constant_offset: float = -1.0
    area_width_range: tuple = (0.3, 0.8)
    profile_tau: float = 0.4
    outlier_noise: bool = False
    seed: int = 0
    base: BaseFunction = None

    def __post_init__(self):
        if self.base is None:
            object.__setattr__(self, "base", default_base(self.input_dim))
        if self.outlier_assignment is None:
            raise ValueError("outlier_assignment is required")
        assignment = self.outlier_assignment
        if isinstance(assignment, dict):
            assignment = assignment_from_map(assignment, self.n_devices)
        object.__setattr__(self, "outlier_assignment", tuple(assignment))
        if self.n_devices < 2:
            raise ValueError(f"n_devices must be >= 2, got {self.n_devices}")
        if self.samples_per_device < 1:
            raise ValueError("samples_per_device must be >= 1")
        if len(self.outlier_assignment) != self.n_devices:
            raise ValueError(
                f"outlier_assignment has {len(self.outlier_assignment)} entries "
                f"for {self.n_devices} devices"
            )
        bad = [lab for lab in self.outlier_assignment if lab not in LABELS]
        if bad:
            raise ValueError(f"unknown outlier labels {sorted(set(bad))}; expected one of {LABELS}")
        if not 0.0 <= self.p1 <= 1.0:
            raise ValueError(f"p1 must be a probability, got {self.p1}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.scale_range[0] > self.scale_range[1]:
            raise ValueError("scale_range lower bound exceeds upper bound")
        if self.base.input_dim != self.input_dim:
            raise ValueError("base function dimension does not match input_dim")

    def to_dict(self):
        return {
            "n_devices": self.n_devices,
            "samples_per_device": self.samples_per_device,
            "outlier_assignment": list(self.outlier_assignment),
            "input_dim": self.input_dim,
            "noise_sigma": self.noise_sigma,
            "p1": self.p1,
            "scale_range": list(self.scale_range),
            "constant_offset": self.constant_offset,
            "area_width_range": list(self.area_width_range),
            "profile_tau": self.profile_tau,
            "outlier_noise": self.outlier_noise,
            "seed": self.seed,
            "base": self.base.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "outlier_assignment" not in d:
            raise ValueError("config is missing 'outlier_assignment'")
        assignment = d.pop("outlier_assignment")
        if isinstance(assignment, dict):
            assignment = {int(k): v for k, v in assignment.items()}
        base = d.pop("base", None)
        for key in ("scale_range", "area_width_range"):
            if key in d:
                d[key] = tuple(d[key])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synth config keys {sorted(unknown)}")
        return cls(
            outlier_assignment=assignment,
            base=BaseFunction.from_dict(base) if base is not None else None,
            **d,
        )


def assignment_from_map(mapping, n_devices):
    """Expand ``{device: label}`` to a full label tuple; unlisted devices are regular."""
    labels = [REGULAR] * n_devices
    for dev, lab in mapping.items():
        if not 0 <= int(dev) < n_devices:
            raise ValueError(f"outlier assignment names device {dev}, outside [0, {n_devices})")
        labels[int(dev)] = lab
    return tuple(labels)


def artificial_config(**overrides):
    """30 devices, 10k samples each, one outlier of each type."""
    kw = dict(n_devices=30, samples_per_device=10_000, outlier_assignment=ARTIFICIAL_ASSIGNMENT)
    kw.update(overrides)
    return SynthConfig(**kw)


# -- keyed per-sample randomness ---------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def keyed_uniform(samples, key, stream):
    """Uniform(0, 1) value per sample from a hash of its bytes, ``key`` and ``stream``."""
    s = np.ascontiguousarray(np.atleast_2d(samples), dtype=np.float64)
    bits = s.view(np.uint64)
    h = np.full(s.shape[0], key, dtype=np.uint64)
    salt = np.uint64(((stream + 1) * 0x9E3779B97F4A7C15) % 2**64)
    h = _splitmix(h ^ salt)
    for j in range(bits.shape[1]):
        h = _splitmix(h ^ bits[:, j])
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


@dataclass
class OffsetDraws:
    """Per-sample random quantities used by :func:`device_outputs`."""

    noise: np.ndarray  # standard normal
    coin: np.ndarray  # uniform(0, 1), offset active when below p1
    scale: np.ndarray  # uniform(0, 1), mapped onto scale_range

    @classmethod
    def keyed(cls, samples, key):
        return cls(
            noise=ndtri(keyed_uniform(samples, key, 0)),
            coin=keyed_uniform(samples, key, 1),
            scale=keyed_uniform(samples, key, 2),
        )

    @classmethod
    def from_rng(cls, rng, n):
        return cls(noise=rng.standard_normal(n), coin=rng.random(n), scale=rng.random(n))


def device_outputs(label, samples, config, area=None, draws=None, noise=True):
    """Outputs of a device of type ``label`` at ``samples`` (shape ``(m, d)``).

    ``noise=False`` drops the Gaussian term, giving the noise-free device
    function used as an ensemble member.
    """
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    base = config.base(s)
    if draws is None:
        draws = OffsetDraws(np.zeros(len(s)), np.ones(len(s)), np.full(len(s), 0.5))
    add_noise = noise and (label == REGULAR or config.outlier_noise)
    eps = config.noise_sigma * draws.noise if add_noise else 0.0

    if label == REGULAR:
        return base + eps
    if label == "type1":
        return base + config.constant_offset + eps
    if area is None:
        raise ValueError(f"{label} device needs an offset area")
    bump = smooth_offset(area, s, config.profile_tau)
    if label == "type2":
        return base + bump + eps
    gated = np.where(draws.coin < config.p1, bump, 0.0)
    if label == "type3":
        return base + gated + eps
    if label == "type4":
        lo, hi = config.scale_range
        a = lo + (hi - lo) * draws.scale
        return base + a * gated + eps
    raise ValueError(f"unknown outlier label {label!r}")


def device_output(label, s, rng, config, area=None):
    """Single-sample output, drawing the random terms from ``rng``."""
    draws = OffsetDraws.from_rng(rng, 1)
    return float(device_outputs(label, np.asarray(s)[None, :], config, area, draws)[0])


@dataclass
class DeviceTable:
    device_id: int
    samples: np.ndarray
    outputs: np.ndarray
    label: str = None
    area: OffsetArea = None
    key: int = None

    def __post_init__(self):
        if len(self.samples) != len(self.outputs):
            raise ValueError(
                f"device {self.device_id}: {len(self.samples)} samples but {len(self.outputs)} outputs"
            )


@dataclass
class Dataset:
    devices: list
    config: SynthConfig = None
    feature_names: list = field(default_factory=list)
    n_clamped: int = 0

    @property
    def n_devices(self):
        return len(self.devices)

    @property
    def input_dim(self):
        return self.devices[0].samples.shape[1]

    @property
    def labels(self):
        return [d.label for d in self.devices]

    def pooled_samples(self):
        """All devices' samples stacked, in device order."""
        return np.concatenate([d.samples for d in self.devices])


def _device_streams(seed, device_id):
    ss = np.random.SeedSequence(seed, spawn_key=(device_id,))
    sample_ss, area_ss, key_ss = ss.spawn(3)
    key = int(key_ss.generate_state(1, np.uint64)[0])
    return np.random.default_rng(sample_ss), np.random.default_rng(area_ss), key


def generate_dataset(config):
    """Draw inputs uniformly over the cube and evaluate every device on its own inputs."""
    devices = []
    for i, label in enumerate(config.outlier_assignment):
        sample_rng, area_rng, key = _device_streams(config.seed, i)
        samples = sample_rng.uniform(-1.0, 1.0, (config.samples_per_device, config.input_dim))
        area = None
        if label in ("type2", "type3", "type4"):
            area = sample_area(area_rng, config.input_dim, config.area_width_range)
        outputs = device_outputs(label, samples, config, area, OffsetDraws.keyed(samples, key))
        devices.append(DeviceTable(i, samples, outputs, label, area, key))
    names = [f"x{j}" for j in range(config.input_dim)]
    return Dataset(devices, config, names)
