"""Conversion of raw feature values to normalised samples in [-1, 1]."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FeatureSpec:
    """Schema entry for one input feature.

    Real features carry explicit bounds.  Categorical features are encoded
    by their zero-based position in ``categories`` and normalised over
    ``[0, len(categories) - 1]``.  Metadata features are part of the schema
    but are skipped when samples are built.
    """

    name: str
    kind: str = "real"
    x_min: float = -1.0
    x_max: float = 1.0
    categories: tuple = ()
    metadata: bool = False

    def __post_init__(self):
        if self.kind == "real":
            if not self.x_min < self.x_max:
                raise ValueError(
                    f"feature {self.name!r}: x_min must be below x_max "
                    f"(got {self.x_min}, {self.x_max})"
                )
        elif self.kind == "categorical":
            object.__setattr__(self, "categories", tuple(self.categories))
            if not self.categories:
                raise ValueError(f"feature {self.name!r}: categories must be non-empty")
            if len(set(self.categories)) != len(self.categories):
                raise ValueError(f"feature {self.name!r}: duplicate category labels")
        else:
            raise ValueError(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @property
    def bounds(self):
        if self.kind == "categorical":
            return 0.0, float(len(self.categories) - 1)
        return float(self.x_min), float(self.x_max)

    def to_dict(self):
        d = {"name": self.name, "kind": self.kind}
        if self.kind == "real":
            d.update(x_min=self.x_min, x_max=self.x_max)
        else:
            d["categories"] = list(self.categories)
        if self.metadata:
            d["metadata"] = True
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            name=d["name"],
            kind=d.get("kind", "real"),
            x_min=float(d.get("x_min", -1.0)),
            x_max=float(d.get("x_max", 1.0)),
            categories=tuple(d.get("categories", ())),
            metadata=bool(d.get("metadata", False)),
        )


@dataclass
class NormalizeReport:
    """Bookkeeping from a normalisation pass."""

    n_clamped: int = 0
    clamped_features: dict = field(default_factory=dict)


def encode_mixed(raw_value, spec):
    """Map a raw feature value to a real number (categoricals to their ordinal)."""
    if spec.kind == "real":
        if isinstance(raw_value, str):
            try:
                return float(raw_value)
            except ValueError:
                raise ValueError(
                    f"feature {spec.name!r}: expected a real value, got {raw_value!r}"
                ) from None
        return float(raw_value)
    try:
        return float(spec.categories.index(raw_value))
    except ValueError:
        # CSV round trips turn every label into a string
        labels = [str(c) for c in spec.categories]
        if str(raw_value) in labels:
            return float(labels.index(str(raw_value)))
        raise ValueError(
            f"feature {spec.name!r}: unknown category {raw_value!r}"
        ) from None


def minmax_normalize(x, x_min, x_max):
    """Scale ``x`` from ``[x_min, x_max]`` to ``[-1, 1]``.

    Works element-wise on arrays.  No clamping happens here; see
    :func:`normalize_sample`.
    """
    if not x_min < x_max:
        raise ValueError(f"x_min must be below x_max (got {x_min}, {x_max})")
    return -1.0 + 2.0 * (np.asarray(x, dtype=float) - x_min) / (x_max - x_min)


def denormalize(x_norm, x_min, x_max):
    """Inverse of :func:`minmax_normalize`."""
    return x_min + (np.asarray(x_norm, dtype=float) + 1.0) * (x_max - x_min) / 2.0


def sample_features(specs, include_metadata=False):
    """The specs that contribute a column to the sample vector."""
    return [s for s in specs if include_metadata or not s.metadata]


def normalize_sample(raw, specs, include_metadata=False, report=None):
    """Encode and normalise one raw feature vector.

    ``raw`` is aligned with ``specs`` (metadata columns included); metadata
    values are dropped unless ``include_metadata`` is set.  Values outside
    the declared bounds are clamped to [-1, 1] and counted in ``report``.
    """
    if len(raw) != len(specs):
        raise ValueError(f"expected {len(specs)} feature values, got {len(raw)}")
    out = []
    for i, (value, spec) in enumerate(zip(raw, specs)):
        if spec.metadata and not include_metadata:
            continue
        try:
            x = encode_mixed(value, spec)
            x_norm = float(minmax_normalize(x, *spec.bounds))
        except ValueError as exc:
            raise ValueError(f"feature index {i}: {exc}") from None
        if not -1.0 <= x_norm <= 1.0:
            x_norm = min(max(x_norm, -1.0), 1.0)
            if report is not None:
                report.n_clamped += 1
                report.clamped_features[spec.name] = report.clamped_features.get(spec.name, 0) + 1
        out.append(x_norm)
    return np.array(out)


def normalize_rows(rows, specs, include_metadata=False):
    """Normalise a table of raw rows; returns ``(samples, report)``."""
    report = NormalizeReport()
    samples = [normalize_sample(r, specs, include_metadata, report) for r in rows]
    width = len(sample_features(specs, include_metadata))
    return np.array(samples).reshape(len(samples), width), report
