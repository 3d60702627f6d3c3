"""On-disk dataset format: one CSV per device plus a JSON manifest.

Layout of a dataset directory::

    manifest.json
    device_000.csv
    device_001.csv
    ...

Each CSV has a header of feature names followed by ``y_out`` and one row
per sample.  ``manifest.json`` holds

``format``, ``version``
    ``"orsa-dataset"``, ``1``
``schema``
    ``{"features": [FeatureSpec dicts]}``
``normalized``
    true when feature columns already lie in [-1, 1] (generated data);
    false for raw external tables, which are passed through
    :mod:`orsa.preprocess` on load
``devices``
    list of ``{"device_id", "file", "label", "area", "key"}``; ``label``,
    ``area`` and ``key`` are null for external data
``generator``
    the synthetic config (including base-function coefficients), or null
``checksums``
    sha256 of every device file
"""

import csv
import hashlib
import json
import os

import numpy as np

from .preprocess import FeatureSpec, NormalizeReport, normalize_sample, sample_features
from .synthgen import Dataset, DeviceTable, OffsetArea, SynthConfig

MANIFEST = "manifest.json"
FORMAT = "orsa-dataset"
VERSION = 1


def fmt(x):
    """Shortest repr that round-trips a float."""
    return repr(float(x))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dump_json(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def write_device_csv(path, feature_names, samples, outputs):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(feature_names) + ["y_out"])
        for row, y in zip(samples, outputs):
            w.writerow([fmt(v) for v in row] + [fmt(y)])


def write_dataset(dataset, out_dir):
    """Write device CSVs and the manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    names = dataset.feature_names or [f"x{j}" for j in range(dataset.input_dim)]
    devices, checksums = [], {}
    for t in dataset.devices:
        fname = f"device_{t.device_id:03d}.csv"
        path = os.path.join(out_dir, fname)
        write_device_csv(path, names, t.samples, t.outputs)
        checksums[fname] = sha256_file(path)
        devices.append({
            "device_id": t.device_id,
            "file": fname,
            "label": t.label,
            "area": t.area.to_dict() if t.area is not None else None,
            "key": t.key,
        })
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "schema": {"features": [FeatureSpec(n).to_dict() for n in names]},
        "normalized": True,
        "devices": devices,
        "generator": dataset.config.to_dict() if dataset.config is not None else None,
        "checksums": checksums,
    }
    path = os.path.join(out_dir, MANIFEST)
    dump_json(path, manifest)
    return path


def dataset_checksum(data_dir):
    """sha256 of the manifest, which itself pins every device file."""
    return sha256_file(os.path.join(data_dir, MANIFEST))


def read_manifest(data_dir):
    path = os.path.join(data_dir, MANIFEST)
    try:
        with open(path) as f:
            manifest = json.load(f)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if manifest.get("format") != FORMAT or manifest.get("version") != VERSION:
        raise ValueError(f"{path}: not a version {VERSION} {FORMAT} manifest")
    for key in ("schema", "devices"):
        if key not in manifest:
            raise ValueError(f"{path}: missing {key!r}")
    return manifest


def _read_device_csv(path, specs, normalized):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    expected = [s.name for s in specs] + ["y_out"]
    if header != expected:
        raise ValueError(f"{path}: line 1: header {header} does not match schema {expected}")
    raw, y = [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(expected):
            raise ValueError(f"{path}: line {lineno}: expected {len(expected)} fields, got {len(row)}")
        try:
            y.append(float(row[-1]))
            raw.append([float(v) for v in row[:-1]] if normalized else row[:-1])
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if normalized:
        samples = np.array(raw, dtype=float).reshape(len(raw), len(specs))
        keep = [i for i, s in enumerate(specs) if not s.metadata]
        samples = samples[:, keep]
        if samples.size and (samples.min() < -1 or samples.max() > 1):
            raise ValueError(f"{path}: normalised features fall outside [-1, 1]")
        n_clamped = 0
    else:
        report = NormalizeReport()
        rows_out = []
        for lineno, row in enumerate(raw, start=2):
            try:
                rows_out.append(normalize_sample(row, specs, report=report))
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
        samples = np.array(rows_out).reshape(len(rows_out), len(sample_features(specs)))
        n_clamped = report.n_clamped
    return samples, np.array(y), n_clamped


def load_dataset(data_dir, verify=True):
    """Read a dataset directory back into a :class:`~orsa.synthgen.Dataset`."""
    manifest = read_manifest(data_dir)
    specs = [FeatureSpec.from_dict(d) for d in manifest["schema"]["features"]]
    normalized = bool(manifest.get("normalized", True))
    checksums = manifest.get("checksums") or {}
    tables, clamped = [], 0
    for entry in manifest["devices"]:
        path = os.path.join(data_dir, entry["file"])
        if verify and entry["file"] in checksums and sha256_file(path) != checksums[entry["file"]]:
            raise ValueError(f"{path}: checksum mismatch with manifest")
        samples, y, n_clamped = _read_device_csv(path, specs, normalized)
        clamped += n_clamped
        area = OffsetArea.from_dict(entry["area"]) if entry.get("area") else None
        tables.append(DeviceTable(entry["device_id"], samples, y, entry.get("label"), area, entry.get("key")))
    gen = manifest.get("generator")
    config = SynthConfig.from_dict(gen) if gen else None
    return Dataset(tables, config, [s.name for s in sample_features(specs)], clamped)


def write_external_manifest(data_dir, features, files, normalized=False):
    """Manifest for externally supplied device tables (no labels, no generator)."""
    specs = [f if isinstance(f, FeatureSpec) else FeatureSpec.from_dict(f) for f in features]
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "schema": {"features": [s.to_dict() for s in specs]},
        "normalized": normalized,
        "devices": [
            {"device_id": i, "file": fname, "label": None, "area": None, "key": None}
            for i, fname in enumerate(files)
        ],
        "generator": None,
        "checksums": {f: sha256_file(os.path.join(data_dir, f)) for f in files},
    }
    path = os.path.join(data_dir, MANIFEST)
    dump_json(path, manifest)
    return path
