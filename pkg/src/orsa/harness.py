"""Reproducible experiments: generate, train, sweep, score and report.

Every entry point takes a run configuration document (a dict, usually
read from JSON) with these optional sections::

    {
      "synth":   {...SynthConfig fields...},
      "orsa":    {"k_s", "k_lof", "mode", "batch_size", "steps", "seed",
                  "metric_window", "step_size"},
      "net":     {"hidden": [64, 32], "init_seed": null},
      "members": {"source": "synthetic" | "table", "error": 0.01, "noise": false},
      "sweep":   {"grid": [[1, 1], [6, 6]], "probes": 100, "probe_seed": 1}
    }

Missing values fall back to the 30-device artificial setup.

Training run directories contain ``checkpoint.json``, ``summary.csv``,
``heatmap.csv``, ``loss_trace.csv`` and ``run_manifest.json``; ``report``
adds ``report.json``.  CSV columns:

``summary.csv``
    device_id, label, selection_count, weighted_loss, equal_loss -- totals
    over the trailing metric window; the loss columns sum per-step
    batch-mean contributions
``heatmap.csv``
    device_id, label, then one column per sample of the final training
    batch (``sample_0`` ...) holding that device's weight (0 when not
    selected); the batch's pooled row indices are in the run manifest
``loss_trace.csv``
    step, loss (batch-mean weighted loss before the update)
"""

import copy
import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import aggnet, datasets, ensemble, lof, synthgen, trainer
from .datasets import dump_json, fmt

RUN_MANIFEST = "run_manifest.json"
RUN_FORMAT = "orsa-run"
RUN_ARTIFACTS = ("checkpoint.json", "summary.csv", "heatmap.csv", "loss_trace.csv", RUN_MANIFEST)

DEFAULT_ORSA = {"k_s": 6, "k_lof": 6, "mode": "min", "batch_size": 64, "steps": 25_000,
                "seed": 0, "metric_window": 5_000, "step_size": 1e-3}
DEFAULT_MEMBERS = {"source": "synthetic", "error": ensemble.DEFAULT_MEMBER_ERROR, "noise": False}
DEFAULT_SWEEP = {"grid": [[1, 1], [3, 3], [6, 6], [12, 12], [30, 29]], "probes": 100, "probe_seed": 1}


def load_config(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def synth_config(doc, seed=None):
    section = dict(doc.get("synth") or {})
    if "outlier_assignment" not in section:
        raise ValueError("synth config is missing 'outlier_assignment'")
    if seed is not None:
        section["seed"] = seed
    return synthgen.SynthConfig.from_dict(section)


def orsa_config(doc, k_s=None, k_lof=None, mode=None, seed=None, steps=None):
    section = dict(DEFAULT_ORSA)
    section.update(doc.get("orsa") or {})
    for key, value in (("k_s", k_s), ("k_lof", k_lof), ("mode", mode), ("seed", seed), ("steps", steps)):
        if value is not None:
            section[key] = value
    unknown = set(section) - set(DEFAULT_ORSA)
    if unknown:
        raise ValueError(f"unknown orsa config keys {sorted(unknown)}")
    return trainer.OrsaConfig(**section)


def net_config(doc, input_dim, orsa):
    section = doc.get("net") or {}
    seed = section.get("init_seed")
    return aggnet.NetConfig(
        input_dim,
        tuple(section.get("hidden", (64, 32))),
        section.get("activation", "relu"),
        orsa.seed if seed is None else seed,
    )


def build_members(dataset, doc):
    section = dict(DEFAULT_MEMBERS)
    section.update(doc.get("members") or {})
    source = section["source"]
    if source == "synthetic":
        if dataset.config is None:
            raise ValueError("synthetic members need a dataset generated by this package")
        return ensemble.synthetic_members(dataset, float(section["error"]), bool(section["noise"]))
    if source == "table":
        return ensemble.table_members(dataset)
    raise ValueError(f"unknown member source {source!r}; expected synthetic or table")


# -- generate -------------------------------------------------------------------


def run_generate(doc, out_dir, seed=None):
    """Write the synthetic dataset described by ``doc['synth']``; returns the manifest path."""
    config = synth_config(doc, seed)
    return datasets.write_dataset(synthgen.generate_dataset(config), out_dir)


# -- train ----------------------------------------------------------------------


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return "" if v is None else str(v)


def train_run(data_dir, doc, overrides=None):
    """Load data, validate, train.  Returns a dict with everything a run produces."""
    overrides = overrides or {}
    dataset = datasets.load_dataset(data_dir)
    orsa = orsa_config(doc, **overrides)
    orsa.check_devices(dataset.n_devices)
    net = net_config(doc, dataset.input_dim, orsa)
    if net.input_dim != dataset.input_dim:
        raise ValueError(f"network input_dim {net.input_dim} does not match dataset ({dataset.input_dim})")
    members = build_members(dataset, doc)
    samples = dataset.pooled_samples()
    t0 = time.perf_counter()
    params, metrics = trainer.train(members, samples, orsa, net)
    return {
        "dataset": dataset, "members": members, "orsa": orsa, "net": net,
        "params": params, "metrics": metrics, "seconds": time.perf_counter() - t0,
    }


def write_run(run, out_dir, data_dir, doc):
    os.makedirs(out_dir, exist_ok=True)
    dataset, orsa, metrics = run["dataset"], run["orsa"], run["metrics"]
    labels = dataset.labels
    window = min(orsa.metric_window, metrics.steps)

    aggnet.save_checkpoint(os.path.join(out_dir, "checkpoint.json"), run["params"], run["net"])
    counts = trainer.selection_frequency(metrics, window)
    weighted, equal = trainer.loss_contributions(metrics, window)
    _write_csv(
        os.path.join(out_dir, "summary.csv"),
        ["device_id", "label", "selection_count", "weighted_loss", "equal_loss"],
        [[t.device_id, _cell(lab), int(c), fmt(wl), fmt(el)]
         for t, lab, c, wl, el in zip(dataset.devices, labels, counts, weighted, equal)],
    )
    heat = metrics.heatmap
    _write_csv(
        os.path.join(out_dir, "heatmap.csv"),
        ["device_id", "label"] + [f"sample_{j}" for j in range(heat.shape[1])],
        [[t.device_id, _cell(lab)] + [fmt(v) for v in row]
         for t, lab, row in zip(dataset.devices, labels, heat)],
    )
    _write_csv(
        os.path.join(out_dir, "loss_trace.csv"),
        ["step", "loss"],
        [[i + 1, fmt(v)] for i, v in enumerate(metrics.loss)],
    )
    snapshot = copy.deepcopy(doc)
    snapshot["orsa"] = orsa.to_dict()
    snapshot["net"] = {"hidden": list(run["net"].hidden), "activation": run["net"].activation,
                       "init_seed": run["net"].init_seed}
    snapshot.setdefault("members", dict(DEFAULT_MEMBERS))
    manifest = {
        "format": RUN_FORMAT,
        "version": 1,
        "dataset": {"path": os.path.abspath(data_dir), "checksum": datasets.dataset_checksum(data_dir),
                    "n_devices": dataset.n_devices, "input_dim": dataset.input_dim},
        "config": snapshot,
        "seeds": {"batch_stream": orsa.seed, "net_init": run["net"].init_seed,
                  "dataset": dataset.config.seed if dataset.config else None},
        "metric_window": window,
        "heatmap_rows": [int(r) for r in metrics.heatmap_rows],
        "artifacts": list(RUN_ARTIFACTS),
        "wall_clock_seconds": round(run["seconds"], 3),
    }
    dump_json(os.path.join(out_dir, RUN_MANIFEST), manifest)
    return manifest


def run_train(data_dir, doc, out_dir, **overrides):
    overrides = {k: v for k, v in overrides.items() if v is not None}
    run = train_run(data_dir, doc, overrides)
    return write_run(run, out_dir, data_dir, doc)


def rerun(run_dir, out_dir):
    """Repeat a finished run from its manifest."""
    manifest = _read_run_manifest(run_dir)
    data_dir = manifest["dataset"]["path"]
    if datasets.dataset_checksum(data_dir) != manifest["dataset"]["checksum"]:
        raise ValueError(f"{data_dir}: dataset changed since the recorded run (checksum mismatch)")
    return run_train(data_dir, manifest["config"], out_dir)


def _read_run_manifest(run_dir):
    path = os.path.join(run_dir, RUN_MANIFEST)
    if not os.path.exists(path):
        raise ValueError(f"{run_dir}: no {RUN_MANIFEST}; not a completed run")
    manifest = load_config(path)
    if manifest.get("format") != RUN_FORMAT:
        raise ValueError(f"{path}: not an {RUN_FORMAT} manifest")
    return manifest


# -- sweep ----------------------------------------------------------------------


def parse_grid(text):
    """``"1:1,6:6"`` -> ``[(1, 1), (6, 6)]``."""
    grid = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            k_s, k_lof = (int(v) for v in item.split(":"))
        except ValueError:
            raise ValueError(f"bad grid point {item!r}; expected k_s:k_lof") from None
        grid.append((k_s, k_lof))
    if not grid:
        raise ValueError("empty grid")
    return grid


def check_grid(grid, n_devices):
    bad = [(ks, kl) for ks, kl in grid if not (1 <= ks <= n_devices and 1 <= kl <= n_devices - 1)]
    if bad:
        raise ValueError(
            f"invalid grid points for {n_devices} devices: "
            + ", ".join(f"{ks}:{kl}" for ks, kl in bad)
        )


def probe_samples(n, input_dim, seed):
    return np.random.default_rng(seed).uniform(-1.0, 1.0, (n, input_dim))


def _sweep_point(args):
    data_dir, doc, k_s, k_lof, point_dir, probes = args
    run = train_run(data_dir, doc, {"k_s": k_s, "k_lof": k_lof})
    write_run(run, point_dir, data_dir, doc)
    y_out = ensemble.predict_ensemble(run["members"], probes)
    pred = aggnet.forward(run["params"], probes)
    hard = y_out.max(axis=1) if run["orsa"].mode == ensemble.SOFT_MAX else y_out.min(axis=1)
    y_mean = y_out.mean(axis=1)
    y_oracle = trainer.compute_targets(y_out, run["orsa"]).target
    names = run["dataset"].feature_names
    _write_csv(
        os.path.join(point_dir, "probes.csv"),
        list(names) + ["y_pred", "y_extreme", "y_mean", "y_oracle"],
        [[fmt(v) for v in row] + [fmt(a), fmt(b), fmt(c), fmt(d)]
         for row, a, b, c, d in zip(probes, pred, hard, y_mean, y_oracle)],
    )
    lo, hi = np.minimum(hard, y_mean), np.maximum(hard, y_mean)
    return {
        "k_s": k_s, "k_lof": k_lof,
        "rmse_extreme": float(np.sqrt(np.mean((pred - hard) ** 2))),
        "rmse_mean": float(np.sqrt(np.mean((pred - y_mean) ** 2))),
        "rmse_oracle": float(np.sqrt(np.mean((pred - y_oracle) ** 2))),
        "frac_between": float(np.mean((pred >= lo) & (pred <= hi))),
    }


def run_sweep(data_dir, doc, out_dir, grid=None, workers=1):
    """Train one run per ``(k_s, k_lof)`` point and tabulate how close each lands
    to the hard extreme (min or max, by mode) and to the plain mean."""
    section = dict(DEFAULT_SWEEP)
    section.update(doc.get("sweep") or {})
    grid = [tuple(p) for p in (grid or section["grid"])]
    manifest = datasets.read_manifest(data_dir)
    n_devices = len(manifest["devices"])
    check_grid(grid, n_devices)
    input_dim = sum(1 for f in manifest["schema"]["features"] if not f.get("metadata"))
    probes = probe_samples(int(section["probes"]), input_dim, int(section["probe_seed"]))

    os.makedirs(out_dir, exist_ok=True)
    jobs = [(data_dir, doc, ks, kl, os.path.join(out_dir, f"ks{ks}_klof{kl}"), probes) for ks, kl in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    header = ["k_s", "k_lof", "rmse_extreme", "rmse_mean", "rmse_oracle", "frac_between"]
    _write_csv(os.path.join(out_dir, "sweep.csv"), header, [[_cell(r[h]) for h in header] for r in rows])
    dump_json(os.path.join(out_dir, "sweep_manifest.json"), {
        "dataset": os.path.abspath(data_dir), "grid": [list(p) for p in grid],
        "probes": len(probes), "probe_seed": int(section["probe_seed"]),
    })
    return rows


# -- lof ------------------------------------------------------------------------


def read_column(path):
    values = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError:
                raise ValueError(f"{path}: row {lineno}: not a number: {text!r}") from None
            if not np.isfinite(v):
                raise ValueError(f"{path}: row {lineno}: non-finite value {text!r}")
            values.append(v)
    return np.array(values)


def run_lof(input_path, k, out_path):
    values = read_column(input_path)
    scores = lof.lof_scores(values, k)
    with open(out_path, "w") as f:
        for s in scores:
            f.write(fmt(s) + "\n")
    return scores


# -- report ---------------------------------------------------------------------


def _read_table(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def run_report(run_dir, smooth_window=500):
    """Merge a run's CSVs into ``report.json``; returns its path."""
    missing = [a for a in RUN_ARTIFACTS if not os.path.exists(os.path.join(run_dir, a))]
    if missing:
        raise ValueError(f"{run_dir}: incomplete run, missing {', '.join(missing)}")
    manifest = _read_run_manifest(run_dir)
    _, summary = _read_table(os.path.join(run_dir, "summary.csv"))
    heat_header, heat = _read_table(os.path.join(run_dir, "heatmap.csv"))
    _, trace = _read_table(os.path.join(run_dir, "loss_trace.csv"))

    weights = np.array([[float(v) for v in row[2:]] for row in heat])
    devices = []
    for row, wrow in zip(summary, weights):
        weighted, equal = float(row[3]), float(row[4])
        devices.append({
            "device_id": int(row[0]),
            "label": row[1] or None,
            "selection_count": int(row[2]),
            "weighted_loss": weighted,
            "equal_loss": equal,
            "equal_over_weighted": equal / weighted if weighted > 0 else None,
            "mean_heatmap_weight": float(wrow.mean()),
            "heatmap": [float(v) for v in wrow],
        })
    loss = np.array([float(r[1]) for r in trace])
    n = len(loss) // smooth_window
    smoothed = loss[: n * smooth_window].reshape(n, smooth_window).mean(axis=1) if n else loss[:0]
    report = {
        "run": {"dataset_checksum": manifest["dataset"]["checksum"], "config": manifest["config"],
                "metric_window": manifest["metric_window"]},
        "columns": ["device_id", "label", "selection_count", "weighted_loss", "equal_loss",
                    "equal_over_weighted", "mean_heatmap_weight", "heatmap"],
        "devices": devices,
        "heatmap_samples": heat_header[2:],
        "heatmap_column_sums": [float(v) for v in weights.sum(axis=0)],
        "loss_trace": {"window": smooth_window, "steps": len(loss),
                       "smoothed": [float(v) for v in smoothed]},
    }
    path = os.path.join(run_dir, "report.json")
    dump_json(path, report)
    return path
