"""Command-line runner: ``olslab {gen-data,train,compare,export-embeddings}``."""

import argparse
import csv
import json
import logging
import statistics
import sys
from dataclasses import astuple
from pathlib import Path

import numpy as np

from olslab import calibration, data, labeling, model, trainer
from olslab.config import ExperimentConfig, format_config, load_config, save_config

log = logging.getLogger("olslab")

COMPARISON_FIELDS = ["strategy", "seed", "top1_err", "top5_err", "ece", "avg_conf", "best_val_epoch"]
MANIFEST_KEYS = ["dataset", "k", "d", "n_per_class", "cluster_spread", "confusion_pairs", "data_seed"]
NA = "N/A"
FAILED = "FAILED"


# ---------------------------------------------------------------- file formats


def write_epoch_log(logs, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trainer.EPOCH_LOG_FIELDS)
        for entry in logs:
            w.writerow(repr(v) if isinstance(v, float) else v for v in astuple(entry))


def read_epoch_log(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(
            trainer.EpochLog(
                **{
                    k: (int(v) if k in ("epoch", "n_accumulated") else float(v))
                    for k, v in r.items()
                }
            )
        )
    return out


def _fmt(v):
    if v is None:
        return NA
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_comparison(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COMPARISON_FIELDS)
        for r in rows:
            w.writerow(_fmt(r[f]) for f in COMPARISON_FIELDS)


def read_comparison(path):
    def parse(v):
        if v in (NA, FAILED):
            return None if v == NA else v
        return float(v)

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        row = {"strategy": r["strategy"], "seed": r["seed"] if r["seed"] == "median" else int(r["seed"])}
        for f in COMPARISON_FIELDS[2:]:
            row[f] = parse(r[f])
        if isinstance(row["best_val_epoch"], float) and row["seed"] != "median":
            row["best_val_epoch"] = int(row["best_val_epoch"])
        out.append(row)
    return out


def write_embeddings(labels, emb, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"e_{j}" for j in range(emb.shape[1])])
        for y, row in zip(labels, emb):
            w.writerow([int(y)] + [repr(float(v)) for v in row])


def read_embeddings(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    labels = np.array([int(r[0]) for r in rows])
    return labels, np.array([[float(v) for v in r[1:]] for r in rows])


def report_dict(rep):
    return rep.as_dict()


# ---------------------------------------------------------------- commands


def resolve_dataset(cfg):
    if cfg.dataset == "synthetic":
        ds = data.gen_synthetic(cfg.synthetic_spec())
    elif cfg.dataset == "csv":
        if not cfg.csv_path:
            raise ValueError("dataset = csv requires csv_path")
        ds = data.load_csv(cfg.csv_path, normalize=cfg.csv_normalize)
    else:
        if not (cfg.idx_images and cfg.idx_labels):
            raise ValueError("dataset = idx requires idx_images and idx_labels")
        ds = data.load_idx(cfg.idx_images, cfg.idx_labels)
    if cfg.balance_per_class:
        ds = data.balanced_sample(ds, cfg.balance_per_class, cfg.data_seed)
    return ds


def _ensure_dir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {path}: {e}") from None
    return path


def cmd_gen_data(cfg, out):
    """Write ``data.csv`` plus ``manifest.txt``, from which the CSV can be regenerated."""
    if cfg.dataset != "synthetic":
        raise ValueError("gen-data needs dataset = synthetic")
    out = _ensure_dir(out)
    ds = data.gen_synthetic(cfg.synthetic_spec())
    data.save_csv(ds, out / "data.csv")
    manifest = "".join(line for line in format_config(cfg).splitlines(True) if line.split(" =")[0] in MANIFEST_KEYS)
    (out / "manifest.txt").write_text(manifest, encoding="utf-8")
    log.info("wrote %d samples to %s", ds.n, out / "data.csv")
    return out


def run_single(cfg, strategy_text, seed, out, splits=None):
    out = _ensure_dir(out)
    train_ds, val_ds, test_ds = splits or data.split(resolve_dataset(cfg), cfg.split_spec())
    tcfg = cfg.train_config(strategy_text, seed)
    result = trainer.train(tcfg, train_ds, val_ds)

    write_epoch_log(result.logs, out / "epoch_log.csv")
    model.save_checkpoint(result.params, out / "checkpoint.txt")
    for t, mat in enumerate(result.matrices):
        labeling.write_matrix_csv(mat, out / f"soft_matrix_epoch_{t}.csv", t)
    test_rep = trainer.evaluate(result.params, test_ds, cfg.bins)
    val_rep = trainer.evaluate(result.params, val_ds, cfg.bins)
    calibration.write_bins_csv(test_rep.bins, out / "reliability_bins.csv")
    run_cfg = cfg.with_overrides(strategies=[strategy_text], seeds=[seed], out=str(out))
    save_config(run_cfg, out / "config.txt")
    report = {
        "strategy": tcfg.strategy.label(),
        "seed": seed,
        "best_val_epoch": result.best_val_epoch,
        "test": report_dict(test_rep),
        "val": report_dict(val_rep),
        "checkpoint": "checkpoint.txt",
        "config": run_cfg.to_mapping(),
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    log.info(
        "%s seed %d: test top1 %.4f ece %.4f conf %.4f",
        tcfg.strategy.label(), seed, test_rep.top1_err, test_rep.ece, test_rep.avg_conf,
    )
    return report


def cmd_train(cfg, out):
    if len(cfg.strategies) != 1 or len(cfg.seeds) != 1:
        raise ValueError("train runs one strategy with one seed; use compare for several")
    return run_single(cfg, cfg.strategies[0], cfg.seeds[0], out)


def _median(values):
    vals = [v for v in values if isinstance(v, (int, float))]
    return float(statistics.median(vals)) if vals else None


def cmd_compare(cfg, out):
    if len(cfg.strategies) < 2 and len(cfg.seeds) < 2:
        raise ValueError("compare needs at least two strategies or two seeds")
    out = _ensure_dir(out)
    splits = data.split(resolve_dataset(cfg), cfg.split_spec())
    rows = []
    for text in cfg.strategies:
        label = cfg.strategy(text).label()
        per = []
        for seed in cfg.seeds:
            run_dir = out / "runs" / f"{label}_seed{seed}"
            try:
                rep = run_single(cfg, text, seed, run_dir, splits)
            except Exception as e:  # recorded per row; other runs continue
                log.error("%s seed %d failed: %s", label, seed, e)
                row = {f: FAILED for f in COMPARISON_FIELDS[2:]}
            else:
                row = dict(rep["test"], best_val_epoch=rep["best_val_epoch"])
            row.update(strategy=label, seed=seed)
            rows.append(row)
            per.append(row)
        med = {f: _median([r[f] for r in per]) for f in COMPARISON_FIELDS[2:]}
        rows.append(dict(med, strategy=label, seed="median"))
    write_comparison(rows, out / "comparison_table.csv")
    return rows


def cmd_export_embeddings(checkpoint, dataset_path, out_path):
    params = model.load_checkpoint(checkpoint)
    ds = data.load_csv(dataset_path, k=params.layer_sizes[-1])
    if ds.d != params.layer_sizes[0]:
        raise ValueError(f"dataset has {ds.d} features, checkpoint expects {params.layer_sizes[0]}")
    emb = model.penultimate_embeddings(params, ds.features)
    write_embeddings(ds.labels, emb, out_path)
    return emb


# ---------------------------------------------------------------- argparse


def _common(p):
    p.add_argument("--config", help="flat key = value config file (or a report.json)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, action="append", dest="seeds", help="repeatable")
    p.add_argument("--strategy", action="append", dest="strategies", help="hard|ls|ols, repeatable")
    p.add_argument("--alpha", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--data", dest="csv_path", help="CSV dataset (sets dataset = csv)")


def build_parser():
    parser = argparse.ArgumentParser(prog="olslab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("gen-data", "generate a synthetic dataset CSV and manifest"),
        ("train", "train one strategy with one seed"),
        ("compare", "train every strategy x seed and tabulate"),
    ]:
        _common(sub.add_parser(name, help=help_))
    p = sub.add_parser("export-embeddings", help="write penultimate-layer activations")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, help="CSV dataset")
    p.add_argument("--out", required=True, help="output CSV path")
    return parser


def config_from_args(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {k: getattr(args, k) for k in ("seeds", "strategies", "alpha", "epsilon", "epochs", "bins", "out", "csv_path")}
    if over["csv_path"]:
        over["dataset"] = "csv"
    return cfg.with_overrides(**over)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "export-embeddings":
            cmd_export_embeddings(args.checkpoint, args.dataset, args.out)
            return 0
        cfg = config_from_args(args)
        cmd = {"gen-data": cmd_gen_data, "train": cmd_train, "compare": cmd_compare}[args.command]
        cmd(cfg, cfg.out)
    except (ValueError, OSError) as e:
        log.error("%s", e)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
