import json
import statistics

import numpy as np
import pytest

from olslab import cli, data, labeling, model, trainer
from olslab.config import ExperimentConfig, format_config, load_config, parse_config

SMALL = dict(n_per_class=30, d=4, epochs=3, lr0=0.05)


def small_cfg(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


def _files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_config_text_round_trip():
    c = small_cfg(strategies=["hard", "ols:0.3"], seeds=[1, 2], lr_decay_epochs=[2], confusion_pairs=[(0, 1), (2, 3)])
    assert parse_config(format_config(c)) == c


def test_config_parsing_and_errors():
    c = parse_config("# comment\nstrategies = hard, ls\nseeds = 3, 4\nconfusion_pairs = 0-1\ncsv_normalize = true\n")
    assert c.strategies == ["hard", "ls"] and c.seeds == [3, 4] and c.confusion_pairs == [(0, 1)]
    assert c.csv_normalize is True
    with pytest.raises(ValueError, match="unknown config key"):
        parse_config("bogus = 1\n")
    with pytest.raises(ValueError):
        parse_config("strategies = tfkd\n")
    with pytest.raises(ValueError):
        parse_config("seeds = \n")


def test_gen_data_manifest(tmp_path):
    cfg = small_cfg(k=3, confusion_pairs=[(0, 1)], data_seed=9)
    cli.cmd_gen_data(cfg, tmp_path / "a")
    manifest = tmp_path / "a" / "manifest.txt"
    back = load_config(manifest)
    assert back.synthetic_spec() == cfg.synthetic_spec()
    cli.cmd_gen_data(back, tmp_path / "b")
    assert (tmp_path / "a" / "data.csv").read_bytes() == (tmp_path / "b" / "data.csv").read_bytes()
    ds = data.load_csv(tmp_path / "a" / "data.csv")
    assert ds.n == 90 and ds.k == 3


def test_gen_data_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match=str(blocker)):
        cli.cmd_gen_data(small_cfg(), blocker / "sub")


def test_train_ols_outputs(tmp_path):
    out = tmp_path / "run"
    rep = cli.cmd_train(small_cfg(strategies=["ols"]), out)
    mats = sorted(out.glob("soft_matrix_epoch_*.csv"))
    assert len(mats) == 3
    epoch, m = labeling.read_matrix_csv(out / "soft_matrix_epoch_2.csv")
    assert epoch == 2 and m.k == 4
    logs = cli.read_epoch_log(out / "epoch_log.csv")
    assert [e.epoch for e in logs] == [0, 1, 2]
    header = (out / "epoch_log.csv").read_text().splitlines()[0]
    assert header == (
        "epoch,lr,loss_hard,loss_soft,loss_total,train_top1_err,val_top1_err,val_ece,val_avg_conf,n_accumulated"
    )
    # reload-and-recompute oracle
    report = json.loads((out / "report.json").read_text())
    params = model.load_checkpoint(out / report["checkpoint"])
    cfg = ExperimentConfig(**report["config"])
    _, va, te = data.split(cli.resolve_dataset(cfg), cfg.split_spec())
    again = trainer.evaluate(params, te, cfg.bins)
    for key in ("top1_err", "ece", "avg_conf"):
        assert abs(again.as_dict()[key] - report["test"][key]) <= 1e-9
    assert report["test"]["top5_err"] is None
    assert report["best_val_epoch"] == trainer.best_val_epoch(logs)
    assert rep == report


def test_train_hard_has_no_matrices(tmp_path):
    cli.cmd_train(small_cfg(strategies=["hard"]), tmp_path)
    assert list(tmp_path.glob("soft_matrix_epoch_*.csv")) == []


def test_train_requires_single_run(tmp_path):
    with pytest.raises(ValueError):
        cli.cmd_train(small_cfg(strategies=["hard", "ols"]), tmp_path)


def test_rerun_from_config_echo_is_bitwise(tmp_path):
    cli.cmd_train(small_cfg(strategies=["ols:0.4"], seeds=[5]), tmp_path / "a")
    for name in ("config.txt", "report.json"):
        echo = load_config(tmp_path / "a" / name)
        cli.cmd_train(echo, tmp_path / f"b_{name}")
        a, b = _files(tmp_path / "a"), _files(tmp_path / f"b_{name}")
        a.pop("config.txt"), a.pop("report.json"), b.pop("config.txt"), b.pop("report.json")
        assert a == b


def test_compare_table(tmp_path):
    cfg = small_cfg(strategies=["hard", "ols"], seeds=[0, 1])
    rows = cli.cmd_compare(cfg, tmp_path / "c")
    back = cli.read_comparison(tmp_path / "c" / "comparison_table.csv")
    assert len(back) == len(rows) == 6
    assert (tmp_path / "c" / "comparison_table.csv").read_text().splitlines()[0] == (
        "strategy,seed,top1_err,top5_err,ece,avg_conf,best_val_epoch"
    )
    for label in ("hard", "ols(0.5)"):
        per = [r for r in back if r["strategy"] == label and r["seed"] != "median"]
        med = next(r for r in back if r["strategy"] == label and r["seed"] == "median")
        assert len(per) == 2
        for f in ("top1_err", "ece", "avg_conf", "best_val_epoch"):
            assert med[f] == statistics.median(r[f] for r in per)
        assert all(r["top5_err"] is None for r in per + [med])
    # same (hard, seed) pair in a second invocation is identical
    cli.cmd_compare(small_cfg(strategies=["hard", "ls"], seeds=[0, 1]), tmp_path / "d")
    again = cli.read_comparison(tmp_path / "d" / "comparison_table.csv")
    assert [r for r in again if r["strategy"] == "hard"] == [r for r in back if r["strategy"] == "hard"]


def test_compare_needs_two_runs(tmp_path):
    with pytest.raises(ValueError):
        cli.cmd_compare(small_cfg(strategies=["ols"], seeds=[0]), tmp_path)


def test_compare_records_failures(tmp_path, monkeypatch):
    real = cli.run_single

    def flaky(cfg, text, seed, out, splits=None):
        if text == "ls":
            raise RuntimeError("boom")
        return real(cfg, text, seed, out, splits)

    monkeypatch.setattr(cli, "run_single", flaky)
    cli.cmd_compare(small_cfg(strategies=["hard", "ls"], seeds=[0]), tmp_path)
    rows = cli.read_comparison(tmp_path / "comparison_table.csv")
    ls_row = next(r for r in rows if r["strategy"] == "ls(0.1)" and r["seed"] == 0)
    assert ls_row["ece"] == cli.FAILED
    assert next(r for r in rows if r["strategy"] == "hard" and r["seed"] == 0)["ece"] is not None


def test_k5_reports_top5(tmp_path):
    rep = cli.cmd_train(small_cfg(k=5, confusion_pairs=[(0, 1)]), tmp_path)
    assert rep["test"]["top5_err"] == 0.0
    assert rep["test"]["top5_err"] <= rep["test"]["top1_err"]


def test_export_embeddings(tmp_path):
    cfg = small_cfg(strategies=["ols"])
    cli.cmd_gen_data(cfg, tmp_path / "d")
    cli.cmd_train(cfg.with_overrides(dataset="csv", csv_path=str(tmp_path / "d" / "data.csv")), tmp_path / "r")
    emb = cli.cmd_export_embeddings(tmp_path / "r" / "checkpoint.txt", tmp_path / "d" / "data.csv", tmp_path / "e.csv")
    labels, back = cli.read_embeddings(tmp_path / "e.csv")
    ds = data.load_csv(tmp_path / "d" / "data.csv")
    params = model.load_checkpoint(tmp_path / "r" / "checkpoint.txt")
    assert back.shape == (ds.n, 32)
    assert np.array_equal(back, model.penultimate_embeddings(params, ds.features))
    assert np.array_equal(back, emb) and np.array_equal(labels, ds.labels)
    assert (tmp_path / "e.csv").read_text().splitlines()[0].startswith("label,e_0,e_1")


def test_export_embeddings_rejects_single_layer(tmp_path):
    cfg = small_cfg()
    cli.cmd_gen_data(cfg, tmp_path)
    model.save_checkpoint(model.init_params([4, 4], 0), tmp_path / "ck.txt")
    with pytest.raises(ValueError):
        cli.cmd_export_embeddings(tmp_path / "ck.txt", tmp_path / "data.csv", tmp_path / "e.csv")
    model.save_checkpoint(model.init_params([5, 8, 4], 0), tmp_path / "ck5.txt")
    with pytest.raises(ValueError, match="features"):
        cli.cmd_export_embeddings(tmp_path / "ck5.txt", tmp_path / "data.csv", tmp_path / "e.csv")


def test_epoch_log_round_trip(tmp_path, small_splits):
    tr, va, _ = small_splits
    logs = trainer.train(trainer.TrainConfig(epochs=2, lr0=0.05), tr, va).logs
    cli.write_epoch_log(logs, tmp_path / "l.csv")
    assert cli.read_epoch_log(tmp_path / "l.csv") == logs


def test_main_end_to_end(tmp_path):
    conf = tmp_path / "exp.txt"
    conf.write_text(format_config(small_cfg()))
    assert cli.main(["gen-data", "--config", str(conf), "--out", str(tmp_path / "d")]) == 0
    assert cli.main(["train", "--config", str(conf), "--out", str(tmp_path / "t"), "--strategy", "ls",
                     "--epsilon", "0.2", "--seed", "3", "--epochs", "2", "--bins", "10"]) == 0
    rep = json.loads((tmp_path / "t" / "report.json").read_text())
    assert rep["strategy"] == "ls(0.2)" and rep["seed"] == 3 and rep["config"]["bins"] == 10
    assert cli.main(["compare", "--config", str(conf), "--out", str(tmp_path / "c"), "--strategy", "hard",
                     "--strategy", "ols", "--alpha", "0.7", "--data", str(tmp_path / "d" / "data.csv")]) == 0
    assert "ols(0.7)" in (tmp_path / "c" / "comparison_table.csv").read_text()
    assert cli.main(["export-embeddings", "--checkpoint", str(tmp_path / "t" / "checkpoint.txt"),
                     "--dataset", str(tmp_path / "d" / "data.csv"), "--out", str(tmp_path / "e.csv")]) == 0
    assert cli.main(["train", "--config", str(conf), "--out", str(tmp_path / "x"), "--strategy", "nope"]) == 2
