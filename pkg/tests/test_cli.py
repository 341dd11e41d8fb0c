import csv
import json

import pytest

from napgnn import cli


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert cli.main(["gen", "--synthetic", "120,3,16,3,0.8", "--seed", "2", "--out", str(out)]) == 0
    return out


def test_gen_writes_layout(dataset):
    assert {p.name for p in dataset.iterdir()} == {"edges.csv", "features.csv", "labels.csv"}


def test_run(dataset, tmp_path, capsys):
    code = cli.main(["run", "--dataset", str(dataset), "--out", str(tmp_path), "--seeds", "0,1",
                     "--dmax", "6", "--hops", "2", "--importance", "degree",
                     "--emit-intermediates"])
    assert code == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["seeds"] == [0, 1]
    assert metrics["config"]["max_degree"] == 6
    with (tmp_path / "budget_out.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 120 and set(rows[0]) == {"node_id", "beta", "epsilon"}
    assert json.loads(capsys.readouterr().out)["eps_A"] == metrics["eps_A"]


def test_run_flags_reach_config(dataset, tmp_path):
    args = cli.build_parser().parse_args(
        ["run", "--dataset", str(dataset), "--out", str(tmp_path), "--no-edge-sample",
         "--budget-mode", "equal", "--mode", "mlp", "--noise-off", "--tau", "0.5",
         "--tnie-depth", "2", "--eps-total", "7", "--split", "even", "--seed", "4"])
    cfg = cli.config_from_args(args)
    assert (cfg.edge_sample, cfg.budget_mode, cfg.mode, cfg.noise) == (False, "equal", "mlp", False)
    assert (cfg.tau, cfg.tnie_depth, cfg.eps_total, cfg.split, cfg.seeds) == (0.5, 2, 7.0, "even", (4,))


def test_synthetic_flag(tmp_path):
    args = cli.build_parser().parse_args(
        ["run", "--synthetic", "200,2,10,4,0.6", "--out", str(tmp_path), "--seeds", "0:3"])
    cfg = cli.config_from_args(args)
    assert (cfg.synthetic.n, cfg.synthetic.attach, cfg.synthetic.d,
            cfg.synthetic.num_classes, cfg.synthetic.homophily) == (200, 2, 10, 4, 0.6)
    assert cfg.seeds == (0, 1, 2)


def test_sweep(dataset, tmp_path):
    code = cli.main(["sweep", "--dataset", str(dataset), "--out", str(tmp_path), "--axis", "dmax",
                     "--values", "2,4", "--importance", "degree"])
    assert code == 0
    with (tmp_path / "results.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["axis_value"] for r in rows] == ["2", "4"]


def test_audit_quick(tmp_path):
    code = cli.main(["audit", "--quick", "--out", str(tmp_path)])
    report = json.loads((tmp_path / "audit_report.json").read_text())
    assert len(report["reports"]) == 8
    assert code == 0 and report["passed"]


def test_errors_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--out", str(tmp_path), "--split", "1,2"]) == 2
    assert "split" in capsys.readouterr().err
    assert cli.main(["run", "--dataset", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 2


def test_bad_synthetic_spec(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["run", "--synthetic", "1,2,3", "--out", str(tmp_path)])
