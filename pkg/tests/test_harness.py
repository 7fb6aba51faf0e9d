import json
from pathlib import Path

import numpy as np
import pytest

from sskmeans import harness
from sskmeans.config import ConfigError, load_config, parse_config
from sskmeans.harness import MixtureSpec, generate_data, read_dataset, run_experiment, write_dataset

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
run.id = small
run.seed = 4
topology.kind = erdos_renyi
topology.n = 12
topology.prob = 0.6
data.means = -5; 5
data.std = 1
data.x_max = 10
kmeans.k = 2
kmeans.T = 30
averaging.protocol = {protocol}
adversary.corrupted = {corrupted}
"""


def small(protocol="gossip", corrupted="1, 2, 3"):
    return parse_config(SMALL.format(protocol=protocol, corrupted=corrupted))


def test_parse_config_values_and_dump_round_trip():
    cfg = small()
    assert cfg.n == 12 and cfg.data_means == [[-5.0], [5.0]] and cfg.corrupted == [1, 2, 3]
    again = parse_config(cfg.dump())
    assert again.dump() == cfg.dump()


@pytest.mark.parametrize(
    "text",
    [
        "nonsense",
        "kmeans.q = 3",
        "kmeans.k = 0",
        "kmeans.k = two",
        "averaging.protocol = flood",
        "adversary.corrupted = 1\nadversary.fraction = 0.2",
        "data.means = 1, 2; 3",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_derived_seeds_differ_by_purpose_and_master_seed():
    cfg = small()
    assert cfg.seed_for("topology") != cfg.seed_for("data")
    assert cfg.with_seed(5).seed_for("data") != cfg.seed_for("data")
    cfg.data_seed = 99
    assert cfg.seed_for("data") == 99


def test_generate_data_examples():
    spec = MixtureSpec([[-5.0], [5.0]], [0.01], [0.5, 0.5], 10, decimals=3)
    ds = generate_data(spec, 10, seed=1)
    assert ds.n == 10
    assert all(min(abs(v + 5), abs(v - 5)) <= 1 for v in ds.points.ravel())
    assert generate_data(spec, 0, seed=1).n == 0
    assert np.array_equal(generate_data(spec, 10, 1).points, ds.points)
    with pytest.raises(ValueError):
        MixtureSpec([[0.0], [1.0]], [1.0], [0.7, 0.7], 5)


def test_generate_data_clipped():
    spec = MixtureSpec([[0.0, 0.0]], [50.0], [1.0], 3.0)
    assert np.abs(generate_data(spec, 200, 0).points).max() <= 3.0


def test_dataset_file_round_trip(tmp_path):
    spec = MixtureSpec([[1.5, -2.0]], [1.0], [1.0], 8, decimals=2)
    ds = generate_data(spec, 7, 3)
    write_dataset(ds, tmp_path / "d.csv")
    back = read_dataset(tmp_path / "d.csv", 8)
    assert np.array_equal(back.points, ds.points)


def test_six_point_experiment(tmp_path):
    cfg = load_config(CONFIGS / "six_point.cfg")
    outcome = run_experiment(cfg, tmp_path)
    m = outcome.metrics
    assert outcome.exit_code == harness.EXIT_OK
    assert m.label_agreement and m.kmeans_converged and m.max_center_deviation == 0.0
    # honest components {0,1} and {3,4}, two nodes per cluster, no label changes
    assert (m.leakage_perfect, m.leakage_bounded, m.leakage_full) == (4, 0, 0)
    assert (tmp_path / "centers.csv").read_text() == "2.0\n11.0\n"
    for name in ("metrics.csv", "detail.json", "leakage.jsonl", "labels.csv", "transcripts/public.bin"):
        assert (tmp_path / name).exists()


def test_no_coalition_all_perfect(tmp_path):
    cfg = small(corrupted="")
    outcome = run_experiment(cfg, tmp_path)
    m = outcome.metrics
    assert (m.leakage_perfect, m.leakage_bounded, m.leakage_full) == (12, 0, 0)


@pytest.mark.parametrize("protocol", ["sync", "gossip", "tree"])
def test_agreement_within_quantization(tmp_path, protocol):
    cfg = small(protocol)
    cfg.data_decimals, cfg.scale = 2, 100
    m = run_experiment(cfg, tmp_path).metrics
    assert m.label_agreement
    assert m.max_center_deviation <= m.quantization_bound


def test_averaging_failure_exit_code(tmp_path):
    cfg = small("sync")
    cfg.budget = 1
    outcome = run_experiment(cfg, tmp_path)
    assert outcome.exit_code == harness.EXIT_AVERAGING
    assert "error" in json.loads((tmp_path / "detail.json").read_text())


def test_kmeans_budget_exit_code(tmp_path):
    cfg = small("tree")
    cfg.T = 1
    cfg.init = [[-5.0], [-4.5]]
    outcome = run_experiment(cfg, tmp_path)
    assert outcome.exit_code == harness.EXIT_KMEANS


def test_disconnected_graph_rejected(tmp_path):
    cfg = small()
    cfg.topology_prob = 0.0
    with pytest.raises(ConfigError):
        run_experiment(cfg, tmp_path)


def test_corrupt_fraction(tmp_path):
    cfg = small()
    cfg.corrupted, cfg.corrupt_fraction = None, 0.25
    sc = harness.build_scenario(cfg)
    assert len(sc.partition.corrupted) == 3
    assert harness.build_scenario(cfg).partition == sc.partition


def test_default_output_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("SSKMEANS_OUTPUT_DIR", str(tmp_path))
    assert small().default_output() == tmp_path / "small"


def test_sweep(tmp_path):
    outcomes, summary = harness.sweep(small("tree"), 3, tmp_path)
    assert summary["trials"] == 3 and summary["failures"] == 0
    assert summary["label_agreement"] == 3
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(rows) == 4 and [r.split(",")[1] for r in rows[1:]] == ["4", "5", "6"]
    assert (tmp_path / "trial_002" / "metrics.csv").exists()
