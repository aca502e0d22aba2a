import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idnc_d2d.harness import (
    CSV_FIELDS,
    ExperimentConfig,
    HarnessError,
    audit_violations,
    draw_erasures,
    generate_instance,
    generate_topology,
    min_connectivity,
    run_episode,
    run_point,
    run_sweep,
    run_sweep_episodes,
    summarize,
)
from idnc_d2d.net_model import connectivity_index, is_connected


@pytest.mark.parametrize("kwargs", [
    dict(num_devices=1), dict(num_files=0), dict(connectivity=0.0), dict(connectivity=1.5),
    dict(mean_erasure=0.0), dict(mean_erasure=0.6), dict(iterations=0), dict(max_cluster_size=0),
    dict(schedulers=("nope",)), dict(sweep_param="Z"),
])
def test_config_rejects(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs)


def test_config_defaults_and_sweep():
    cfg = ExperimentConfig()
    assert cfg.p_bs == pytest.approx(0.2)
    sub = ExperimentConfig(sweep_param="U", sweep_values=(40.0,)).at(40.0)
    assert sub.num_devices == 40 and isinstance(sub.num_devices, int)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 40), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_topology_hits_target(U, frac, seed):
    lo = min_connectivity(U)
    C = lo + frac * (1 - lo)
    m = generate_topology(U, C, np.random.default_rng(seed))
    assert is_connected(m)
    assert (m == m.T).all() and m.diagonal().all()
    # one edge changes the index by 2/U^2
    assert abs(connectivity_index(m) - C) <= 1 / U**2 + 1e-12


def test_topology_rejects_impossible_index():
    with pytest.raises(HarnessError):
        generate_topology(30, 0.04, np.random.default_rng(0))


def test_erasures_in_range():
    e = draw_erasures(20, 0.02, 0.05, np.random.default_rng(1))
    off = e[~np.eye(20, dtype=bool)]
    assert off.min() >= 0.01 and off.max() <= 0.07
    assert (np.diag(e) == 0).all()


def test_instance_holds_every_file():
    cfg = ExperimentConfig(num_devices=10, num_files=40, connectivity=0.3, mean_erasure=0.5, pmp_factor=1.5)
    s = generate_instance(cfg, np.random.default_rng(2))
    assert s.held_mask == s.all_files_mask


@pytest.mark.parametrize("kind", ["general", "collision_free", "single_transmitter", "pmp"])
def test_episode_terminates_with_identity(kind):
    cfg = ExperimentConfig(num_devices=12, num_files=6, connectivity=0.3)
    s = generate_instance(cfg, np.random.default_rng(3))
    res = run_episode(s, kind, np.random.default_rng(4), p_bs=cfg.p_bs, audit=True)
    assert res.completion_time == max(m.completion_round for m in res.metrics)
    assert all(m.identity_gap() == 0 for m in res.metrics)
    assert all(audit_violations(r.weights) == 0 for r in res.rounds)


def test_round_cap():
    cfg = ExperimentConfig(num_devices=10, num_files=10, connectivity=0.3)
    s = generate_instance(cfg, np.random.default_rng(5))
    with pytest.raises(HarnessError):
        run_episode(s, "collision_free", np.random.default_rng(0), round_cap=2)


def test_audit_violation_counting():
    assert audit_violations({"general": 1.0, "collision_free": 2.0, "single_transmitter": 0.0}) == 1
    assert audit_violations({"general": 2.0, "collision_free": 1.0, "single_transmitter": -math.inf}) == 0
    assert audit_violations({"general": 2.0, "collision_free": 2.0 + 1e-12, "single_transmitter": 1.0}) == 0


def test_point_is_paired_and_deterministic():
    cfg = ExperimentConfig(num_devices=10, num_files=5, connectivity=0.4, schedulers=("collision_free", "pmp"))
    a = run_point(cfg, 0, 3, "none", 0.0)
    b = run_point(cfg, 0, 3, "none", 0.0)
    assert a == b
    assert [r.scheduler for r in a] == ["collision_free", "pmp"]


def test_sweep_serial_equals_parallel():
    cfg = ExperimentConfig(num_devices=8, num_files=4, iterations=3, schedulers=("collision_free", "pmp"),
                           sweep_param="C", sweep_values=(0.4, 0.7))
    serial = run_sweep(cfg)
    assert serial == run_sweep(cfg, jobs=2)
    lines = serial.splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert len(lines) == 1 + 2 * 2
    assert run_sweep(cfg, raw=True).count("\n") == 1 + 2 * 2 * 3


def test_summary_statistics():
    cfg = ExperimentConfig(num_devices=8, num_files=4, iterations=4, schedulers=("collision_free",))
    rows = run_sweep_episodes(cfg)
    (rec,) = summarize(cfg, rows)
    vals = np.array([r.completion_time for r in rows], dtype=float)
    assert float(rec["mean_completion"]) == pytest.approx(vals.mean(), abs=1e-6)
    assert float(rec["stderr"]) == pytest.approx(vals.std(ddof=1) / 2, abs=1e-6)


def test_complete_overlay_baseline():
    cfg = ExperimentConfig(num_devices=8, num_files=4, connectivity=0.4, iterations=1,
                           schedulers=("single_transmitter",), baseline_complete_overlay=True)
    (row,) = run_sweep_episodes(cfg)
    assert row.completion_time >= 1


def test_sparse_sixty_device_topology():
    m = generate_topology(60, 0.1, np.random.default_rng(9))
    assert abs(int(m.sum()) - 360) <= 2 and is_connected(m)
    assert generate_topology(5, 1.0, np.random.default_rng(0)).all()


def test_trivial_episodes(make):
    done = make(2, [(0, 1)], [{0}, {0}], 1, eps=0.0)
    assert run_episode(done, "collision_free", np.random.default_rng(0)).completion_time == 0
    one = make(2, [(0, 1)], [{0}, set()], 1, eps=0.0)
    assert run_episode(one, "general", np.random.default_rng(0)).completion_time == 1


def test_completion_at_least_demand():
    cfg = ExperimentConfig(num_devices=15, num_files=8, connectivity=0.3, mean_erasure=0.3)
    s = generate_instance(cfg, np.random.default_rng(6))
    res = run_episode(s, "single_transmitter", np.random.default_rng(7))
    assert res.completion_time >= max(len(w) for w in s.wants)


def test_mean_initial_demand():
    cfg = ExperimentConfig(num_devices=60, num_files=30, mean_erasure=0.1)
    demands = [len(w) for k in range(5) for w in generate_instance(cfg, np.random.default_rng(k)).wants]
    # each file is missing with the device's expected erasure, a little below E
    assert 2.0 < np.mean(demands) < 3.5
