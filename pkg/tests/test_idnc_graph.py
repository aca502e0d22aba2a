import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idnc_d2d.idnc_graph import (
    best_combination,
    build_base_station_graph,
    build_local_graph,
    combination_of,
    dump_graph,
    link_weight,
    parse_graph_dump,
)
from idnc_d2d.metrics import DeviceMetrics, RoundView, initial_metrics
from idnc_d2d.net_model import ModelError, bits, is_instantly_decodable, mask_of
from idnc_d2d.oracle import random_tiny_metrics, random_tiny_state


def view_of(state, metrics=None):
    return RoundView(state, metrics or initial_metrics(state))


def test_same_device_vertices_conflict(make):
    s = make(2, [(0, 1)], [{0, 1, 2}, {2}], 3)
    g = build_local_graph(view_of(s), 0)
    assert [(v.device, v.file) for v in g.vertices] == [(1, 0), (1, 1)]
    assert not g.adjacent(0, 1)


def test_same_file_vertices_adjacent(make):
    s = make(3, [(0, 1), (0, 2)], [{0}, set(), set()], 1)
    g = build_local_graph(view_of(s), 0)
    assert len(g) == 2 and g.adjacent(0, 1)
    c = combination_of(g, [0, 1])
    assert c.files == {0} and c.targets == {1, 2}


def test_cross_held_files_adjacent(make):
    s = make(3, [(0, 1), (0, 2)], [{0, 1}, {1}, {0}], 2)
    g = build_local_graph(view_of(s), 0)
    c = combination_of(g, range(len(g)))
    assert c.files == {0, 1} and c.targets == {1, 2}
    for u in c.targets:
        assert is_instantly_decodable(c.files, u, s)


def test_non_clique_rejected(make):
    s = make(2, [(0, 1)], [{0, 1, 2}, {2}], 3)
    with pytest.raises(ModelError):
        combination_of(build_local_graph(view_of(s), 0), [0, 1])
    empty = combination_of(build_local_graph(view_of(s), 0), [])
    assert empty.empty and not empty.targets


def test_no_vertex_for_complete_neighbour(make):
    s = make(2, [(0, 1)], [{0}, {0}], 1)
    assert len(build_local_graph(view_of(s), 0)) == 0
    assert best_combination(build_local_graph(view_of(s), 0)).empty


def test_single_critical_vertex_value(make):
    s = make(2, [(0, 1)], [{0}, set()], 1, eps=0.1)
    c = best_combination(build_local_graph(view_of(s), 0))
    assert c.critical_value == pytest.approx(math.log(10))
    assert c.critical_value == pytest.approx(2.3026, abs=1e-4)


def test_layer2_only_still_served(make):
    # device 1 demand 1, device 2 demand 3: device 1 is not critical
    s = make(3, [(0, 1), (0, 2)], [{0, 1, 2}, {1, 2}, set()], 3, eps=0.1)
    v = view_of(s)
    assert v.critical == {2}
    g = build_local_graph(v, 0, excluded=1 << 2)
    c = best_combination(g)
    assert c.critical_value == 0 and c.targets == {1}


def test_excluded_devices_dropped(seven_devices):
    g = build_local_graph(view_of(seven_devices), 3, excluded=1 << 1)
    assert {v.device for v in g.vertices} == {0, 4}


def test_dump_roundtrip(make):
    s = make(3, [(0, 1), (0, 2)], [{0, 1}, {1}, {0}], 2)
    g = build_local_graph(view_of(s), 0)
    text = dump_graph(g)
    assert text.splitlines()[0] == "# transmitter 0"
    back = parse_graph_dump(text)
    assert back.adj == g.adj and [v[:3] for v in back.vertices] == [v[:3] for v in g.vertices]


def test_base_station_graph(make):
    s = make(3, [(0, 1), (1, 2)], [{0, 1}, {1}, {0}], 2)
    g = build_base_station_graph(view_of(s), 0.2)
    assert {(v.device, v.file) for v in g.vertices} == {(1, 0), (2, 1)}
    assert all(v.weight == pytest.approx(link_weight(0.2)) for v in g.vertices)


def exhaustive_y(state, view, a):
    """Best critical value over every subset of the transmitter's files."""
    crit = view.critical_mask
    zone = [u for u in bits(state.coverage_mask[a] & state.wanting_mask) if u != a]
    best = 0.0
    held = bits(state.has_mask[a])
    for k in range(1, len(held) + 1):
        for files in combinations(held, k):
            m = mask_of(files)
            y = sum(link_weight(state.erasures[a, u]) for u in zone
                    if crit >> u & 1 and is_instantly_decodable(m, u, state))
            best = max(best, y)
    return best


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_best_combination_against_subsets(seed):
    rng = np.random.default_rng(seed)
    state = random_tiny_state(rng, max_devices=6, max_files=4)
    view = RoundView(state, random_tiny_metrics(state, rng))
    for a in range(state.num_devices):
        g = build_local_graph(view, a)
        c = best_combination(g)
        assert c.critical_value == pytest.approx(exhaustive_y(state, view, a), abs=1e-9)
        for u in c.targets:
            assert is_instantly_decodable(c.files, u, state)
        # extension keeps every critical target of the layer-1 optimum
        assert view.critical & c.targets == view.critical & {
            g.vertices[i].device for i in c.clique if g.vertices[i].layer == 1}


def test_flat_solve_counts_everyone(make):
    s = make(3, [(0, 1), (0, 2)], [{0, 1, 2}, {1, 2}, set()], 3, eps=0.1)
    g = build_local_graph(view_of(s), 0)
    c = best_combination(g, flat=True)
    assert c.critical_value + c.secondary_value == pytest.approx(2 * link_weight(0.1))
