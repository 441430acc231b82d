import math

import numpy as np
import pytest

from helpers import ROAD, car, random_scenario, sampler_violations, scenario, strom_for
from oracles import supercover_cells
from weavestrf.config import PlannerConfig
from weavestrf.errors import LayerStarved, NoFeasibleLaneChange, PlanningError
from weavestrf.sampler import (CandidateSampler, SampleNode, StromSlice, generate_candidates, global_sample_layer,
                               lateral_lattice, reach_bounds, segment_risk_check)
from weavestrf.strom import _edge_index

CFG = PlannerConfig()


def grid_slice(occ, s0=0.0, d0=0.0, h=0.5):
    occ = np.asarray(occ, dtype=bool)
    risk = np.where(occ, 10.0, 0.0)
    return StromSlice(0.0, s0, d0, h, risk, np.zeros_like(risk), 4.0)


def test_reach_bounds_examples():
    r = reach_bounds(SampleNode(0, 0.0, 0.0, 15.0, 0.0), 0.5, 4.0, 6.0, 2.0)
    assert r.s_hi == pytest.approx(8.0)
    assert r.s_lo == pytest.approx(6.75)
    assert (r.d_lo, r.d_hi) == (-0.25, 0.25)
    r0 = reach_bounds(SampleNode(0, 3.0, 0.0, 0.0, 0.0), 0.5, 4.0, 6.0, 2.0)
    assert r0.s_lo == 3.0


def test_lateral_lattice_crowds_toward_target():
    pts = lateral_lattice(0.0, 6.0, 7, 6.0)
    assert pts[0] == 0.0 and pts[-1] == 6.0
    gaps = np.diff(pts)
    assert np.all(gaps > 0) and np.all(np.diff(gaps) < 0)


def test_single_parent_empty_scene_full_lattice():
    sc = scenario(20.0, 1, 15.0, 0, [])
    strom = strom_for(sc, n_slices=2)
    parent = SampleNode(0, 20.0, ROAD.lane_center(1), 15.0, 0.0)
    nodes, _ = global_sample_layer([parent], strom.slice(1), 1, CFG, ROAD.lane_center(0))
    assert len(nodes) == CFG.K_s * CFG.K_d
    assert all(n.parents == [0] for n in nodes)


def test_overlap_node_has_both_parents():
    sc = scenario(20.0, 1, 15.0, 0, [])
    strom = strom_for(sc, n_slices=2)
    d = ROAD.lane_center(1)
    parents = [SampleNode(0, 20.0, d, 15.0, 0.0), SampleNode(0, 20.5, d + 0.2, 15.0, 0.0)]
    nodes, rects = global_sample_layer(parents, strom.slice(1), 1, CFG, ROAD.lane_center(0))
    both = [n for n in nodes if rects[0].contains(n.s, n.d) and rects[1].contains(n.s, n.d)]
    assert both
    assert all(sorted(n.parents) == [0, 1] for n in both)


def test_occupied_nodes_excluded():
    occ = np.zeros((80, 24), dtype=bool)
    occ[:, 15] = True
    sl = grid_slice(occ, s0=-10.0)
    # lateral drift carries the reach rectangle across the occupied strip d in (7.5, 8]
    parent = SampleNode(0, 0.0, 5.5, 15.0, 4.0)
    nodes, _ = global_sample_layer([parent], sl, 1, CFG, 9.0)
    assert 0 < len(nodes) < CFG.K_s * CFG.K_d
    for n in nodes:
        assert sl.free_at(n.s, n.d)


def test_layer_starved():
    sl = grid_slice(np.ones((80, 24), dtype=bool), s0=-10.0)
    with pytest.raises(LayerStarved, match="layer starved"):
        global_sample_layer([SampleNode(0, 0.0, 5.5, 15.0, 0.0)], sl, 1, CFG, 2.0)


def test_segment_check_examples():
    occ = np.zeros((10, 10), dtype=bool)
    occ[5, 5] = True
    sl = grid_slice(occ)
    a = SampleNode(0, 0.75, 0.75, 0, 0)
    assert segment_risk_check(a, SampleNode(1, 1.25, 0.75, 0, 0), sl)
    assert not segment_risk_check(SampleNode(0, 2.25, 2.25, 0, 0), SampleNode(1, 3.25, 3.25, 0, 0), sl)


def test_segment_check_matches_supercover():
    rng = np.random.default_rng(4)
    for _ in range(400):
        occ = rng.random((16, 12)) < 0.08
        sl = grid_slice(occ)
        a = rng.uniform([0, 0], [8, 6])
        b = rng.uniform([0, 0], [8, 6])
        cells = supercover_cells(0.0, 0.0, 0.5, a, b)
        expected = all(not occ[min(max(i, 0), 15), min(max(j, 0), 11)] for i, j in cells)
        got = segment_risk_check(SampleNode(0, *a, 0, 0), SampleNode(1, *b, 0, 0), sl)
        assert got == expected


def test_ego_already_on_target():
    sc = scenario(20.0, 1, 15.0, 1, [])
    g = generate_candidates(20.0, ROAD.lane_center(1), 15.0, 0.0, strom_for(sc), CFG, ROAD.lane_center(1))
    assert g.terminal == 0 and g.n_paths() == 1


def test_empty_road_adjacent_change_within_eight_layers():
    sc = scenario(20.0, 0, 15.0, 1, [])
    g = generate_candidates(20.0, ROAD.lane_center(0), 15.0, 0.0, strom_for(sc), CFG, ROAD.lane_center(1))
    assert g.terminal <= 8
    assert g.n_paths() >= 1


def test_fully_blocked_corridor():
    sc = scenario(20.0, 0, 15.0, 1, [])
    strom = strom_for(sc, threshold=2.0)
    # with the threshold under the dashed-line peak the target lane can never be entered
    with pytest.raises(NoFeasibleLaneChange, match="no feasible lane change"):
        generate_candidates(20.0, ROAD.lane_center(0), 15.0, 0.0, strom, CFG, ROAD.lane_center(1))


def test_start_cell_occupied():
    sc = scenario(20.0, 0, 15.0, 1, [car("x", 20.0, 0, 15.0)])
    with pytest.raises(PlanningError, match="start cell occupied"):
        CandidateSampler(20.0, ROAD.lane_center(0), 15.0, 0.0, strom_for(sc), CFG, ROAD.lane_center(1))


def test_path_count_bound():
    sc = scenario(20.0, 0, 15.0, 1, [car("a", 45.0, 0, 10.0)])
    g = generate_candidates(20.0, ROAD.lane_center(0), 15.0, 0.0, strom_for(sc), CFG, ROAD.lane_center(1))
    assert g.n_paths() <= math.prod(len(layer) for layer in g.layers)


def test_random_scenes_sound():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(10):
        sc = random_scenario(rng)
        strom = strom_for(sc)
        try:
            sampler = CandidateSampler(sc.ego.pos.s, sc.ego.pos.d, sc.ego.v, 0.0, strom, sc.planner, sc.d_tgt,
                                       footprint=sc.ego.footprint)
        except PlanningError:
            continue
        try:
            sampler.graph()
        except PlanningError:
            pass
        assert sampler_violations(sc, sampler.layers, strom, sc.planner, {}) == []
        checked += 1
    assert checked >= 5


def test_graph_json_round_trip():
    import json
    sc = scenario(20.0, 0, 15.0, 1, [])
    g = generate_candidates(20.0, ROAD.lane_center(0), 15.0, 0.0, strom_for(sc), CFG, ROAD.lane_center(1))
    data = json.loads(g.to_json())
    assert data["terminal"] == g.terminal
    assert len(data["layers"]) == len(g.layers)


def test_edge_index_rule():
    assert _edge_index(1.0, 0.0, 0.5, 10) == 1
    assert _edge_index(1.0 + 1e-6, 0.0, 0.5, 10) == 2
