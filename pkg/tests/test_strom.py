import numpy as np
import pytest

from helpers import ROAD, car, cell_center, point_risk, scenario, strom_for
from weavestrf.errors import BlockedStation, OutsideStrom
from weavestrf.scene import Intent
from weavestrf.strom import Window, build_strom, corridor, corridor_bounds, is_free, write_heatmaps


def small_strom(obstacles, threshold=4.0, intent=Intent.THROUGH):
    sc = scenario(20.0, 0, 15.0, 1, obstacles, intent)
    return sc, build_strom(sc.scene(), sc.params, [Window(0.0, 60.0, ROAD.d_min, ROAD.d_max)] * 3, 0.5, 0.5,
                           threshold)


def test_empty_scene_mid_lane_cells_free():
    _, strom = small_strom([])
    sl = strom.slice(0)
    for lane in range(3):
        assert sl.free_at(30.0, ROAD.lane_center(lane))
    # the dashed-line peak stays below the threshold
    assert sl.free_at(30.0, ROAD.lane_lines[1].d)
    # the road boundary is occupied
    assert not sl.free_at(30.0, 0.1)


def test_cell_inside_obstacle_occupied():
    ob = car("a", 30.0, 1, 10.0)
    _, strom = small_strom([ob])
    assert not strom.slice(0).free_at(30.0, ROAD.lane_center(1))
    # the obstacle has moved 5 m by the next slice
    assert not strom.slice(1).free_at(35.0, ROAD.lane_center(1))


def test_cells_equal_point_evaluation():
    sc, strom = small_strom([car("a", 30.0, 1, 12.0), car("b", 10.0, 2, 18.0)], intent=Intent.MERGE)
    for k in range(len(strom)):
        sl = strom.slice(k)
        ref = np.array([[point_risk(sc, *cell_center(sl, i, j), sl.epoch) for j in range(sl.shape[1])]
                        for i in range(0, sl.shape[0], 7)])
        np.testing.assert_allclose(sl.risk[::7], ref, rtol=1e-12, atol=1e-12)
        assert np.array_equal(sl.occupied, sl.risk >= 4.0)


def test_is_free_cell_constant_and_edges():
    _, strom = small_strom([car("a", 30.0, 1, 0.0)])
    sl = strom.slice(0)
    d = ROAD.lane_center(1)
    i, j = sl.cell(30.0, d)
    s_c, d_c = cell_center(sl, i, j)
    assert is_free(strom, s_c, d_c, 0.0) == is_free(strom, s_c + 0.24, d_c, 0.0)
    # a point on a shared edge belongs to the lower-index cell
    assert sl.cell(10.0, d_c) == (19, j)
    assert sl.cell(10.0 + 1e-6, d_c) == (20, j)


def test_is_free_outside_window():
    _, strom = small_strom([])
    with pytest.raises(OutsideStrom, match="outside STROM"):
        is_free(strom, 100.0, 2.0, 0.0)
    with pytest.raises(OutsideStrom):
        is_free(strom, 10.0, 2.0, 5.0)


def test_corridor_examples():
    _, empty = small_strom([])
    lo, hi = corridor_bounds(empty, 0, 30.0, ROAD.lane_center(1))
    assert lo > ROAD.d_min and hi < ROAD.d_max
    assert lo <= ROAD.lane_center(0) and hi >= ROAD.lane_center(2)

    _, blocked = small_strom([car("a", 30.0, 1, 0.0)])
    c = corridor(blocked, 0, 30.0, ROAD.lane_center(0))
    sl = blocked.slice(0)
    i, _ = sl.cell(30.0, 0.0)
    occ = sl.occupied[i]
    j0 = int(round((c.lower - sl.d0) / sl.h))
    j1 = int(round((c.upper - sl.d0) / sl.h))
    assert not occ[j0:j1].any()
    assert c.upper <= ROAD.lane_lines[1].d + 0.5
    assert j1 == occ.size or occ[j1]


def test_corridor_fully_blocked():
    _, strom = small_strom([], threshold=0.0)
    with pytest.raises(BlockedStation, match="blocked station"):
        corridor_bounds(strom, 0, 30.0)


def test_threshold_monotone_free_sets():
    sc = scenario(20.0, 0, 15.0, 1, [car("a", 30.0, 1, 12.0), car("b", 5.0, 0, 16.0)], Intent.MERGE)
    frees = []
    for thr in (3.0, 4.0, 6.0):
        strom = strom_for(sc, thr, n_slices=4).build_all()
        frees.append([~strom.slice(k).occupied for k in range(len(strom))])
    for lo, hi in zip(frees, frees[1:]):
        for a, b in zip(lo, hi):
            assert np.all(b[a])


def test_build_order_irrelevant():
    sc = scenario(20.0, 0, 15.0, 1, [car("a", 30.0, 1, 12.0)])
    a = strom_for(sc, n_slices=4)
    b = strom_for(sc, n_slices=4)
    for k in (3, 0, 2, 1):
        b.slice(k)
    for k in range(4):
        assert np.array_equal(a.slice(k).risk, b.slice(k).risk)


def test_heatmaps_written(tmp_path):
    _, strom = small_strom([car("a", 30.0, 1, 12.0)])
    paths = write_heatmaps(strom, tmp_path)
    assert len(paths) == 3
    header = paths[0].read_text().splitlines()[0]
    assert header == "s,d,risk,occupied"
