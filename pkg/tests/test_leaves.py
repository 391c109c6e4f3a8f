import csv

import numpy as np
import pytest

from levifold import LeftRegion
from levifold.leaves import (CLOSURE_TOL, PATH_TOL, TANGENCY_TOL, detect_spiral, flow_T, leaf_loop_around,
                             leaf_step, polar_curve, straight_curve, trace_curve, trace_many, trace_to_w,
                             transversal_at, transversal_point_with_label, write_path_csv)
from levifold.surface import point

from oracles import WORM_MONODROMY, worm_label


def test_flat_leaf_step(flat):
    p = point(0.3j, 0.2 - 0.1j)
    q = leaf_step(flat, p, (1.0, 0.0), 0.1)
    np.testing.assert_allclose(q, point(0.3j, 0.3 - 0.1j), atol=1e-15)


def test_worm_leaf_step_stays_on_leaf(worm):
    p = worm.chart.forward(0.3, 2.0)
    for _ in range(10):
        p = leaf_step(worm, p, (0.6, 0.8), 0.05)
        assert abs(worm_label(p) - 0.3) < 1e-8


def test_leaf_step_rk4_order(worm):
    p0 = worm.chart.forward(0.3, 2.0)
    errs = []
    for ds in (0.1, 0.05, 0.025):
        p = p0.copy()
        for _ in range(int(round(0.4 / ds))):
            p = leaf_step(worm, p, (0.6, 0.8), ds)
        errs.append(abs(worm_label(p) - 0.3))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 3.8), orders


def test_leaf_step_leaving_region(worm):
    with pytest.raises(LeftRegion):
        leaf_step(worm, point(0, 1.01), (-1.0, 0.0), 0.1)


def test_worm_annulus_loop_closes(worm):
    loop = leaf_loop_around(worm, point(0, 2), 1)
    assert loop.closed and loop.closure_defect < 1e-8
    assert loop.path.max_rho_defect < PATH_TOL
    assert loop.path.max_eta_defect < TANGENCY_TOL


def test_worm_monodromy(worm):
    c = 1e-6
    loop = leaf_loop_around(worm, worm.chart.forward(c, 2.0), 1, ds=1e-2)
    end = loop.path.points[-1]
    assert worm_label(end) / c == pytest.approx(WORM_MONODROMY, rel=1e-4)
    # on the universal cover the label is constant along the path
    lab = worm_label(loop.path.points, loop.path.theta)
    assert np.max(np.abs(lab - c)) < 1e-6 * max(1.0, loop.path.length)
    assert not loop.closed


def test_worm_negative_turn_contracts(worm):
    c = 0.01
    loop = leaf_loop_around(worm, worm.chart.forward(c, 2.0), -1, ds=1e-2)
    assert worm_label(loop.path.points[-1]) / c == pytest.approx(1 / WORM_MONODROMY, rel=1e-4)


def test_positive_turn_leaves_region(worm):
    with pytest.raises(LeftRegion):
        leaf_loop_around(worm, worm.chart.forward(0.01, 2.0), 1, ds=1e-2)


def test_flat_loop(flat):
    loop = leaf_loop_around(flat, point(0.2j, 0.5 + 0.5j), 1, ds=1e-2)
    assert loop.closure_defect < 1e-10
    np.testing.assert_allclose(loop.path.points[:, :2], [[0, 0.2]] * len(loop.path.points), atol=1e-15)


def test_loop_argument_checks(flat, sphere):
    with pytest.raises(ValueError):
        leaf_loop_around(flat, point(0, 0), 0)
    with pytest.raises(ValueError):
        leaf_loop_around(sphere, point(1, 0), 1)


def test_detect_spiral(worm, flat):
    assert detect_spiral(worm, point(0, 2), max_turns=2, ds=1e-2).kind == "closed"
    r = detect_spiral(worm, worm.chart.forward(1e-6, 2.0), max_turns=2, orientation=-1, ds=1e-2)
    assert r.kind == "spiral"
    assert r.rate == pytest.approx(np.exp(-4 * np.pi), rel=1e-4)
    assert detect_spiral(flat, point(0.1j, 0), max_turns=2, ds=1e-2).kind == "closed"
    up = detect_spiral(worm, worm.chart.forward(1e-6, 2.0), max_turns=3, orientation=1, ds=1e-2)
    assert up.kind == "spiral-exit"
    assert up.rate == pytest.approx(WORM_MONODROMY, rel=1e-4)


@pytest.mark.parametrize("name", ["flat", "sheared_flat", "worm"])
def test_path_defects_and_chart_consistency(name, request):
    s = request.getfixturevalue({"flat": "flat", "sheared_flat": "sheared", "worm": "worm"}[name])
    for k, p in enumerate(s.sample(4, seed=11)):
        w = p[2] + 1j * p[3]
        target = w * np.exp(-0.8j) * (1.2 if name == "worm" and abs(w) < 3 else 0.8)
        if name != "worm":
            target = w + (0.4 - 0.3j) * (-1) ** k
        path = trace_to_w(s, p, target)
        assert path.max_rho_defect < PATH_TOL
        assert path.max_eta_defect < TANGENCY_TOL
        lab = path.labels(s)
        assert np.max(np.abs(lab - lab[0])) < 1e-6 * max(1.0, path.length)
        assert abs(complex(*path.points[-1, 2:]) - target) < 1e-12


def test_polar_and_straight_curves():
    c = polar_curve(2.0, None, dtheta=2 * np.pi)
    assert c.length == pytest.approx(4 * np.pi)
    assert abs(c.w(1.0) - 2.0) < 1e-14
    s = straight_curve(0, 3 + 4j)
    assert s.length == 5.0 and s.w(0.5) == 1.5 + 2j


def test_trace_many_agrees_with_single_paths(worm):
    starts = worm.chart.forward(np.array([0.0, 0.05, -0.02]), np.array([2.0, 1.5 + 0.5j, 3.0 - 1j]))
    targets = np.array([3.0 + 1j, 1.2 - 0.6j, 2.0 - 2j])
    pts, vel, ts = trace_many(worm, starts, targets, ds=1e-2)
    assert pts.shape[1:] == (3, 4) and len(ts) == len(pts)
    for j in range(3):
        single = trace_to_w(worm, starts[j], targets[j], ds=1e-3)
        np.testing.assert_allclose(pts[-1, j], single.points[-1], atol=1e-8)


def test_flow_T_crosses_leaves(worm):
    p = point(0, 2)
    q = flow_T(worm, p, 1e-3)
    assert abs(worm.value(q)) < 1e-13
    assert worm_label(q) != 0.0
    # eta(T) = 1 means the flow time equals the integral of eta along the curve
    from levifold.frame import frame_field
    assert np.dot(frame_field(worm, p).eta, q - p) == pytest.approx(1e-3, rel=1e-3)


def test_flat_transversal(flat):
    tr = transversal_at(flat, point(0, 0.5j), 0.2, ds=1e-2)
    np.testing.assert_allclose(tr.points[:, [0, 2, 3]], [[0, 0, 0.5]] * len(tr.points), atol=1e-14)
    d = np.diff(tr.points[:, 1])
    assert np.all(d > 0) or np.all(d < 0)
    assert tr.arclength[0] == pytest.approx(-0.2) and tr.arclength[-1] == pytest.approx(0.2)
    np.testing.assert_allclose(tr.base, point(0, 0.5j))


def test_worm_transversal_monotone_labels(worm):
    tr = transversal_at(worm, point(0, 2), 0.05, ds=1e-3)
    lab = worm_label(tr.points)
    d = np.diff(lab)
    assert np.all(d > 0) or np.all(d < 0)
    q = transversal_point_with_label(worm, tr, 1e-4)
    assert worm_label(q) == pytest.approx(1e-4, rel=1e-9)


def test_transversal_endpoints_converge_linearly(worm):
    p = point(0, 2)
    dist = [np.linalg.norm(transversal_at(worm, p, h, ds=h / 4).points[-1] - p) for h in (0.02, 0.01, 0.005)]
    ratios = np.array(dist[:-1]) / np.array(dist[1:])
    np.testing.assert_allclose(ratios, 2.0, rtol=1e-2)


def test_write_path_csv(flat, tmp_path):
    loop = leaf_loop_around(flat, point(0, 0), 1, ds=0.1)
    f = tmp_path / "p.csv"
    write_path_csv(loop, f)
    rows = list(csv.reader(open(f)))
    assert rows[0] == ["step", "z_re", "z_im", "w_re", "w_im", "rho_defect", "eta_defect"]
    assert len(rows) == len(loop.path.points) + 1


def test_closure_tolerance_constant():
    assert CLOSURE_TOL == 1e-8


def test_trace_curve_rejects_start_outside(worm):
    with pytest.raises(LeftRegion):
        trace_curve(worm, point(0, 0.95), straight_curve(0.95, 2.0))
