import numpy as np
import pytest

from levifold import LiftEscaped, catalog, gauge_transform
from levifold.holonomy import (germinal_holonomy, holonomy, is_infinitesimally_trivial,
                               loop_integral_alpha)
from levifold.leaves import leaf_loop_around
from levifold.surface import point

FOUR_PI = 4 * np.pi


@pytest.fixture(scope="module")
def worm_loops():
    s = catalog("worm")
    return {t: leaf_loop_around(s, point(0, 2), t, ds=1e-2) for t in (1, -1)}


def test_flat_and_sheared_periods_vanish(flat, sheared):
    assert abs(loop_integral_alpha(flat, leaf_loop_around(flat, point(0.1j, 0), 1, ds=1e-2))) < 1e-9
    p = point(0.3j, 0.4 - 0.2j)
    assert abs(loop_integral_alpha(sheared, leaf_loop_around(sheared, p, 1, ds=1e-2))) < 1e-8


@pytest.mark.parametrize("g", ["wave", "zim_wre", "wre"])
def test_exact_gauges_have_zero_periods(flat, g):
    s = gauge_transform(flat, g)
    for p in s.sample(3, seed=2):
        assert abs(loop_integral_alpha(s, leaf_loop_around(s, p, 1, ds=1e-2))) < 1e-8


def test_worm_period(worm, worm_loops):
    r = holonomy(worm, worm_loops[1])
    assert abs(abs(r.alpha_period) - FOUR_PI) < 1e-3
    assert r.orientation == 1
    assert r.error_estimate < 1e-6
    # reversing the loop flips the sign
    assert holonomy(worm, worm_loops[-1]).alpha_period == pytest.approx(-r.alpha_period, rel=1e-10)


def test_period_with_error_estimate(worm, worm_loops):
    li = loop_integral_alpha(worm, worm_loops[1], with_error=True)
    assert li.value == pytest.approx(FOUR_PI, abs=1e-9)
    assert np.isfinite(li.error_estimate)


def test_worm_period_gauge_invariant(worm):
    base = loop_integral_alpha(worm, leaf_loop_around(worm, point(0, 2), 1, ds=1e-2))
    gw = gauge_transform(worm, "wave")
    other = loop_integral_alpha(gw, leaf_loop_around(gw, point(0, 2), 1, ds=1e-2))
    assert abs(other - base) < 1e-6


def test_flat_lift_closes(flat):
    loop = leaf_loop_around(flat, point(0.1j, 0.2), 1, ds=1e-2)
    r = germinal_holonomy(flat, loop, 1e-3)
    assert abs(r.lift_log_ratio) < 1e-9


def test_worm_lift_matches_period_first_order(worm, worm_loops):
    loop = worm_loops[-1]
    period = loop_integral_alpha(worm, loop)
    offsets = [1e-3, 5e-4, 2.5e-4]
    defects = [abs(germinal_holonomy(worm, loop, o).lift_log_ratio - period) for o in offsets]
    C = max(d / o for d, o in zip(defects, offsets))
    assert all(d <= C * o for d, o in zip(defects, offsets))
    assert defects[0] > defects[1] > defects[2]
    # halving the offset at least halves the defect
    assert all(b <= 0.5 * a * (1 + 1e-6) for a, b in zip(defects, defects[1:]))
    assert defects[-1] < 1e-3


def test_worm_lift_small_offset(worm, worm_loops):
    r = germinal_holonomy(worm, worm_loops[-1], 1e-4)
    assert abs(r.lift_log_ratio + FOUR_PI) < 1e-2
    assert r.to_dict()["turns"] == -1


def test_positive_turn_lift_escapes(worm, worm_loops):
    # one positive turn multiplies |z| by e^(4 pi); any offset leaves |z| < 1
    with pytest.raises(LiftEscaped):
        germinal_holonomy(worm, worm_loops[1], 1e-4)


def test_infinitesimal_triviality(flat, sheared, worm):
    r = is_infinitesimally_trivial(flat, point(0.2j, 0))
    assert r.trivial and r.topology == "plane" and all(abs(p) < 1e-9 for p in r.periods)
    assert is_infinitesimally_trivial(sheared, point(0.2j, 0.3)).trivial
    w = is_infinitesimally_trivial(worm, point(0, 2))
    assert not w.trivial and w.topology == "annulus"
    assert abs(abs(w.periods[0]) - FOUR_PI) < 1e-3
    assert w.to_dict()["trivial"] is False
