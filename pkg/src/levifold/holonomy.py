"""Periods of alpha along leaf loops and germinal holonomy by lifting.

The period of alpha around a loop is the infinitesimal holonomy of the
loop.  It is compared with the germinal holonomy, measured by lifting the
loop to a nearby leaf and reading off how far along T the lift ends up.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import LeftRegion, LiftEscaped
from .frame import alpha_leafwise, frame_field
from .leaves import flow_T, leaf_loop_around, polar_curve, trace_curve

TRIVIAL_TOL = 1e-6


@dataclass
class LoopIntegral:
    value: float
    error_estimate: float


@dataclass
class HolonomyResult:
    loop: object
    alpha_period: float
    lift_log_ratio: Optional[float]
    orientation: int
    offset: Optional[float] = None
    lift_time: Optional[float] = None
    error_estimate: float = 0.0

    def to_dict(self):
        return {"alpha_period": self.alpha_period, "abs_period": abs(self.alpha_period),
                "lift_log_ratio": self.lift_log_ratio, "orientation": self.orientation,
                "offset": self.offset, "lift_time": self.lift_time,
                "error_estimate": self.error_estimate,
                "closure_defect": float(self.loop.closure_defect), "turns": int(self.loop.turns)}


@dataclass
class TrivialityResult:
    trivial: bool
    periods: list
    topology: str

    def to_dict(self):
        return {"trivial": self.trivial, "periods": [float(p) for p in self.periods],
                "topology": self.topology}


def alpha_along(surface, path):
    """alpha(velocity) at every node of a traced path."""
    a = alpha_leafwise(surface, path.points)
    fr = frame_field(surface, path.points)
    v = path.velocity
    return a[..., 0] * np.sum(fr.e1 * v, axis=-1) + a[..., 1] * np.sum(fr.e2 * v, axis=-1)


def _trapezoid(f, closed):
    n = len(f) - 1
    h = 1.0 / n
    if closed:
        return h * np.sum(f[:-1])
    return h * (np.sum(f) - 0.5 * (f[0] + f[-1]))


def loop_integral_alpha(surface, loop, with_error=False):
    """Integral of alpha over a traced loop.

    Uses the trapezoid rule in the loop parameter (spectrally accurate for
    closed loops) with a Richardson-style error estimate from the
    half-resolution rule.
    """
    path = loop.path if hasattr(loop, "path") else loop
    f = alpha_along(surface, path)
    closed = getattr(loop, "closed", False)
    full = _trapezoid(f, closed)
    if len(f) % 2 == 1 and len(f) >= 5:
        half = _trapezoid(f[::2], closed)
        order = 1 if closed else 3
        err = abs(full - half) / order
    else:
        err = float("nan")
    full = float(full)
    return LoopIntegral(full, float(err)) if with_error else full


def _transverse_residual(surface, p0, w_target_curve, q, s, ds):
    """eta-coordinate of q relative to the leaf through flow_T(p0, s) over the end of the loop."""
    x = flow_T(surface, p0, s, steps=max(1, int(np.ceil(abs(s) / 1e-3))))
    # carry x along its leaf back to the w of the lifted endpoint
    w_x = complex(x[2], x[3])
    w_q = complex(q[2], q[3])
    if abs(w_x - w_q) > 1e-15:
        x = trace_curve(surface, x, polar_curve(w_x, w_q, center=0.0) if w_target_curve == "polar"
                        else _segment(w_x, w_q), ds=ds, check_region=False).points[-1]
    eta = frame_field(surface, q).eta
    return float(np.dot(eta, q - x))


def _segment(w0, w1):
    from .leaves import straight_curve
    return straight_curve(w0, w1)


def germinal_holonomy(surface, loop, offset, ds=None):
    """Lift ``loop`` to the leaf through the T-flow point at time ``offset``.

    The lift follows the foliation over the same w-curve as the base loop.
    Its endpoint lies on the leaf through ``flow_T(p0, s)`` for a unique
    small ``s``; that T-time is found by a scalar root solve and the result
    is ``log(s / offset)``.

    Raises
    ------
    LiftEscaped
        If the lifted path or the matching transversal leaves K.
    """
    path = loop.path
    p0 = path.points[0]
    ds = path.ds if ds is None else ds
    start = flow_T(surface, p0, offset, steps=max(1, int(np.ceil(abs(offset) / 1e-4))))
    try:
        lifted = trace_curve(surface, start, loop.curve, ds=ds)
    except LeftRegion as exc:
        raise LiftEscaped(f"lift left the Levi-flat region after {exc.steps_done} steps") from exc
    q = lifted.points[-1]
    kind = "polar" if surface.leaf_path == "polar" else "straight"
    # linear guess from the eta-displacement at p0, then bracket and refine
    guess = float(np.dot(frame_field(surface, p0).eta, q - p0))
    if guess == 0.0 or np.sign(guess) != np.sign(offset):
        guess = offset

    def r(s):
        return _transverse_residual(surface, p0, kind, q, s, ds)

    lo, hi = guess / 2.0, guess * 2.0
    try:
        for _ in range(60):
            if r(lo) * r(hi) <= 0:
                break
            lo, hi = lo / 2.0, hi * 2.0
        else:
            raise LiftEscaped("no bracketing T-time found for the lifted endpoint")
        s = brentq(r, lo, hi, xtol=1e-16 * max(1.0, abs(guess)) + abs(guess) * 1e-13, rtol=1e-14)
    except LeftRegion as exc:
        raise LiftEscaped("matching transversal left the working box") from exc
    if s / offset <= 0:
        raise LiftEscaped("lift reversed orientation")
    period = loop_integral_alpha(surface, loop, with_error=True)
    return HolonomyResult(loop, period.value, float(np.log(s / offset)), int(np.sign(loop.turns)),
                          offset, float(s), period.error_estimate)


def holonomy(surface, loop):
    """Period only (no lift)."""
    period = loop_integral_alpha(surface, loop, with_error=True)
    return HolonomyResult(loop, period.value, None, int(np.sign(loop.turns)),
                          error_estimate=period.error_estimate)


def is_infinitesimally_trivial(surface, seed, loops=None, ds=1e-2, tol=TRIVIAL_TOL):
    """Whether all generator loops of the leaf through ``seed`` have zero period.

    Without explicit ``loops`` the generators are taken from the leaf
    topology declared by the surface chart: one turn around the hole for an
    annulus, none for simply connected leaves (where a contractible test loop
    is still integrated as a sanity check).
    """
    chart = surface.chart
    topology = chart.topology(chart.label(seed)) if chart is not None else "unknown"
    if loops is None:
        loops = []
        if topology == "annulus" or (topology == "plane" and surface.angular):
            loops = [leaf_loop_around(surface, seed, 1, ds=ds)]
    periods = [loop_integral_alpha(surface, lp) for lp in loops]
    return TrivialityResult(all(abs(p) < tol for p in periods), periods, topology)
