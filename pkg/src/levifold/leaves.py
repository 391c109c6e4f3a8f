"""Tracing leaves of the Levi foliation, loops on leaves and transversals.

Two integrators are provided.  :func:`leaf_step` is the generic one: an RK4
step along a fixed combination of the unit complex-tangential fields
``e1, e2`` followed by Newton projection onto {rho = 0}.  The steered tracer
used for paths and loops instead prescribes the motion of ``w`` and solves
for ``z`` from the tangency condition ``rho_z dz + rho_w dw = 0``; this keeps
``w`` exactly on the requested curve, which is what makes loop closure and
turn counting unambiguous.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import jets
from .errors import LeftRegion, SingularGradient
from .frame import frame_field
from .surface import as_complex, point, project_to_surface

PATH_TOL = 1e-7
TANGENCY_TOL = 1e-6
CLOSURE_TOL = 1e-8


class WCurve:
    """A curve t -> w(t), t in [0, 1], with derivative and unwrapped angle."""

    def __init__(self, w, dw, theta, length):
        self.w = w
        self.dw = dw
        self.theta = theta
        self.length = length


@dataclass
class LeafPath:
    """Points along a leaf with their defect diagnostics.

    ``param`` runs over [0, 1] and ``velocity`` is d(point)/d(param), exactly
    tangent to the leaf; ``theta`` is the unwrapped
    argument of ``w`` along the path, used to pick the branch of multivalued
    leaf labels.
    """

    points: np.ndarray
    param: np.ndarray
    theta: np.ndarray
    ds: float
    rho_defect: np.ndarray
    eta_defect: np.ndarray
    velocity: Optional[np.ndarray] = None

    @property
    def max_rho_defect(self):
        return float(np.max(self.rho_defect))

    @property
    def max_eta_defect(self):
        return float(np.max(self.eta_defect))

    @property
    def length(self):
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=-1)))

    @property
    def integrated_eta_defect(self):
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=-1)
        e = 0.5 * (self.eta_defect[1:] + self.eta_defect[:-1])
        return float(np.sum(e * seg))

    def labels(self, surface):
        """Chart labels along the path on the branch selected by ``theta``."""
        return surface.chart.label(self.points, self.theta)

    def to_rows(self):
        z, w = as_complex(self.points)
        return [(i, z[i].real, z[i].imag, w[i].real, w[i].imag, self.rho_defect[i], self.eta_defect[i])
                for i in range(len(self.points))]


@dataclass
class LeafLoop:
    path: LeafPath
    turns: int
    closure_defect: float
    center: complex = 0.0
    curve: Optional[WCurve] = None

    @property
    def closed(self):
        return self.closure_defect < CLOSURE_TOL


@dataclass
class SpiralResult:
    kind: str  # closed | spiral | spiral-exit | inconclusive
    rate: Optional[float] = None
    labels: list = field(default_factory=list)
    closure_defects: list = field(default_factory=list)

    def to_dict(self):
        return {"kind": self.kind, "rate": self.rate, "labels": [float(c) for c in self.labels],
                "closure_defects": [float(d) for d in self.closure_defects]}


@dataclass
class Transversal:
    """Integral curve of T through a base point.

    ``time`` is the flow parameter of T itself (so ``eta`` of the velocity is
    1) and ``arclength`` the Euclidean length, both signed and zero at the
    base point ``points[center]``.
    """

    points: np.ndarray
    time: np.ndarray
    arclength: np.ndarray
    center: int

    @property
    def base(self):
        return self.points[self.center]


# -- helpers --------------------------------------------------------------------

def _check_region(surface, p, steps_done=0):
    inside = surface.in_box(p)
    if surface.levi_flat is not None:
        inside = inside & surface.levi_flat(p)
    if not np.all(inside):
        raise LeftRegion(f"left the Levi-flat region of {surface.name}", point=np.array(p),
                         steps_done=steps_done)


def _eta_defect(surface, pts, vel):
    """|eta(v)| / |v| at each point."""
    fr = frame_field(surface, pts)
    num = np.abs(np.sum(fr.eta * vel, axis=-1))
    return num / np.maximum(np.linalg.norm(vel, axis=-1), 1e-300)


def _tangent_dir(surface, p, d):
    fr = frame_field(surface, p)
    return d[0] * fr.e1 + d[1] * fr.e2


def leaf_step(surface, p, dir, ds):
    """One RK4 step along ``dir[0] e1 + dir[1] e2`` then projection to {rho = 0}.

    Raises
    ------
    LeftRegion
        If the result leaves the working box or the Levi-flat region.
    """
    d = np.asarray(dir, dtype=float)
    p = np.asarray(p, dtype=float)
    k1 = _tangent_dir(surface, p, d)
    k2 = _tangent_dir(surface, p + 0.5 * ds * k1, d)
    k3 = _tangent_dir(surface, p + 0.5 * ds * k2, d)
    k4 = _tangent_dir(surface, p + ds * k3, d)
    q = p + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    q = project_to_surface(surface, q)
    _check_region(surface, q)
    return q


# -- steered tracing over a curve in the w-plane ---------------------------------

def _dz(surface, p, dw):
    g = jets.evaluate(surface.rho, p, order=1).grad
    rz = g[..., 0] - 1j * g[..., 1]
    if np.any(np.abs(rz) < 1e-14):
        raise SingularGradient("leaf is not a graph over w here (rho_z = 0)")
    return -((g[..., 2] - 1j * g[..., 3]) / rz) * dw


def _project_z(surface, p, iterations=2):
    """Newton in z alone: keeps w on the prescribed curve."""
    for _ in range(iterations):
        j = jets.evaluate(surface.rho, p, order=1)
        gz = j.grad[..., 0:2]
        p = p.copy()
        p[..., 0:2] -= (j.val / np.sum(gz * gz, axis=-1))[..., None] * gz
    return p


def polar_curve(w0, w1=None, dtheta=None, center=0.0):
    """Interpolate log|w - center| and arg(w - center) linearly.

    ``dtheta`` overrides the angular change (default: principal difference);
    ``w1 = None`` means a circle through ``w0`` turning by ``dtheta``.
    """
    a0 = complex(w0) - center
    r0, t0 = abs(a0), np.angle(a0)
    if w1 is None:
        lr = 0.0
    else:
        a1 = complex(w1) - center
        lr = np.log(abs(a1) / r0)
        if dtheta is None:
            dtheta = np.angle(a1 / a0)
    dtheta = float(dtheta or 0.0)

    def w(t):
        return center + r0 * np.exp(lr * t + 1j * (t0 + dtheta * t))

    def dw(t):
        return (w(t) - center) * (lr + 1j * dtheta)

    def theta(t):
        return t0 + dtheta * t

    # length of a log spiral
    length = r0 * abs(lr + 1j * dtheta) * (abs(np.expm1(lr)) / abs(lr) if abs(lr) > 1e-12 else 1.0)
    return WCurve(w, dw, theta, length)


def straight_curve(w0, w1):
    w0, w1 = complex(w0), complex(w1)

    def w(t):
        return w0 + (w1 - w0) * t

    def dw(t):
        return (w1 - w0) + 0.0 * t

    return WCurve(w, dw, None, abs(w1 - w0))


def trace_curve(surface, seed, curve, ds=1e-3, check_region=True):
    """Follow the leaf through ``seed`` over the w-curve ``curve``.

    The number of steps is ``ceil(length / ds)`` (at least 4); the z-part is
    integrated by RK4 and reprojected onto {rho = 0} after each step.
    """
    seed = np.asarray(seed, dtype=float)
    n = max(4, int(np.ceil(curve.length / ds)))
    n += n % 2  # even, so the half-resolution rule is available
    h = 1.0 / n
    ts = np.linspace(0.0, 1.0, n + 1)
    pts = np.empty((n + 1, 4))
    z = complex(seed[0], seed[1])
    pts[0] = point(z, curve.w(0.0))
    if check_region:
        _check_region(surface, pts[0])

    def f(t, z):
        return _dz(surface, point(z, curve.w(t)), curve.dw(t))

    for i in range(n):
        t = ts[i]
        k1 = f(t, z)
        k2 = f(t + 0.5 * h, z + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, z + 0.5 * h * k2)
        k4 = f(t + h, z + h * k3)
        q = point(z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), curve.w(ts[i + 1]))
        q = _project_z(surface, q)
        if check_region:
            _check_region(surface, q, steps_done=i + 1)
        pts[i + 1] = q
        z = complex(q[0], q[1])
    zc, wc = as_complex(pts)
    dw = curve.dw(ts)
    dz = _dz(surface, pts, dw)
    vel = point(dz, dw)
    theta = np.unwrap(np.angle(wc)) if curve.theta is None else curve.theta(ts)
    return LeafPath(pts, ts, np.asarray(theta, dtype=float), ds,
                    np.abs(surface.value(pts)), _eta_defect(surface, pts, vel), vel)


def leaf_curve(surface, w0, w1, dtheta=None):
    """The default w-curve for the surface: polar for angular surfaces around 0."""
    if surface.leaf_path == "polar":
        return polar_curve(w0, w1, dtheta=dtheta)
    return straight_curve(w0, w1)


def trace_to_w(surface, seed, w_target, ds=1e-3, dtheta=None):
    """Path on the leaf of ``seed`` ending over ``w_target``."""
    _, w0 = as_complex(seed)
    return trace_curve(surface, seed, leaf_curve(surface, complex(w0), complex(w_target), dtheta), ds)


def leaf_loop_around(surface, seed, turns, ds=1e-3, radius=0.5):
    """Follow the leaf through ``seed`` while w goes ``turns`` times around a circle.

    For polar surfaces (the worm) the circle is |w| = |w(seed)|, concentric
    with the hole of the annulus; otherwise it is the circle of the given
    ``radius`` whose rightmost point is w(seed).

    Raises
    ------
    LeftRegion
        If the leaf leaves the Levi-flat region before completing the turns.
    """
    if not surface.angular:
        raise ValueError(f"{surface.name} declares no angular coordinate")
    turns = int(turns)
    if turns == 0:
        raise ValueError("turns must be non-zero")
    z0, w0 = as_complex(seed)
    center = 0.0 if surface.leaf_path == "polar" else complex(w0) - radius
    curve = polar_curve(complex(w0), None, dtheta=2 * np.pi * turns, center=center)
    path = trace_curve(surface, seed, curve, ds)
    closure = float(np.linalg.norm(path.points[-1] - path.points[0]))
    return LeafLoop(path, turns, closure, center, curve)


def detect_spiral(surface, seed, max_turns=3, orientation=1, ds=1e-3, closure_tol=CLOSURE_TOL):
    """Classify the leaf through ``seed`` as closed or spiraling.

    The leaf is followed one turn at a time.  Closed means every turn returns
    within ``closure_tol``.  Otherwise, on chart-equipped surfaces, the
    principal leaf label is read after each turn and a consistent geometric
    ratio is reported as ``spiral(rate)``.  Leaving the region counts as
    ``spiral-exit`` with whatever ratios were measured.
    """
    sign = 1 if orientation >= 0 else -1
    p = np.asarray(seed, dtype=float)
    labels, defects = [], []
    chart = surface.chart
    if chart is not None:
        labels.append(float(chart.label(p)))
    exited = False
    for _ in range(max_turns):
        try:
            loop = leaf_loop_around(surface, p, sign, ds)
        except LeftRegion:
            exited = True
            break
        defects.append(loop.closure_defect)
        p = loop.path.points[-1]
        if chart is not None:
            labels.append(float(chart.label(p)))
    if not exited and defects and all(d < closure_tol for d in defects):
        return SpiralResult("closed", None, labels, defects)
    rates = [b / a for a, b in zip(labels[:-1], labels[1:]) if a != 0.0]
    if rates and all(r > 0 for r in rates) and np.ptp(np.log(rates)) < 1e-3 * max(1.0, abs(np.log(rates[0]))):
        rate = float(np.exp(np.mean(np.log(rates))))
        return SpiralResult("spiral-exit" if exited else "spiral", rate, labels, defects)
    return SpiralResult("spiral-exit" if exited else "inconclusive", None, labels, defects)


# -- transversals ---------------------------------------------------------------

def _T(surface, p):
    return frame_field(surface, p).T


def flow_T(surface, p, s, steps=None, check_region=False):
    """Time-``s`` map of the flow of T (RK4, reprojected each step)."""
    p = np.array(p, dtype=float)
    steps = steps or max(1, int(np.ceil(abs(s) / 1e-3)))
    h = s / steps
    for i in range(steps):
        k1 = _T(surface, p)
        k2 = _T(surface, p + 0.5 * h * k1)
        k3 = _T(surface, p + 0.5 * h * k2)
        k4 = _T(surface, p + h * k3)
        p = project_to_surface(surface, p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        if check_region:
            _check_region(surface, p, steps_done=i + 1)
    return p


def transversal_at(surface, p, halflength, ds=1e-3):
    """Integral curve of T through ``p`` of Euclidean half length ``halflength``.

    Steps are taken in T-time with size ``ds / |T|`` so that consecutive
    points are about ``ds`` apart.
    """
    p = np.asarray(p, dtype=float)
    sides = []
    for sign in (1.0, -1.0):
        q, t, a = p.copy(), 0.0, 0.0
        pts, ts, arcs = [], [], []
        while a < halflength - 1e-15:
            step = min(ds, halflength - a)
            dt = sign * step / np.linalg.norm(_T(surface, q))
            q_new = flow_T(surface, q, dt, steps=1)
            if surface.levi_flat is not None:
                _check_region(surface, q_new)
            elif not np.all(surface.in_box(q_new)):
                raise LeftRegion("transversal left the working box", point=q_new)
            a += np.linalg.norm(q_new - q)
            t += dt
            q = q_new
            pts.append(q)
            ts.append(t)
            arcs.append(sign * a)
        sides.append((pts, ts, arcs))
    (pp, tp, ap), (pm, tm, am) = sides
    points = np.array(pm[::-1] + [p] + pp).reshape(-1, 4)
    time = np.array(tm[::-1] + [0.0] + tp)
    arcl = np.array(am[::-1] + [0.0] + ap)
    return Transversal(points, time, arcl, len(pm))


def transversal_point_with_label(surface, tr, c, tol=1e-13):
    """Point on the transversal whose (principal) chart label is ``c``.

    Bracketing nodes are found on the sampled curve, then the T-time is
    refined with Brent's method.
    """
    from scipy.optimize import brentq

    labels = surface.chart.label(tr.points) - c
    idx = np.nonzero(np.sign(labels[:-1]) * np.sign(labels[1:]) <= 0)[0]
    if len(idx) == 0:
        raise LeftRegion(f"label {c:.6g} not met by the transversal")
    i = int(idx[0])
    base = tr.points[i]

    def g(s):
        return float(surface.chart.label(flow_T(surface, base, s, steps=2)) - c)

    span = tr.time[i + 1] - tr.time[i]
    if g(0.0) == 0.0:
        return base
    s = brentq(g, 0.0, span, xtol=tol)
    return flow_T(surface, base, s, steps=2)


def write_path_csv(path, filename):
    """Export a path or loop (columns step, z_re, z_im, w_re, w_im, rho_defect, eta_defect)."""
    if isinstance(path, LeafLoop):
        path = path.path
    with open(filename, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["step", "z_re", "z_im", "w_re", "w_im", "rho_defect", "eta_defect"])
        for row in path.to_rows():
            wr.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def trace_many(surface, starts, w_targets, ds=1e-2, dtheta=None, check_region=True):
    """Trace many leaves at once, each to its own target value of w.

    All paths share the parameter grid, sized by the longest one.  Returns
    ``(points, velocity, param)`` with ``points`` of shape ``(n + 1, m, 4)``.
    Curves are polar or straight according to the surface, as in
    :func:`trace_to_w`.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    _, w0 = as_complex(starts)
    w1 = np.broadcast_to(np.asarray(w_targets, dtype=complex), w0.shape)
    if surface.leaf_path == "polar":
        lr = np.log(np.abs(w1) / np.abs(w0))
        dth = np.angle(w1 / w0) if dtheta is None else np.broadcast_to(np.asarray(dtheta, dtype=float), w0.shape)
        rate = lr + 1j * dth

        def w(t):
            return w0 * np.exp(rate * t)

        def dw(t):
            return w(t) * rate

        lengths = np.abs(w0) * np.abs(rate) * np.where(np.abs(lr) > 1e-12, np.abs(np.expm1(lr)) / np.maximum(np.abs(lr), 1e-300), 1.0)
    else:
        def w(t):
            return w0 + (w1 - w0) * t

        def dw(t):
            return (w1 - w0) + 0.0 * t

        lengths = np.abs(w1 - w0)
    n = max(4, int(np.ceil(np.max(lengths, initial=0.0) / ds)))
    n += n % 2
    h = 1.0 / n
    ts = np.linspace(0.0, 1.0, n + 1)
    z, _ = as_complex(starts)
    pts = np.empty((n + 1,) + starts.shape)
    pts[0] = point(z, w(0.0))

    def f(t, z):
        return _dz(surface, point(z, w(t)), dw(t))

    for i in range(n):
        t = ts[i]
        k1 = f(t, z)
        k2 = f(t + 0.5 * h, z + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, z + 0.5 * h * k2)
        k4 = f(t + h, z + h * k3)
        q = _project_z(surface, point(z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), w(ts[i + 1])))
        if check_region:
            _check_region(surface, q, steps_done=i + 1)
        pts[i + 1] = q
        z, _ = as_complex(q)
    dws = np.stack([dw(t) for t in ts])
    vel = point(_dz(surface, pts, dws), dws)
    return pts, vel, ts
