"""Leafwise potentials h with dh = -alpha on leaves, and the fields they give.

A function h on the Levi-flat region with ``dh|leaf = -alpha|leaf`` makes the
normal commutator components of ``X = e^h L_n`` with ``conj L1`` vanish.  It
is built by fixing ``h = 0`` on a transversal and integrating ``-alpha``
along leaf paths; this is possible exactly when alpha has no periods on the
leaves met.  Pieces built from different transversals are glued with
cutoffs that depend on the leaf label only, so the gluing does not disturb
the leafwise derivative.
"""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import (CoverageError, DisconnectedError, LeftRegion, MinRadius, NoChart,
                     ObstructionError, PartitionError)
from .frame import CommutatorQuery, alpha_leafwise, commutator_normal, frame_at, frame_field
from .holonomy import TRIVIAL_TOL, loop_integral_alpha
from .leaves import leaf_loop_around, trace_many, transversal_point_with_label
from .surface import as_complex, eval_jet2, project_to_surface

INTERP_RADIUS = 0.15


@dataclass
class FieldReport:
    epsilon: float
    max_arg_defect: float
    max_commutator_defect: float
    samples: int
    passed: bool
    radius: Optional[float] = None
    coverage: Optional[float] = None

    def to_dict(self):
        d = {"epsilon": self.epsilon, "max_arg_defect": self.max_arg_defect,
             "max_commutator_defect": self.max_commutator_defect, "samples": self.samples,
             "pass": self.passed}
        if self.radius is not None:
            d["radius"] = self.radius
        if self.coverage is not None:
            d["coverage"] = self.coverage
        return d


class LeafField:
    """Interface: ``evaluate(surface, points) -> (h, leafwise gradient, covered)``."""

    def evaluate(self, surface, points):
        raise NotImplementedError

    def shifted(self, c):
        return _Shifted(self, c)


class ConstantField(LeafField):
    """h equal to a constant everywhere (zero leafwise gradient)."""

    def __init__(self, value=0.0):
        self.value = float(value)

    def evaluate(self, surface, points):
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        return (np.full(shape, self.value), np.zeros(points.shape), np.ones(shape, dtype=bool))


class _Shifted(LeafField):
    def __init__(self, base, c):
        self.base, self.c = base, float(c)

    def evaluate(self, surface, points):
        h, g, cov = self.base.evaluate(surface, points)
        return h + self.c, g, cov


class ScalarFieldOnLeaves(LeafField):
    """Samples of h on leaves, grouped by leaf label.

    Each sample stores its point, leaf label, value of h and the leafwise
    gradient vector ``dh(e1) e1 + dh(e2) e2`` (frame independent).  Off the
    samples, h is taken from the nearest stored point on each of the two
    bracketing leaves by a first-order leafwise Taylor step, then blended
    linearly in the leaf label.
    """

    def __init__(self, points, labels, h, grad, source=None, base=None, interp_radius=INTERP_RADIUS):
        self.points = np.asarray(points, dtype=float).reshape(-1, 4)
        self.labels = np.asarray(labels, dtype=float).ravel()
        self.h = np.asarray(h, dtype=float).ravel()
        self.grad = np.asarray(grad, dtype=float).reshape(-1, 4)
        self.source = np.zeros(len(self.h), dtype=int) if source is None else np.asarray(source).ravel()
        self.base = base
        self.interp_radius = interp_radius
        self.leaf_labels, self._leaf_of = np.unique(self.labels, return_inverse=True)
        self._trees = [cKDTree(self.points[self._leaf_of == k]) for k in range(len(self.leaf_labels))]
        self._index = [np.nonzero(self._leaf_of == k)[0] for k in range(len(self.leaf_labels))]
        self.paths = []

    def __len__(self):
        return len(self.h)

    def _on_leaf(self, k, p):
        d, j = self._trees[k].query(p)
        idx = self._index[k][j]
        dp = p - self.points[idx]
        h = self.h[idx] + np.sum(self.grad[idx] * dp, axis=-1)
        return h, self.grad[idx], d

    def evaluate(self, surface, points):
        if surface.chart is None:
            raise NoChart(f"{surface.name} has no leaf chart for label interpolation")
        p = np.atleast_2d(np.asarray(points, dtype=float))
        c = surface.chart.label(p)
        L = self.leaf_labels
        k = np.clip(np.searchsorted(L, c) - 1, 0, max(len(L) - 2, 0))
        h = np.empty(len(p))
        g = np.empty(p.shape)
        covered = np.zeros(len(p), dtype=bool)
        for i in range(len(p)):
            if len(L) == 1:
                hi, gi, di = self._on_leaf(0, p[i])
                h[i], g[i], covered[i] = hi, gi, di <= self.interp_radius
                continue
            k0 = k[i]
            t = (c[i] - L[k0]) / (L[k0 + 1] - L[k0])
            h0, g0, d0 = self._on_leaf(k0, p[i])
            h1, g1, d1 = self._on_leaf(k0 + 1, p[i])
            inside = -1e-9 <= t <= 1 + 1e-9
            h[i] = (1 - t) * h0 + t * h1
            g[i] = (1 - t) * g0 + t * g1
            covered[i] = inside and max(d0, d1) <= self.interp_radius
        shape = np.shape(points)[:-1]
        return h.reshape(shape), g.reshape(shape + (4,)), covered.reshape(shape)

    def write_csv(self, filename):
        """Export samples (columns label, z_re, z_im, w_re, w_im, h)."""
        with open(filename, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["label", "z_re", "z_im", "w_re", "w_im", "h"])
            for c, p, h in zip(self.labels, self.points, self.h):
                wr.writerow([repr(float(c))] + [repr(float(x)) for x in p] + [repr(float(h))])


def _cumulative_trapezoid(f, h):
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * h * (f[1:] + f[:-1]), axis=0)
    return out


def _alpha_vectors(surface, pts):
    """alpha covector values and the leafwise vector alpha(e1) e1 + alpha(e2) e2."""
    a = alpha_leafwise(surface, pts)
    fr = frame_field(surface, pts)
    return a[..., 0:1] * fr.e1 + a[..., 1:2] * fr.e2


def period_test(surface, seed, ds=1e-2, tol=TRIVIAL_TOL):
    """Raise ObstructionError if the leaf of ``seed`` has a generator with a period."""
    chart = surface.chart
    if chart is None or chart.topology(chart.label(seed)) != "annulus":
        return None
    loop = leaf_loop_around(surface, seed, 1, ds=ds)
    period = loop_integral_alpha(surface, loop)
    if abs(period) > tol:
        raise ObstructionError(loop, period)
    return period


def build_h(surface, seeds, base, ds=1e-2, stride=1, interp_radius=INTERP_RADIUS):
    """Integrate dh = -alpha along leaves from a base transversal.

    Parameters
    ----------
    surface : Surface
        A chart-equipped Levi-flat surface.
    seeds : array_like, shape (m, 4)
        Target points; each is joined to the point of ``base`` on its leaf
        by a leaf path over the straight (or polar) w-curve.
    base : Transversal
        h = 0 on this curve.
    ds : float
        Leaf-path step.
    stride : int
        Keep every ``stride``-th interior path node as a sample (the base
        point and the seed are always kept).

    Raises
    ------
    ObstructionError
        If a seed's leaf has a generator loop with a period above 1e-6.
    DisconnectedError
        If a seed's leaf does not meet the base transversal.
    """
    chart = surface.chart
    if chart is None:
        raise NoChart(f"{surface.name} has no leaf chart to match seeds with the base")
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    labels = chart.label(seeds)
    uniq, inv = np.unique(np.round(labels, 14), return_inverse=True)
    starts = np.empty_like(seeds)
    for k, c in enumerate(uniq):
        rep = seeds[np.nonzero(inv == k)[0][0]]
        period_test(surface, rep, ds=ds)
        try:
            starts[inv == k] = transversal_point_with_label(surface, base, c)
        except LeftRegion as exc:
            raise DisconnectedError(f"leaf with label {c:.6g} misses the base transversal") from exc
    zs, ws = as_complex(seeds)
    _, wb = as_complex(starts)
    dtheta = np.angle(ws) - np.angle(wb) if surface.leaf_path == "polar" else None
    pts, vel, ts = trace_many(surface, starts, ws, ds=ds, dtheta=dtheta)
    n = len(ts) - 1
    avec = _alpha_vectors(surface, pts)
    integrand = np.sum(avec * vel, axis=-1)  # alpha(velocity), shape (n+1, m)
    hvals = -_cumulative_trapezoid(integrand, 1.0 / n)
    miss = np.linalg.norm(pts[-1] - seeds, axis=-1)
    if np.any(miss > 1e-6):
        raise DisconnectedError(f"leaf path missed its seed by {np.max(miss):.3g}")
    keep = sorted(set(range(0, n + 1, max(1, stride))) | {0, n})
    P = pts[keep]
    m = len(seeds)
    lab = np.broadcast_to(uniq[inv], (len(keep), m))
    src = np.broadcast_to(np.arange(m), (len(keep), m))
    field_ = ScalarFieldOnLeaves(P.reshape(-1, 4), lab.reshape(-1), hvals[keep].reshape(-1),
                                 -avec[keep].reshape(-1, 4), src.reshape(-1), base, interp_radius)
    field_.paths = [(pts[:, j], hvals[:, j]) for j in range(min(m, 64))]
    return field_


def seed_grid(surface, labels, w_values):
    """Chart points for every combination of leaf label and w."""
    c, w = np.meshgrid(np.asarray(labels, dtype=float), np.asarray(w_values, dtype=complex), indexing="ij")
    return surface.chart.forward(c.ravel(), w.ravel())


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


@dataclass
class CutoffProfile:
    """Quintic smoothstep bump in the leaf label.

    Rises from 0 to 1 across ``[rise - width/2, rise + width/2]`` and falls
    back across the same width around ``fall``; ``None`` disables a side.
    """

    rise: Optional[float]
    fall: Optional[float]
    width: float

    def __call__(self, c):
        c = np.asarray(c, dtype=float)
        v = np.ones_like(c)
        if self.rise is not None:
            v = _smoothstep((c - self.rise) / self.width + 0.5)
        if self.fall is not None:
            v = v - _smoothstep((c - self.fall) / self.width + 0.5) if self.rise is not None \
                else 1.0 - _smoothstep((c - self.fall) / self.width + 0.5)
        return v


def partition_of_unity(c_min, c_max, pieces, plateau=0.25):
    """Cutoffs for ``pieces`` equal label bands of [c_min, c_max].

    Each band keeps value 1 on the central ``plateau`` fraction; the
    transitions between neighbours share the remaining width.  Differences
    of the same smoothstep telescope, so the sum is 1 up to rounding.
    """
    edges = np.linspace(c_min, c_max, pieces + 1)
    width = (1.0 - plateau) * (edges[1] - edges[0])
    out = []
    for i in range(pieces):
        rise = edges[i] if i > 0 else None
        fall = edges[i + 1] if i < pieces - 1 else None
        out.append(CutoffProfile(rise, fall, width))
    return out


class PatchedField(LeafField):
    """Sum of cutoff-weighted pieces; the cutoffs are leafwise constant."""

    def __init__(self, pieces, cutoffs):
        self.pieces = list(pieces)
        self.cutoffs = list(cutoffs)

    def evaluate(self, surface, points):
        p = np.asarray(points, dtype=float)
        c = surface.chart.label(p)
        h = np.zeros(p.shape[:-1])
        g = np.zeros(p.shape)
        covered = np.ones(p.shape[:-1], dtype=bool)
        for piece, psi in zip(self.pieces, self.cutoffs):
            w = psi(c)
            active = w > 0
            if not np.any(active):
                continue
            hi, gi, ci = piece.evaluate(surface, p)
            h = h + np.where(active, w * hi, 0.0)
            g = g + np.where(active[..., None], w[..., None] * gi, 0.0)
            covered &= ci | ~active
        return h, g, covered


def patch_h(pieces, cutoffs, check_labels=None):
    """Glue pieces by label cutoffs forming a partition of unity.

    Raises
    ------
    PartitionError
        If the cutoffs fail to sum to 1 within 1e-10 at the check labels
        (default: the sample labels of all pieces).
    """
    if len(pieces) != len(cutoffs):
        raise PartitionError("one cutoff per piece is required")
    if check_labels is None:
        chunks = [getattr(p, "labels", np.zeros(0)) for p in pieces]
        check_labels = np.concatenate(chunks) if chunks else np.zeros(0)
    check_labels = np.asarray(check_labels, dtype=float)
    if check_labels.size:
        total = sum(psi(check_labels) for psi in cutoffs)
        dev = np.max(np.abs(total - 1.0))
        if dev > 1e-10:
            raise PartitionError(f"cutoffs sum to 1 only within {dev:.3g}")
    return PatchedField(pieces, cutoffs)


def field_defects(surface, h_field, points):
    """(arg defect, commutator defect, covered) of X = e^h L_n at points."""
    h, g, covered = h_field.evaluate(surface, points)
    fr = frame_at(surface, points)
    Xrho = np.exp(h) * np.sum(fr.Ln * fr.jet.holo_grad, axis=-1)
    arg = np.abs(np.angle(Xrho))
    dh = np.stack([np.sum(g * fr.e1, axis=-1), np.sum(g * fr.e2, axis=-1)], axis=-1)
    comm = np.abs(commutator_normal(surface, points, CommutatorQuery(h, dh)))
    return arg, comm, covered


def verify_field(surface, h_field, epsilon, samples=1000, seed=0, points=None):
    """Check |arg X rho| < epsilon and |d rho([X, conj L1])| < epsilon for X = e^h L_n.

    Raises
    ------
    CoverageError
        If fewer than 90% of the sample points are within the interpolation
        radius of stored data.
    """
    pts = surface.sample(samples, seed) if points is None else np.asarray(points, dtype=float)
    arg, comm, covered = field_defects(surface, h_field, pts)
    frac = float(np.mean(covered))
    if frac < 0.9:
        raise CoverageError(f"only {100 * frac:.1f}% of samples are covered by h")
    a = float(np.max(arg[covered]))
    c = float(np.max(comm[covered]))
    return FieldReport(float(epsilon), a, c, int(np.sum(covered)), a < epsilon and c < epsilon,
                       coverage=frac)


def _ball_samples(surface, P, radius, n, rng):
    d = rng.normal(size=(n, 4))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** 0.25
    pts = project_to_surface(surface, P + r * d, iterations=4)
    pts = pts[np.linalg.norm(pts - P, axis=-1) <= radius]
    # the sphere of radius r contributes the worst case; include it
    edge = project_to_surface(surface, P + radius * d, iterations=4)
    return np.concatenate([pts, edge[np.linalg.norm(edge - P, axis=-1) <= radius * (1 + 1e-9)]])


def elliptic_fallback(surface, p_elliptic, radius, epsilon, samples=400, seed=0, min_radius=1e-6):
    """Constant field X = L_n(P) near a point P, shrinking the ball until it is good.

    X has constant coefficients, so its commutators with d/d conj(z_j)
    vanish identically; only the argument of X rho has to be controlled.

    Raises
    ------
    MinRadius
        If the argument defect stays above ``epsilon`` down to ``min_radius``.
    """
    P = np.asarray(p_elliptic, dtype=float)
    X = frame_at(surface, P).Ln
    rng = np.random.default_rng(seed)
    r = float(radius)
    while r >= min_radius:
        pts = _ball_samples(surface, P, r, samples, rng)
        holo = eval_jet2(surface, pts, order=1).holo_grad
        arg = float(np.max(np.abs(np.angle(np.sum(X * holo, axis=-1)))))
        if arg < epsilon:
            return FieldReport(float(epsilon), arg, 0.0, len(pts), True, radius=r)
        r *= 0.5
    raise MinRadius(f"arg defect {arg:.3g} at radius {2 * r:.3g} exceeds {epsilon:g}")
