"""Complex tangencies of real surfaces in C^2 and their Bishop classification.

A real 2-plane spanned by ``a, b`` (read as complex 2-vectors) is a complex
line exactly when ``det_C(a, b) = a1 b2 - a2 b1`` vanishes, so tangencies are
the zeros of this complex function of the two surface parameters.  Zeros are
isolated generically and are refined by Newton's method.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import jets
from .errors import DegenerateTangency, NoConvergence
from .surface import as_complex

DEGENERACY_TOL = 1e-6


@dataclass
class Chart2D:
    """Parametrization ``F(u, v) -> (x1, y1, x2, y2)`` over a box.

    ``valid(u, v)`` marks the part of the box this chart is responsible for;
    overlapping charts are fine, duplicates are merged downstream.
    """

    F: Callable
    u_range: tuple
    v_range: tuple
    periodic: tuple = (False, False)
    valid: Optional[Callable] = None

    def is_valid(self, u, v):
        if self.valid is None:
            return True
        return bool(self.valid(u, v))

    def wrap(self, uv):
        uv = np.array(uv, dtype=float)
        for i, (lo, hi) in enumerate((self.u_range, self.v_range)):
            if self.periodic[i]:
                uv[..., i] = lo + np.mod(uv[..., i] - lo, hi - lo)
        return uv


@dataclass
class Surface2D:
    name: str
    charts: list
    genus: Optional[int]
    diameter: float = 2.0
    symmetries: list = field(default_factory=list)

    def evaluate(self, chart, uv, order=2):
        """Point, first and second derivatives of the parametrization.

        Returns arrays of shape ``(..., 4)``, ``(..., 4, 2)`` and
        ``(..., 4, 2, 2)``.
        """
        uv = np.asarray(uv, dtype=float)
        out = chart.F(*jets.Jet.variables(uv, order=order))
        shape = uv.shape[:-1]
        x = np.stack([np.broadcast_to(o.val, shape) for o in out], axis=-1)
        d1 = np.stack([np.broadcast_to(o.grad, shape + (2,)) for o in out], axis=-2)
        d2 = None
        if order >= 2:
            d2 = np.stack([np.broadcast_to(o.hess, shape + (2, 2)) for o in out], axis=-3)
        return x, d1, d2


@dataclass
class TangencyReport:
    point: np.ndarray
    lam: float
    kind: str
    index: Optional[int]
    coefficients: dict = field(default_factory=dict)

    def to_dict(self):
        return {"point": [float(c) for c in self.point], "lambda": float(self.lam),
                "kind": self.kind, "index": self.index,
                "coefficients": {k: [float(np.real(v)), float(np.imag(v))]
                                 for k, v in self.coefficients.items()}}


def _cplx(v):
    """Real 4-vector -> complex 2-vector."""
    return v[..., 0::2] + 1j * v[..., 1::2]


def _det_and_jac(d1, d2):
    """det_C(F_u, F_v) and its (u, v) derivatives."""
    a = d1[..., 0::2, 0] + 1j * d1[..., 1::2, 0]
    b = d1[..., 0::2, 1] + 1j * d1[..., 1::2, 1]
    f = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    if d2 is None:
        return f, a, b, None
    c = d2[..., 0::2, :, :] + 1j * d2[..., 1::2, :, :]
    a_u = c[..., :, 0, 0]
    a_v = c[..., :, 0, 1]
    b_u = c[..., :, 1, 0]
    b_v = c[..., :, 1, 1]

    def ddet(da, db):
        return da[..., 0] * b[..., 1] + a[..., 0] * db[..., 1] - da[..., 1] * b[..., 0] - a[..., 1] * db[..., 0]

    return f, a, b, np.stack([ddet(a_u, b_u), ddet(a_v, b_v)], axis=-1)


def tangency_defect(gamma, chart, uv):
    """Normalized |det_C(F_u, F_v)| / (|F_u| |F_v|); zero exactly at tangencies."""
    _, d1, _ = gamma.evaluate(chart, uv, order=1)
    f, a, b, _ = _det_and_jac(d1, None)
    return np.abs(f) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))


def _newton_tangency(gamma, chart, uv0, maxit=60, tol=1e-10):
    uv = np.array(uv0, dtype=float)
    for _ in range(maxit):
        _, d1, d2 = gamma.evaluate(chart, uv)
        f, a, b, df = _det_and_jac(d1, d2)
        scale = np.linalg.norm(a) * np.linalg.norm(b)
        if abs(f) / scale < tol:
            return chart.wrap(uv), abs(f) / scale
        Jm = np.array([[df[0].real, df[1].real], [df[0].imag, df[1].imag]])
        try:
            step = np.linalg.solve(Jm, -np.array([f.real, f.imag]))
        except np.linalg.LinAlgError:
            break
        uv = chart.wrap(uv + step)
    _, d1, _ = gamma.evaluate(chart, uv, order=1)
    f, a, b, _ = _det_and_jac(d1, None)
    raise NoConvergence(f"Newton refinement stalled at defect {abs(f) / (np.linalg.norm(a) * np.linalg.norm(b)):.3g}")


def _local_minima(vals, periodic):
    """Mask of grid nodes not exceeding any of their 8 neighbours."""
    padded = vals
    for axis, per in enumerate(periodic):
        widths = [(0, 0), (0, 0)]
        widths[axis] = (1, 1)
        if per:
            padded = np.pad(padded, widths, mode="wrap")
        else:
            padded = np.pad(padded, widths, mode="constant", constant_values=np.inf)
    n0, n1 = vals.shape
    mask = np.ones(vals.shape, dtype=bool)
    for du in (-1, 0, 1):
        for dv in (-1, 0, 1):
            if du or dv:
                mask &= vals <= padded[1 + du:1 + du + n0, 1 + dv:1 + dv + n1]
    return mask


def find_complex_tangencies(gamma, grid=64, threshold=0.3, return_failures=False):
    """Locate the complex tangencies of a parametrized surface.

    Local minima of the normalized defect on a ``grid x grid`` sample of each
    chart seed Newton refinement; refined zeros with defect below 1e-10 are
    kept and merged across charts.

    Returns
    -------
    list of ndarray
        Tangency points (shape ``(4,)``).  With ``return_failures`` also the
        list of :class:`NoConvergence` errors for rejected candidates.
    """
    if grid < 32:
        raise ValueError("grid must be at least 32 per chart dimension")
    found, failures = [], []
    for chart in gamma.charts:
        us = np.linspace(*chart.u_range, grid, endpoint=not chart.periodic[0])
        vs = np.linspace(*chart.v_range, grid, endpoint=not chart.periodic[1])
        UV = np.stack(np.meshgrid(us, vs, indexing="ij"), axis=-1)
        vals = tangency_defect(gamma, chart, UV)
        cand = np.argwhere(_local_minima(vals, chart.periodic) & (vals < threshold))
        for i, j in cand:
            try:
                uv, _ = _newton_tangency(gamma, chart, UV[i, j])
            except NoConvergence as exc:
                failures.append(exc)
                continue
            lo_u, hi_u = chart.u_range
            lo_v, hi_v = chart.v_range
            inside = (chart.periodic[0] or lo_u <= uv[0] <= hi_u) and (chart.periodic[1] or lo_v <= uv[1] <= hi_v)
            if not inside or not chart.is_valid(*uv):
                continue
            x, _, _ = gamma.evaluate(chart, uv, order=1)
            if not any(np.linalg.norm(x - y) < 1e-7 for y in found):
                found.append(x)
    found.sort(key=lambda x: tuple(np.round(x, 9)))
    if return_failures:
        return found, failures
    return found


def locate(gamma, p, grid=48):
    """Chart and parameters of a surface point (nearest grid node + Gauss-Newton)."""
    p = np.asarray(p, dtype=float)
    best = None
    for chart in gamma.charts:
        us = np.linspace(*chart.u_range, grid)
        vs = np.linspace(*chart.v_range, grid)
        UV = np.stack(np.meshgrid(us, vs, indexing="ij"), axis=-1)
        x, _, _ = gamma.evaluate(chart, UV, order=1)
        d = np.linalg.norm(x - p, axis=-1)
        i, j = np.unravel_index(np.argmin(d), d.shape)
        uv = UV[i, j]
        for _ in range(50):
            x, d1, _ = gamma.evaluate(chart, uv, order=1)
            r = x - p
            if np.linalg.norm(r) < 1e-13:
                break
            uv = uv - np.linalg.lstsq(d1, r, rcond=None)[0]
        x, d1, _ = gamma.evaluate(chart, uv, order=1)
        err = np.linalg.norm(x - p)
        sv = np.linalg.svd(d1, compute_uv=False)
        quality = sv[-1] / sv[0]
        if err < 1e-9 and chart.is_valid(*chart.wrap(uv)) and (best is None or quality > best[2]):
            best = (chart, chart.wrap(uv), quality)
    if best is None:
        raise NoConvergence("point not found on the surface")
    return best[0], best[1]


def _tangent_frame(d1):
    a = d1[0::2, 0] + 1j * d1[1::2, 0]
    t = a / np.linalg.norm(a)
    n = np.array([-np.conj(t[1]), np.conj(t[0])])
    return t, n


_FIT_MONOMIALS = ("zz", "zzbar", "zbarzbar", "zzz", "zzzbar", "zzbarzbar", "zbarzbarzbar")


def _monomials(z):
    zb = np.conj(z)
    return np.stack([z * z, z * zb, zb * zb, z**3, z * z * zb, z * zb * zb, zb**3], axis=-1)


def bishop_fit(gamma, p, radius=None, n_angles=24, radii=(1 / 3, 2 / 3, 1.0)):
    """Least-squares fit of the local graph w' = f(z') over the complex tangent line.

    Samples are placed on a polar grid in the tangent-line coordinate ``z'``
    (found by Newton inversion of the parametrization), and the transverse
    coordinate ``w'`` is fit by quadratic plus cubic monomials in z', conj z'.
    """
    chart, uv0 = locate(gamma, p)
    radius = 1e-2 * gamma.diameter if radius is None else radius
    x0, d10, _ = gamma.evaluate(chart, uv0, order=1)
    t, n = _tangent_frame(d10)
    zs, ws = [], []
    for rr in radii:
        for k in range(n_angles):
            target = rr * radius * np.exp(2j * np.pi * (k + 0.5 * (rr != 1.0)) / n_angles)
            uv = uv0.copy()
            for _ in range(40):
                x, d1, _ = gamma.evaluate(chart, uv, order=1)
                zp = np.vdot(t, _cplx(x - x0))
                dz = np.conj(t) @ (d1[0::2, :] + 1j * d1[1::2, :])
                Jm = np.array([[dz[0].real, dz[1].real], [dz[0].imag, dz[1].imag]])
                r = zp - target
                if abs(r) < 1e-15 * max(1.0, radius):
                    break
                uv = uv - np.linalg.solve(Jm, np.array([r.real, r.imag]))
            x, _, _ = gamma.evaluate(chart, uv, order=1)
            zs.append(np.vdot(t, _cplx(x - x0)))
            ws.append(np.vdot(n, _cplx(x - x0)))
    zs, ws = np.array(zs), np.array(ws)
    A = _monomials(zs)
    coef, *_ = np.linalg.lstsq(A, ws, rcond=None)
    return dict(zip(_FIT_MONOMIALS, coef))


def classify_tangency(gamma, p, radius=None):
    """Bishop invariant and elliptic/hyperbolic type at a complex tangency.

    With the local graph ``w' = a z^2 + b |z|^2 + c conj(z)^2 + O(3)``, the
    holomorphic change ``w' -> (w' - a z^2 + (c-bar-phase) ...) / b`` yields
    ``|z|^2 + lambda Re z^2`` with ``lambda = 2 |c| / |b|``.

    Raises
    ------
    DegenerateTangency
        If the |z|^2 coefficient is negligible.
    """
    coef = bishop_fit(gamma, p, radius)
    b, c = coef["zzbar"], coef["zbarzbar"]
    scale = max(abs(coef["zz"]), abs(b), abs(c), 1e-300)
    if abs(b) < 1e-8 * scale or abs(b) < 1e-12:
        raise DegenerateTangency(f"|z|^2 coefficient {abs(b):.3g} vanishes")
    lam = 2.0 * abs(c) / abs(b)
    if abs(lam - 1.0) < DEGENERACY_TOL:
        kind, index = "degenerate", None
    elif lam < 1.0:
        kind, index = "elliptic", 1
    else:
        kind, index = "hyperbolic", -1
    return TangencyReport(np.asarray(p, dtype=float), lam, kind, index, coef)


def tangency_winding_index(gamma, p, radius=1e-3, n=256):
    """Index of a tangency from the winding of det_C(F_u, F_v) on a small circle.

    The parameter circle is oriented by the complex orientation of the
    tangent line, which makes the index +1 at elliptic and -1 at hyperbolic
    points independently of the chart orientation.
    """
    chart, uv0 = locate(gamma, p)
    _, d10, _ = gamma.evaluate(chart, uv0, order=1)
    t, _ = _tangent_frame(d10)
    dz = np.conj(t) @ (d10[0::2, :] + 1j * d10[1::2, :])
    orient = np.sign(dz[0].real * dz[1].imag - dz[1].real * dz[0].imag)
    s = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    uv = uv0 + radius * np.stack([np.cos(s), np.sin(s)], axis=-1)
    _, d1, _ = gamma.evaluate(chart, uv, order=1)
    f, _, _, _ = _det_and_jac(d1, None)
    dphi = np.angle(np.roll(f, -1) / f)
    return int(round(orient * dphi.sum() / (2 * np.pi)))


def index_check(gamma, grid=64):
    """(#elliptic, #hyperbolic, genus, #e - #h - (2 - 2 genus)).

    For open pieces such as Bishop graphs the genus is None and so is the
    defect.

    Raises
    ------
    DegenerateTangency
        If any tangency is degenerate.
    """
    reports = [classify_tangency(gamma, p) for p in find_complex_tangencies(gamma, grid)]
    if any(r.kind == "degenerate" for r in reports):
        raise DegenerateTangency("degenerate complex tangency present")
    ne = sum(r.kind == "elliptic" for r in reports)
    nh = sum(r.kind == "hyperbolic" for r in reports)
    if gamma.genus is None:
        return ne, nh, None, None
    return ne, nh, gamma.genus, ne - nh - (2 - 2 * gamma.genus)


# -- catalog of 2-surfaces --------------------------------------------------------

_BAND = np.pi / 6


def _sphere_charts(radius_fn, embed):
    """Two spherical-coordinate charts with poles on different axes."""

    def make(perm):
        def F(th, ph):
            st, ct = jets.sin(th), jets.cos(th)
            u = [ct, st * jets.cos(ph), st * jets.sin(ph)]
            u = [u[perm[0]], u[perm[1]], u[perm[2]]]
            r = radius_fn(*u)
            return embed(r * u[0], r * u[1], r * u[2])

        return Chart2D(F, (0.2, np.pi - 0.2), (0.0, 2 * np.pi), (False, True),
                       valid=lambda th, ph: _BAND - 1e-9 <= th <= np.pi - _BAND + 1e-9)

    # chart A: pole on X; chart B: pole on Y
    return [make((0, 1, 2)), make((2, 0, 1))]


def _embed_real(X, Y, H):
    return (X, Y, H, 0.0 * X)


def _embed_unitary(U):
    U = np.asarray(U, dtype=complex)

    def embed(X, Y, H):
        # (z, w) = U (X + iY, H)
        zr = U[0, 0].real * X - U[0, 0].imag * Y + U[0, 1].real * H
        zi = U[0, 0].imag * X + U[0, 0].real * Y + U[0, 1].imag * H
        wr = U[1, 0].real * X - U[1, 0].imag * Y + U[1, 1].real * H
        wi = U[1, 0].imag * X + U[1, 0].real * Y + U[1, 1].imag * H
        return (zr, zi, wr, wi)

    return embed


def _flip_w(p):
    p = np.array(p, dtype=float)
    p[..., 2:] *= -1.0
    return p


def _rotate_z(p):
    z, w = as_complex(p)
    z = 1j * z
    out = np.array(p, dtype=float)
    out[..., 0], out[..., 1] = z.real, z.imag
    return out


def gamma_sphere():
    """The 2-sphere {|z|^2 + (Re w)^2 = 1, Im w = 0}."""
    return Surface2D("gamma_sphere", _sphere_charts(lambda *u: 1.0 + 0.0 * u[0], _embed_real),
                     genus=0, diameter=2.0, symmetries=[_flip_w, _rotate_z])


def rotated_gamma_sphere(U):
    """gamma_sphere moved by a unitary map of C^2."""
    U = np.asarray(U, dtype=complex)
    Ui = U.conj().T

    def conj_by(sym):
        def s(p):
            z, w = as_complex(p)
            q = np.stack([z, w], axis=-1) @ Ui.T
            q = sym(np.stack([q[..., 0].real, q[..., 0].imag, q[..., 1].real, q[..., 1].imag], axis=-1))
            z2, w2 = as_complex(q)
            r = np.stack([z2, w2], axis=-1) @ U.T
            return np.stack([r[..., 0].real, r[..., 0].imag, r[..., 1].real, r[..., 1].imag], axis=-1)
        return s

    return Surface2D("rotated_gamma_sphere", _sphere_charts(lambda *u: 1.0 + 0.0 * u[0], _embed_unitary(U)),
                     genus=0, diameter=2.0, symmetries=[conj_by(_flip_w), conj_by(_rotate_z)])


def bumped_sphere(kappa=1.0):
    """Star-shaped sphere with an upper bump that splits the top tangency.

    The radial function ``1 + kappa X^2 ((1 + H)/2)^2`` turns the north pole
    into a hyperbolic point flanked by two elliptic points when kappa > 1/2,
    and leaves the south pole elliptic: 3 elliptic, 1 hyperbolic, genus 0.
    """
    def radius(X, Y, H):
        s = 0.5 * (1.0 + H)
        return 1.0 + kappa * X * X * s * s

    return Surface2D("bumped_sphere", _sphere_charts(radius, _embed_real), genus=0,
                     diameter=2.0 * (1.0 + kappa))


def torus(r1=1.0, r2=0.7):
    """The totally real torus {|z| = r1, |w| = r2}; it has no complex tangencies."""
    def F(a, b):
        return (r1 * jets.cos(a), r1 * jets.sin(a), r2 * jets.cos(b), r2 * jets.sin(b))

    chart = Chart2D(F, (0.0, 2 * np.pi), (0.0, 2 * np.pi), (True, True))
    return Surface2D("torus", [chart], genus=1, diameter=2.0 * np.hypot(r1, r2))


def bishop_graph(lam, half_width=0.5):
    """Graph w = |z|^2 + lam Re z^2 over a square in the z-plane."""
    def F(x, y):
        return (1.0 * x, 1.0 * y, x * x + y * y + lam * (x * x - y * y), 0.0 * x)

    chart = Chart2D(F, (-half_width, half_width), (-half_width, half_width))
    return Surface2D(f"bishop_graph({lam:g})", [chart], genus=None, diameter=2 * half_width)


SURFACES_2D = {
    "gamma_sphere": gamma_sphere,
    "bumped_sphere": bumped_sphere,
    "torus": torus,
}
