"""Defining functions on C^2, their exact 2-jets, and a catalog of test surfaces.

Points are numpy arrays of shape ``(..., 4)`` holding the real coordinates
``(Re z, Im z, Re w, Im w)``.  A defining function is a plain Python function
of those four scalars written with the operations of :mod:`levifold.jets`, so
the same code evaluates on floats (for independent finite differences) and on
jets (for exact derivatives).
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import jets
from .errors import BadParams, DomainError, UnknownSurface


def point(z, w):
    """Build a point array from complex coordinates (scalars or arrays)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return np.stack(np.broadcast_arrays(z.real, z.imag, w.real, w.imag), axis=-1)


def as_complex(p):
    p = np.asarray(p, dtype=float)
    return p[..., 0] + 1j * p[..., 1], p[..., 2] + 1j * p[..., 3]


@dataclass
class Jet2:
    """Value and complex first/second partials of a real function on C^2.

    ``holo_grad[..., j]`` is d rho / d z_j, ``hess_mixed[..., j, k]`` is
    d^2 rho / d z_j d conj(z_k) (hermitian) and ``hess_holo[..., j, k]`` is
    d^2 rho / d z_j d z_k (symmetric).  The real gradient and Hessian are kept
    alongside because the frame formulas use both notations.
    """

    value: np.ndarray
    holo_grad: np.ndarray
    hess_mixed: np.ndarray
    hess_holo: np.ndarray
    real_grad: np.ndarray
    real_hess: Optional[np.ndarray]

    @property
    def antiholo_grad(self):
        return np.conj(self.holo_grad)

    # names following the (z, w) notation
    @property
    def rho_z(self):
        return self.holo_grad[..., 0]

    @property
    def rho_w(self):
        return self.holo_grad[..., 1]

    @property
    def rho_zzbar(self):
        return self.hess_mixed[..., 0, 0]

    @property
    def rho_zwbar(self):
        return self.hess_mixed[..., 0, 1]

    @property
    def rho_wwbar(self):
        return self.hess_mixed[..., 1, 1]

    @property
    def rho_zz(self):
        return self.hess_holo[..., 0, 0]

    @property
    def rho_zw(self):
        return self.hess_holo[..., 0, 1]

    @property
    def rho_ww(self):
        return self.hess_holo[..., 1, 1]


def complex_partials(grad, hess=None):
    """Convert real derivatives in (x1, y1, x2, y2) to Wirtinger notation."""
    gx, gy = grad[..., 0::2], grad[..., 1::2]
    holo = 0.5 * (gx - 1j * gy)
    if hess is None:
        return holo, None, None
    hxx = hess[..., 0::2, 0::2]
    hyy = hess[..., 1::2, 1::2]
    hxy = hess[..., 0::2, 1::2]  # [j, k] = d x_j d y_k
    hyx = hess[..., 1::2, 0::2]  # [j, k] = d y_j d x_k
    mixed = 0.25 * (hxx + hyy + 1j * (hxy - hyx))
    holo2 = 0.25 * (hxx - hyy - 1j * (hxy + hyx))
    return holo, mixed, holo2


@dataclass
class FoliationChart:
    """Leaf coordinates for a Levi-flat surface whose leaves are graphs over w.

    ``forward(c, w)`` returns the point on leaf ``c`` over ``w``; ``label``
    inverts it.  For ``kind == "annulus"`` the leaf label depends on the
    branch of ``arg w``; ``theta`` arguments select the branch explicitly and
    default to the principal value.
    """

    kind: str
    forward: Callable
    label: Callable
    topology: Callable
    #: label per positive turn of arg w is multiplied by this factor
    monodromy: float = 1.0


def _flat_chart():
    def forward(c, w, theta=None):
        c = np.asarray(c, dtype=float)
        return point(1j * c, w)

    def label(p, theta=None):
        return np.asarray(p)[..., 1]

    return FoliationChart("plane", forward, label, lambda c: "plane")


def _worm_chart():
    # Leaves z = i c w^{-2i} = i c exp(2 arg w) exp(-i log|w|^2).
    def forward(c, w, theta=None):
        w = np.asarray(w, dtype=complex)
        th = np.angle(w) if theta is None else np.asarray(theta, dtype=float)
        phi = np.log(np.abs(w) ** 2)
        z = 1j * np.asarray(c, dtype=float) * np.exp(2.0 * th) * np.exp(-1j * phi)
        return point(z, w)

    def label(p, theta=None):
        z, w = as_complex(p)
        th = np.angle(w) if theta is None else np.asarray(theta, dtype=float)
        phi = np.log(np.abs(w) ** 2)
        return np.imag(z * np.exp(1j * phi)) * np.exp(-2.0 * th)

    def topology(c):
        return "annulus" if abs(float(c)) <= 1e-12 else "universal-cover graph"

    return FoliationChart("annulus", forward, label, topology, monodromy=float(np.exp(4 * np.pi)))


@dataclass(frozen=True)
class GaugeFunction:
    """A smooth real function g used for the change rho -> exp(g) rho."""

    func: Callable
    name: str = "g"

    def __call__(self, zr, zi, wr, wi):
        return self.func(zr, zi, wr, wi)

    def jet(self, p, order=2):
        return jets.evaluate(self.func, p, order=order)

    def __neg__(self):
        f = self.func
        return GaugeFunction(lambda zr, zi, wr, wi: -f(zr, zi, wr, wi) * 1.0, f"-({self.name})")


GAUGES = {
    "zero": GaugeFunction(lambda zr, zi, wr, wi: 0.0 * zr, "zero"),
    "zim_wre": GaugeFunction(lambda zr, zi, wr, wi: zi * wr, "zim_wre"),
    "wre": GaugeFunction(lambda zr, zi, wr, wi: 1.0 * wr, "wre"),
    "wave": GaugeFunction(
        lambda zr, zi, wr, wi: 0.3 * jets.sin(wr) * jets.cos(zi) + 0.2 * wi * wi + 0.1 * zr,
        "wave"),
}


@dataclass
class Surface:
    """A real hypersurface {rho = 0} in C^2 with its working box.

    ``levi_flat`` is the declared Levi-flat region K (a predicate on points,
    evaluated together with ``|rho| < tol``); ``sampler(rng, n)`` draws
    points on the surface inside K, or inside the box when K is empty.
    """

    name: str
    params: dict
    rho: Callable
    in_box: Callable
    sampler: Callable
    box_sampler: Callable
    levi_flat: Optional[Callable] = None
    chart: Optional[FoliationChart] = None
    tol: float = 1e-8
    angular: bool = False
    leaf_path: str = "linear"
    gauges: tuple = field(default_factory=tuple)

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return np.asarray(self.rho(p[..., 0], p[..., 1], p[..., 2], p[..., 3]), dtype=float)

    def in_K(self, p):
        p = np.asarray(p, dtype=float)
        if self.levi_flat is None:
            return np.zeros(p.shape[:-1], dtype=bool)
        return np.asarray(self.levi_flat(p)) & (np.abs(self.value(p)) < self.tol) & self.in_box(p)

    def sample(self, n, seed=0):
        return self.sampler(np.random.default_rng(seed), n)

    def describe(self):
        return {"name": self.name, "params": {k: _jsonable(v) for k, v in self.params.items()},
                "gauges": [g.name for g in self.gauges]}


def _jsonable(v):
    if isinstance(v, GaugeFunction):
        return v.name
    return v


def eval_jet2(surface, p, order=2):
    """Exact value, gradient and Hessian of rho at ``p`` (shape ``(..., 4)``)."""
    p = np.asarray(p, dtype=float)
    if not np.all(surface.in_box(p)):
        raise DomainError(f"point outside the working box of {surface.name}")
    j = jets.evaluate(surface.rho, p, order=order)
    val = np.broadcast_to(j.val, p.shape[:-1]).astype(float)
    grad = np.broadcast_to(j.grad, p.shape)
    hess = None if j.hess is None else np.broadcast_to(j.hess, p.shape + (4,))
    holo, mixed, holo2 = complex_partials(grad, hess)
    return Jet2(val, holo, mixed, holo2, np.array(grad), None if hess is None else np.array(hess))


def project_to_surface(surface, p, iterations=2):
    """Newton iterations along grad rho; keeps points on {rho = 0}."""
    p = np.array(p, dtype=float)
    for _ in range(iterations):
        j = jets.evaluate(surface.rho, p, order=1)
        g = j.grad
        p = p - (j.val / np.sum(g * g, axis=-1))[..., None] * g
    return p


# -- catalog ------------------------------------------------------------------

def _sphere_rho(zr, zi, wr, wi):
    return zr * zr + zi * zi + wr * wr + wi * wi - 1.0


def _flat_rho(zr, zi, wr, wi):
    return 1.0 * zr


def _worm_rho(zr, zi, wr, wi):
    phi = jets.log(wr * wr + wi * wi)
    return zr * jets.cos(phi) - zi * jets.sin(phi)


def _norms(p):
    z, w = as_complex(p)
    return np.abs(z), np.abs(w)


def _sphere(params):
    def in_box(p):
        return np.all(np.abs(np.asarray(p)) <= 2.0, axis=-1)

    def sampler(rng, n):
        x = rng.normal(size=(n, 4))
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def box_sampler(rng, n):
        return rng.uniform(-1.5, 1.5, size=(n, 4))

    return Surface("sphere", dict(params), _sphere_rho, in_box, sampler, box_sampler,
                   levi_flat=None, tol=1e-8)


def _flat_like(name, params, rho, gauges=()):
    def in_box(p):
        az, aw = _norms(p)
        return (az <= 2.0) & (aw <= 3.0)

    def levi_flat(p):
        return np.ones(np.shape(p)[:-1], dtype=bool)

    def sampler(rng, n):
        c = rng.uniform(-0.8, 0.8, size=n)
        w = rng.uniform(-1.5, 1.5, size=n) + 1j * rng.uniform(-1.5, 1.5, size=n)
        return point(1j * c, w)

    def box_sampler(rng, n):
        return rng.uniform(-1.2, 1.2, size=(n, 4))

    return Surface(name, dict(params), rho, in_box, sampler, box_sampler, levi_flat=levi_flat,
                   chart=_flat_chart(), angular=True, leaf_path="linear", gauges=tuple(gauges))


def _worm(params):
    R = float(params.get("R", 4.0))
    if not R > 1.0:
        raise BadParams(f"worm requires R > 1, got {R}")

    def in_box(p):
        az, aw = _norms(p)
        return (az <= 1.2) & (aw >= 0.9) & (aw <= 1.1 * R)

    def levi_flat(p):
        az, aw = _norms(p)
        return (az < 1.0) & (aw > 1.0) & (aw < R)

    def sampler(rng, n):
        r = rng.uniform(1.02, R - 0.02, size=n)
        th = rng.uniform(-np.pi, np.pi, size=n)
        w = r * np.exp(1j * th)
        s = rng.uniform(-0.95, 0.95, size=n)
        z = 1j * s * np.exp(-1j * np.log(r**2))
        return point(z, w)

    def box_sampler(rng, n):
        r = rng.uniform(0.95, 1.05 * R, size=n)
        th = rng.uniform(-np.pi, np.pi, size=n)
        rz = 1.1 * np.sqrt(rng.uniform(0, 1, size=n))
        tz = rng.uniform(-np.pi, np.pi, size=n)
        return point(rz * np.exp(1j * tz), r * np.exp(1j * th))

    return Surface("worm", {"R": R}, _worm_rho, in_box, sampler, box_sampler,
                   levi_flat=levi_flat, chart=_worm_chart(), angular=True, leaf_path="polar")


def _resolve_gauge(g):
    if isinstance(g, GaugeFunction):
        return g
    if callable(g):
        return GaugeFunction(g, getattr(g, "__name__", "g"))
    if g not in GAUGES:
        raise BadParams(f"unknown gauge function {g!r}; known: {sorted(GAUGES)}")
    return GAUGES[g]


def gauge_transform(surface, g):
    """Return the surface defined by exp(g) * rho.

    The zero set, chart, sampling and Levi-flat predicate are unchanged.
    """
    g = _resolve_gauge(g)
    rho = surface.rho
    gf = g.func

    def new_rho(zr, zi, wr, wi):
        return jets.exp(gf(zr, zi, wr, wi)) * rho(zr, zi, wr, wi)

    return replace(surface, rho=new_rho, gauges=surface.gauges + (g,))


def catalog(name, params=None):
    """Build a catalog surface by name.

    Names: ``sphere``, ``flat``, ``sheared_flat`` (param ``g``, default
    ``zim_wre``), ``worm`` (param ``R > 1``, default 4) and ``gamma_sphere``
    (the 2-sphere {|z|^2 + (Re w)^2 = 1, Im w = 0}, returned as a
    :class:`levifold.tangency.Surface2D`).
    """
    params = dict(params or {})
    if name == "sphere":
        return _sphere(params)
    if name == "flat":
        return _flat_like("flat", params, _flat_rho)
    if name == "sheared_flat":
        g = _resolve_gauge(params.get("g", "zim_wre"))
        base = _flat_like("sheared_flat", {"g": g.name}, _flat_rho)
        return replace(gauge_transform(base, g), name="sheared_flat", params={"g": g.name})
    if name == "worm":
        return _worm(params)
    if name == "gamma_sphere":
        from .tangency import gamma_sphere
        return gamma_sphere()
    raise UnknownSurface(f"unknown surface {name!r}")


SURFACE_NAMES = ("sphere", "flat", "sheared_flat", "worm", "gamma_sphere")
