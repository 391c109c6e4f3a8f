"""Discrete closed defining forms and foliation-current certificates.

On a mesh of the Levi-flat region whose edges are either leafwise or
transverse, we look for a 1-cochain ``omega`` with ``d omega = 0`` on every
face, ``omega = 0`` on leafwise edges and ``omega >= 1`` on transverse
edges.  Such a cochain is a discrete closed 1-form defining the foliation.
When none exists, Farkas' lemma produces nonnegative transverse weights
that are the transverse part of a boundary of faces: a discrete foliation
current that no closed defining form can pair positively with.

The solver alternates between the subspace of admissible closed cochains
and the box ``omega >= 1``.  If the sets meet, the iterates enter the
intersection; if not, the gap between the two iterates converges to a
nonnegative vector orthogonal to the subspace, which is the certificate.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import lsqr

from .errors import BadParams, IterationLimit, NoChart, NonpositiveRatio, SeamError
from .frame import circulation, eta_ambient, frame_at

LEAFWISE, TRANSVERSE = 0, 1
CERT_TOL = 1e-8
MAX_ITER = 100_000
#: transverse-edge count above which the Gram matrix is not formed
MAX_DENSE = 12_000


@dataclass
class FoliatedMesh:
    """Vertices on leaves, typed edges and polygonal faces.

    ``d0`` is the (edges x vertices) coboundary on 0-cochains and ``d1`` the
    (faces x edges) coboundary on 1-cochains; faces that cross a periodic
    seam may have more than four sides.
    """

    surface_name: str
    points: np.ndarray
    labels: np.ndarray
    leaf_coords: np.ndarray
    edges: np.ndarray  # (n_edges, 2) vertex indices, oriented tail -> head
    kinds: np.ndarray  # LEAFWISE or TRANSVERSE
    eta_pairing: np.ndarray
    faces: list
    d0: sparse.csr_matrix
    d1: sparse.csr_matrix
    seam_edges: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    resolution: tuple = ()

    @property
    def transverse(self):
        return np.nonzero(self.kinds == TRANSVERSE)[0]

    @property
    def leafwise(self):
        return np.nonzero(self.kinds == LEAFWISE)[0]

    def edge_lengths(self):
        return np.linalg.norm(self.points[self.edges[:, 1]] - self.points[self.edges[:, 0]], axis=-1)

    def leafwise_eta_defect(self):
        """max |eta pairing| / length over leafwise edges."""
        lw = self.leafwise
        return float(np.max(np.abs(self.eta_pairing[lw]) / self.edge_lengths()[lw]))

    def dd_norm(self):
        return float(abs(self.d1 @ self.d0).max()) if self.d1.shape[0] else 0.0

    def to_dict(self):
        return {"surface": self.surface_name, "resolution": list(self.resolution),
                "vertices": self.points.tolist(), "labels": self.labels.tolist(),
                "edges": self.edges.tolist(),
                "kinds": ["leafwise" if k == LEAFWISE else "transverse" for k in self.kinds],
                "eta_pairing": self.eta_pairing.tolist(),
                "faces": [list(map(int, f)) for f in self.faces],
                "seam_edges": self.seam_edges.tolist()}


@dataclass
class Cochain1:
    values: np.ndarray

    def to_dict(self):
        return {"kind": "closed_form", "values": self.values.tolist()}


@dataclass
class CurrentCertificate:
    transverse_weights: np.ndarray  # full edge-length vector, zero off transverse edges
    leafwise_weights: np.ndarray
    face_multipliers: np.ndarray
    residual: float
    pairing: float

    def to_dict(self):
        return {"kind": "certificate", "residual": self.residual, "pairing": self.pairing,
                "transverse_weights": self.transverse_weights.tolist(),
                "leafwise_weights": self.leafwise_weights.tolist(),
                "face_multipliers": self.face_multipliers.tolist()}


# -- mesh construction ------------------------------------------------------------

class _Builder:
    def __init__(self, surface):
        self.surface = surface
        self.edge_index = {}
        self.edges, self.kinds, self.seam = [], [], []
        self.faces = []

    def edge(self, a, b, kind, seam=False):
        key = (min(a, b), max(a, b))
        if key not in self.edge_index:
            self.edge_index[key] = len(self.edges)
            self.edges.append((a, b))
            self.kinds.append(kind)
            if seam:
                self.seam.append(len(self.edges) - 1)
        return self.edge_index[key]

    def face(self, cycle):
        self.faces.append(list(cycle))

    def finish(self, points, labels, coords, resolution):
        edges = np.array(self.edges, dtype=int)
        kinds = np.array(self.kinds, dtype=int)
        pairing = _eta_pairing(self.surface, points, edges)
        # orient transverse edges so that eta pairs positively with them
        flip = (kinds == TRANSVERSE) & (pairing < 0)
        edges[flip] = edges[flip][:, ::-1]
        pairing[flip] = -pairing[flip]
        if np.any(pairing[kinds == TRANSVERSE] <= 0):
            raise SeamError("a transverse edge has zero eta pairing")
        index = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}
        ne, nv = len(edges), len(points)
        d0 = sparse.csr_matrix((np.r_[-np.ones(ne), np.ones(ne)],
                                (np.r_[np.arange(ne), np.arange(ne)], np.r_[edges[:, 0], edges[:, 1]])),
                               shape=(ne, nv))
        rows, cols, vals = [], [], []
        for f, cyc in enumerate(self.faces):
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                if (a, b) in index:
                    rows.append(f), cols.append(index[(a, b)]), vals.append(1.0)
                else:
                    rows.append(f), cols.append(index[(b, a)]), vals.append(-1.0)
        d1 = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.faces), ne))
        mesh = FoliatedMesh(self.surface.name, points, labels, coords, edges, kinds, pairing,
                            self.faces, d0, d1, np.array(self.seam, dtype=int), tuple(resolution))
        if mesh.dd_norm() != 0.0:
            raise SeamError("d o d does not vanish on the mesh")
        return mesh


def _eta_pairing(surface, points, edges):
    """eta at the chord midpoint applied to the chord."""
    a, b = points[edges[:, 0]], points[edges[:, 1]]
    return np.sum(eta_ambient(surface, 0.5 * (a + b)) * (b - a), axis=-1)


def _grid_mesh(surface, resolution, label_range=(-0.8, 0.8), w_range=(-1.5, 1.5)):
    nc, nu, nv = resolution
    labels = np.linspace(*label_range, nc)
    xs = np.linspace(*w_range, nu)
    ys = np.linspace(*w_range, nv)
    C, X, Y = np.meshgrid(labels, xs, ys, indexing="ij")
    pts = surface.chart.forward(C.ravel(), (X + 1j * Y).ravel())
    vid = np.arange(nc * nu * nv).reshape(nc, nu, nv)
    B = _Builder(surface)
    for i in range(nc):
        for j in range(nu):
            for k in range(nv):
                v = vid[i, j, k]
                if j + 1 < nu:
                    B.edge(v, vid[i, j + 1, k], LEAFWISE)
                if k + 1 < nv:
                    B.edge(v, vid[i, j, k + 1], LEAFWISE)
                if i + 1 < nc:
                    B.edge(v, vid[i + 1, j, k], TRANSVERSE)
    for i in range(nc):
        for j in range(nu - 1):
            for k in range(nv - 1):
                B.face([vid[i, j, k], vid[i, j + 1, k], vid[i, j + 1, k + 1], vid[i, j, k + 1]])
    for i in range(nc - 1):
        for j in range(nu):
            for k in range(nv):
                if j + 1 < nu:
                    B.face([vid[i, j, k], vid[i, j + 1, k], vid[i + 1, j + 1, k], vid[i + 1, j, k]])
                if k + 1 < nv:
                    B.face([vid[i, j, k], vid[i, j, k + 1], vid[i + 1, j, k + 1], vid[i + 1, j, k]])
    coords = np.stack([X.ravel(), Y.ravel()], axis=-1)
    return B.finish(pts, C.ravel(), coords, resolution)


def _worm_mesh(surface, resolution, c_top=1e-9):
    """Mesh on the worm near the annulus leaf L(0).

    Labels are 0 and a geometric sequence whose ratio is an m-th root of the
    monodromy factor, so that continuing a leaf once around the hole lands
    on the label m places higher: the seam identifies label index i with
    i + m (and 0 with 0).  Angles run over [-pi, pi) and radii over the
    annulus.  ``c_top`` keeps |z| small so that chords of leafwise edges stay
    almost tangent.
    """
    nc, nth, nr = resolution
    R = surface.params["R"]
    m = (nc - 1) // 2
    if m < 1:
        raise SeamError("need at least 3 labels for a seam on the worm")
    q = surface.chart.monodromy ** (1.0 / m)
    labels = np.r_[0.0, c_top * q ** (np.arange(nc - 1) - (nc - 2))]
    thetas = -np.pi + 2 * np.pi * np.arange(nth) / nth
    radii = np.linspace(1.0 + 0.05 * (R - 1), R - 0.05 * (R - 1), nr)
    C, TH, RR = np.meshgrid(labels, thetas, radii, indexing="ij")
    pts = surface.chart.forward(C.ravel(), (RR * np.exp(1j * TH)).ravel(), TH.ravel())
    vid = np.arange(nc * nth * nr).reshape(nc, nth, nr)

    def sigma(i):
        return 0 if i == 0 else i + m

    B = _Builder(surface)
    for i in range(nc):
        for j in range(nth):
            for k in range(nr):
                v = vid[i, j, k]
                if j + 1 < nth:
                    B.edge(v, vid[i, j + 1, k], LEAFWISE)
                elif sigma(i) < nc:
                    B.edge(v, vid[sigma(i), 0, k], LEAFWISE, seam=True)
                if k + 1 < nr:
                    B.edge(v, vid[i, j, k + 1], LEAFWISE)
                if i + 1 < nc:
                    B.edge(v, vid[i + 1, j, k], TRANSVERSE)

    def ahead(i, j, k):
        """Next vertex in the angular direction, across the seam if needed."""
        if j + 1 < nth:
            return vid[i, j + 1, k]
        return vid[sigma(i), 0, k] if sigma(i) < nc else None

    for i in range(nc):
        for j in range(nth):
            for k in range(nr - 1):
                a, b = ahead(i, j, k), ahead(i, j, k + 1)
                if a is not None and b is not None:
                    B.face([vid[i, j, k], a, b, vid[i, j, k + 1]])
    for i in range(nc - 1):
        for j in range(nth):
            for k in range(nr):
                a0, a1 = ahead(i, j, k), ahead(i + 1, j, k)
                if a0 is None or a1 is None:
                    continue
                if j + 1 < nth:
                    B.face([vid[i, j, k], a0, a1, vid[i + 1, j, k]])
                else:
                    # up the transverse column from sigma(i) to sigma(i+1) at angle 0
                    column = [vid[t, 0, k] for t in range(sigma(i), sigma(i + 1) + 1)]
                    B.face([vid[i, j, k]] + column + [vid[i + 1, j, k]])
            if i + 1 < nc:
                for k in range(nr - 1):
                    B.face([vid[i, j, k], vid[i, j, k + 1], vid[i + 1, j, k + 1], vid[i + 1, j, k]])
    coords = np.stack([TH.ravel(), RR.ravel()], axis=-1)
    return B.finish(pts, C.ravel(), coords, resolution)


def build_mesh(surface, resolution=(8, 8, 8)):
    """Foliated mesh of (a piece of) the Levi-flat region.

    Raises
    ------
    NoChart
        If the surface has no leaf chart.
    SeamError
        If the periodic identification breaks d o d = 0.
    """
    if surface.chart is None:
        raise NoChart(f"{surface.name} has no leaf chart")
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != 3 or min(resolution) < 4:
        raise ValueError("resolution needs three entries, each at least 4")
    if surface.chart.kind == "annulus":
        return _worm_mesh(surface, resolution)
    return _grid_mesh(surface, resolution)


# -- feasibility -----------------------------------------------------------------

def _null_basis(D):
    """Orthonormal basis of the null space of a sparse integer matrix.

    Eigenvectors of the small Gram matrix D^T D are much cheaper than an SVD
    of the tall face-by-edge matrix.
    """
    n = D.shape[1]
    if D.shape[0] == 0:
        return np.eye(n)
    if n > MAX_DENSE:
        raise BadParams(f"{n} transverse edges exceed the dense solver limit of {MAX_DENSE}")
    G = (D.T @ D).toarray() if sparse.issparse(D) else D.T @ D
    vals, vecs = np.linalg.eigh(G)
    return vecs[:, vals <= 1e-9 * max(1.0, vals[-1])]


def _mesh_null(mesh):
    if getattr(mesh, "_null", None) is None:
        mesh._null = _null_basis(mesh.d1[:, mesh.transverse])
    return mesh._null


def check_cochain(mesh, omega, tol=1e-9):
    """Post-hoc check of the three defining inequalities of a closed form."""
    v = np.asarray(omega.values if isinstance(omega, Cochain1) else omega, dtype=float)
    face = float(np.max(np.abs(mesh.d1 @ v))) if mesh.d1.shape[0] else 0.0
    leaf_ok = bool(np.all(v[mesh.leafwise] == 0.0))
    trans_ok = bool(np.all(v[mesh.transverse] >= 1.0))
    return face <= tol and leaf_ok and trans_ok, face


def check_certificate(mesh, cert, tol=CERT_TOL):
    """Post-hoc check: nonnegative, nonzero, orthogonal to admissible cochains."""
    t = mesh.transverse
    w = cert.transverse_weights[t]
    Q = _mesh_null(mesh)
    res = float(np.linalg.norm(Q.T @ w) / max(np.linalg.norm(w), 1e-300))
    pairing = float(w @ mesh.eta_pairing[t])
    return bool(np.all(w >= 0) and np.any(w > 0) and res < tol and pairing >= 1.0 - 1e-12), res


def solve_closed_form(mesh, max_iter=MAX_ITER, cert_tol=CERT_TOL):
    """Find a closed defining cochain or a certificate that none exists.

    Returns
    -------
    Cochain1 or CurrentCertificate

    Raises
    ------
    IterationLimit
        If neither outcome is reached within ``max_iter`` iterations.
    """
    t = mesh.transverse
    D = mesh.d1[:, t]
    Q = _mesh_null(mesh)
    ne = len(mesh.edges)
    x_b = np.ones(len(t))
    gn = res = np.inf
    for it in range(max_iter):
        x_s = Q @ (Q.T @ x_b)
        if Q.shape[1] and np.min(x_s) > 1e-9 * np.max(np.abs(x_s)):
            omega = np.zeros(ne)
            omega[t] = x_s / np.min(x_s)
            # one more projection removes the drift introduced by rescaling
            vals = omega[t]
            vals = Q @ (Q.T @ vals)
            omega[t] = vals / min(1.0, np.min(vals))
            return Cochain1(omega)
        x_b_new = np.maximum(x_s, 1.0)
        g = x_b_new - x_s
        gn = np.linalg.norm(g)
        if gn > 0:
            res = np.linalg.norm(Q.T @ g) / gn if Q.shape[1] else 0.0
            if res < cert_tol:
                return _certificate(mesh, D, g, res)
        x_b = x_b_new
    raise IterationLimit(f"no decision after {max_iter} iterations",
                         residuals={"gap": float(gn), "orthogonality": float(res),
                                    "min_projected": float(np.min(x_s))})


def _certificate(mesh, D, g, res):
    t = mesh.transverse
    ne = len(mesh.edges)
    g = np.where(g > 0, g, 0.0)
    g = g / float(g @ mesh.eta_pairing[t])
    # the certificate is homogeneous; nudge the scale so rounding cannot leave the pairing below 1
    while float(g @ mesh.eta_pairing[t]) < 1.0:
        g = g * (1.0 + 4 * np.finfo(float).eps)
    lam = lsqr(D.T.tocsr(), g, atol=1e-14, btol=1e-14, iter_lim=20000)[0]
    full = mesh.d1.T @ lam
    tw = np.zeros(ne)
    tw[t] = g
    lw = np.zeros(ne)
    lw[mesh.leafwise] = full[mesh.leafwise]
    return CurrentCertificate(tw, lw, lam, float(res), float(g @ mesh.eta_pairing[t]))


def extract_h_from_form(mesh, omega):
    """Vertex values h with omega = e^h eta on transverse edges.

    Raises
    ------
    NonpositiveRatio
        If some transverse ratio omega / eta is not positive.
    """
    v = omega.values if isinstance(omega, Cochain1) else np.asarray(omega, dtype=float)
    t = mesh.transverse
    ratio = v[t] / mesh.eta_pairing[t]
    if np.any(ratio <= 0):
        raise NonpositiveRatio("omega / eta is not positive on every transverse edge")
    lr = np.log(ratio)
    nv = len(mesh.points)
    total = np.zeros(nv)
    count = np.zeros(nv)
    for col in (0, 1):
        np.add.at(total, mesh.edges[t, col], lr)
        np.add.at(count, mesh.edges[t, col], 1.0)
    return total / np.maximum(count, 1.0)


def check_prop2_bridge(surface, h_field, step=1e-3, points=None, samples=64, seed=0):
    """Finite-difference d(e^h eta) on tangent parallelograms.

    Returns the maximum over sample points and basis planes (e1,e2),
    (e1,T), (e2,T) of the circulation divided by ``step**2``.
    """
    pts = surface.sample(samples, seed) if points is None else np.asarray(points, dtype=float)
    fr = frame_at(surface, pts)
    if surface.chart is None:
        raise NoChart(f"{surface.name} has no leaf chart")

    def omega(x):
        h, _, covered = h_field.evaluate(surface, x)
        return np.exp(h)[..., None] * eta_ambient(surface, x)

    worst = np.zeros(len(pts))
    for u, v in ((fr.e1, fr.e2), (fr.e1, fr.T), (fr.e2, fr.T)):
        worst = np.maximum(worst, np.abs(circulation(omega, pts, u, v, step)) / step**2)
    return float(np.max(worst))


def write_certificate_csv(mesh, cert, filename):
    """Edge weights for plotting (columns edge, kind, tail, head, weight)."""
    with open(filename, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["edge", "kind", "tail", "head", "weight"])
        for e, (a, b) in enumerate(mesh.edges):
            kind = "transverse" if mesh.kinds[e] == TRANSVERSE else "leafwise"
            wgt = cert.transverse_weights[e] if kind == "transverse" else cert.leafwise_weights[e]
            wr.writerow([e, kind, int(a), int(b), repr(float(wgt))])


def dump_json(obj, filename):
    with open(filename, "w") as fh:
        json.dump(obj.to_dict(), fh)
