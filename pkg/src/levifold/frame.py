"""The CR frame of a hypersurface in C^2 and the one-form alpha.

With ``eta = i(d rho - dbar rho)`` and ``T = -i(L_n - conj L_n)`` one finds in
real coordinates ``eta = -J grad rho`` and ``T = eta / |grad rho|^2``, where
``J`` is multiplication by ``i``.  Hence ``eta(T) = 1`` holds on every level set
of rho, not only on the zero set, and ``alpha = -Lie_T eta = -i_T d eta``.

Everything here is vectorized: points may carry any leading batch shape.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotLeviFlat, OffSurface, ReconcileError, SingularGradient
from .surface import eval_jet2

#: flow time for the Lie-derivative route
FLOW_STEP = 1e-3


def J(v):
    """Multiplication by i on real coordinates (x1, y1, x2, y2)."""
    v = np.asarray(v)
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


def real_vector(c):
    """Real vector ``V + conj V`` of a (1,0) vector with coefficients ``c``."""
    c = np.asarray(c, dtype=complex)
    out = np.empty(c.shape[:-1] + (4,))
    out[..., 0::2] = c.real
    out[..., 1::2] = c.imag
    return out


@dataclass
class Frame:
    """CR frame at boundary points.

    ``e1 = L1 + conj L1`` and ``e2 = J e1`` are the unit real vectors spanning
    the complex tangent space; ``(e1, e2, T)`` is the basis on which alpha is
    reported.
    """

    point: np.ndarray
    Ln: np.ndarray
    T: np.ndarray
    eta: np.ndarray
    L1: np.ndarray
    levi: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    jet: object

    def basis(self):
        return np.stack([self.e1, self.e2, self.T], axis=-2)


def _frame_from_jet(p, jet):
    g = jet.real_grad
    N = np.sum(g * g, axis=-1)
    eta = -J(g)
    T = eta / N[..., None]
    holo = jet.holo_grad
    Ln = 2.0 * np.conj(holo) / N[..., None]
    L1 = np.stack([-holo[..., 1], holo[..., 0]], axis=-1)
    L1 = L1 / np.linalg.norm(L1, axis=-1, keepdims=True)
    e1 = real_vector(L1)
    e2 = J(e1)
    levi = None
    if jet.hess_mixed is not None:
        levi = np.real(np.einsum("...j,...k,...jk->...", L1, np.conj(L1), jet.hess_mixed))
    return Frame(p, Ln, T, eta, L1, levi, e1, e2, jet)


def frame_at(surface, p, check=True):
    """Frame (eta, T, L_n, L1, Levi form) at on-surface points ``p``."""
    p = np.asarray(p, dtype=float)
    jet = eval_jet2(surface, p)
    if check:
        if np.any(np.abs(jet.value) >= max(surface.tol, 1e-8)):
            raise OffSurface(f"|rho| = {np.max(np.abs(jet.value)):.3g} on {surface.name}")
        if np.any(np.linalg.norm(jet.real_grad, axis=-1) < 1e-12):
            raise SingularGradient("grad rho vanishes")
    return _frame_from_jet(p, jet)


def frame_field(surface, p):
    """First-order frame at arbitrary points (no Hessian, no surface check).

    Used by the integrators, which only need directions.
    """
    p = np.asarray(p, dtype=float)
    return _frame_from_jet(p, eval_jet2(surface, p, order=1))


def levi_form(surface, p):
    """Levi form of rho on (L1, conj L1) with |L1| = 1."""
    return frame_at(surface, p).levi


# -- alpha ----------------------------------------------------------------------

def alpha_bar_L1(jet):
    """alpha(conj L1) = 2 d rho([L_n, conj L1]) in closed form from the 2-jet.

    For a (0,1) field Y only the (1,0) part of [L_n, Y] survives under
    d rho, so the value is ``-2 sum_k rho_k Y(L_n^k)`` with the derivative of
    the coefficient ``L_n^k = 2 conj(rho_k) / N`` taken along Y.
    """
    rho_k = jet.holo_grad
    M = jet.hess_mixed  # M[j, k] = rho_{z_j zbar_k}
    P = jet.hess_holo  # P[j, k] = rho_{z_j z_k}
    N = 4.0 * np.sum(np.abs(rho_k) ** 2, axis=-1)
    L1 = np.stack([-rho_k[..., 1], rho_k[..., 0]], axis=-1)
    L1 = L1 / np.linalg.norm(L1, axis=-1, keepdims=True)
    Ybar = np.conj(L1)
    # dN[j] = d N / d zbar_j
    dN = 4.0 * (np.einsum("...mj,...m->...j", M, np.conj(rho_k))
                + np.einsum("...m,...jm->...j", rho_k, np.conj(P)))
    # dLn[j, k] = d L_n^k / d zbar_j
    dLn = (2.0 * np.conj(P) / N[..., None, None]
           - 2.0 * np.conj(rho_k)[..., None, :] * dN[..., :, None] / (N**2)[..., None, None])
    Y_Ln = np.einsum("...j,...jk->...k", Ybar, dLn)
    return -2.0 * np.sum(rho_k * Y_Ln, axis=-1)


def _flow_jacobian(surface, x):
    jet = eval_jet2(surface, x)
    g, H = jet.real_grad, jet.real_hess
    N = np.sum(g * g, axis=-1)
    eta = -J(g)
    # d_i eta_j = -(J H[:, i])_j
    deta = -J(np.swapaxes(H, -1, -2))  # deta[..., i, j] = d_i eta_j
    dN = 2.0 * np.einsum("...ij,...j->...i", H, g)
    T = eta / N[..., None]
    # DT[..., j, i] = d_i T^j
    DT = (np.swapaxes(deta, -1, -2) / N[..., None, None]
          - eta[..., :, None] * dN[..., None, :] / (N**2)[..., None, None])
    return T, DT, eta


def _pulled_back_eta(surface, p, V, s, substeps=2):
    """(phi_s^* eta)_p(V) by RK4 on the flow of T and its variational equation."""
    x = np.array(p, dtype=float)
    V = np.array(V, dtype=float)
    h = s / substeps

    def rhs(x, V):
        T, DT, _ = _flow_jacobian(surface, x)
        return T, np.einsum("...ji,...ki->...kj", DT, V)

    for _ in range(substeps):
        k1x, k1v = rhs(x, V)
        k2x, k2v = rhs(x + 0.5 * h * k1x, V + 0.5 * h * k1v)
        k3x, k3v = rhs(x + 0.5 * h * k2x, V + 0.5 * h * k2v)
        k4x, k4v = rhs(x + h * k3x, V + h * k3v)
        x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        V = V + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    _, _, eta = _flow_jacobian(surface, x)
    return np.einsum("...j,...kj->...k", eta, V)


def alpha_lie_fd(surface, p, vectors, s0=FLOW_STEP):
    """alpha(v) = -d/ds (phi_s^* eta)(v) by a central difference in s.

    ``vectors`` has shape ``(..., k, 4)``; returns shape ``(..., k)``.
    """
    plus = _pulled_back_eta(surface, p, vectors, s0)
    minus = _pulled_back_eta(surface, p, vectors, -s0)
    return -(plus - minus) / (2.0 * s0)


@dataclass
class AlphaSample:
    """alpha at ``base`` on the basis ``(e1, e2, T)``.

    ``covector`` holds the commutator-route leafwise components and the
    Lie-route T component; ``lie_route`` keeps all three Lie-route values.
    """

    base: np.ndarray
    covector: np.ndarray
    basis: np.ndarray
    lie_route: np.ndarray
    discrepancy: np.ndarray

    @property
    def bar_L1(self):
        """alpha(conj L1) as a complex number."""
        return 0.5 * (self.covector[..., 0] + 1j * self.covector[..., 1])

    def apply(self, v):
        """Evaluate on ambient tangent vectors via the dual basis."""
        e1, e2, T = (self.basis[..., i, :] for i in range(3))
        v = np.asarray(v, dtype=float)
        # eta(v) picks the T-coordinate since eta(e1) = eta(e2) = 0, eta(T) = 1
        N = 1.0 / np.sum(T * T, axis=-1)
        cT = N * np.sum(T * v, axis=-1)
        w = v - cT[..., None] * T
        c1 = np.sum(e1 * w, axis=-1)
        c2 = np.sum(e2 * w, axis=-1)
        return self.covector[..., 0] * c1 + self.covector[..., 1] * c2 + self.covector[..., 2] * cT


def alpha_leafwise(surface, p):
    """(alpha(e1), alpha(e2)) by the commutator route, without the Lie check."""
    jet = eval_jet2(surface, p)
    a = alpha_bar_L1(jet)
    return np.stack([2.0 * a.real, 2.0 * a.imag], axis=-1)


def alpha_at(surface, p, s0=FLOW_STEP):
    """alpha = -Lie_T eta at boundary points, computed two ways and reconciled.

    Raises
    ------
    ReconcileError
        If the commutator route and the Lie-derivative route disagree by more
        than ``max(1e-6, 10 s0^2)`` (relative to max(1, |alpha|)) on a
        leafwise component.
    """
    fr = frame_at(surface, p)
    a = alpha_bar_L1(fr.jet)
    leaf = np.stack([2.0 * a.real, 2.0 * a.imag], axis=-1)
    basis = fr.basis()
    lie = alpha_lie_fd(surface, fr.point, basis, s0)
    disc = np.abs(leaf - lie[..., :2])
    scale = np.maximum(1.0, np.abs(leaf))
    tol = max(1e-6, 10.0 * s0**2)
    if np.any(disc > tol * scale):
        raise ReconcileError(f"alpha routes disagree by {np.max(disc):.3g}")
    cov = np.concatenate([leaf, lie[..., 2:3]], axis=-1)
    return AlphaSample(fr.point, cov, basis, lie, disc)


# -- structure identity ---------------------------------------------------------

_SIMPSON = (np.array([0.0, 0.5, 1.0]), np.array([1.0, 4.0, 1.0]) / 6.0)


def eta_ambient(surface, x):
    """The ambient one-form eta = -J grad rho at arbitrary box points."""
    return -J(eval_jet2(surface, x, order=1).real_grad)


def circulation(form, center, u, v, step):
    """Integral of a one-form around the parallelogram centred at ``center``.

    ``form(x)`` returns covectors at points ``x``.  Each edge uses Simpson's
    rule; the result divided by ``step**2`` approximates the exterior
    derivative on (u, v) with O(step^2) error.
    """
    c = np.asarray(center, dtype=float)
    a, b = 0.5 * step * np.asarray(u), 0.5 * step * np.asarray(v)
    corners = [c - a - b, c + a - b, c + a + b, c - a + b]
    total = 0.0
    nodes, weights = _SIMPSON
    for i in range(4):
        p0, p1 = corners[i], corners[(i + 1) % 4]
        d = p1 - p0
        for t, wt in zip(nodes, weights):
            x = p0 + t * d
            total = total + wt * np.sum(form(x) * d, axis=-1)
    return total


def d_eta(surface, p, u, v, step):
    return circulation(lambda x: eta_ambient(surface, x), p, u, v, step) / step**2


def structure_residual(surface, p, step=1e-3, alpha=None):
    """|| d eta - alpha ^ eta || over the basis planes (e1,e2), (e1,T), (e2,T).

    Raises
    ------
    NotLeviFlat
        If any point is outside the declared Levi-flat region.
    """
    p = np.asarray(p, dtype=float)
    if not np.all(surface.in_K(p)):
        raise NotLeviFlat(f"point outside the Levi-flat region of {surface.name}")
    al = alpha_at(surface, p) if alpha is None else alpha
    B = al.basis
    cov = al.covector
    # eta on the basis is (0, 0, 1)
    eta_b = np.zeros_like(cov)
    eta_b[..., 2] = 1.0
    res = 0.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        lhs = d_eta(surface, p, B[..., i, :], B[..., j, :], step)
        rhs = cov[..., i] * eta_b[..., j] - cov[..., j] * eta_b[..., i]
        res = res + (lhs - rhs) ** 2
    return np.sqrt(res)


# -- commutators --------------------------------------------------------------------

@dataclass
class CommutatorQuery:
    """Data of X = exp(h) L_n + a1 L1 needed for d rho([X, conj L1]).

    ``dh`` holds the leafwise derivatives (dh(e1), dh(e2)).
    """

    h_value: float = 0.0
    dh: tuple = (0.0, 0.0)
    a1: complex = 0.0
    k: int = 1


def commutator_normal(surface, p, q, alpha=None):
    """Normal (1,0) component d rho([X, conj L1]) of the commutator.

    Uses ``1/2 e^h [conj(L1) h + alpha(conj L1)] + a1 d rho([L1, conj L1])``,
    where the last bracket equals the Levi form because d rho(L1) = 0
    identically.
    """
    fr = frame_at(surface, p)
    if alpha is None:
        a = alpha_bar_L1(fr.jet)
    else:
        a = alpha.bar_L1
    dh = np.asarray(q.dh, dtype=float)
    Lbar_h = 0.5 * (dh[..., 0] + 1j * dh[..., 1])
    return 0.5 * np.exp(q.h_value) * (Lbar_h + a) + q.a1 * fr.levi
