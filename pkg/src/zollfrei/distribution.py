"""Connection forms on Lambda^-, the horizontal fields w1, w2 and involutivity.

Everything is computed in a local chart around the query point: the metric's
closed-form chart when it has one, otherwise the gnomonic chart.  A frame
field near the point is obtained by Gram-Schmidt on the coordinate basis
followed by the constant Lorentz transformation that matches the requested
frame at the point itself.

With ``nabla phi_j = theta^k_j (x) phi_k`` and the beta-plane vectors

    a(z) = (z^2+1) e1 - 2z e3 + (z^2-1) e4,
    b(z) = (z^2+1) e2 + (z^2-1) e3 + 2z e4,

the horizontal fields are ``w1 = a + Q1 d/dz`` and ``w2 = b + Q2 d/dz`` with

    Q(X) = (1-z^2)/2 theta^3_1(X) + z theta^2_1(X) - (1+z^2)/2 theta^2_3(X)

evaluated at ``X = a`` and ``X = b``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .geodesics import beta_plane_vectors
from .manifold import (PAIRING, PHI, chart_basis, chart_points, check_signature,
                       christoffel_from_jet, form_inner, gram_schmidt_components,
                       _richardson)

# ---------------------------------------------------------------------------
# local charts and frame fields
# ---------------------------------------------------------------------------


class LocalChart:
    """Chart data around a point: components ``G(c)``, base coordinates and basis.

    ``basis`` is the 6x4 matrix of ambient coordinate vectors at the base
    point and ``ref`` the orientation sign a positively oriented frame must
    have in these coordinates.
    """

    def __init__(self, g, p, native=None):
        self.g, self.p = g, p
        if native is None:
            native = g.native is not None
        if native:
            self.c0 = np.asarray(g.native.coords(p), dtype=float)
            self._comps = g.native.components
            self.basis = g.native.basis(p)
            self.ref = g.orientation * np.sign(np.linalg.det(chart_basis(p).T @ self.basis))
            self._point = None
        else:
            T = chart_basis(p)
            self.c0 = np.zeros(4)
            self._comps = lambda c: g.components(p, c, T)
            self.basis = T
            self.ref = g.orientation
            self._T = T
        self.native = native

    def comps(self, c):
        return self._comps(np.asarray(c, dtype=float))

    def ambient_point(self, c):
        """Ambient (x, y) of chart points (only needed for scalar fields)."""
        c = np.asarray(c, dtype=float)
        if not self.native:
            x, y, _ = chart_points(self.p, c - self.c0, self._T)
            return x, y
        # invert the stereographic chart by Newton from the base point
        from .manifold import stereographic_jacobian
        flat = c.reshape(-1, 4)
        xs, ys = [], []
        for cc in flat:
            X = self.p.array.copy()
            for _ in range(30):
                d = X[2] - X[5]
                cur = np.array([X[0], X[1], X[3], X[4]]) / (2 * d)
                J = stereographic_jacobian(X[:3], X[3:])
                # tangent step
                T = chart_basis_from(X)
                step = T @ np.linalg.solve(J @ T, cc - cur)
                X = X + step
                X[:3] /= np.linalg.norm(X[:3])
                X[3:] /= np.linalg.norm(X[3:])
                if np.linalg.norm(step) < 1e-15:
                    break
            xs.append(X[:3])
            ys.append(X[3:])
        return np.array(xs).reshape(c.shape[:-1] + (3,)), np.array(ys).reshape(c.shape[:-1] + (3,))

    def frame_components(self, frame):
        """Chart components (columns) of an ambient frame at the base point."""
        return np.linalg.lstsq(self.basis, frame.E.T, rcond=None)[0]


def chart_basis_from(X):
    from .manifold import Point4
    return chart_basis(Point4(X[:3], X[3:]))


class FrameField:
    """Smooth frame field ``E(c)`` (columns in chart components) near the base point.

    Parameters
    ----------
    chart : LocalChart
    E0 : (4, 4) array, optional
        Frame at the base point; defaults to Gram-Schmidt of the coordinate
        basis.
    scale : callable, optional
        ``scale(c)`` multiplying the frame (used for conformal rescaling).
    """

    def __init__(self, chart, E0=None, scale=None):
        self.chart = chart
        G0 = chart.comps(chart.c0)
        check_signature(G0, " at frame base point")
        B0 = gram_schmidt_components(G0, np.eye(4), orientation_ref=chart.ref)
        if E0 is None:
            E0 = B0
        self.L = np.linalg.solve(B0, E0)
        self.scale = scale

    def __call__(self, c):
        G = self.chart.comps(c)
        E = gram_schmidt_components(G, np.eye(4), orientation_ref=self.chart.ref) @ self.L
        if self.scale is not None:
            E = E * self.scale(c)
        return E


# ---------------------------------------------------------------------------
# connection forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConnectionForms:
    """``theta[k, j, l]`` = theta^k_{j l} for k, j in {1,2,3} and l in {1..4} (0-based)."""

    theta: np.ndarray

    def symmetry_defect(self):
        t = self.theta
        return float(max(np.max(np.abs(t[0, 1] - t[1, 0])), np.max(np.abs(t[0, 2] - t[2, 0])),
                         np.max(np.abs(t[1, 2] + t[2, 1])),
                         np.max(np.abs([t[0, 0], t[1, 1], t[2, 2]]))))

    def of(self, k, j, X):
        """``theta^k_j(X)`` for frame components ``X`` (1-based k, j as in the formulas)."""
        return self.theta[k - 1, j - 1] @ X


def _d(f, c0, h, levels=2):
    """Central-difference derivatives of ``f`` along each chart axis, Richardson-combined."""
    out = []
    for k in range(4):
        ests = []
        for n in range(levels):
            s = h / 2 ** n
            e = np.zeros(4)
            e[k] = s
            ests.append((f(c0 + e) - f(c0 - e)) / (2 * s))
        out.append(_richardson(ests))
    return np.array(out)


def _theta_at(chart, field, c, h=1e-3, levels=2):
    """Connection forms of the frame field at chart point ``c``."""
    offs = [np.zeros(4)]
    hs = [h / 2 ** n for n in range(levels)]
    for s in hs:
        for k in range(4):
            e = np.zeros(4)
            e[k] = s
            offs += [e, -e]
    vals = chart.comps(c + np.array(offs))
    G = vals[0]
    ax = vals[1:].reshape(levels, 4, 2, 4, 4)
    dG = _richardson([(ax[n, :, 0] - ax[n, :, 1]) / (2 * hs[n]) for n in range(levels)])
    dG = 0.5 * (dG + np.swapaxes(dG, -1, -2))
    Gam = christoffel_from_jet(G, dG)
    E = field(c)
    dE = _d(field, c, h, levels)  # dE[i] = d_i E
    Einv = np.linalg.inv(E)
    # nabla_{e_l} e_a = omega^b_{a l} e_b
    Dl = np.einsum("il,ika->kal", E, dE)  # e_l(E^k_a)
    Dl = Dl + np.einsum("kij,il,ja->kal", Gam, E, E)
    omega = np.einsum("bk,kal->bal", Einv, Dl)
    # (nabla_l phi_j)_ab = -omega^c_{a l} phi_{j,cb} - omega^c_{b l} phi_{j,ac}
    dphi = -np.einsum("cal,jcb->ljab", omega, PHI) - np.einsum("cbl,jac->ljab", omega, PHI)
    theta = np.empty((3, 3, 4))
    for k in range(3):
        theta[k] = PAIRING[k] * form_inner(dphi, PHI[k][None, None]).T
    return theta


def _chart_and_field(g, p, frame=None, chart=None, frame_field=None):
    chart = chart or LocalChart(g, p)
    if frame_field is None:
        E0 = None if frame is None else chart.frame_components(frame)
        frame_field = FrameField(chart, E0)
    return chart, frame_field


def connection_forms(g, p, frame=None, chart=None, frame_field=None, h=1e-3):
    """Connection 1-forms of Lambda^- in the ASD basis of ``frame`` at ``p``.

    Parameters
    ----------
    g : MetricField
    p : Point4
    frame : Frame4, optional
        Defaults to the Gram-Schmidt frame of the chart coordinate basis.
    chart, frame_field : optional
        Override the local chart or supply an explicit frame field.
    h : float
        Finite-difference step for the frame and metric derivatives.

    Returns
    -------
    ConnectionForms
    """
    chart, field = _chart_and_field(g, p, frame, chart, frame_field)
    return ConnectionForms(_theta_at(chart, field, chart.c0, h))


# ---------------------------------------------------------------------------
# horizontal fields
# ---------------------------------------------------------------------------


def _plane_coeffs(z):
    E = np.eye(4)
    return beta_plane_vectors(E, z)


def q_functions(theta, z):
    """``(Q1, Q2)`` from connection components ``theta`` (3, 3, 4) at fibre coordinate ``z``."""
    a, b = _plane_coeffs(z)
    out = []
    for X in (a, b):
        t31 = theta[2, 0] @ X
        t21 = theta[1, 0] @ X
        t23 = theta[1, 2] @ X
        out.append((1 - z * z) / 2 * t31 + z * t21 - (1 + z * z) / 2 * t23)
    return out[0], out[1]


@dataclass(frozen=True, eq=False)
class HorizontalPair:
    """Components of w1, w2 in the basis (e1..e4, d/dz) at a point of the fibre."""

    w1: np.ndarray
    w2: np.ndarray
    Q1: complex
    Q2: complex
    zeta: complex


def horizontal_fields(g, p, frame=None, zeta=0.0, chart=None, frame_field=None, theta=None):
    """The fields w1 and w2 at ``(p, zeta)``.

    Raises
    ------
    ContractViolation
        For ``zeta = +-i`` where the affine fibre coordinate breaks down.
    """
    if abs(zeta - 1j) < 1e-12 or abs(zeta + 1j) < 1e-12:
        raise ContractViolation("zeta = +-i is outside the affine fibre coordinate")
    if theta is None:
        theta = connection_forms(g, p, frame, chart, frame_field).theta
    a, b = _plane_coeffs(zeta)
    Q1, Q2 = q_functions(theta, zeta)
    w1 = np.concatenate([a, [Q1]])
    w2 = np.concatenate([b, [Q2]])
    if np.isrealobj(w1) and np.isrealobj(w2):
        return HorizontalPair(w1.astype(float), w2.astype(float), Q1, Q2, zeta)
    return HorizontalPair(w1, w2, Q1, Q2, zeta)


# ---------------------------------------------------------------------------
# brackets
# ---------------------------------------------------------------------------


def _fields_at(chart, field, c, z, h):
    """Coordinate components (5,) of w1, w2 at chart point ``c`` and real ``z``."""
    E = field(c)
    th = _theta_at(chart, field, c, h)
    a, b = _plane_coeffs(z)
    Q1, Q2 = q_functions(th, z)
    return np.concatenate([E @ a, [Q1]]), np.concatenate([E @ b, [Q2]]), th


def involutivity_residual(g, p, zeta, step=1e-2, frame=None, chart=None, frame_field=None,
                          h=1e-3, levels=3):
    """Size of ``[w1, w2]`` transverse to ``span{w1, w2}`` at real ``zeta``.

    Components are taken in the coordinates ``(c, z)``; the bracket is formed
    from central differences of the field components (outer step ``step``,
    Richardson levels ``levels``; the inner derivatives inside the connection
    use step ``h``).  The transverse part is measured after converting the
    spatial components to frame components and divided by ``|w1| |w2|``.
    """
    if np.iscomplexobj(zeta) and abs(np.imag(zeta)) > 0:
        raise ContractViolation("involutivity_residual works on the real locus")
    z = float(np.real(zeta))
    chart, field = _chart_and_field(g, p, frame, chart, frame_field)
    c0 = chart.c0
    W1, W2, th0 = _fields_at(chart, field, c0, z, h)

    # spatial derivatives of the components
    def both(c):
        u, v, _ = _fields_at(chart, field, c, z, h)
        return np.stack([u, v])

    dW = _d(both, c0, step, levels)  # (4, 2, 5)
    # z-derivatives only involve the polynomial dependence on z
    hz = 1e-3

    def zfield(zz):
        a, b = _plane_coeffs(zz)
        Q1, Q2 = q_functions(th0, zz)
        E = field(c0)
        return np.stack([np.concatenate([E @ a, [Q1]]), np.concatenate([E @ b, [Q2]])])

    dzW = _richardson([(zfield(z + hz / 2 ** n) - zfield(z - hz / 2 ** n)) / (2 * hz / 2 ** n)
                       for n in range(3)])
    D = np.concatenate([dW, dzW[None]], axis=0)  # D[nu, field, mu]
    br = np.einsum("n,nm->m", W1, D[:, 1]) - np.einsum("n,nm->m", W2, D[:, 0])
    E0 = field(c0)
    conv = np.eye(5)
    conv[:4, :4] = np.linalg.inv(E0)
    B, u, v = conv @ br, conv @ W1, conv @ W2
    M = np.column_stack([u, v])
    coef = np.linalg.lstsq(M, B, rcond=None)[0]
    perp = B - M @ coef
    return float(np.linalg.norm(perp) / (np.linalg.norm(u) * np.linalg.norm(v)))


def conformal_invariance_check(g, f, p, zeta, frame=None, h=1e-3):
    """``max_j |w_j(g) - f^(1/2) w^_j(f g)|`` with the rescaled frame ``f^(-1/2) e``.

    ``f`` is a positive function of ambient ``(x, y)`` or a constant.  Both
    fields are compared in coordinate components ``(c, z)``.
    """
    if not callable(f):
        const = float(f)
        f = lambda x, y: np.full(np.shape(x)[:-1], const)
    gh = g.scaled(f)
    chart = LocalChart(g, p, native=False)
    chart_h = LocalChart(gh, p, native=False)
    field = FrameField(chart, None if frame is None else chart.frame_components(frame))

    def fc(c):
        x, y = chart.ambient_point(c)
        return f(x, y)

    def field_h(c):
        return field(c) * fc(c) ** -0.5

    th = _theta_at(chart, field, chart.c0, h)
    thh = _theta_at(chart_h, field_h, chart_h.c0, h)
    E, Eh = field(chart.c0), field_h(chart_h.c0)
    f0 = float(fc(chart.c0))
    worst = 0.0
    a, b = _plane_coeffs(zeta)
    Q, Qh = q_functions(th, zeta), q_functions(thh, zeta)
    for X, q, qh in ((a, Q[0], Qh[0]), (b, Q[1], Qh[1])):
        w = np.concatenate([E @ X, [q]])
        wh = np.concatenate([Eh @ X, [qh]])
        worst = max(worst, float(np.linalg.norm(w - np.sqrt(f0) * wh)))
    return worst


# ---------------------------------------------------------------------------
# flat twistor map
# ---------------------------------------------------------------------------


def flat_twistor_map(xi1, xi2, eta1, eta2, zeta):
    """Holomorphic coordinates of the flat model's twistor space.

    ``z1 = (xi1 + eta2) + (eta1 - xi2) zeta``, ``z2 = (eta1 + xi2) + (xi1 - eta2) zeta``,
    ``z3 = zeta``.
    """
    z1 = (xi1 + eta2) + (eta1 - xi2) * zeta
    z2 = (eta1 + xi2) + (xi1 - eta2) * zeta
    return np.array([z1, z2, zeta + 0 * z1])


def annihilation_residual(c, zeta, h=1e-4):
    """Largest ``|w_j z_k|`` and ``|d/dzbar z_k|`` for the flat fields in chart coordinates.

    The flat fields have ``e_i = d/dc_i`` and ``Q = 0``; derivatives of the
    (affine-linear) map are taken by central differences.
    """
    c = np.asarray(c, dtype=float)

    def F(cc, zz):
        return flat_twistor_map(cc[0], cc[1], cc[2], cc[3], zz)

    grads = np.array([(F(c + h * e, zeta) - F(c - h * e, zeta)) / (2 * h) for e in np.eye(4)])
    a, b = _plane_coeffs(zeta)
    w1z = a @ grads
    w2z = b @ grads
    # d/dzbar = (d/dx + i d/dy)/2 for zeta = x + i y
    dzbar = 0.5 * ((F(c, zeta + h) - F(c, zeta - h)) / (2 * h)
                   + 1j * (F(c, zeta + 1j * h) - F(c, zeta - 1j * h)) / (2 * h))
    return float(max(np.max(np.abs(w1z)), np.max(np.abs(w2z)), np.max(np.abs(dzbar))))
