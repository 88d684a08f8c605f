"""Totally real embeddings of RP^3 in CP^3, the affine chart and the quadric.

Points of RP^3 are unit vectors of R^4 up to sign.  A deformation is an odd
polynomial map ``P: R^4 -> R^4`` whose tangential part ``v(x) = P(x) - (x.P)x``
is a vector field on S^3 that descends to RP^3.  The deformed submanifold is
the image of ``x -> [x + i v(x)/sqrt(1 + |v|^2)]``.

The quadric ``Q = {sum z_j^2 = 0}`` is identified with S^2 x S^2 through
oriented 2-planes of R^4: the plane ``x ^ y`` with Euclidean self-dual and
anti-self-dual parts ``(xi_plus, xi_minus)`` corresponds to ``[x + i y]``, and
to the point ``(xi_plus, -xi_minus)`` of S^2 x S^2.
"""

from dataclasses import dataclass
from itertools import combinations_with_replacement
import json

import numpy as np

from .errors import ContractViolation, PoleError, TotallyRealViolation
from .manifold import Point4

# ---------------------------------------------------------------------------
# polynomial vector fields
# ---------------------------------------------------------------------------


def monomial_exponents(degree):
    """Exponent vectors (n, 4) of all monomials of exactly ``degree`` in 4 variables."""
    out = []
    for combo in combinations_with_replacement(range(4), degree):
        e = np.zeros(4, dtype=int)
        for k in combo:
            e[k] += 1
        out.append(e)
    return np.array(out, dtype=int).reshape(-1, 4)


def odd_exponents(max_degree):
    return np.concatenate([monomial_exponents(d) for d in range(1, max_degree + 1, 2)])


def _monomials(x, exps):
    """Values (..., n) and gradients (..., n, 4) of monomials at ``x``."""
    x = np.asarray(x)
    deg = int(exps.max()) if exps.size else 0
    pw = np.ones(x.shape + (deg + 1,), dtype=x.dtype if np.iscomplexobj(x) else float)
    for k in range(1, deg + 1):
        pw[..., k] = pw[..., k - 1] * x
    f = [pw[..., i, exps[:, i]] for i in range(4)]
    val = f[0] * f[1] * f[2] * f[3]
    grad = np.empty(val.shape + (4,), dtype=val.dtype)
    for i in range(4):
        e = exps[:, i]
        d = e * pw[..., i, np.maximum(e - 1, 0)]
        o = [f[j] for j in range(4) if j != i]
        grad[..., i] = d * o[0] * o[1] * o[2]
    return val, grad


@dataclass(frozen=True, eq=False)
class PolyField:
    """``P(x) = sum_m coef[m] x^exps[m]`` with values in R^4 (or C^4 for complex x)."""

    exps: np.ndarray
    coef: np.ndarray

    @property
    def degree(self):
        return int(self.exps.sum(axis=1).max()) if len(self.exps) else 0

    def __call__(self, x):
        val, _ = _monomials(x, self.exps)
        return val @ self.coef

    def jacobian(self, x):
        """``DP[..., i, k] = d P_i / d x_k``."""
        _, grad = _monomials(x, self.exps)
        return np.einsum("...mk,mi->...ik", grad, self.coef)

    def homogeneous_part(self, degree):
        keep = self.exps.sum(axis=1) == degree
        return PolyField(self.exps[keep], self.coef[keep])

    def scaled(self, s):
        return PolyField(self.exps, self.coef * s)

    def __add__(self, other):
        return PolyField(np.concatenate([self.exps, other.exps]),
                         np.concatenate([self.coef, other.coef]))


def zero_field():
    return PolyField(np.zeros((0, 4), dtype=int), np.zeros((0, 4)))


def tangential(P, x):
    """``v(x) = P(x) - (x.P(x)) x`` and its Jacobian ``Dv`` (..., 4, 4)."""
    Px = P(x)
    DP = P.jacobian(x)
    xp = np.sum(x * Px, axis=-1)
    v = Px - xp[..., None] * x
    dxp = Px + np.einsum("...i,...ik->...k", x, DP)
    Dv = DP - x[..., :, None] * dxp[..., None, :] - xp[..., None, None] * np.eye(4)
    return v, Dv


def sample_sphere3(n, rng=None):
    """Deterministic (or random) unit vectors in R^4 for validation grids."""
    if rng is None:
        rng = np.random.default_rng(12345)
    x = rng.standard_normal((n, 4))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


def gimel_embed(x, y):
    """``[x + i y / sqrt(1 + |y|^2)]`` for unit ``x`` and ``y`` orthogonal to ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1) > 1e-9):
        raise ContractViolation("gimel_embed needs a unit vector x")
    if np.any(np.abs(np.sum(x * y, axis=-1)) > 1e-9):
        raise ContractViolation("gimel_embed needs y orthogonal to x")
    s = np.sqrt(1.0 + np.sum(y * y, axis=-1))
    return x + 1j * y / s[..., None]


class Embedding:
    """Interface: ``embed(n)`` (C^4) and ``derivative(n, t)`` for unit ``n`` and tangent ``t``.

    ``jet(n)`` returns the point and a complex matrix ``J`` (..., 4, 4) with
    ``derivative(n, t) = J t`` for tangent ``t``.
    """

    def embed(self, n):
        raise NotImplementedError

    def derivative(self, n, t):
        return np.einsum("...ij,...j->...i", self.jet(n)[1], t)

    def jet(self, n):
        raise NotImplementedError

    def rotated(self, A):
        return RotatedEmbedding(self, A)


class RotatedEmbedding(Embedding):
    """``x -> A^T E(A x)``: the image moved by the real projective map ``A^T``."""

    def __init__(self, base, A):
        self.base, self.A = base, np.asarray(A, dtype=float)

    def embed(self, n):
        return self.base.embed(n @ self.A.T) @ self.A

    def jet(self, n):
        z, J = self.base.jet(n @ self.A.T)
        return z @ self.A, self.A.T @ J @ self.A


class TotallyRealEmbedding(Embedding):
    """The graph embedding ``P_v`` for ``v`` the tangential part of an odd polynomial field.

    Parameters
    ----------
    field : PolyField
        Odd polynomial map; only odd degrees are accepted so that ``v``
        descends to RP^3.
    """

    def __init__(self, field=None):
        field = zero_field() if field is None else field
        deg = field.exps.sum(axis=1)
        if np.any(deg % 2 == 0):
            raise ContractViolation("embedding fields must be odd polynomials")
        self.field = field
        self._norm = None

    def v(self, n):
        return tangential(self.field, n)[0]

    def embed(self, n):
        v = self.v(n)
        s = np.sqrt(1.0 + np.sum(v * v, axis=-1))
        return n + 1j * v / s[..., None]

    def jet(self, n):
        v, Dv = tangential(self.field, n)
        s = np.sqrt(1.0 + np.sum(v * v, axis=-1))
        z = n + 1j * v / s[..., None]
        vD = np.einsum("...i,...ik->...k", v, Dv)
        J = Dv / s[..., None, None] - v[..., :, None] * vD[..., None, :] / s[..., None, None] ** 3
        return z, np.eye(4) + 1j * J

    # -- diagnostics -------------------------------------------------------

    def tangency_defect(self, pts=None):
        pts = sample_sphere3(500) if pts is None else pts
        return float(np.max(np.abs(np.sum(self.v(pts) * pts, axis=-1))))

    def evenness_defect(self, pts=None):
        """``max |v(-x) + v(x)|``: zero when ``v`` descends to RP^3."""
        pts = sample_sphere3(500) if pts is None else pts
        return float(np.max(np.abs(self.v(-pts) + self.v(pts))))

    def sup_norm(self, pts=None):
        pts = sample_sphere3(4000) if pts is None else pts
        return float(np.max(np.linalg.norm(self.v(pts), axis=-1)))

    @property
    def norm_estimate(self):
        """C^3-type surrogate: max of |v| and of its first three derivatives along great circles."""
        if self._norm is None:
            rng = np.random.default_rng(777)
            x = sample_sphere3(400, rng)
            u = rng.standard_normal(x.shape)
            u -= np.sum(u * x, axis=1, keepdims=True) * x
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            h = 1e-2
            vals = []
            for k in range(-2, 3):
                p = np.cos(k * h) * x + np.sin(k * h) * u
                vals.append(self.v(p))
            f = np.array(vals)
            d1 = (f[3] - f[1]) / (2 * h)
            d2 = (f[3] - 2 * f[2] + f[1]) / h ** 2
            d3 = (f[4] - 2 * f[3] + 2 * f[1] - f[0]) / (2 * h ** 3)
            self._norm = float(max(np.max(np.linalg.norm(d, axis=-1)) for d in (f[2], d1, d2, d3)))
        return self._norm

    def scaled(self, s):
        return TotallyRealEmbedding(self.field.scaled(s))

    # -- persistence -------------------------------------------------------

    def to_json(self):
        return {"schema": "zollfrei.embedding/1", "degree": self.field.degree,
                "exponents": self.field.exps.tolist(), "coefficients": self.field.coef.tolist()}

    @classmethod
    def from_json(cls, data):
        try:
            exps = np.array(data.get("exponents", []), dtype=int).reshape(-1, 4)
            coef = np.array(data.get("coefficients", []), dtype=float).reshape(-1, 4)
        except (TypeError, ValueError) as exc:
            raise ContractViolation(f"bad embedding record: {exc}") from None
        if len(exps) != len(coef):
            raise ContractViolation("exponents and coefficients differ in length")
        if "degree" in data and len(exps) and int(data["degree"]) < int(exps.sum(axis=1).max()):
            raise ContractViolation("declared degree is below the largest monomial degree")
        return cls(PolyField(exps, coef))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ContractViolation(f"{path}: line {exc.lineno}: {exc.msg}") from None
        return cls.from_json(data)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)


def random_embedding(rng, degree=3, norm=0.05):
    """Random odd polynomial deformation rescaled to sup-norm ``norm`` on S^3."""
    exps = odd_exponents(degree)
    coef = rng.standard_normal((len(exps), 4))
    P = PolyField(exps, coef)
    E = TotallyRealEmbedding(P)
    s = E.sup_norm()
    return TotallyRealEmbedding(P.scaled(norm / s)) if s > 0 else E


def embed_P(P, x):
    """Point of ``P`` over ``x`` in RP^3 (homogeneous C^4 representative)."""
    x = np.asarray(x, dtype=float)
    return P.embed(x / np.linalg.norm(x, axis=-1, keepdims=True))


# ---------------------------------------------------------------------------
# affine chart
# ---------------------------------------------------------------------------


def affine_chart(z):
    """``(z1 - i z2, z3, z4) / (z1 + i z2)``."""
    z = np.asarray(z)
    d = z[..., 0] + 1j * z[..., 1]
    if np.any(np.abs(d) < 1e-14 * np.linalg.norm(z, axis=-1)):
        raise ContractViolation("point on the line z1 + i z2 = 0 is outside the affine chart")
    return np.stack([z[..., 0] - 1j * z[..., 1], z[..., 2], z[..., 3]], axis=-1) / d[..., None]


def affine_chart_jacobian(z):
    """Complex Jacobian (..., 3, 4) of :func:`affine_chart`."""
    z = np.asarray(z, dtype=complex)
    d = z[..., 0] + 1j * z[..., 1]
    w = affine_chart(z)
    J = np.zeros(z.shape[:-1] + (3, 4), dtype=complex)
    dd = np.array([1.0, 1j, 0, 0])
    J[..., 0, 0] = 1.0
    J[..., 0, 1] = -1j
    J[..., 1, 2] = 1.0
    J[..., 2, 3] = 1.0
    return (J - w[..., :, None] * dd) / d[..., None, None]


def affine_inverse(w):
    """Homogeneous representative ``((1+w1)/2, (1-w1)/(2i), w2, w3)`` of a chart point."""
    w = np.asarray(w, dtype=complex)
    return np.stack([(1 + w[..., 0]) / 2, (1 - w[..., 0]) / 2j, w[..., 1], w[..., 2]], axis=-1)


def quadric_value(w):
    """``w1 + w2^2 + w3^2``, the quadric in the affine chart."""
    return w[..., 0] + w[..., 1] ** 2 + w[..., 2] ** 2


def on_affine_B(w):
    """Defect of the real locus equations ``w1 conj(w1) = 1``, ``w1 conj(wk) = wk``."""
    w = np.asarray(w)
    return np.max(np.abs(np.stack([w[..., 0] * np.conj(w[..., 0]) - 1,
                                   w[..., 0] * np.conj(w[..., 1]) - w[..., 1],
                                   w[..., 0] * np.conj(w[..., 2]) - w[..., 2]])), axis=0)


def fs_distance(z, w):
    """Fubini-Study distance between homogeneous points."""
    z = np.asarray(z)
    w = np.asarray(w)
    zn = z / np.linalg.norm(z, axis=-1, keepdims=True)
    wn = w / np.linalg.norm(w, axis=-1, keepdims=True)
    ip = np.sum(np.conj(zn) * wn, axis=-1)
    # atan2 of the orthogonal and parallel parts keeps full accuracy near 0
    perp = np.linalg.norm(wn - ip[..., None] * zn, axis=-1)
    return np.arctan2(perp, np.abs(ip))


# ---------------------------------------------------------------------------
# the quadric as S^2 x S^2
# ---------------------------------------------------------------------------


def _e(a, b):
    m = np.zeros((4, 4))
    m[a, b], m[b, a] = 1.0, -1.0
    return m


_R2 = np.sqrt(0.5)
SIGMA = np.array([(_e(0, 1) + _e(2, 3)) * _R2, (_e(0, 2) - _e(1, 3)) * _R2, (_e(0, 3) + _e(1, 2)) * _R2])
ALPHA = np.array([(_e(0, 1) - _e(2, 3)) * _R2, (_e(0, 2) + _e(1, 3)) * _R2, (_e(0, 3) - _e(1, 2)) * _R2])


def plane_form(p):
    """Unit simple 2-form ``W = x y^T - y x^T`` of the oriented plane of ``p``."""
    if isinstance(p, Point4):
        xp, xm = p.x, -p.y
    else:
        p = np.asarray(p, dtype=float)
        xp, xm = p[..., :3], -p[..., 3:]
    return (np.einsum("...j,jab->...ab", xp, SIGMA) + np.einsum("...j,jab->...ab", xm, ALPHA)) * _R2


def plane_form_tangent(t):
    """Derivative of :func:`plane_form` along ambient tangent ``t`` (..., 6)."""
    t = np.asarray(t, dtype=float)
    return (np.einsum("...j,jab->...ab", t[..., :3], SIGMA)
            - np.einsum("...j,jab->...ab", t[..., 3:], ALPHA)) * _R2


def point_from_plane(x, y):
    """Point of S^2 x S^2 for the oriented plane spanned by ``x, y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    W = np.einsum("...a,...b->...ab", x, y)
    W = W - np.swapaxes(W, -1, -2)
    nrm = np.sqrt(0.5 * np.sum(W * W, axis=(-2, -1)))
    W = W / nrm[..., None, None]
    xp = 0.5 * np.einsum("jab,...ab->...j", SIGMA, W) * np.sqrt(2)
    xm = 0.5 * np.einsum("jab,...ab->...j", ALPHA, W) * np.sqrt(2)
    return np.concatenate([xp, -xm], axis=-1)


def quadric_rep(p, u=None):
    """Homogeneous representative of the quadric point of ``p``: ``(-W^2 - i W) u``."""
    W = plane_form(p)
    if u is None:
        P = -W @ W
        k = np.argmax(np.diag(P))
        u = np.eye(4)[k]
    return (-W @ W - 1j * W) @ u


def plane_basis(p, ref=None):
    """Orthonormal ``(x, y)`` with ``W = x ^ y``; ``x`` is the projection of ``ref`` if given."""
    W = plane_form(p)
    P = -W @ W
    if ref is None:
        k = int(np.argmax(np.diag(P)))
        ref = np.eye(4)[k]
    x = P @ ref
    nx = np.linalg.norm(x)
    if nx < 1e-8:
        x = P[:, int(np.argmax(np.diag(P)))]
        nx = np.linalg.norm(x)
    x = x / nx
    y = -W @ x
    return x, y


def quadric_point(p):
    x, y = plane_basis(p)
    return x + 1j * y


def point_from_quadric(z):
    """Inverse of :func:`quadric_point` for a null vector ``z`` of C^4."""
    z = np.asarray(z, dtype=complex)
    if abs(np.sum(z * z)) > 1e-8 * np.sum(np.abs(z) ** 2):
        raise ContractViolation("point is not on the quadric")
    return Point4.from_array(point_from_plane(z.real, z.imag))


def standard_position(p, ref=None):
    """``A`` in SO(4) with ``A e1 = x``, ``A e2 = -y`` for the plane of ``p``.

    When ``ref`` (a previous ``A``) is given the new frame is chosen as close
    to it as possible, which keeps continuation warm starts smooth.
    """
    if ref is None:
        x, y = plane_basis(p)
        W = plane_form(p)
        C = np.eye(4) + W @ W  # projector on the orthogonal plane
        k = np.argsort(-np.diag(C))
        c1 = C[:, k[0]] / np.linalg.norm(C[:, k[0]])
        c2 = C[:, k[1]] - (C[:, k[1]] @ c1) * c1
        c2 /= np.linalg.norm(c2)
    else:
        x, y = plane_basis(p, ref[:, 0])
        W = plane_form(p)
        C = np.eye(4) + W @ W
        B = C @ ref[:, 2:]
        U, _, Vt = np.linalg.svd(B, full_matrices=False)
        B = U @ Vt
        c1, c2 = B[:, 0], B[:, 1]
    A = np.column_stack([x, -y, c1, c2])
    if np.linalg.det(A) < 0:
        A[:, 3] *= -1
    return A


# ---------------------------------------------------------------------------
# chart composition helpers used by the solver
# ---------------------------------------------------------------------------


def chart_curve(E, g):
    """Chart values (..., 3) and their derivative (..., 3, 4) for unnormalized ``g`` in R^4.

    The derivative is with respect to the unnormalized vector; the radial
    direction is annihilated.
    """
    r = np.linalg.norm(g, axis=-1, keepdims=True)
    n = g / r
    z, Jz = E.jet(n)
    w = affine_chart(z)
    Jc = affine_chart_jacobian(z)
    Pn = (np.eye(4) - n[..., :, None] * n[..., None, :]) / r[..., None]
    return w, Jc @ Jz @ Pn


def tangent_frame_matrix(E, n, basis):
    """3x3 complex matrix with columns ``D(chart o E)`` applied to three tangent vectors."""
    z, Jz = E.jet(n)
    G = affine_chart_jacobian(z) @ Jz @ np.stack(basis, axis=-1)
    if np.any(~np.isfinite(G)):
        raise TotallyRealViolation("non-finite boundary frame")
    return G


def check_pole(z, tol=1e-12):
    q = np.abs(np.sum(z * z, axis=-1)) / np.sum(np.abs(z) ** 2, axis=-1)
    if np.any(q < tol):
        raise PoleError("point lies on the quadric")
    return q
