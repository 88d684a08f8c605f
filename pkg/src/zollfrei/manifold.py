"""Points, tangent vectors, metrics, frames and curvature on S^2 x S^2.

The product S^2 x S^2 is embedded in R^3 x R^3.  A point is a pair of unit
vectors ``(x, y)`` and a tangent vector a pair ``(u, w)`` with ``u.x = 0`` and
``w.y = 0``.  Metrics are stored as ambient symmetric 6x6 tensors whose
tangential restriction is the metric; only that restriction is ever used.

All local computations happen in a gnomonic chart centred at the query point,

    c -> ( n(x + T_x c[:2]), n(y + T_y c[2:]) ),     n(v) = v/|v|,

where ``T_x`` is a positively oriented orthonormal basis of ``x^perp``.  The
chart origin is the query point and the coordinate vectors there are the
columns of ``T``; the basis ``(T_x, T_y)`` is positively oriented for the
product orientation.

Curvature conventions
---------------------
``R_abcd`` is normalised so that the unit sphere has ``R_1212 = +1``.  The
curvature operator on 2-forms is ``R(phi)_ab = 1/2 R_ab^cd phi_cd``; with this
choice its trace on each of Lambda^+ and Lambda^- equals ``s/4`` and the
trace-free parts of the two diagonal blocks are W^+ and W^-.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartDomainError, ContractViolation, FrameError, SignatureError

ETA = np.array([1.0, 1.0, -1.0, -1.0])
TANGENCY_TOL = 1e-10

# ---------------------------------------------------------------------------
# points and tangent vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Point4:
    """A point of S^2 x S^2 as a pair of unit vectors in R^3.

    Inputs within 1e-6 of unit length are renormalised, anything further away
    is rejected.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(3)
        y = np.asarray(self.y, dtype=float).reshape(3)
        for v, nm in ((x, "x"), (y, "y")):
            r = np.linalg.norm(v)
            if abs(r - 1.0) > 1e-6:
                raise ContractViolation(f"Point4.{nm} is not a unit vector (|{nm}| = {r})")
        object.__setattr__(self, "x", x / np.linalg.norm(x))
        object.__setattr__(self, "y", y / np.linalg.norm(y))

    @property
    def array(self):
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(a[:3] / np.linalg.norm(a[:3]), a[3:6] / np.linalg.norm(a[3:6]))

    def __repr__(self):
        return f"Point4(x={self.x.tolist()}, y={self.y.tolist()})"


@dataclass(frozen=True, eq=False)
class Tangent4:
    """A tangent vector ``(u, w)``; tangency is checked against a base point on use."""

    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float).reshape(3))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).reshape(3))

    @property
    def array(self):
        return np.concatenate([self.u, self.w])

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(a[:3], a[3:6])


def random_point(rng, n=None):
    """Uniformly distributed point(s) of S^2 x S^2."""
    shape = (2, 3) if n is None else (n, 2, 3)
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    if n is None:
        return Point4(v[0], v[1])
    return [Point4(a[0], a[1]) for a in v]


def check_tangent(p, t, tol=TANGENCY_TOL):
    """Raise unless ``t`` is tangent to S^2 x S^2 at ``p``."""
    ex = abs(np.dot(t.u, p.x))
    ey = abs(np.dot(t.w, p.y))
    scale = max(1.0, np.linalg.norm(t.u), np.linalg.norm(t.w))
    if ex > tol * scale or ey > tol * scale:
        raise ContractViolation(f"vector is not tangent at p (u.x = {ex:.3e}, w.y = {ey:.3e})")


def project_tangent(p, v):
    """Orthogonal projection of an ambient 6-vector onto the tangent space at ``p``."""
    v = np.asarray(v, dtype=float)
    u = v[:3] - np.dot(v[:3], p.x) * p.x
    w = v[3:] - np.dot(v[3:], p.y) * p.y
    return Tangent4(u, w)


def eval_g0(p, a, b):
    """The flat model metric ``h(u_a, u_b) - h(w_a, w_b)``."""
    check_tangent(p, a)
    check_tangent(p, b)
    return float(np.dot(a.u, b.u) - np.dot(a.w, b.w))


def stereographic_chart(p):
    """Stereographic coordinates ``(xi_1, xi_2, eta_1, eta_2)`` of a point.

    ``xi_i = x_i / 2(x_3 - y_3)`` and ``eta_i = y_i / 2(x_3 - y_3)``; in these
    coordinates ``g0`` is conformal to ``dxi^2 - deta^2``.
    """
    d = p.x[2] - p.y[2]
    if abs(d) < 1e-14:
        raise ChartDomainError("x_3 = y_3: point outside the stereographic chart")
    return np.array([p.x[0], p.x[1], p.y[0], p.y[1]]) / (2.0 * d)


def stereographic_jacobian(x, y):
    """Ambient derivative of the stereographic chart, shape (..., 4, 6)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x[..., 2] - y[..., 2]
    J = np.zeros(d.shape + (4, 6))
    inv = 1.0 / (2.0 * d)
    inv2 = 1.0 / (2.0 * d * d)
    for i in range(2):
        J[..., i, i] = inv
        J[..., i, 2] = -x[..., i] * inv2
        J[..., i, 5] = x[..., i] * inv2
        J[..., 2 + i, 3 + i] = inv
        J[..., 2 + i, 2] = -y[..., i] * inv2
        J[..., 2 + i, 5] = y[..., i] * inv2
    return J


def stereographic_density(p):
    """Conformal factor ``D`` with ``flat = D g0`` in stereographic coordinates."""
    c = stereographic_chart(p)
    r2 = c[0] ** 2 + c[1] ** 2
    q2 = c[2] ** 2 + c[3] ** 2
    return 1.0 / (r2 + (q2 - r2 + 0.25) ** 2)


# ---------------------------------------------------------------------------
# local charts
# ---------------------------------------------------------------------------


def sphere_frame(v):
    """Positively oriented orthonormal basis of ``v^perp`` for unit ``v``.

    Returns an array of shape (..., 3, 2) whose columns ``t1, t2`` satisfy
    ``det[t1, t2, v] = +1``.  The construction is deterministic: ``t1`` is the
    normalised projection of the coordinate axis least aligned with ``v``.
    """
    v = np.asarray(v, dtype=float)
    k = np.argmin(np.abs(v), axis=-1)
    a = np.zeros_like(v)
    np.put_along_axis(a, k[..., None], 1.0, axis=-1)
    t1 = a - np.sum(a * v, axis=-1, keepdims=True) * v
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(v, t1)
    return np.stack([t1, t2], axis=-1)


def chart_basis(p):
    """6x4 matrix of chart coordinate vectors at the chart origin ``p``."""
    T = np.zeros((6, 4))
    T[:3, :2] = sphere_frame(p.x)
    T[3:, 2:] = sphere_frame(p.y)
    return T


def chart_points(p, c, T=None):
    """Map chart coordinates ``c`` (..., 4) to ambient points and coordinate vectors.

    Returns ``(x, y, E)`` with ``E`` of shape (..., 6, 4) the coordinate
    vectors ``d/dc_k`` at each chart point.
    """
    if T is None:
        T = chart_basis(p)
    c = np.asarray(c, dtype=float)
    Tx, Ty = T[:3, :2], T[3:, 2:]
    ax = p.x + c[..., :2] @ Tx.T
    ay = p.y + c[..., 2:] @ Ty.T
    rx = np.linalg.norm(ax, axis=-1, keepdims=True)
    ry = np.linalg.norm(ay, axis=-1, keepdims=True)
    x = ax / rx
    y = ay / ry
    E = np.zeros(c.shape[:-1] + (6, 4))
    E[..., :3, :2] = (Tx - x[..., :, None] * (x @ Tx)[..., None, :]) / rx[..., None]
    E[..., 3:, 2:] = (Ty - y[..., :, None] * (y @ Ty)[..., None, :]) / ry[..., None]
    return x, y, E


def chart_to_point(p, c, T=None):
    x, y, _ = chart_points(p, c, T)
    return Point4(x, y)


def point_to_chart(p, q, T=None):
    """Inverse gnomonic chart: coordinates of ``q`` in the chart centred at ``p``."""
    if T is None:
        T = chart_basis(p)
    cx = (q.x / np.dot(q.x, p.x)) @ T[:3, :2]
    cy = (q.y / np.dot(q.y, p.y)) @ T[3:, 2:]
    return np.concatenate([cx, cy])


# ---------------------------------------------------------------------------
# metric fields
# ---------------------------------------------------------------------------


class MetricField:
    """A split-signature metric on S^2 x S^2.

    Parameters
    ----------
    tensor : callable
        ``tensor(x, y)`` with ``x, y`` of shape (..., 3) returning ambient
        symmetric tensors of shape (..., 6, 6).  Only the restriction to the
        tangent space matters.
    orientation : {+1, -1}
        +1 for the product orientation, -1 for the reversed one.
    name : str
    christoffel : callable, optional
        ``christoffel(x, y)`` returning (..., 4, 4, 4) Christoffel symbols
        ``Gamma[k, i, j]`` at the origin of the canonical chart at ``(x, y)``.
        Used by the geodesic integrator instead of finite differences.
    native : NativeChart, optional
        A chart in which the components are known in closed form.  Curvature
        is then differentiated in that chart, which avoids the distortion of
        the gnomonic chart for metrics that are singular somewhere.
    """

    def __init__(self, tensor, orientation=1, name="metric", christoffel=None, native=None):
        if orientation not in (1, -1):
            raise ContractViolation("orientation must be +1 or -1")
        self._tensor = tensor
        self.orientation = orientation
        self.name = name
        self.christoffel = christoffel
        self.native = native

    def tensor(self, x, y):
        return self._tensor(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def __call__(self, p, a, b):
        check_tangent(p, a)
        check_tangent(p, b)
        A = self.tensor(p.x, p.y)
        return float(a.array @ A @ b.array)

    def components(self, p, c, T=None):
        """Metric components ``g_ij`` at chart coordinates ``c`` (..., 4) around ``p``."""
        x, y, E = chart_points(p, c, T)
        A = self.tensor(x, y)
        return np.einsum("...ai,...ab,...bj->...ij", E, A, E)

    def gram(self, p, vectors):
        """Gram matrix of a list of Tangent4 at ``p``."""
        V = np.array([v.array for v in vectors])
        return V @ self.tensor(p.x, p.y) @ V.T

    def scaled(self, f, name=None):
        """Conformal rescaling ``f * g`` for a positive function ``f(x, y)`` or constant."""
        if callable(f):
            fn = f
        else:
            c = float(f)
            fn = lambda x, y: np.full(np.shape(x)[:-1], c)
        base = self._tensor
        return MetricField(lambda x, y: fn(x, y)[..., None, None] * base(x, y),
                           self.orientation, name or f"{self.name}*f")

    def reoriented(self, orientation):
        return MetricField(self._tensor, orientation, self.name, self.christoffel, self.native)

    @classmethod
    def from_evaluator(cls, fn, orientation=1, name="metric"):
        """Wrap a scalar evaluator ``fn(p, a, b)``.

        The ambient tensor is assembled from the Gram matrix of an orthonormal
        tangent basis; this is slow and meant for user-supplied black boxes.
        """

        def tensor(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            flat_x = x.reshape(-1, 3)
            flat_y = y.reshape(-1, 3)
            out = np.zeros((len(flat_x), 6, 6))
            for n, (a, b) in enumerate(zip(flat_x, flat_y)):
                p = Point4(a, b)
                T = chart_basis(p)
                vecs = [Tangent4.from_array(T[:, k]) for k in range(4)]
                G = np.array([[fn(p, u, v) for v in vecs] for u in vecs])
                out[n] = T @ G @ T.T
            return out.reshape(x.shape[:-1] + (6, 6))

        return cls(tensor, orientation, name)


@dataclass(frozen=True, eq=False)
class NativeChart:
    """Closed-form chart components of a metric.

    ``coords(p)`` gives the coordinates of a point, ``components(c)`` the
    (..., 4, 4) metric components and ``basis(p)`` the 6x4 ambient coordinate
    vectors at ``p``.
    """

    coords: object
    components: object
    basis: object


def signature(G, tol=1e-12):
    """(number of positive, number of negative) eigenvalues of a symmetric matrix."""
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    scale = max(np.max(np.abs(ev)), 1e-300)
    return int(np.sum(ev > tol * scale)), int(np.sum(ev < -tol * scale))


def check_signature(G, where=""):
    sig = signature(G)
    if sig != (2, 2):
        raise SignatureError(f"metric signature {sig} is not (2, 2){where}")


# ---------------------------------------------------------------------------
# finite-difference jets
# ---------------------------------------------------------------------------


def _richardson(values, order=2):
    """Combine estimates at steps h, h/2, h/4, ... with even-power error series."""
    vals = list(values)
    k = 1
    while len(vals) > 1:
        f = 4.0 ** k
        vals = [(f * vals[i + 1] - vals[i]) / (f - 1.0) for i in range(len(vals) - 1)]
        k += 1
    return vals[0]


def metric_jet(g, p, step=5e-3, levels=3, second=True, T=None, native=False):
    """Metric components and their first (and second) chart derivatives at ``p``.

    Central differences at steps ``step / 2**k`` for ``k < levels`` combined by
    Richardson extrapolation (error ``O(step**(2 levels))``).

    Returns
    -------
    G : (4, 4)
    dG : (4, 4, 4) with ``dG[k, i, j] = d_k g_ij``
    ddG : (4, 4, 4, 4) with ``ddG[k, l, i, j] = d_k d_l g_ij`` (only if ``second``)
    """
    if native:
        c0 = g.native.coords(p)
        evaluate = lambda offs: g.native.components(c0 + offs)
    else:
        if T is None:
            T = chart_basis(p)
        evaluate = lambda offs: g.components(p, offs, T)
    hs = [step / 2 ** k for k in range(levels)]
    eye = np.eye(4)
    offs = [np.zeros(4)]
    for h in hs:
        for k in range(4):
            offs += [h * eye[k], -h * eye[k]]
    pairs = [(k, l) for k in range(4) for l in range(k + 1, 4)]
    if second:
        for h in hs:
            for k, l in pairs:
                for sk in (1, -1):
                    for sl in (1, -1):
                        offs.append(h * (sk * eye[k] + sl * eye[l]))
    vals = evaluate(np.array(offs))
    G0 = vals[0]
    ax = vals[1:1 + 8 * levels].reshape(levels, 4, 2, 4, 4)
    d1 = [(ax[n, :, 0] - ax[n, :, 1]) / (2 * hs[n]) for n in range(levels)]
    dG = _richardson(d1)
    dG = 0.5 * (dG + np.swapaxes(dG, -1, -2))
    if not second:
        return G0, dG
    d2 = []
    mixed = vals[1 + 8 * levels:].reshape(levels, len(pairs), 4, 4, 4)
    for n, h in enumerate(hs):
        D = np.zeros((4, 4, 4, 4))
        for k in range(4):
            D[k, k] = (ax[n, k, 0] - 2 * G0 + ax[n, k, 1]) / h ** 2
        for m, (k, l) in enumerate(pairs):
            pp, pm, mp, mm = mixed[n, m]
            D[k, l] = D[l, k] = (pp - pm - mp + mm) / (4 * h * h)
        d2.append(D)
    ddG = _richardson(d2)
    ddG = 0.5 * (ddG + np.swapaxes(ddG, -1, -2))
    return G0, dG, ddG


def chart_basis_batch(x, y):
    """Canonical chart bases for many points, shape (..., 6, 4)."""
    x = np.asarray(x, dtype=float)
    T = np.zeros(x.shape[:-1] + (6, 4))
    T[..., :3, :2] = sphere_frame(x)
    T[..., 3:, 2:] = sphere_frame(y)
    return T


def christoffel_batch(g, x, y, step=5e-3, levels=3):
    """Christoffel symbols (m, 4, 4, 4) at the canonical chart origins of m points."""
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    y = np.asarray(y, dtype=float).reshape(-1, 3)
    if g.christoffel is not None:
        return g.christoffel(x, y)
    m = len(x)
    Tx, Ty = sphere_frame(x), sphere_frame(y)
    hs = [step / 2 ** k for k in range(levels)]
    eye = np.eye(4)
    offs = [np.zeros(4)]
    for h in hs:
        for k in range(4):
            offs += [h * eye[k], -h * eye[k]]
    c = np.array(offs)
    K = len(c)
    ax = x[:, None, :] + np.einsum("kj,mij->mki", c[:, :2], Tx)
    ay = y[:, None, :] + np.einsum("kj,mij->mki", c[:, 2:], Ty)
    rx = np.linalg.norm(ax, axis=-1, keepdims=True)
    ry = np.linalg.norm(ay, axis=-1, keepdims=True)
    px, py = ax / rx, ay / ry
    E = np.zeros((m, K, 6, 4))
    E[..., :3, :2] = (Tx[:, None] - px[..., :, None] * np.einsum("mki,mij->mkj", px, Tx)[..., None, :]) / rx[..., None]
    E[..., 3:, 2:] = (Ty[:, None] - py[..., :, None] * np.einsum("mki,mij->mkj", py, Ty)[..., None, :]) / ry[..., None]
    A = g.tensor(px, py)
    vals = np.einsum("mkai,mkab,mkbj->mkij", E, A, E)
    G0 = vals[:, 0]
    ax_ = vals[:, 1:].reshape(m, levels, 4, 2, 4, 4)
    d1 = [(ax_[:, n, :, 0] - ax_[:, n, :, 1]) / (2 * hs[n]) for n in range(levels)]
    dG = _richardson(d1)
    dG = 0.5 * (dG + np.swapaxes(dG, -1, -2))
    Ginv = np.linalg.inv(G0)
    low = 0.5 * (np.einsum("milj->mlij", dG) + np.einsum("mjli->mlij", dG) - dG)
    return np.einsum("mkl,mlij->mkij", Ginv, low)


def christoffel_from_jet(G, dG):
    """``Gamma[k, i, j] = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)``."""
    Ginv = np.linalg.inv(G)
    low = 0.5 * (np.einsum("ilj->lij", dG) + np.einsum("jli->lij", dG) - dG)
    return np.einsum("kl,lij->kij", Ginv, low)


def christoffel_at(g, p, step=5e-3, levels=3, T=None):
    """Christoffel symbols at the origin of the canonical chart at ``p``."""
    if g.christoffel is not None and T is None:
        return g.christoffel(p.x, p.y)
    G, dG = metric_jet(g, p, step, levels, second=False, T=T)
    return christoffel_from_jet(G, dG)


def riemann_from_jet(G, dG, ddG):
    """All-lower Riemann tensor ``R[a, b, c, d]`` from a second-order jet."""
    Gam = christoffel_from_jet(G, dG)
    low = np.einsum("fe,eij->fij", G, Gam)
    # d_b d_c g_ad etc., with ddG[k, l, i, j] = d_k d_l g_ij
    R = 0.5 * (np.einsum("bcad->abcd", ddG) + np.einsum("adbc->abcd", ddG)
               - np.einsum("acbd->abcd", ddG) - np.einsum("bdac->abcd", ddG))
    R += np.einsum("fbc,fad->abcd", low, Gam) - np.einsum("fbd,fac->abcd", low, Gam)
    return R


def riemann_at(g, p, step=5e-3, levels=3, T=None):
    """Chart components ``(G, R)`` of metric and Riemann tensor at ``p``."""
    G, dG, ddG = metric_jet(g, p, step, levels, second=True, T=T)
    return G, riemann_from_jet(G, dG, ddG)


# ---------------------------------------------------------------------------
# frames and 2-forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Frame4:
    """Pseudo-orthonormal frame at ``p``; ``E`` holds ambient vectors as rows (4, 6)."""

    p: Point4
    E: np.ndarray

    @property
    def vectors(self):
        return [Tangent4.from_array(e) for e in self.E]

    def components(self, T=None):
        """Frame vectors as columns in chart coordinates (4x4)."""
        if T is None:
            T = chart_basis(self.p)
        return T.T @ self.E.T


def gram_schmidt_components(G, S, orientation_ref=None, tol=1e-10):
    """Sign-aware Gram-Schmidt on the columns of ``S`` for the form ``G``.

    Returns a 4x4 matrix whose columns have Gram ``diag(1, 1, -1, -1)``.
    Spacelike vectors are kept in seed order before timelike ones; ``e4`` is
    negated if needed so ``det`` has the sign of ``orientation_ref`` (the
    determinant of the positively oriented reference basis in the same
    coordinates, default +1).
    """
    S = np.asarray(S, dtype=float)
    scale = np.max(np.abs(S))
    out, signs = [], []
    for k in range(S.shape[1]):
        v = S[:, k].copy()
        for e, s in zip(out, signs):
            v -= s * (e @ G @ v) * e
        for e, s in zip(out, signs):  # second pass for stability
            v -= s * (e @ G @ v) * e
        n = v @ G @ v
        if not np.isfinite(n) or abs(n) < tol * max(1.0, scale) ** 2:
            raise FrameError(f"degenerate seed: vector {k} is null or dependent")
        out.append(v / np.sqrt(abs(n)))
        signs.append(1.0 if n > 0 else -1.0)
    if signs.count(1.0) != 2:
        raise SignatureError(f"Gram-Schmidt found signature ({signs.count(1.0)}, {signs.count(-1.0)})")
    order = [i for i in range(4) if signs[i] > 0] + [i for i in range(4) if signs[i] < 0]
    E = np.array([out[i] for i in order]).T
    ref = 1.0 if orientation_ref is None else np.sign(orientation_ref)
    if np.sign(np.linalg.det(E)) != ref:
        E[:, 3] *= -1
    return E


def gram_schmidt_frame(g, p, seed=None):
    """Pseudo-orthonormal frame at ``p`` from four seed tangent vectors.

    Parameters
    ----------
    g : MetricField
    p : Point4
    seed : sequence of 4 Tangent4, optional
        Defaults to the canonical chart coordinate vectors.

    Returns
    -------
    Frame4
        Gram ``diag(1, 1, -1, -1)``, positively oriented for ``g.orientation``.
    """
    T = chart_basis(p)
    if seed is None:
        S = np.eye(4)
    else:
        if len(seed) != 4:
            raise FrameError("seed must contain four tangent vectors")
        for t in seed:
            check_tangent(p, t)
        S = T.T @ np.array([t.array for t in seed]).T
    A = g.tensor(p.x, p.y)
    G = T.T @ A @ T
    check_signature(G, " at frame base point")
    Ec = gram_schmidt_components(G, S, orientation_ref=g.orientation)
    return Frame4(p, (T @ Ec).T)


def _eab(a, b):
    m = np.zeros((4, 4))
    m[a, b] = 1.0
    m[b, a] = -1.0
    return m


_R2 = np.sqrt(0.5)
# anti-self-dual and self-dual bases for a positively oriented frame
PHI = np.array([
    (_eab(0, 1) - _eab(2, 3)) * _R2,
    (_eab(0, 2) - _eab(1, 3)) * _R2,
    (_eab(0, 3) + _eab(1, 2)) * _R2,
])
PSI = np.array([
    (_eab(0, 1) + _eab(2, 3)) * _R2,
    (_eab(0, 2) + _eab(1, 3)) * _R2,
    (_eab(0, 3) - _eab(1, 2)) * _R2,
])
PAIRING = np.array([1.0, -1.0, -1.0])


def _levi_civita():
    eps = np.zeros((4, 4, 4, 4))
    from itertools import permutations
    for perm in permutations(range(4)):
        inv = sum(1 for i in range(4) for j in range(i + 1, 4) if perm[i] > perm[j])
        eps[perm] = -1.0 if inv % 2 else 1.0
    return eps


EPS4 = _levi_civita()


def raise_form(alpha):
    """Raise both indices of frame-component 2-forms with ``eta``."""
    return alpha * ETA[:, None] * ETA[None, :]


def form_inner(a, b):
    """``<a, b> = 1/2 a_ab b^ab`` in frame components."""
    return 0.5 * np.sum(a * raise_form(b), axis=(-2, -1))


def hodge_star(alpha, orientation=1):
    """Hodge star of frame-component 2-forms, ``(*a)_ab = 1/2 eps_abcd a^cd``."""
    return 0.5 * orientation * np.einsum("abcd,...cd->...ab", EPS4, raise_form(alpha))


@dataclass(frozen=True, eq=False)
class ASDBasis:
    """Basis ``phi_1, phi_2, phi_3`` of Lambda^- in the components of ``frame``."""

    frame: Frame4
    forms: np.ndarray = field(default_factory=lambda: PHI.copy())

    def components_in(self, other, g):
        """Re-express the forms in the components of another frame at the same point."""
        A = g.tensor(self.frame.p.x, self.frame.p.y)
        # M[a, c] = e^a(e'_c) = eta_a g(e_a, e'_c)
        M = ETA[:, None] * (self.frame.E @ A @ other.E.T)
        return np.einsum("ac,bd,jab->jcd", M, M, self.forms)


def asd_basis(frame):
    """The anti-self-dual basis built from a pseudo-orthonormal frame.

    ``phi1 = (e^1^e^2 - e^3^e^4)/sqrt2``, ``phi2 = (e^1^e^3 - e^2^e^4)/sqrt2``,
    ``phi3 = (e^1^e^4 + e^2^e^3)/sqrt2``; pairing ``diag(1, -1, -1)``.
    """
    return ASDBasis(frame, PHI.copy())


def pairing_matrix(forms):
    return np.array([[form_inner(a, b) for b in forms] for a in forms])


# ---------------------------------------------------------------------------
# curvature decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CurvatureDecomp:
    """Blocks of the curvature operator in (Lambda^+, Lambda^-) at a point.

    ``Wplus`` and ``Wminus`` are the trace-free parts of the diagonal blocks,
    ``rRing`` is the block mapping Lambda^- to Lambda^+, ``s`` the scalar
    curvature.  ``operator`` is the full 6x6 matrix in the basis
    ``[Lambda^- basis, Lambda^+ basis]`` and ``riemann`` the frame-component
    Riemann tensor it was assembled from.
    """

    Wplus: np.ndarray
    Wminus: np.ndarray
    s: float
    rRing: np.ndarray
    operator: np.ndarray
    riemann: np.ndarray
    scale: float = 1.0

    def norms(self):
        return (np.linalg.norm(self.Wplus), np.linalg.norm(self.Wminus),
                np.linalg.norm(self.rRing), abs(self.s))


def curvature_operator(Rf, orientation=1):
    """6x6 operator matrix ``M[A, B]`` with ``R(b_B) = sum_A M[A, B] b_A``.

    The basis is ``[ASD forms, SD forms]`` for the given orientation.
    """
    minus, plus = (PHI, PSI) if orientation == 1 else (PSI, PHI)
    basis = np.concatenate([minus, plus])
    Rup = Rf * ETA[None, None, :, None] * ETA[None, None, None, :]
    images = 0.5 * np.einsum("abcd,jcd->jab", Rup, basis)
    pair = np.concatenate([PAIRING, PAIRING])
    return pair[:, None] * np.array([[form_inner(a, im) for im in images] for a in basis])


def decompose_riemann(Rf, orientation=1):
    """Split a frame-component Riemann tensor into curvature blocks."""
    M = curvature_operator(Rf, orientation)
    Ric = np.einsum("abcd,ac->bd", Rf, np.diag(ETA))
    s = float(np.sum(ETA * np.diag(Ric)))
    Mm, Mp = M[:3, :3], M[3:, 3:]
    Wm = Mm - np.trace(Mm) / 3 * np.eye(3)
    Wp = Mp - np.trace(Mp) / 3 * np.eye(3)
    return CurvatureDecomp(Wp, Wm, s, M[3:, :3].copy(), M, Rf)


def curvature_decompose(g, p, step=5e-3, levels=3):
    """Curvature blocks of ``g`` at ``p`` in the canonical Gram-Schmidt frame.

    Parameters
    ----------
    g : MetricField
    p : Point4
    step : float
        Largest finite-difference step in chart coordinates.
    levels : int
        Number of Richardson levels.

    Returns
    -------
    CurvatureDecomp
    """
    ref = g.orientation
    if g.native is not None:
        G, dG, ddG = metric_jet(g, p, step, levels, second=True, native=True)
        R = riemann_from_jet(G, dG, ddG)
        ref *= np.sign(np.linalg.det(chart_basis(p).T @ g.native.basis(p)))
    else:
        G, R = riemann_at(g, p, step, levels)
    check_signature(G, " at curvature base point")
    Ec = gram_schmidt_components(G, np.eye(4), orientation_ref=ref)
    Rf = np.einsum("ijkl,ia,jb,kc,ld->abcd", R, Ec, Ec, Ec, Ec)
    cd = decompose_riemann(Rf, g.orientation)
    scale = abs(np.linalg.det(G)) ** -0.25
    return CurvatureDecomp(cd.Wplus, cd.Wminus, cd.s, cd.rRing, cd.operator, cd.riemann, scale)


def reassemble_riemann(M, orientation=1):
    """Inverse of ``curvature_operator``: frame-component Riemann tensor."""
    minus, plus = (PHI, PSI) if orientation == 1 else (PSI, PHI)
    basis = np.concatenate([minus, plus])
    pair = np.concatenate([PAIRING, PAIRING])
    # R(b_B)_ab = sum_A M[A,B] (b_A)_ab  and  R(beta)_ab = 1/2 R_ab^cd beta_cd
    # with beta = sum_B c_B b_B, c_B = pair_B <b_B, beta>:  R_abcd = 2 sum M[A,B] pair_B (b_A)_ab (b_B)_cd / 2
    return np.einsum("AB,B,Aab,Bcd->abcd", M, pair, basis, basis)


def selfdual_residual(g, sample_points, step=5e-3, levels=3, eps=1e-2):
    """Largest relative size of W^- over the sample points.

    Each sample contributes ``|W^-| / (|W^+| + |r| + |s| + eps * lam)`` where
    ``lam = |det g_ij|^(-1/4)`` in the orthonormal-for-g0 chart carries the
    weight of curvature, so the ratio is invariant under ``g -> f g``.
    """
    pts = list(sample_points)
    if not pts:
        raise ContractViolation("selfdual_residual needs at least one sample point")
    worst = 0.0
    for p in pts:
        cd = curvature_decompose(g, p, step, levels)
        wp, wm, rr, s = cd.norms()
        worst = max(worst, wm / (wp + rr + s + eps * cd.scale))
    return worst
