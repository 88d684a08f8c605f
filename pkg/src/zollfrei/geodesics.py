"""Null geodesics, beta-surfaces and the Zollfrei closure test.

States are ambient: a point ``X = (x, y)`` in R^6 and a tangent velocity
``V``.  The geodesic equation is evaluated in the canonical chart centred at
the current point, where the coordinate vectors are orthonormal, so the
ambient acceleration is

    x'' = T_x a_x - |x'|^2 x,     y'' = T_y a_y - |y'|^2 y,

with ``a = -Gamma(v, v)`` the chart acceleration.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .errors import ContractViolation, IntegrabilityError, IntegrationError, ResolutionError
from .manifold import (Point4, Tangent4, chart_basis, chart_basis_batch, check_tangent,
                       christoffel_batch, gram_schmidt_frame, riemann_at)

# ---------------------------------------------------------------------------
# the geodesic spray
# ---------------------------------------------------------------------------


def _normalize_points(X):
    x = X[..., :3] / np.linalg.norm(X[..., :3], axis=-1, keepdims=True)
    y = X[..., 3:] / np.linalg.norm(X[..., 3:], axis=-1, keepdims=True)
    return x, y


def spray(g, X, V, transport=None):
    """Ambient acceleration of geodesics through ``X`` with velocity ``V``.

    ``X, V`` have shape (m, 6).  If ``transport`` (m, 6) is given, the
    derivative of those vectors under parallel transport is returned too.
    """
    x, y = _normalize_points(X)
    T = chart_basis_batch(x, y)
    Gam = christoffel_batch(g, x, y)
    c = np.einsum("mai,ma->mi", T, V)
    a = -np.einsum("mkij,mi,mj->mk", Gam, c, c)
    acc = np.einsum("mai,mi->ma", T, a)
    acc[:, :3] -= np.sum(V[:, :3] ** 2, axis=1, keepdims=True) * x
    acc[:, 3:] -= np.sum(V[:, 3:] ** 2, axis=1, keepdims=True) * y
    if transport is None:
        return acc
    w = np.einsum("mai,ma->mi", T, transport)
    dw = -np.einsum("mkij,mi,mj->mk", Gam, c, w)
    dW = np.einsum("mai,mi->ma", T, dw)
    dW[:, :3] -= np.sum(V[:, :3] * transport[:, :3], axis=1, keepdims=True) * x
    dW[:, 3:] -= np.sum(V[:, 3:] * transport[:, 3:], axis=1, keepdims=True) * y
    return acc, dW


def _metric_value(g, X, A, B):
    x, y = _normalize_points(X)
    G = g.tensor(x, y)
    return np.einsum("...a,...ab,...b->...", A, G, B)


def factor_gauge(V):
    """Scale factor making the mean of the two factor speeds equal to one."""
    V = np.asarray(V)
    s = 0.5 * (np.linalg.norm(V[..., :3], axis=-1) + np.linalg.norm(V[..., 3:], axis=-1))
    return 1.0 / s


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class GeodesicTrace:
    """Sampled geodesic: parameters ``t``, points ``X`` and velocities ``V`` (n, 6)."""

    t: np.ndarray
    X: np.ndarray
    V: np.ndarray
    tolerance: float
    null_drift: float = 0.0
    dense: object = field(default=None, repr=False)

    @property
    def points(self):
        return [Point4(r[:3], r[3:]) for r in self.X]

    def rows(self):
        return np.column_stack([self.t, self.X, self.V])

    def to_csv(self, path):
        header = "t,x1,x2,x3,y1,y2,y3,u1,u2,u3,w1,w2,w3"
        np.savetxt(path, self.rows(), delimiter=",", header=header, comments="", fmt="%.17g")

    def to_json(self):
        return {"tolerance": self.tolerance, "null_drift": self.null_drift,
                "columns": ["t", "x1", "x2", "x3", "y1", "y2", "y3",
                            "u1", "u2", "u3", "w1", "w2", "w3"],
                "rows": self.rows().tolist()}


def _solve(g, Y0, t_span, tol, t_eval=None, with_transport=False, max_step=np.inf):
    m = Y0.size // (18 if with_transport else 12)

    def rhs(t, Y):
        S = Y.reshape(m, -1)
        X, V = S[:, :6], S[:, 6:12]
        if with_transport:
            acc, dW = spray(g, X, V, S[:, 12:18])
            return np.concatenate([V, acc, dW], axis=1).ravel()
        return np.concatenate([V, spray(g, X, V)], axis=1).ravel()

    sol = solve_ivp(rhs, t_span, Y0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    t_eval=t_eval, dense_output=True, max_step=max_step)
    return sol


def integrate_null_geodesic(g, p, v, length, tol=1e-10, n_out=201):
    """Integrate the null geodesic through ``p`` with initial velocity ``v``.

    Parameters
    ----------
    g : MetricField
    p : Point4
    v : Tangent4
        Must be null, ``|g(v, v)| <= 1e-10 |v|^2``.
    length : float
        Affine length to integrate.
    tol : float
        Relative tolerance of the DOP853 integrator.
    n_out : int
        Number of equally spaced output samples.

    Returns
    -------
    GeodesicTrace

    Raises
    ------
    ContractViolation
        If ``v`` is not null or not tangent.
    IntegrationError
        If the integrator stalls; ``partial`` holds the trace so far.
    """
    check_tangent(p, v)
    gv = g(p, v, v)
    if abs(gv) > 1e-10 * max(1.0, float(np.dot(v.array, v.array))):
        raise ContractViolation(f"initial velocity is not null (g(v,v) = {gv:.3e})")
    Y0 = np.concatenate([p.array, v.array])
    t_eval = np.linspace(0.0, length, n_out)
    sol = _solve(g, Y0, (0.0, length), tol, t_eval=t_eval)
    trace = _trace_from(g, sol, tol)
    if sol.status != 0:
        raise IntegrationError(f"geodesic integration failed: {sol.message}", partial=trace)
    return trace


def _trace_from(g, sol, tol):
    Y = sol.y.T
    X, V = Y[:, :6].copy(), Y[:, 6:12].copy()
    x, y = _normalize_points(X)
    X = np.concatenate([x, y], axis=1)
    drift = float(np.max(np.abs(_metric_value(g, X, V, V)))) if len(X) else 0.0
    return GeodesicTrace(sol.t.copy(), X, V, tol, drift, sol.sol)


def random_null_vector(g, p, rng):
    """Random null tangent vector at ``p`` in the unit-per-factor gauge."""
    T = chart_basis(p)
    G = T.T @ g.tensor(p.x, p.y) @ T
    for _ in range(100):
        a = rng.standard_normal(2)
        b = rng.standard_normal(2)
        u = np.concatenate([a, [0, 0]])
        w = np.concatenate([[0, 0], b])
        A, B, C = u @ G @ u, u @ G @ w, w @ G @ w
        disc = B * B - A * C
        if A <= 0 or C >= 0 or disc < 0:
            continue
        s = (-B + np.sqrt(disc)) / C
        if s < 0:
            s = (-B - np.sqrt(disc)) / C
        c = u + s * w
        V = T @ c
        V *= factor_gauge(V)
        return Tangent4.from_array(V)
    raise ContractViolation("could not find a null direction at p")


# ---------------------------------------------------------------------------
# closure
# ---------------------------------------------------------------------------


@dataclass
class ClosureReport:
    period_estimate: float
    endpoint_gap: float
    closed: bool
    tolerance: float
    start: list = field(default_factory=list)


def _state_distance2(X, V, X0, Vh0):
    Vh = V / np.linalg.norm(V, axis=-1, keepdims=True)
    return np.sum((X - X0) ** 2, axis=-1) + np.sum((Vh - Vh0) ** 2, axis=-1)


def best_return(sol, X0, V0, t_max, n_scan=4000, leave=0.3):
    """Nearest return of a dense solution to its initial state.

    Scans ``n_scan`` samples after the trajectory has left a neighbourhood of
    radius ``leave`` and refines the best sample by bounded minimisation of
    the squared state distance.  Returns ``(t_star, gap)``.
    """
    Vh0 = V0 / np.linalg.norm(V0)
    ts = np.linspace(0.0, t_max, n_scan)
    S = sol(ts).T
    d2 = _state_distance2(S[:, :6], S[:, 6:12], X0, Vh0)
    out = np.nonzero(d2 > leave ** 2)[0]
    if len(out) == 0:
        return t_max, float(np.sqrt(d2[-1]))
    i0 = out[0]
    k = i0 + int(np.argmin(d2[i0:]))
    dt = ts[1] - ts[0]
    lo, hi = max(ts[k] - dt, ts[i0]), min(ts[k] + dt, t_max)

    def f(t):
        s = sol(t)
        return float(_state_distance2(s[:6], s[6:12], X0, Vh0))

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    t_star = float(res.x) if res.fun < d2[k] else float(ts[k])
    return t_star, float(np.sqrt(max(min(res.fun, d2[k]), 0.0)))


def closure_of(g, p, v, tol=1e-6, max_length=2.6 * np.pi, rtol=1e-11):
    """Closure report for one null geodesic."""
    Y0 = np.concatenate([p.array, v.array])
    sol = _solve(g, Y0, (0.0, max_length), rtol)
    if sol.status != 0:
        return ClosureReport(float("nan"), float("inf"), False, tol, Y0.tolist())
    t_star, gap = best_return(sol.sol, p.array, v.array, sol.t[-1])
    return ClosureReport(t_star, gap, bool(gap < tol), tol, Y0.tolist())


def zollfrei_closure_test(g, n_samples, seed=0, tol=1e-6, max_length=2.6 * np.pi, rtol=1e-11):
    """Closure reports for random null geodesics.

    Initial data are uniformly random points with random null directions in
    the unit-per-factor gauge, so the flat model returns at period 2 pi.
    """
    if n_samples < 1:
        raise ContractViolation("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(n_samples):
        v = rng.standard_normal((2, 3))
        p = Point4(v[0] / np.linalg.norm(v[0]), v[1] / np.linalg.norm(v[1]))
        d = random_null_vector(g, p, rng)
        reports.append(closure_of(g, p, d, tol, max_length, rtol))
    return reports


# ---------------------------------------------------------------------------
# beta-planes and beta-surfaces
# ---------------------------------------------------------------------------


def beta_plane_vectors(E, zeta):
    """Spanning pair of the beta-plane labelled ``zeta`` for a frame ``E`` (rows).

    ``a = (z^2+1) e1 - 2z e3 + (z^2-1) e4`` and
    ``b = (z^2+1) e2 + (z^2-1) e3 + 2z e4``.  ``E`` may hold frame vectors in
    any representation (ambient rows or chart components).
    """
    z = zeta
    a = (z * z + 1) * E[0] - 2 * z * E[2] + (z * z - 1) * E[3]
    b = (z * z + 1) * E[1] + (z * z - 1) * E[2] + 2 * z * E[3]
    return a, b


def _euclid_basis(a, b):
    ah = a / np.linalg.norm(a)
    bb = b - np.dot(b, ah) * ah
    return ah, bb / np.linalg.norm(bb)


@dataclass(eq=False)
class BetaSurfacePatch:
    """Geodesic polar grid on a beta-surface.

    ``X[j, k]`` is the node at radius ``r[j]`` and angle ``phi[k]``;
    ``planes[j, k]`` holds two ambient spanning vectors of its tangent plane.
    """

    g: object
    base: Point4
    zeta: float
    base_plane: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    X: np.ndarray
    planes: np.ndarray
    isotropy: float
    basis: tuple
    tol: float = 1e-11

    @property
    def grid(self):
        return [[Point4(c[:3], c[3:]) for c in row] for row in self.X]

    def direction(self, phi):
        a, b = self.basis
        v = np.cos(phi) * a + np.sin(phi) * b
        return v * factor_gauge(v)

    def exp(self, r, phi, delta=1e-5):
        """Point, radial velocity and angular derivative of the node map at ``(r, phi)``."""
        dirs = np.array([self.direction(phi + s * delta) for s in (0.0, 1.0, -1.0)])
        Y0 = np.concatenate([np.tile(self.base.array, (3, 1)), dirs], axis=1).ravel()
        if r == 0:
            S = Y0.reshape(3, 12)
        else:
            sol = _solve(self.g, Y0, (0.0, r), self.tol, t_eval=[r])
            S = sol.y[:, -1].reshape(3, 12)
        return S[0, :6], S[0, 6:], (S[1, :6] - S[2, :6]) / (2 * delta)

    def rows(self):
        out = []
        for j, r in enumerate(self.r):
            for k, ph in enumerate(self.phi):
                out.append([r, ph, *self.X[j, k], *self.planes[j, k, 0], *self.planes[j, k, 1]])
        return np.array(out)

    def to_csv(self, path):
        cols = ["r", "phi", "x1", "x2", "x3", "y1", "y2", "y3"]
        cols += [f"a{i}" for i in range(6)] + [f"b{i}" for i in range(6)]
        np.savetxt(path, self.rows(), delimiter=",", header=",".join(cols), comments="", fmt="%.17g")

    def to_json(self):
        return {"zeta": self.zeta, "base": self.base.array.tolist(),
                "base_plane": self.base_plane.tolist(), "isotropy": self.isotropy,
                "r": self.r.tolist(), "phi": self.phi.tolist(), "X": self.X.tolist(),
                "planes": self.planes.tolist()}


def _isotropy(g, X, A, B):
    Ah = A / np.linalg.norm(A, axis=-1, keepdims=True)
    Bh = B / np.linalg.norm(B, axis=-1, keepdims=True)
    return np.max(np.abs(np.stack([_metric_value(g, X, Ah, Ah), _metric_value(g, X, Ah, Bh),
                                   _metric_value(g, X, Bh, Bh)])), axis=0)


def integrate_beta_surface(g, p, zeta, extent=np.pi, n=16, frame=None, n_phi=None,
                           delta=1e-4, tol=1e-11, iso_tol=1e-5):
    """Beta-surface through ``p`` tangent to the plane labelled ``zeta``.

    Radial null geodesics leave ``p`` in every direction of the beta-plane
    and are integrated to affine length ``extent`` (unit-per-factor gauge,
    so ``extent = pi`` reaches the antipodal point for ``g0``).  The tangent
    plane at each node is spanned by the radial velocity and the Jacobi field
    ``dX/dphi`` from neighbouring rays.

    Parameters
    ----------
    g : MetricField
    p : Point4
    zeta : float
    extent : float
    n : int
        Number of radial steps.
    frame : Frame4, optional
        Defaults to the Gram-Schmidt frame of the chart basis.
    n_phi : int, optional
        Number of angles (default ``2 n``).
    delta : float
        Angular offset for the Jacobi field.
    iso_tol : float
        Largest allowed ``|g|`` on normalised spanning vectors.

    Raises
    ------
    IntegrabilityError
        When a node plane fails to be totally isotropic (the metric is not
        self-dual along the patch); ``partial`` on the exception is absent.
    """
    if frame is None:
        frame = gram_schmidt_frame(g, p)
    n_phi = n_phi or 2 * n
    a, b = beta_plane_vectors(frame.E, zeta)
    ah, bh = _euclid_basis(a, b)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    r = np.linspace(0.0, extent, n + 1)
    patch = BetaSurfacePatch(g, p, float(zeta), np.array([a, b]), r, phi, None, None, 0.0,
                             (ah, bh), tol)
    dirs = np.array([[patch.direction(f + s * delta) for s in (0.0, 1.0, -1.0)] for f in phi])
    dirs = dirs.reshape(-1, 6)
    m = len(dirs)
    Y0 = np.concatenate([np.tile(p.array, (m, 1)), dirs], axis=1).ravel()
    sol = _solve(g, Y0, (0.0, extent), tol, t_eval=r)
    if sol.status != 0:
        raise IntegrationError(f"beta-surface rays failed: {sol.message}")
    S = sol.y.T.reshape(len(r), n_phi, 3, 12)
    X = S[:, :, 0, :6]
    x, y = _normalize_points(X)
    X = np.concatenate([x, y], axis=-1)
    V = S[:, :, 0, 6:]
    J = (S[:, :, 1, :6] - S[:, :, 2, :6]) / (2 * delta)
    dJ = (S[:, :, 1, 6:] - S[:, :, 2, 6:]) / (2 * delta)
    # where the Jacobi field vanishes (base point, conjugate points) its
    # derivative spans the plane together with the velocity
    nJ = np.linalg.norm(J, axis=-1)
    focal = nJ < 1e-3 * np.max(nJ)
    J[focal] = dJ[focal]
    planes = np.stack([V, J], axis=2)
    iso = _isotropy(g, X, V, J)
    worst = float(np.max(iso))
    patch.X, patch.planes, patch.isotropy = X, planes, worst
    if worst > iso_tol:
        j = int(np.nonzero(np.max(iso, axis=1) > iso_tol)[0][0])
        k = int(np.argmax(iso[j]))
        raise IntegrabilityError(
            f"tangent plane at r={r[j]:.3f}, phi={phi[k]:.3f} is not isotropic "
            f"(|g| = {worst:.2e} > {iso_tol:.1e}); the metric is not self-dual here")
    return patch


# ---------------------------------------------------------------------------
# intersections
# ---------------------------------------------------------------------------


def _grid_spacing(patch):
    X = patch.X
    dr = np.linalg.norm(np.diff(X, axis=0), axis=-1).max()
    dphi = np.linalg.norm(X - np.roll(X, 1, axis=1), axis=-1).max()
    return max(dr, dphi)


def _clusters(points, radius):
    if len(points) == 0:
        return []
    tree = cKDTree(points)
    parent = list(range(len(points)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(radius):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i in range(len(points)):
        groups.setdefault(find(i), []).append(i)
    return [groups[k] for k in sorted(groups)]


def refine_intersection(S1, S2, s0, max_iter=30, tol=1e-10):
    """Gauss-Newton on ``X1(r1, phi1) = X2(r2, phi2)``; returns ``(X, residual, params)``."""
    s = np.array(s0, dtype=float)
    res = np.inf
    for _ in range(max_iter):
        X1, V1, J1 = S1.exp(s[0], s[1])
        X2, V2, J2 = S2.exp(s[2], s[3])
        F = X1 - X2
        res = float(np.linalg.norm(F))
        if res < tol:
            break
        Jm = np.column_stack([V1, J1, -V2, -J2])
        ds = np.linalg.lstsq(Jm, -F, rcond=1e-10)[0]
        step = np.linalg.norm(ds)
        if step > 0.5:
            ds *= 0.5 / step
        s += ds
    return X1, res, s


def surface_intersection_count(S1, S2, tol=None, newton_tol=1e-9):
    """Number of intersection points of two beta-surface patches.

    Nodes of the two grids closer than ``tol`` (default 1.5 times the coarser
    grid spacing) are grouped into clusters; each cluster is refined by
    Gauss-Newton on the exponential parameterisations and the converged
    points are deduplicated.

    Raises
    ------
    ContractViolation
        If the two patches share base point and seed plane.
    ResolutionError
        If a cluster does not converge or contains two distinct intersections.
    """
    if S1 is S2 or (np.allclose(S1.base.array, S2.base.array, atol=1e-12)
                    and np.allclose(S1.base_plane, S2.base_plane, atol=1e-12)):
        raise ContractViolation("surface_intersection_count needs two distinct surfaces")
    h = max(_grid_spacing(S1), _grid_spacing(S2))
    if tol is None:
        tol = 1.5 * h
    P1 = S1.X.reshape(-1, 6)
    P2 = S2.X.reshape(-1, 6)
    t2 = cKDTree(P2)
    d, idx = t2.query(P1)
    cand = np.nonzero(d < tol)[0]
    groups = _clusters(P1[cand], tol)
    n_r1, n_p1 = S1.X.shape[:2]
    n_p2 = S2.X.shape[1]
    found = []
    for grp in groups:
        members = cand[grp]
        best = members[np.argmin(d[members])]
        j1, k1 = divmod(best, n_p1)
        j2, k2 = divmod(idx[best], n_p2)
        s0 = [S1.r[j1], S1.phi[k1], S2.r[j2], S2.phi[k2]]
        X, res, _ = refine_intersection(S1, S2, s0)
        if res > newton_tol:
            raise ResolutionError(f"intersection refinement did not converge (residual {res:.2e})")
        if any(np.linalg.norm(X - f) < 1e-6 for f in found):
            continue
        found.append(X)
    return len(found)


# ---------------------------------------------------------------------------
# Wronskian
# ---------------------------------------------------------------------------


def induced_curvature(g, X, V, W):
    """``kappa`` with ``R(W, V)V = kappa W + mu V`` at ambient point ``X``."""
    p = Point4(X[:3], X[3:])
    T = chart_basis(p)
    G, R = riemann_at(g, p, T=T)
    v, w = T.T @ V, T.T @ W
    RVV = np.linalg.solve(G, np.einsum("ebcd,b,c,d->e", R, v, w, v))
    coef = np.linalg.lstsq(np.column_stack([v, w]), RVV, rcond=None)[0]
    return float(coef[1])


def wronskian_check(g, patch, geodesic, n_kappa=121, tol=1e-12):
    """Largest relative drift of the Wronskian of ``f'' + kappa f = 0``.

    ``kappa(t)`` is the curvature of the connection induced on the beta
    surface, measured along the geodesic with a parallel transported
    transversal ``W`` in the surface.  Two solutions with initial data
    (1, 0) and (0, 1) are integrated through a cubic spline of ``kappa``.

    Raises
    ------
    ContractViolation
        If the geodesic does not start in the patch's tangent plane or leaves
        the patch.
    """
    X0, V0 = geodesic.X[0], geodesic.V[0]
    if np.linalg.norm(X0 - patch.base.array) > 1e-8:
        raise ContractViolation("geodesic does not start at the patch base point")
    a, b = patch.basis
    resid = V0 - np.dot(V0, a) * a - np.dot(V0, b) * b
    if np.linalg.norm(resid) > 1e-8 * np.linalg.norm(V0):
        raise ContractViolation("geodesic does not start tangent to the patch")
    h = _grid_spacing(patch)
    dist, _ = cKDTree(patch.X.reshape(-1, 6)).query(geodesic.X)
    if np.max(dist) > 2 * h:
        raise ContractViolation("geodesic leaves the patch")
    W0 = b - np.dot(b, V0) / np.dot(V0, V0) * V0
    if np.linalg.norm(W0) < 0.1:
        W0 = a - np.dot(a, V0) / np.dot(V0, V0) * V0
    L = geodesic.t[-1]
    Y0 = np.concatenate([X0, V0, W0])
    ts = np.linspace(0.0, L, n_kappa)
    sol = _solve(g, Y0, (0.0, L), 1e-12, t_eval=ts, with_transport=True)
    kap = np.array([induced_curvature(g, s[:6], s[6:12], s[12:18]) for s in sol.y.T])
    spl = CubicSpline(ts, kap)

    def rhs(t, f):
        k = spl(t)
        return [f[1], -k * f[0], f[3], -k * f[2]]

    fs = solve_ivp(rhs, (0.0, L), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=tol, atol=tol,
                   t_eval=ts)
    f1, d1, f2, d2 = fs.y
    Wr = f1 * d2 - d1 * f2
    return float(np.max(np.abs(Wr - Wr[0])) / abs(Wr[0]))
