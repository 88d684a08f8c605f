"""The meromorphic 3-form on CP^3, divergence-free deformations and their flows.

``Omega(z; t1, t2, t3) = det[z, t1, t2, t3] / (sum z_j^2)^2`` is the
contraction of the Euler field into ``dz1 ^ dz2 ^ dz3 ^ dz4`` divided by the
square of the quadric; it has a double pole along Q and is real on RP^3.

A tangent field ``v`` on RP^3 given by an odd polynomial ``P`` extends to the
holomorphic field ``V(z) = P1(z) + P3(z) / sum z^2`` (degree-1 and degree-3
parts) on CP^3 - Q; flowing ``z' = i V(z)`` moves RP^3 to ``P_t``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .embedding import (Embedding, PolyField, TotallyRealEmbedding, monomial_exponents,
                        odd_exponents, sample_sphere3, tangential)
from .errors import ContractViolation, DegeneracyError, IntegrationError, PoleError
from .manifold import _richardson

# ---------------------------------------------------------------------------
# the 3-form
# ---------------------------------------------------------------------------


def omega_eval(z, t1, t2, t3, pole_tol=1e-12):
    """``Omega(z; t1, t2, t3)`` for homogeneous ``z`` and tangent representatives.

    Raises
    ------
    PoleError
        When ``|sum z^2| < pole_tol |z|^2``.
    """
    z = np.asarray(z, dtype=complex)
    S = np.sum(z * z, axis=-1)
    if np.any(np.abs(S) <= pole_tol * np.sum(np.abs(z) ** 2, axis=-1)):
        raise PoleError("Omega has a pole on the quadric")
    M = np.stack([z, np.asarray(t1, dtype=complex), np.asarray(t2, dtype=complex),
                  np.asarray(t3, dtype=complex)], axis=-1)
    return np.linalg.det(M) / S ** 2


def tangent_frame_s3(x):
    """Positively oriented orthonormal frame ``t1, t2, t3`` of ``T_x S^3`` (det[x, t] = 1)."""
    x = np.asarray(x, dtype=float)
    t1 = np.stack([-x[..., 1], x[..., 0], -x[..., 3], x[..., 2]], axis=-1)
    t2 = np.stack([-x[..., 2], x[..., 3], x[..., 0], -x[..., 1]], axis=-1)
    t3 = np.stack([-x[..., 3], -x[..., 2], x[..., 1], x[..., 0]], axis=-1)
    d = np.linalg.det(np.stack([x, t1, t2, t3], axis=-1))
    t3 = t3 * np.sign(d)[..., None]
    return t1, t2, t3


def s3_quadrature(n_u=16, n_xi=32):
    """Tensor quadrature on S^3 in Hopf coordinates; weights sum to ``2 pi^2``.

    ``x = (cos e cos a, cos e sin a, sin e cos b, sin e sin b)`` with
    ``u = sin^2 e`` Gauss-Legendre on [0, 1] and ``a, b`` equispaced.
    """
    u, wu = np.polynomial.legendre.leggauss(n_u)
    u = 0.5 * (u + 1)
    wu = 0.5 * wu
    a = 2 * np.pi * np.arange(n_xi) / n_xi
    U, Aa, Bb = np.meshgrid(u, a, a, indexing="ij")
    c, s = np.sqrt(1 - U), np.sqrt(U)
    x = np.stack([c * np.cos(Aa), c * np.sin(Aa), s * np.cos(Bb), s * np.sin(Bb)], axis=-1).reshape(-1, 4)
    w = np.repeat(wu, n_xi * n_xi) * (2 * np.pi / n_xi) ** 2 * 0.5
    return x, w


# ---------------------------------------------------------------------------
# divergence-free fields
# ---------------------------------------------------------------------------


def divergence_s3(P, x):
    """Divergence on the round S^3 of the tangential part of ``P`` at unit ``x``."""
    _, Dv = tangential(P, x)
    return np.trace(Dv, axis1=-2, axis2=-1) - np.einsum("...i,...ij,...j->...", x, Dv, x)


def _eps4():
    from .manifold import EPS4
    return EPS4


def curl_field(w):
    """Polynomial field ``u_q = eps_{qprs} x_p d_r w_s`` for a polynomial 1-form ``w``.

    On S^3 this is tangent and divergence-free; it is odd when ``w`` is odd.
    """
    eps = _eps4()
    exps, coef = [], []
    for m in range(len(w.exps)):
        e = w.exps[m]
        for r in range(4):
            if e[r] == 0:
                continue
            for p in range(4):
                ne = e.copy()
                ne[r] -= 1
                ne[p] += 1
                c = np.einsum("qs,s->q", eps[:, p, r, :], w.coef[m]) * e[r]
                if np.any(c != 0):
                    exps.append(ne)
                    coef.append(c)
    if not exps:
        return PolyField(np.zeros((0, 4), dtype=int), np.zeros((0, 4)))
    return PolyField(np.array(exps), np.array(coef))


@dataclass(frozen=True, eq=False)
class DivFreeField:
    """``v = curl w`` for an odd polynomial potential ``w``."""

    w: PolyField
    v: PolyField

    @property
    def degree(self):
        return self.v.degree

    @classmethod
    def from_potential(cls, w):
        if np.any(w.exps.sum(axis=1) % 2 == 0):
            raise ContractViolation("curl potentials must be odd so the field descends to RP^3")
        return cls(w, curl_field(w))

    def embedding(self, eps=1.0):
        return TotallyRealEmbedding(self.v.scaled(eps))

    def to_json(self):
        """Embedding record of ``v`` plus the potential; loadable as an embedding."""
        d = TotallyRealEmbedding(self.v).to_json()
        d.update(kind="curl", potential_exponents=self.w.exps.tolist(),
                 potential_coefficients=self.w.coef.tolist())
        return d

    @classmethod
    def from_json(cls, data):
        if data.get("kind") != "curl":
            raise ContractViolation("record does not carry a curl potential")
        try:
            exps = np.array(data["potential_exponents"], dtype=int).reshape(-1, 4)
            coef = np.array(data["potential_coefficients"], dtype=float).reshape(-1, 4)
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractViolation(f"bad potential record: {exc}") from None
        return cls.from_potential(PolyField(exps, coef))

    def scaled(self, s):
        return DivFreeField(self.w.scaled(s), self.v.scaled(s))

    def max_divergence(self, pts=None):
        pts = sample_sphere3(2000) if pts is None else pts
        return float(np.max(np.abs(divergence_s3(self.v, pts))))


def random_divfree(rng, degree=3, norm=None):
    """Random ``curl w`` with odd ``w`` of degree <= ``degree``; optionally rescaled to sup-norm."""
    exps = odd_exponents(degree)
    f = DivFreeField.from_potential(PolyField(exps, rng.standard_normal((len(exps), 4))))
    if norm is not None:
        f = f.scaled(norm / TotallyRealEmbedding(f.v).sup_norm())
    return f


def _field_values(fields, pts):
    return np.array([tangential(f, pts)[0].ravel() for f in fields])


def polynomial_field_basis(max_degree=3):
    """Monomial fields ``x^e e_k`` of odd degree; a spanning set for the deformations."""
    out = []
    for e in odd_exponents(max_degree):
        for k in range(4):
            c = np.zeros((1, 4))
            c[0, k] = 1.0
            out.append(PolyField(e[None], c))
    return out


def divergence_split(max_degree=3, pts=None, tol=1e-9):
    """Split odd polynomial fields of degree <= ``max_degree`` into div-free and complement.

    Works on the quotient by fields that vanish on S^3.  Returns two lists
    of :class:`PolyField`: a basis of the divergence-free subspace and a basis
    of an orthogonal complement (with respect to the sampled L2 product).
    """
    pts = sample_sphere3(600) if pts is None else pts
    basis = polynomial_field_basis(max_degree)
    Vals = _field_values(basis, pts)  # (nb, npts*4)
    U, s, Vt = np.linalg.svd(Vals.T, full_matrices=False)
    keep = s > tol * s[0]
    # orthonormal combinations with distinct values on S^3
    C = Vt[keep].T / s[keep]  # coefficients (nb, r)
    D = np.array([divergence_s3(f, pts) for f in basis])  # (nb, npts)
    Dm = (C.T @ D)  # (r, npts)
    u2, s2, vt2 = np.linalg.svd(Dm.T, full_matrices=True)
    rank = int(np.sum(s2 > tol * max(s2[0], 1.0)))
    free = vt2[rank:].T
    comp = vt2[:rank].T

    def combine(coeffs):
        exps = np.concatenate([f.exps for f in basis])
        coef = np.concatenate([f.coef * a for f, a in zip(basis, coeffs)])
        return PolyField(exps, coef)

    return [combine(C @ free[:, k]) for k in range(free.shape[1])], \
        [combine(C @ comp[:, k]) for k in range(comp.shape[1])]


# ---------------------------------------------------------------------------
# pullbacks
# ---------------------------------------------------------------------------


def _im_density(E, x):
    t = tangent_frame_s3(x)
    z, J = E.jet(x)
    ts = [np.einsum("...ij,...j->...i", J, tk) for tk in t]
    return omega_eval(z, *ts)


def phi_pullback_linearized(v, pts=None, eps=(1e-2, 5e-3, 2.5e-3)):
    """``max |d/de Im Omega(P_{e v})|`` over sample points, at ``e = 0``.

    ``v`` is a :class:`PolyField` (or :class:`DivFreeField`).  The derivative is a
    Richardson-extrapolated central difference; ``Im Omega`` is odd in ``e``.
    With the orthonormal positively oriented frame this equals ``div v``.
    """
    P = v.v if isinstance(v, DivFreeField) else v
    pts = sample_sphere3(400) if pts is None else pts
    if len(P.exps) == 0:
        return 0.0
    ests = []
    for e in eps:
        Ep = TotallyRealEmbedding(P.scaled(e))
        Em = TotallyRealEmbedding(P.scaled(-e))
        ests.append((_im_density(Ep, pts).imag - _im_density(Em, pts).imag) / (2 * e))
    d = _richardson(ests)
    return float(np.max(np.abs(d)))


def phi_pullback_density(v, pts=None, eps=(1e-2, 5e-3, 2.5e-3)):
    """Pointwise linearized density (signed), for comparison with ``div v``."""
    P = v.v if isinstance(v, DivFreeField) else v
    pts = sample_sphere3(400) if pts is None else pts
    ests = []
    for e in eps:
        ests.append((_im_density(TotallyRealEmbedding(P.scaled(e)), pts).imag
                     - _im_density(TotallyRealEmbedding(P.scaled(-e)), pts).imag) / (2 * e))
    return _richardson(ests)


def phi_pullback_norm(E, quad=None):
    """``int |Im Omega| / int |Re Omega|`` over P = E(S^3) with the Hopf quadrature."""
    x, w = quad if quad is not None else s3_quadrature()
    vals = _im_density(E, x)
    return float(np.sum(w * np.abs(vals.imag)) / np.sum(w * np.abs(vals.real)))


# ---------------------------------------------------------------------------
# holomorphic flows
# ---------------------------------------------------------------------------


class HolomorphicField:
    """``V(z) = P1(z) + P3(z) / sum z^2`` from an odd polynomial of degree <= 3."""

    def __init__(self, P):
        deg = P.exps.sum(axis=1)
        if np.any(deg > 3) or np.any(deg % 2 == 0):
            raise ContractViolation("holomorphic extension implemented for odd degree <= 3")
        self.P1 = P.homogeneous_part(1)
        self.P3 = P.homogeneous_part(3)

    def __call__(self, z):
        S = np.sum(z * z, axis=-1)[..., None]
        return self.P1(z) + self.P3(z) / S

    def jacobian(self, z):
        S = np.sum(z * z, axis=-1)[..., None, None]
        P3 = self.P3(z)
        return (self.P1.jacobian(z) + self.P3.jacobian(z) / S
                - 2 * P3[..., :, None] * z[..., None, :] / S ** 2)


def _flow(V, z0, t, frames=None, rtol=1e-12, atol=1e-13, pole_tol=1e-6):
    """Integrate ``z' = i V(z)`` (and the linearised flow on ``frames``) to time ``t``."""
    z0 = np.asarray(z0, dtype=complex)
    shp = z0.shape
    n = z0.reshape(-1, 4).shape[0]
    k = 0 if frames is None else frames.shape[-1]

    def pack(z, F):
        parts = [z.reshape(n, 4)]
        if k:
            parts.append(F.reshape(n, 4 * k))
        a = np.concatenate(parts, axis=1).ravel()
        return np.concatenate([a.real, a.imag])

    def unpack(y):
        c = y[:len(y) // 2] + 1j * y[len(y) // 2:]
        c = c.reshape(n, 4 * (1 + k))
        z = c[:, :4]
        F = c[:, 4:].reshape(n, 4, k) if k else None
        return z, F

    def rhs(_, y):
        z, F = unpack(y)
        S = np.abs(np.sum(z * z, axis=-1)) / np.sum(np.abs(z) ** 2, axis=-1)
        if np.any(S < pole_tol):
            raise PoleError("flow reached the quadric")
        dz = 1j * V(z)
        dF = 1j * V.jacobian(z) @ F if k else None
        return pack(dz, dF)

    y0 = pack(z0, frames.reshape(n, 4, k) if k else None)
    if t == 0:
        return z0, frames
    sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"flow integration failed: {sol.message}")
    z, F = unpack(sol.y[:, -1])
    return z.reshape(shp), (F.reshape(shp + (k,)) if k else None)


class FlowEmbedding(Embedding):
    """``P_t = psi_t(RP^3)`` for the flow of ``i V``; usable by the disk solver."""

    def __init__(self, field, t, rtol=1e-12):
        P = field.v if isinstance(field, DivFreeField) else field
        self.V = HolomorphicField(P)
        self.t = float(t)
        self.rtol = rtol

    def embed(self, n):
        return _flow(self.V, n, self.t, rtol=self.rtol)[0]

    def jet(self, n):
        n = np.asarray(n, dtype=float)
        eye = np.broadcast_to(np.eye(4, dtype=complex), n.shape[:-1] + (4, 4)).copy()
        return _flow(self.V, n, self.t, eye, rtol=self.rtol)


@dataclass(eq=False)
class FlowDeformation:
    """Flowed samples ``state = psi_t(x)`` with pushed-forward tangent frames."""

    field: object
    t: float
    x: np.ndarray
    state: np.ndarray
    frames: np.ndarray

    def reverse_defect(self):
        """Flow back by ``-t`` and return the largest projective distance to the start."""
        from .embedding import fs_distance
        V = HolomorphicField(self.field.v if isinstance(self.field, DivFreeField) else self.field)
        z, _ = _flow(V, self.state, -self.t)
        return float(np.max(fs_distance(z, self.x.astype(complex))))

    def pullback_norm(self, weights=None):
        ts = [self.frames[..., k] for k in range(3)]
        vals = omega_eval(self.state, *ts)
        w = np.ones(len(vals)) if weights is None else weights
        return float(np.sum(w * np.abs(vals.imag)) / np.sum(w * np.abs(vals.real)))


def holomorphic_flow(field, t, pts=None, rtol=1e-12):
    """Flow sample points of RP^3 (and their S^3 tangent frames) to time ``t``."""
    pts = sample_sphere3(200) if pts is None else np.asarray(pts, dtype=float)
    V = HolomorphicField(field.v if isinstance(field, DivFreeField) else field)
    fr = np.stack(tangent_frame_s3(pts), axis=-1).astype(complex)
    z, F = _flow(V, pts, t, fr, rtol=rtol)
    return FlowDeformation(field, t, pts, z, F)


def lie_derivative_omega(field, z, frames, h=(1e-3, 5e-4, 2.5e-4)):
    """``d/dt Omega(psi_t z; d psi_t frames)`` at ``t = 0`` by Richardson central differences."""
    V = HolomorphicField(field.v if isinstance(field, DivFreeField) else field)
    ests = []
    for s in h:
        zp, Fp = _flow(V, z, s, frames)
        zm, Fm = _flow(V, z, -s, frames)
        op = omega_eval(zp, *[Fp[..., k] for k in range(3)])
        om = omega_eval(zm, *[Fm[..., k] for k in range(3)])
        ests.append((op - om) / (2 * s))
    return _richardson(ests)


def calibrate_flow_constant(field, pts=None, h=1e-4):
    """Ratio between the flow's first-order motion and the graph embedding's.

    Both move ``x`` to ``x + i s v(x) + O(s^2)``, so the ratio of the
    imaginary parts (projected to ``T_x S^3``) is the constant ``c`` in
    ``z' = c i V(z)``; it is 1 for this normalisation.
    """
    P = field.v if isinstance(field, DivFreeField) else field
    pts = sample_sphere3(50) if pts is None else pts
    V = HolomorphicField(P)
    zf, _ = _flow(V, pts, h)
    zg = TotallyRealEmbedding(P.scaled(h)).embed(pts)
    # remove the phase of the homogeneous representative
    zf = zf / (np.sum(zf * pts, axis=-1, keepdims=True))
    zg = zg / (np.sum(zg * pts, axis=-1, keepdims=True))
    a, b = zf.imag.ravel(), zg.imag.ravel()
    return float(a @ b / (b @ b))


# ---------------------------------------------------------------------------
# residue 2-form along the disks
# ---------------------------------------------------------------------------


def residue_form(sol, T=None, r=0.5, n=64):
    """Residue of ``Omega(F; d_zeta F, d_X F, d_Y F)`` at the anchor ``zeta = 0``.

    ``F`` is the disk family in homogeneous coordinates (rotation held
    fixed) and ``X, Y`` run over the columns of ``T`` (ambient tangent vectors of
    Q, default the chart basis).  Returns the antisymmetric matrix
    ``(1 / 2 pi i) oint Omega d zeta`` over ``|zeta| = r``.
    """
    from .embedding import affine_inverse
    from .manifold import chart_basis
    T = chart_basis(sol.q) if T is None else T
    k = T.shape[1]
    zeta = r * np.exp(2j * np.pi * np.arange(n) / n)
    A = sol.A
    dw = [np.polynomial.polynomial.polyval(zeta, sol.fourier_derivative(T[:, a])).T for a in range(k)]
    w = sol.chart_standard(zeta)
    dzw = np.polynomial.polynomial.polyval(zeta, np.polynomial.polynomial.polyder(sol.fourier)).T

    def lift(dv):
        # derivative of affine_inverse is linear
        return np.stack([dv[:, 0] / 2, -dv[:, 0] / 2j, dv[:, 1], dv[:, 2]], axis=-1) @ A.T

    F = affine_inverse(w) @ A.T
    Fz = lift(dzw)
    Fx = [lift(d) for d in dw]
    out = np.zeros((k, k), dtype=complex)
    for a in range(k):
        for b in range(a + 1, k):
            vals = omega_eval(F, Fz, Fx[a], Fx[b])
            # (1/2 pi i) oint f dzeta = mean(f * zeta)
            out[a, b] = np.mean(vals * zeta)
            out[b, a] = -out[a, b]
    return out


# ``residue_form`` of the flat family is ``(-i / 8) (mu_1 - mu_2)``; this constant
# turns the residue into a real 2-form equal to the flat Kahler form.
RESIDUE_NORMALIZATION = -8.0


@dataclass(eq=False)
class KahlerResidue:
    """Real residue 2-form ``omega`` (chart basis at ``q``) and diagnostics."""

    q: object
    omega: np.ndarray
    raw: np.ndarray
    real_leak: float

    def flat_angle(self):
        return tensor_angle(self.omega, flat_kahler_form())


def kahler_form(sol, T=None, r=0.5, n=64, min_norm=1e-10):
    """Real Kahler-form candidate ``RESIDUE_NORMALIZATION * Im residue`` at the disk's centre.

    Raises
    ------
    DegeneracyError
        If the residue vanishes (the disk is tangent to Q at its anchor).
    """
    raw = residue_form(sol, T, r, n)
    omega = RESIDUE_NORMALIZATION * raw.imag
    scale = np.max(np.abs(omega))
    if scale < min_norm:
        raise DegeneracyError("residue vanishes: disk tangent to the quadric at its anchor")
    return KahlerResidue(sol.q, omega, raw, float(np.max(np.abs(raw.real)) * 8 / scale))


def kahler_form_residue(family_or_P, q, cfg=None):
    """Residue 2-form of Omega along the disk through ``q``.

    ``family_or_P`` is a :class:`FamilyGrid` (its nearest disk seeds the
    solve) or an embedding.
    """
    from .disks import FamilyGrid, SolverConfig, solve_disk
    if isinstance(family_or_P, FamilyGrid):
        seed = family_or_P.disks[family_or_P.nearest(q)[0]]
        P, cfg = family_or_P.embedding, cfg or family_or_P.cfg
    else:
        seed, P = None, family_or_P
    cfg = cfg or SolverConfig(modes=12)
    sol = solve_disk(P, q, seed=seed, cfg=SolverConfig(**cfg.__dict__))
    return kahler_form(sol)


def flat_kahler_form():
    """``mu_1 - mu_2`` in the chart basis of a point of S^2 x S^2."""
    K = np.zeros((4, 4))
    K[0, 1], K[1, 0] = 1.0, -1.0
    K[2, 3], K[3, 2] = -1.0, 1.0
    return K


def tensor_angle(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    c = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(min(1.0, c)))


def kahler_scale(G, omega):
    """``lam`` with ``|omega|^2 = 4`` for ``lam G`` (the norm of a Kahler form in dimension 4)."""
    Gi = np.linalg.inv(G)
    n2 = np.einsum("ab,cd,ac,bd->", omega, omega, Gi, Gi)
    if n2 <= 0:
        raise DegeneracyError("residue form is not compatible with the fitted conformal class")
    return float(np.sqrt(n2 / 4.0))


def kahler_metric(P, seed=None, cfg=None, n_theta=8):
    """MetricField ``lam G``: the fitted conformal class scaled so the residue is its Kahler form.

    Every evaluation solves the disk through the point (seeded by ``seed``),
    fits the null cone and takes the residue; meant for local curvature
    checks rather than global use.
    """
    from .disks import SolverConfig, solve_disk
    from .manifold import MetricField, Point4, chart_basis
    from .reconstruction import fit_at, gauge_fixed
    cfg = cfg or SolverConfig(modes=12)

    def tensor(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        fx, fy = x.reshape(-1, 3), y.reshape(-1, 3)
        out = np.zeros((len(fx), 6, 6))
        for k, (a, b) in enumerate(zip(fx, fy)):
            p = Point4(a, b)
            sol = solve_disk(P, p, seed=seed, cfg=SolverConfig(**cfg.__dict__))
            G = gauge_fixed(fit_at(sol, n_theta)[0].Gq)
            om = kahler_form(sol).omega
            T = chart_basis(p)
            out[k] = T @ (kahler_scale(G, om) * G) @ T.T
        return out.reshape(x.shape[:-1] + (6, 6))

    return MetricField(tensor, 1, "kahler-representative")


def kahler_scalar_curvature(P, q, cfg=None, step=5e-3, levels=3):
    """Scalar curvature at ``q`` of the Kahler representative of the reconstructed class."""
    from .disks import SolverConfig, solve_disk
    from .manifold import curvature_decompose
    cfg = cfg or SolverConfig(modes=12)
    base = solve_disk(P, q, cfg=SolverConfig(**cfg.__dict__))
    g = kahler_metric(P, seed=base, cfg=cfg)
    return float(curvature_decompose(g, q, step, levels).s)


def residue_exterior_derivative(P, q, h=2e-2, cfg=None, levels=2):
    """``|d omega| / |omega|`` at ``q`` from residues at displaced anchors.

    ``omega`` is expressed in the gnomonic chart at ``q``; the derivative is a
    Richardson-extrapolated central difference of the chart components.
    """
    from .disks import SolverConfig, solve_disk
    from .manifold import Point4, chart_basis, chart_points
    cfg = cfg or SolverConfig(modes=12)
    T0 = chart_basis(q)
    base = solve_disk(P, q, cfg=SolverConfig(**cfg.__dict__))

    def comps(c):
        x, y, Ecols = chart_points(q, c, T0)
        p = Point4(x, y)
        s = solve_disk(P, p, seed=base, cfg=SolverConfig(**cfg.__dict__))
        return kahler_form(s, Ecols).omega

    w0 = kahler_form(base, T0).omega
    dw = []
    for a in range(4):
        ests = []
        for l in range(levels):
            s = h / 2 ** l
            e = np.zeros(4)
            e[a] = s
            ests.append((comps(e) - comps(-e)) / (2 * s))
        dw.append(_richardson(ests))
    dw = np.array(dw)  # dw[a, b, c] = d_a omega_bc
    worst = 0.0
    for a in range(4):
        for b in range(a + 1, 4):
            for c in range(b + 1, 4):
                worst = max(worst, abs(dw[a, b, c] + dw[b, c, a] + dw[c, a, b]))
    return worst / np.max(np.abs(w0)), w0
