"""Holomorphic disks with boundary on a totally real RP^3 and their family over Q.

Each disk is solved in *standard position*: a rotation ``A`` in SO(4) moves
the anchor ``q`` in Q to the point ``w = 0`` of the affine chart, where the
undeformed disk is ``w(zeta) = (zeta, 0, 0)``.  The unknown is the boundary
curve in S^3 (a lift of RP^3),

    gamma(t) = normalize(g0(t) + u1(t) tau(t) + u2(t) e3 + u3(t) e4),
    g0(t) = (cos t/2, -sin t/2, 0, 0),   tau = g0',

with ``u1`` a trigonometric polynomial of degree N+1 and ``u2``, ``u3`` odd
(half-integer) trigonometric polynomials of degree N+1/2, so that ``gamma``
descends to a closed curve in RP^3.  The residual collects the negative
Fourier modes ``-1..-N`` of ``w(t) = chart(P(gamma(t)))`` (the boundary values
of a holomorphic disk have none), the anchor condition ``w_hat_0 = chart(q)``
and the phase gauge ``Im(exp(-i alpha) w_hat_{1,1}) = 0``.  The system is square
with ``6N + 7`` real unknowns.
"""

from collections import deque
from dataclasses import dataclass, field
import json
import os

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .embedding import (TotallyRealEmbedding, affine_chart, affine_chart_jacobian, affine_inverse,
                        chart_curve, fs_distance, plane_form, plane_form_tangent, quadric_rep,
                        quadric_value, standard_position, tangent_frame_matrix)
from .errors import (ConditioningError, DegeneracyError, HoleError, SolverError,
                     TotallyRealViolation, ZollfreiError)
from .manifold import Point4, chart_basis

# ---------------------------------------------------------------------------
# discretisation
# ---------------------------------------------------------------------------


def n_unknowns(N):
    return 6 * N + 7


def _basis(N, theta):
    """Values of the unknown functions' basis at ``theta``: (B1 (M, 2N+3), B2 (M, 2N+2))."""
    theta = np.atleast_1d(theta)
    k1 = np.arange(1, N + 2)
    B1 = np.concatenate([np.ones((len(theta), 1)), np.cos(np.outer(theta, k1)),
                         np.sin(np.outer(theta, k1))], axis=1)
    k2 = np.arange(N + 1) + 0.5
    B2 = np.concatenate([np.cos(np.outer(theta, k2)), np.sin(np.outer(theta, k2))], axis=1)
    return B1, B2


def _split(U, N):
    n1, n2 = 2 * N + 3, 2 * N + 2
    return U[:n1], U[n1:n1 + n2], U[n1 + n2:]


def _curve(U, N, theta, deriv=False):
    """Unnormalized boundary curve (M, 4) in standard position, and the tangent-basis columns."""
    theta = np.atleast_1d(theta)
    B1, B2 = _basis(N, theta)
    a, b, c = _split(U, N)
    u1, u2, u3 = B1 @ a, B2 @ b, B2 @ c
    ch, sh = np.cos(theta / 2), np.sin(theta / 2)
    g0 = np.stack([ch, -sh, 0 * ch, 0 * ch], axis=-1)
    tau = np.stack([-sh, -ch, 0 * ch, 0 * ch], axis=-1) / 2
    G = g0 + u1[:, None] * tau
    G[:, 2] += u2
    G[:, 3] += u3
    if not deriv:
        return G, tau, (B1, B2)
    k1 = np.arange(1, N + 2)
    dB1 = np.concatenate([np.zeros((len(theta), 1)), -k1 * np.sin(np.outer(theta, k1)),
                          k1 * np.cos(np.outer(theta, k1))], axis=1)
    k2 = np.arange(N + 1) + 0.5
    dB2 = np.concatenate([-k2 * np.sin(np.outer(theta, k2)), k2 * np.cos(np.outer(theta, k2))], axis=1)
    dtau = -g0 / 4
    dG = tau + (dB1 @ a)[:, None] * tau + u1[:, None] * dtau
    dG[:, 2] += dB2 @ b
    dG[:, 3] += dB2 @ c
    return G, dG


def _resize(U, N_old, N_new):
    """Pad or truncate coefficient vectors between truncation orders."""
    if N_old == N_new:
        return U.copy()
    a, b, c = _split(U, N_old)
    m1, m2 = min(N_old, N_new) + 1, min(N_old, N_new) + 1

    def res1(x):
        out = np.zeros(2 * N_new + 3)
        out[0] = x[0]
        out[1:1 + m1] = x[1:1 + m1]
        out[N_new + 2:N_new + 2 + m1] = x[N_old + 2:N_old + 2 + m1]
        return out

    def res2(x):
        out = np.zeros(2 * N_new + 2)
        out[:m2] = x[:m2]
        out[N_new + 1:N_new + 1 + m2] = x[N_old + 1:N_old + 1 + m2]
        return out

    return np.concatenate([res1(a), res2(b), res2(c)])


@dataclass
class SolverConfig:
    """Newton settings; ``collocation`` defaults to ``4 N`` points."""

    modes: int = 32
    tol: float = 1e-11
    max_iter: int = 25
    collocation: int = None
    phase: float = 0.0
    max_condition: float = 1e12

    def M(self):
        return self.collocation or 4 * self.modes


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class DiskSolution:
    """A converged disk.

    ``fourier[k]`` (k = 0..N) are the chart coefficients of the disk in
    standard position, ``w(zeta) = sum_k fourier[k] zeta^k``; the rotation
    ``A`` carries standard position back to the original frame.
    """

    q: Point4
    A: np.ndarray
    modes: int
    U: np.ndarray
    fourier: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    residual: float
    boundary_residual: float
    iterations: int
    phase: float = 0.0
    condition: float = float("nan")
    embedding: object = field(default=None, repr=False)
    _lu: object = field(default=None, repr=False)
    _coef_jac: object = field(default=None, repr=False)

    # -- evaluation -------------------------------------------------------

    def boundary(self, theta):
        """Unit lift of the boundary curve in the original frame (M, 4)."""
        G, _, _ = _curve(self.U, self.modes, theta)
        G = G / np.linalg.norm(G, axis=-1, keepdims=True)
        return G @ self.A.T

    def boundary_tangent(self, theta):
        """``d gamma / d theta`` of the unit lift, original frame."""
        G, dG = _curve(self.U, self.modes, theta, deriv=True)
        r = np.linalg.norm(G, axis=-1, keepdims=True)
        n = G / r
        d = (dG - np.sum(n * dG, axis=-1, keepdims=True) * n) / r
        return d @ self.A.T

    def chart_standard(self, zeta):
        """Disk in the affine chart of standard position, ``w(zeta)``."""
        zeta = np.asarray(zeta, dtype=complex)
        out = np.polynomial.polynomial.polyval(np.atleast_1d(zeta), self.fourier).T
        return out if zeta.ndim else out[0]

    def homogeneous(self, zeta):
        """Homogeneous C^4 representatives of ``F(zeta)`` in the original frame."""
        w = np.asarray(self.chart_standard(np.atleast_1d(zeta)))
        return affine_inverse(w) @ self.A.T

    def chart(self, zeta):
        """Disk in the affine chart of the original frame."""
        return affine_chart(self.homogeneous(zeta))

    def spectral_decay(self):
        """Fitted ``(C, rho)`` in ``|F_k| <= C rho^k`` from the tail of the coefficients."""
        mags = np.max(np.abs(self.fourier[1:]), axis=1)
        k = np.arange(1, len(mags) + 1)
        ok = mags > 1e-15
        if ok.sum() < 3:
            return 0.0, 0.0
        sl, ic = np.polyfit(k[ok], np.log(mags[ok]), 1)
        return float(np.exp(ic)), float(np.exp(sl))

    # -- family derivatives ----------------------------------------------

    def ensure_jacobian(self):
        """Rebuild the Newton matrix at the stored solution (after loading or trimming)."""
        if self._lu is None:
            if self.embedding is None:
                raise SolverError("solution has no embedding attached")
            sysm = _System(self.embedding.rotated(self.A), self.modes, len(self.theta),
                           _anchor(self.q, self.A), self.phase)
            C, w, dC = sysm.coefficients(self.U, jac=True)
            self._lu = lu_factor(sysm.jacobian(dC))
            self._coef_jac = dC[self.modes:]
        return self

    def drop_jacobian(self):
        self._lu = None
        self._coef_jac = None

    def anchor_derivative(self, t):
        """Derivative of the standard-position anchor along an ambient tangent ``t`` of Q."""
        u = self.A[:, 0]
        W = plane_form(self.q)
        dW = plane_form_tangent(t)
        z = self.A.T @ quadric_rep(self.q, u)
        dz = self.A.T @ ((-dW @ W - W @ dW - 1j * dW) @ u)
        return affine_chart_jacobian(z) @ dz

    def dU(self, t):
        """``dU/dq`` along tangents ``t`` (6,) or (6, k) of Q ~ S^2 x S^2 with ``A`` held fixed."""
        self.ensure_jacobian()
        t = np.asarray(t, dtype=float)
        cols = t.reshape(6, -1)
        N = self.modes
        rhs = np.zeros((n_unknowns(N), cols.shape[1]))
        for k in range(cols.shape[1]):
            da = self.anchor_derivative(cols[:, k])
            rhs[6 * N:6 * N + 3, k] = da.real
            rhs[6 * N + 3:6 * N + 6, k] = da.imag
        out = lu_solve(self._lu, rhs)
        return out[:, 0] if t.ndim == 1 else out

    def boundary_derivative(self, theta, t):
        """Derivative of the unit boundary lift at ``theta`` along ``t`` (original frame).

        With ``t`` of shape (6, k) the result has shape (M, 4, k).
        """
        t = np.asarray(t, dtype=float)
        dU = self.dU(t.reshape(6, -1))
        G, tau, (B1, B2) = _curve(self.U, self.modes, theta)
        a, b, c = _split(dU, self.modes)
        dG = (B1 @ a)[:, None, :] * tau[:, :, None]
        dG[:, 2] += B2 @ b
        dG[:, 3] += B2 @ c
        r = np.linalg.norm(G, axis=-1)[:, None, None]
        n = G[:, :, None] / r
        d = (dG - np.sum(n * dG, axis=1, keepdims=True) * n) / r
        d = np.einsum("ij,mjk->mik", self.A, d)
        return d[..., 0] if t.ndim == 1 else d

    def fourier_derivative(self, t):
        """Derivative of the standard-position coefficients ``fourier`` along ``t``."""
        self.ensure_jacobian()
        return np.einsum("kju,u->kj", self._coef_jac, self.dU(t))

    # -- persistence -------------------------------------------------------

    def to_json(self):
        return {"q": self.q.array.tolist(), "A": self.A.tolist(), "modes": self.modes,
                "U": self.U.tolist(), "fourier_re": self.fourier.real.tolist(),
                "fourier_im": self.fourier.imag.tolist(), "residual": self.residual,
                "boundary_residual": self.boundary_residual, "iterations": self.iterations,
                "phase": self.phase, "condition": self.condition}

    @classmethod
    def from_json(cls, d, embedding=None, M=None):
        N = int(d["modes"])
        M = M or 4 * N
        theta = 2 * np.pi * np.arange(M) / M
        U = np.array(d["U"])
        A = np.array(d["A"])
        G, _, _ = _curve(U, N, theta)
        gam = (G / np.linalg.norm(G, axis=-1, keepdims=True)) @ A.T
        return cls(Point4.from_array(np.array(d["q"])), A, N, U,
                   np.array(d["fourier_re"]) + 1j * np.array(d["fourier_im"]), theta, gam,
                   float(d["residual"]), float(d["boundary_residual"]), int(d["iterations"]),
                   float(d.get("phase", 0.0)), float(d.get("condition", float("nan"))), embedding)


# ---------------------------------------------------------------------------
# Newton solver
# ---------------------------------------------------------------------------


class _System:
    def __init__(self, E, N, M, anchor, phase):
        self.E, self.N, self.M = E, N, M
        self.theta = 2 * np.pi * np.arange(M) / M
        ks = np.concatenate([-np.arange(1, N + 1), [0], np.arange(1, N + 1)])
        self.ks = ks
        self.F = np.exp(-1j * np.outer(ks, self.theta)) / M  # (2N+1, M)
        self.anchor = anchor
        self.rot = np.exp(-1j * phase)

    def coefficients(self, U, jac=False):
        G, tau, (B1, B2) = _curve(U, self.N, self.theta)
        if not jac:
            r = np.linalg.norm(G, axis=-1, keepdims=True)
            w = affine_chart(self.E.embed(G / r))
            return self.F @ w, w
        w, D = chart_curve(self.E, G)  # D: (M, 3, 4)
        n1, n2 = B1.shape[1], B2.shape[1]
        dG = np.zeros((self.M, 4, n1 + 2 * n2))
        dG[:, :, :n1] = tau[:, :, None] * B1[:, None, :]
        dG[:, 2, n1:n1 + n2] = B2
        dG[:, 3, n1 + n2:] = B2
        dw = np.einsum("mjk,mku->mju", D, dG)
        C = self.F @ w
        dC = np.einsum("km,mju->kju", self.F, dw)
        return C, w, dC

    def residual(self, C):
        N = self.N
        neg = C[:N]
        c0 = C[N] - self.anchor
        ph = (self.rot * C[N + 1, 0]).imag
        return np.concatenate([neg.real.ravel(), neg.imag.ravel(), c0.real, c0.imag, [ph]])

    def jacobian(self, dC):
        N = self.N
        neg = dC[:N].reshape(3 * N, -1)
        c0 = dC[N]
        ph = (self.rot * dC[N + 1, 0]).imag
        return np.concatenate([neg.real, neg.imag, c0.real, c0.imag, ph[None]], axis=0)


def _anchor(q, A):
    return affine_chart(A.T @ quadric_rep(q, A[:, 0]))


def solve_disk(P, q, seed=None, cfg=None, A=None, **kw):
    """Solve for the disk of the family through the anchor ``q`` in Q.

    Parameters
    ----------
    P : Embedding
        Usually a :class:`TotallyRealEmbedding`; ``None`` means the standard RP^3.
    q : Point4
        Anchor, a point of Q ~ S^2 x S^2.
    seed : DiskSolution, optional
        Warm start; its rotation is reused (aligned to ``q``) and its
        coefficients are the initial guess.  Without a seed the flat disk is
        used.
    cfg : SolverConfig, optional
        Keyword arguments override its fields.

    Raises
    ------
    SolverError
        Newton failed to reach ``cfg.tol``; carries the last residual.
    ConditioningError
        The Newton matrix is too ill-conditioned.
    """
    cfg = cfg or SolverConfig()
    for k, v in kw.items():
        setattr(cfg, k, v)
    P = TotallyRealEmbedding() if P is None else P
    N = cfg.modes
    if A is None:
        A = standard_position(q, None if seed is None else seed.A)
    E = P.rotated(A)
    anchor = _anchor(q, A)
    sysm = _System(E, N, cfg.M(), anchor, cfg.phase)
    U = np.zeros(n_unknowns(N)) if seed is None else _resize(seed.U, seed.modes, N)
    if seed is not None and not np.allclose(seed.A, A):
        # the seed lives in another frame; the flat guess is more reliable
        U = np.zeros(n_unknowns(N)) if np.linalg.norm(seed.A - A) > 0.5 else U
    res_norm = np.inf
    it = 0
    with np.errstate(all="ignore"):
        C, w, dC = sysm.coefficients(U, jac=True)
        R = sysm.residual(C)
        res_norm = np.max(np.abs(R))
        while res_norm > cfg.tol:
            if it >= cfg.max_iter or not np.isfinite(res_norm):
                raise SolverError(f"Newton did not converge (residual {res_norm:.3e})", res_norm, it)
            J = sysm.jacobian(dC)
            try:
                step = np.linalg.solve(J, -R)
            except np.linalg.LinAlgError:
                raise ConditioningError("singular Newton matrix", res_norm, it) from None
            lam = 1.0
            while True:
                Un = U + lam * step
                Cn, _ = sysm.coefficients(Un)
                Rn = sysm.residual(Cn)
                rn = np.max(np.abs(Rn))
                if np.isfinite(rn) and (rn < res_norm or lam < 1e-3 or rn < cfg.tol):
                    break
                lam *= 0.5
            if not np.isfinite(rn) or (rn >= res_norm and rn > cfg.tol):
                raise SolverError(f"Newton stalled (residual {res_norm:.3e})", res_norm, it)
            U = Un
            it += 1
            C, w, dC = sysm.coefficients(U, jac=True)
            R = sysm.residual(C)
            res_norm = np.max(np.abs(R))
    J = sysm.jacobian(dC)
    cond = float(np.linalg.cond(J))
    if not np.isfinite(cond) or cond > cfg.max_condition:
        raise ConditioningError(f"Newton matrix condition {cond:.3e}", res_norm, it)
    fourier = C[N:]  # k = 0..N
    th = sysm.theta
    recon = np.polynomial.polynomial.polyval(np.exp(1j * th), fourier).T
    bres = float(np.max(np.abs(recon - w)))
    G, _, _ = _curve(U, N, th)
    gam = (G / np.linalg.norm(G, axis=-1, keepdims=True)) @ A.T
    return DiskSolution(q, A, N, U, fourier, th, gam, float(res_norm), bres, it, cfg.phase, cond, P,
                        lu_factor(J), dC[N:])


def flat_disk_chart(a, b, zeta):
    """Closed-form disks ``w1 = zeta, w2 = a + conj(a) zeta, w3 = b + conj(b) zeta``."""
    zeta = np.asarray(zeta, dtype=complex)
    return np.stack([zeta, a + np.conj(a) * zeta, b + np.conj(b) * zeta], axis=-1)


def flat_anchor(a, b):
    """Anchor on Q of the closed-form disk ``(a, b)``, as a Point4, and its disk parameter."""
    c2 = np.conj(a) ** 2 + np.conj(b) ** 2
    c1 = 1 + 2 * abs(a) ** 2 + 2 * abs(b) ** 2
    c0 = a * a + b * b
    roots = np.roots([c2, c1, c0]) if abs(c2) > 1e-300 else np.array([-c0 / c1])
    zeta = roots[np.argmin(np.abs(roots))]
    if abs(zeta) >= 1:
        raise DegeneracyError("closed-form disk does not meet Q inside the unit disk")
    w = flat_disk_chart(a, b, zeta)
    from .embedding import point_from_quadric
    return point_from_quadric(affine_inverse(w)), zeta


def closed_form_error(sol, a, b, n=256):
    """Max defect of the boundary of ``sol`` from the closed-form disk ``(a, b)``.

    The boundary is mapped to the original affine chart; on the closed-form
    disk ``|w1| = 1``, ``w2 = a + conj(a) w1`` and ``w3 = b + conj(b) w1``.  The
    winding number of ``w1`` must be one.
    """
    th = 2 * np.pi * np.arange(n) / n
    w = sol.chart(np.exp(1j * th))
    err = np.max(np.abs(np.stack([np.abs(w[:, 0]) - 1, w[:, 1] - (a + np.conj(a) * w[:, 0]),
                                  w[:, 2] - (b + np.conj(b) * w[:, 0])])))
    wind = winding_number(w[:, 0])
    if wind != 1:
        return float("inf")
    return float(err)


# ---------------------------------------------------------------------------
# topology of a single disk
# ---------------------------------------------------------------------------


def winding_number(f):
    """Winding number of closed samples ``f`` (complex, periodic) around 0."""
    f = np.asarray(f, dtype=complex)
    d = np.angle(np.roll(f, -1) / f)
    return int(np.rint(np.sum(d) / (2 * np.pi)))


def _frame_matrices(sol, theta):
    """3x3 complex matrices spanning ``T P`` along the boundary in standard position."""
    E = sol.embedding.rotated(sol.A)
    G, tau, _ = _curve(sol.U, sol.modes, theta)
    n = G / np.linalg.norm(G, axis=-1, keepdims=True)
    basis = []
    for v in (tau, np.tile([0, 0, 1.0, 0], (len(theta), 1)), np.tile([0, 0, 0, 1.0], (len(theta), 1))):
        v = v - np.sum(v * n, axis=-1, keepdims=True) * n
        basis.append(v)
    return tangent_frame_matrix(E, n, basis)


def maslov_index(sol, P=None, n=None):
    """Winding number of ``det(G)^2 / |det G|^2`` for the boundary frame ``G(theta)``.

    Raises
    ------
    TotallyRealViolation
        If ``det G`` vanishes (the tangent space is not totally real).
    """
    if P is not None and sol.embedding is None:
        sol.embedding = P
    n = n or max(8 * sol.modes, 256)
    th = 2 * np.pi * np.arange(n) / n
    G = _frame_matrices(sol, th)
    d = np.linalg.det(G)
    scale = np.prod(np.linalg.norm(G, axis=-2), axis=-1)
    if np.any(np.abs(d) < 1e-10 * scale):
        raise TotallyRealViolation("boundary frame is complex-degenerate")
    return winding_number(d * d)


def flat_frame_display(zeta):
    """The explicit frame ``diag(i zeta, zeta^(1/2), zeta^(1/2))`` of the flat disk."""
    zeta = np.asarray(zeta, dtype=complex)
    s = np.sqrt(zeta)
    out = np.zeros(zeta.shape + (3, 3), dtype=complex)
    out[..., 0, 0] = 1j * zeta
    out[..., 1, 1] = s
    out[..., 2, 2] = s
    return out


def flat_partial_indices(sol, n=256):
    """Partial indices read off the displayed flat frame, after checking it spans ``T P``.

    Returns ``(indices, span_defect)``; ``span_defect`` is the largest
    principal-angle sine between the real spans of the computed frame and the
    displayed frame along the boundary.
    """
    th = 2 * np.pi * (np.arange(n) + 0.5) / n
    G = _frame_matrices(sol, th)
    D = flat_frame_display(np.exp(1j * th))
    defect = 0.0
    for Gm, Dm in zip(G, D):
        a = np.concatenate([Gm.real, Gm.imag])
        b = np.concatenate([Dm.real, Dm.imag])
        qa = np.linalg.qr(a)[0]
        qb = np.linalg.qr(b)[0]
        # sine of the largest principal angle, from the projection residual
        defect = max(defect, float(np.linalg.norm(qb - qa @ (qa.T @ qb), 2)))
    # winding of the squared diagonal entries over the full circle
    full = 2 * np.pi * np.arange(n) / n
    z = np.exp(1j * full)
    diag = [(1j * z) ** 2, z, z]
    return tuple(winding_number(d) for d in diag), defect


def quadric_intersections(sol, n=512):
    """Number of zeros of ``w1 + w2^2 + w3^2`` on the disk (winding on the boundary)."""
    th = 2 * np.pi * np.arange(n) / n
    return winding_number(quadric_value(sol.chart_standard(np.exp(1j * th))))


def image_distance(s1, s2, n=512):
    """Max distance from boundary samples of ``s1`` to the boundary curve of ``s2``."""
    th = 2 * np.pi * np.arange(n) / n
    a = s1.homogeneous(np.exp(1j * th))
    fine = 2 * np.pi * np.arange(8 * n) / (8 * n)
    b = s2.homogeneous(np.exp(1j * fine))
    worst = 0.0
    for z in a:
        d = fs_distance(z[None], b)
        k = int(np.argmin(d))
        # refine along the curve with a local parabola
        lo, hi = fine[k] - 2 * np.pi / (8 * n), fine[k] + 2 * np.pi / (8 * n)
        from scipy.optimize import minimize_scalar
        r = minimize_scalar(lambda t: float(fs_distance(z, s2.homogeneous(np.exp(1j * t))[0])),
                            bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        worst = max(worst, float(r.fun))
    return worst


def doubling_difference(P, q, cfg=None):
    """Change of the boundary curve when the truncation order is doubled."""
    cfg = cfg or SolverConfig()
    s1 = solve_disk(P, q, cfg=SolverConfig(**{**cfg.__dict__}))
    c2 = SolverConfig(**{**cfg.__dict__})
    c2.modes = 2 * cfg.modes
    c2.collocation = None
    s2 = solve_disk(P, q, seed=s1, cfg=c2, A=s1.A)
    th = 2 * np.pi * np.arange(256) / 256
    return float(np.max(np.abs(s1.chart_standard(np.exp(1j * th)) - s2.chart_standard(np.exp(1j * th))))), s1, s2


# ---------------------------------------------------------------------------
# grids on Q and families
# ---------------------------------------------------------------------------


def sphere_grid(n_lat, n_lon):
    """Gauss-Legendre latitudes times equispaced longitudes; returns (n_lat*n_lon, 3) and weights."""
    z, wz = np.polynomial.legendre.leggauss(n_lat)
    phi = 2 * np.pi * (np.arange(n_lon) + 0.5) / n_lon
    Z, Ph = np.meshgrid(z, phi, indexing="ij")
    r = np.sqrt(1 - Z ** 2)
    pts = np.stack([r * np.cos(Ph), r * np.sin(Ph), Z], axis=-1).reshape(-1, 3)
    w = np.repeat(wz, n_lon) * (2 * np.pi / n_lon)
    return pts, w


@dataclass
class QGrid:
    """Product grid on S^2 x S^2 with a lat/lon grid on each factor."""

    n_lat: int = 8
    n_lon: int = 8

    def __post_init__(self):
        if self.n_lat < 4 or self.n_lon < 4:
            raise ValueError("grid resolution must be at least 4 per direction")
        self.s, self.w = sphere_grid(self.n_lat, self.n_lon)

    @property
    def shape(self):
        return (len(self.s), len(self.s))

    def point(self, i, j):
        return Point4(self.s[i], self.s[j])

    def neighbours(self, i):
        a, b = divmod(i, self.n_lon)
        out = []
        for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            aa, bb = a + da, (b + db) % self.n_lon
            if 0 <= aa < self.n_lat:
                out.append(aa * self.n_lon + bb)
        return out

    def cells(self):
        n = len(self.s)
        return [(i, j) for i in range(n) for j in range(n)]

    def continuation_order(self, start=(0, 0)):
        """Breadth-first traversal; returns ``[(cell, parent)]``."""
        seen = {start: None}
        order = []
        dq = deque([start])
        while dq:
            c = dq.popleft()
            order.append((c, seen[c]))
            i, j = c
            for nb in [(k, j) for k in self.neighbours(i)] + [(i, k) for k in self.neighbours(j)]:
                if nb not in seen:
                    seen[nb] = c
                    dq.append(nb)
        return order

    def to_json(self):
        return {"n_lat": self.n_lat, "n_lon": self.n_lon}


@dataclass(eq=False)
class FamilyGrid:
    """Solved disks over a :class:`QGrid`."""

    embedding: object
    grid: QGrid
    disks: dict
    continuation_order: list
    failures: dict
    cfg: SolverConfig
    extras: dict = field(default_factory=dict)

    def holes(self):
        return sorted(set(self.grid.cells()) - set(self.disks))

    def require_complete(self):
        h = self.holes()
        if h:
            raise HoleError(f"{len(h)} unsolved cells, first {h[:5]}", h)

    def nearest(self, q, k=1):
        """The ``k`` solved cells whose anchors are closest to ``q``."""
        keys = list(self.disks)
        pts = np.array([self.disks[c].q.array for c in keys])
        d = np.linalg.norm(pts - q.array, axis=1)
        idx = np.argsort(d)[:k]
        return [keys[i] for i in idx]

    # -- persistence -------------------------------------------------------

    def save(self, path):
        os.makedirs(path, exist_ok=True)
        index = {"schema": "zollfrei.family/1", "grid": self.grid.to_json(),
                 "cfg": {k: v for k, v in self.cfg.__dict__.items()},
                 "embedding": self.embedding.to_json() if hasattr(self.embedding, "to_json") else None,
                 "cells": [], "failures": {f"{i},{j}": str(e) for (i, j), e in self.failures.items()},
                 "continuation_order": [[list(c), list(p) if p else None] for c, p in self.continuation_order]}
        for (i, j), sol in sorted(self.disks.items()):
            name = f"disk_{i:04d}_{j:04d}.json"
            with open(os.path.join(path, name), "w") as fh:
                json.dump(sol.to_json(), fh, sort_keys=True)
            index["cells"].append({"cell": [i, j], "file": name})
        with open(os.path.join(path, "index.json"), "w") as fh:
            json.dump(index, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path, embedding=None):
        with open(os.path.join(path, "index.json")) as fh:
            index = json.load(fh)
        grid = QGrid(**index["grid"])
        cfg = SolverConfig(**index["cfg"])
        if embedding is None and index.get("embedding"):
            embedding = TotallyRealEmbedding.from_json(index["embedding"])
        disks = {}
        for rec in index["cells"]:
            with open(os.path.join(path, rec["file"])) as fh:
                disks[tuple(rec["cell"])] = DiskSolution.from_json(json.load(fh), embedding, cfg.M())
        order = [(tuple(c), tuple(p) if p else None) for c, p in index["continuation_order"]]
        fails = {tuple(int(s) for s in k.split(",")): v for k, v in index["failures"].items()}
        return cls(embedding, grid, disks, order, fails, cfg)


def _solve_cell(args):
    P, q, seed, cfg, hook, keep = args
    try:
        sol = solve_disk(P, q, seed=seed, cfg=SolverConfig(**cfg.__dict__))
        extra = hook(sol) if hook is not None else None
        if not keep:
            sol.drop_jacobian()
        return sol, extra, None
    except ZollfreiError as exc:
        return None, None, exc


def build_family(P, grid=None, cfg=None, workers=1, keep_jacobian=False, hook=None):
    """Solve the disk through every anchor of ``grid`` by continuation.

    Cells are visited breadth first; each solve is warm-started from its
    already-solved parent.  Failures are collected (see ``FamilyGrid.failures``)
    rather than raised.  ``hook(sol)`` runs on every fresh solution while its
    Newton matrix is still available; results land in ``FamilyGrid.extras``.
    Newton matrices are dropped afterwards unless ``keep_jacobian`` (they are
    rebuilt on demand).
    """
    grid = grid or QGrid()
    cfg = cfg or SolverConfig()
    P = TotallyRealEmbedding() if P is None else P
    order = grid.continuation_order()
    disks, fails, extras = {}, {}, {}
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        # process breadth-first layers; each cell depends on its parent only
        depth = {}
        for c, p in order:
            depth[c] = 0 if p is None else depth[p] + 1
        layers = {}
        for c, p in order:
            layers.setdefault(depth[c], []).append((c, p))
        with ProcessPoolExecutor(workers) as ex:
            for d in sorted(layers):
                jobs = [(P, grid.point(*c), disks.get(p), cfg, hook, keep_jacobian)
                        for c, p in layers[d]]
                for (c, _), (sol, extra, err) in zip(layers[d], ex.map(_solve_cell, jobs)):
                    if sol is None:
                        fails[c] = err
                    else:
                        sol.embedding = P
                        disks[c] = sol
                        extras[c] = extra
    else:
        for c, p in order:
            sol, extra, err = _solve_cell((P, grid.point(*c), disks.get(p), cfg, hook, keep_jacobian))
            if sol is None:
                fails[c] = err
            else:
                disks[c] = sol
                extras[c] = extra
    fam = FamilyGrid(P, grid, disks, order, fails, cfg)
    fam.extras = extras
    return fam


# ---------------------------------------------------------------------------
# family-level checks
# ---------------------------------------------------------------------------


def family_quadric_check(fam):
    """Number of intersections with Q for each disk (should all be 1, at the anchor)."""
    out = {}
    for c, s in fam.disks.items():
        n = quadric_intersections(s)
        anchor_val = abs(quadric_value(s.fourier[0]))
        out[c] = (n, float(anchor_val))
    return out


def _interior_samples(sol, radii=(0.2, 0.4, 0.6, 0.8), n=24):
    z = np.concatenate([r * np.exp(2j * np.pi * np.arange(n) / n) for r in radii] + [[0.0]])
    return sol.homogeneous(z)


def disjointness(fam, pairs=None, rng=None, n_pairs=50, radii=(0.2, 0.4, 0.6, 0.8)):
    """Minimum Fubini-Study distance between interior samples of distinct disks.

    Returns the smallest value over the tested pairs together with the pair.
    """
    keys = sorted(fam.disks)
    rng = rng or np.random.default_rng(0)
    if pairs is None:
        pairs = []
        while len(pairs) < n_pairs:
            i, j = rng.choice(len(keys), 2, replace=False)
            pairs.append((keys[i], keys[j]))
    best = (np.inf, None)
    for a, b in pairs:
        A = _interior_samples(fam.disks[a], radii)
        B = _interior_samples(fam.disks[b], radii)
        d = fs_distance(A[:, None, :], B[None, :, :]).min()
        if d < best[0]:
            best = (float(d), (a, b))
    return best


def _tangent_basis_Q(q):
    return chart_basis(q)


def locate_disk(fam, w, starts=3, tol=1e-10, max_iter=30):
    """Disks of the family passing through the point ``w`` (homogeneous, off P).

    Newton on ``(q, zeta)`` from the ``starts`` nearest grid disks; converged
    anchors are deduplicated.  Returns a list of ``(q, zeta, sol)``.
    """
    w = np.asarray(w, dtype=complex)
    keys = list(fam.disks)
    # nearest disks by interior sample distance
    dist = []
    for c in keys:
        s = fam.disks[c]
        S = _interior_samples(s, radii=(0.1, 0.3, 0.5, 0.7, 0.9), n=16)
        dist.append(fs_distance(w[None], S).min())
    order = np.argsort(dist)[:starts]
    found = []
    for k in order:
        sol = fam.disks[keys[k]]
        S = _interior_samples(sol, radii=(0.1, 0.3, 0.5, 0.7, 0.9), n=16)
        zs = np.concatenate([r * np.exp(2j * np.pi * np.arange(16) / 16) for r in (0.1, 0.3, 0.5, 0.7, 0.9)] + [[0.0]])
        zeta = zs[np.argmin(fs_distance(w[None], S))]
        q = sol.q
        ok = False
        for _ in range(max_iter):
            # residual in the standard chart of the current disk
            target = affine_chart(sol.A.T @ w)
            r = sol.chart_standard(zeta) - target
            if np.max(np.abs(r)) < tol:
                ok = True
                break
            T = chart_basis(sol.q)
            cols = []
            for t in T.T:
                dF = sol.fourier_derivative(t)
                cols.append(np.polynomial.polynomial.polyval(zeta, dF))
            dz = np.polynomial.polynomial.polyval(zeta, np.polynomial.polynomial.polyder(sol.fourier))
            Jc = np.column_stack(cols + [dz, 1j * dz])
            Jr = np.concatenate([Jc.real, Jc.imag])
            step = np.linalg.lstsq(Jr, -np.concatenate([r.real, r.imag]), rcond=None)[0]
            qn = sol.q.array + T @ step[:4]
            zeta = zeta + step[4] + 1j * step[5]
            if abs(zeta) >= 1:
                break
            try:
                sol = solve_disk(fam.embedding, Point4.from_array(qn), seed=sol, cfg=SolverConfig(**fam.cfg.__dict__))
            except SolverError:
                break
        if ok and abs(zeta) < 1:
            if all(np.linalg.norm(sol.q.array - f[0].array) > 1e-6 for f in found):
                found.append((sol.q, zeta, sol))
    return found


def foliation_check(fam, k=5, rng=None):
    """For ``k`` random points off P count the disks through them (each should be 1)."""
    rng = rng or np.random.default_rng(1)
    counts = []
    for _ in range(k):
        # a random interior point of a random disk, which lies off P
        c = list(fam.disks)[rng.integers(len(fam.disks))]
        s = fam.disks[c]
        zeta = 0.6 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        w = s.homogeneous(zeta)[0]
        # move slightly off the leaf so the query is generic
        w = w + 0.02 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        counts.append(len(locate_disk(fam, w)))
    return counts
