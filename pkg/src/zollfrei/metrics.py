"""Built-in metric fields and the expression-file loader.

Names accepted by :func:`metric_from_spec`::

    g0                      the product metric h + (-h)
    flat                    dxi^2 - deta^2 in stereographic coordinates
    product-nonround:<eps>  e^{2 eps s} h + (-e^{2 eps s} h), reversed orientation
    perturbed:<seed>:<eps>  g0 plus a random polynomial tensor of size eps
    file:<path>             components over stereographic coordinates
"""

import ast
import operator

import numpy as np

from .errors import ContractViolation
from .manifold import (MetricField, NativeChart, chart_basis, stereographic_chart,
                       stereographic_jacobian)

_G0 = np.diag([1.0, 1.0, 1.0, -1.0, -1.0, -1.0])


def g0():
    """The flat model ``g0 = h - h``; Christoffels vanish at every chart origin."""

    def tensor(x, y):
        return np.broadcast_to(_G0, np.shape(x)[:-1] + (6, 6)).copy()

    return MetricField(tensor, 1, "g0", christoffel=lambda x, y: np.zeros(np.shape(x)[:-1] + (4, 4, 4)))


def chart_metric(components, orientation=1, name="chart-metric"):
    """Metric given by components ``C(xi)`` (..., 4, 4) in stereographic coordinates."""

    def tensor(x, y):
        d = x[..., 2] - y[..., 2]
        c = np.stack([x[..., 0], x[..., 1], y[..., 0], y[..., 1]], axis=-1) / (2.0 * d[..., None])
        J = stereographic_jacobian(x, y)
        C = components(c)
        return np.einsum("...ia,...ij,...jb->...ab", J, C, J)

    def basis(p):
        T = chart_basis(p)
        return T @ np.linalg.inv(stereographic_jacobian(p.x, p.y) @ T)

    native = NativeChart(stereographic_chart, components, basis)
    return MetricField(tensor, orientation, name, native=native)


def flat():
    """``dxi_1^2 + dxi_2^2 - deta_1^2 - deta_2^2`` pulled back from the chart.

    The orientation is the one of the coordinates ``(xi1, xi2, eta1, eta2)``,
    which is opposite to the product orientation of S^2 x S^2.
    """
    eta = np.diag([1.0, 1.0, -1.0, -1.0])
    return chart_metric(lambda c: np.broadcast_to(eta, c.shape[:-1] + (4, 4)), -1, "flat")


def _bump(v):
    # non-constant smooth function on S^2 so the conformal sphere has varying curvature
    return v[..., 2] + 0.6 * v[..., 0] * v[..., 1] + 0.3 * v[..., 0] ** 2


def product_nonround(eps=0.3, orientation=-1):
    """``pi1^* h_eps - pi2^* h_eps`` with ``h_eps = e^{2 eps s} h`` of non-constant curvature.

    With the reversed orientation the diagonal is a beta-surface whose induced
    connection is not projectively flat; the metric is not self-dual.
    """

    def tensor(x, y):
        fx = np.exp(2 * eps * _bump(x))
        fy = np.exp(2 * eps * _bump(y))
        out = np.zeros(np.shape(x)[:-1] + (6, 6))
        I = np.eye(3)
        out[..., :3, :3] = fx[..., None, None] * I
        out[..., 3:, 3:] = -fy[..., None, None] * I
        return out

    return MetricField(tensor, orientation, f"product-nonround:{eps}")


def perturbed(seed=0, eps=0.05):
    """``g0`` plus ``eps`` times a random symmetric tensor with quadratic coefficients."""
    rng = np.random.default_rng(seed)
    C0 = rng.standard_normal((6, 6))
    C1 = rng.standard_normal((6, 6, 6))
    C2 = rng.standard_normal((6, 6, 6, 6)) * 0.5

    def tensor(x, y):
        z = np.concatenate([x, y], axis=-1)
        B = C0 + np.einsum("...k,kab->...ab", z, C1) + np.einsum("...k,...l,klab->...ab", z, z, C2)
        B = 0.5 * (B + np.swapaxes(B, -1, -2))
        return _G0 + eps * B / 10.0

    return MetricField(tensor, 1, f"perturbed:{seed}:{eps}")


# ---------------------------------------------------------------------------
# expression files
# ---------------------------------------------------------------------------

_FUNCS = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
          "sqrt": np.sqrt, "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh}
_CONSTS = {"pi": np.pi, "e": np.e}
_VARS = ("X1", "X2", "Y1", "Y2")
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _compile_expr(src, lineno):
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ContractViolation(f"line {lineno}: cannot parse expression {src!r}: {exc.msg}") from None

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in env:
                return env[node.id]
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ContractViolation(f"line {lineno}: unknown name {node.id!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, env), ev(node.right, env))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand, env))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1):
            return _FUNCS[node.func.id](ev(node.args[0], env))
        raise ContractViolation(f"line {lineno}: unsupported syntax in {src!r}")

    # validate names once with scalar inputs
    ev(tree, {v: 0.1 for v in _VARS})
    return lambda env: ev(tree, env)


def parse_metric_text(text, name="file"):
    """Parse ``gij = <expr>`` lines (1-based indices over X1, X2, Y1, Y2).

    Optional lines ``orientation = -1`` and ``name = <str>``.  Unspecified
    components are zero and ``gji`` defaults to ``gij``.
    """
    exprs = {}
    orientation = 1
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractViolation(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "orientation":
            if val not in ("1", "+1", "-1"):
                raise ContractViolation(f"line {lineno}: orientation must be +1 or -1")
            orientation = int(val)
        elif key == "name":
            name = val
        elif len(key) == 3 and key[0] == "g" and key[1] in "1234" and key[2] in "1234":
            i, j = int(key[1]) - 1, int(key[2]) - 1
            exprs[(min(i, j), max(i, j))] = _compile_expr(val, lineno)
        else:
            raise ContractViolation(f"line {lineno}: unknown key {key!r}")
    if not exprs:
        raise ContractViolation("metric file defines no components")

    def components(c):
        env = {v: c[..., k] for k, v in enumerate(_VARS)}
        out = np.zeros(c.shape[:-1] + (4, 4))
        for (i, j), f in exprs.items():
            out[..., i, j] = out[..., j, i] = f(env)
        return out

    return chart_metric(components, orientation, name)


def load_metric_file(path):
    with open(path) as fh:
        return parse_metric_text(fh.read(), name=str(path))


def metric_from_spec(spec):
    """Build a MetricField from a built-in name or ``file:<path>``."""
    spec = spec.strip()
    parts = spec.split(":")
    try:
        if spec == "g0":
            return g0()
        if spec == "flat":
            return flat()
        if parts[0] == "product-nonround":
            return product_nonround(float(parts[1]) if len(parts) > 1 else 0.3)
        if parts[0] == "perturbed":
            seed = int(parts[1]) if len(parts) > 1 else 0
            eps = float(parts[2]) if len(parts) > 2 else 0.05
            return perturbed(seed, eps)
        if parts[0] == "file":
            return load_metric_file(spec[5:])
    except (ValueError, IndexError) as exc:
        raise ContractViolation(f"bad metric spec {spec!r}: {exc}") from None
    raise ContractViolation(f"unknown metric spec {spec!r}")
