"""Shared fixtures: worked-instance builders and in-domain atom samplers."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

import llcp
from llcp import apply, constant, variable

PROBLEMS_DIR = Path(__file__).resolve().parents[1] / "problems"

# printed output block of the hello-world instance
HELLO_VALUE = 48.81026898447343
HELLO_X = 11.780089932635645
HELLO_Y = 4.143454698868564
HELLO_DUAL = 2.843059917747706

# printed output block of the completion instance
COMPLETION_VALUE = 4.702374203221535
COMPLETION_X = np.array(
    [
        [1.0, 4.63616907, 1.9],
        [0.49991744, 0.8, 0.37774148],
        [3.2, 5.9, 1.14221476],
    ]
)


def hello_problem() -> llcp.Problem:
    x = variable("x")
    y = variable("y")
    return llcp.Problem(
        "minimize", x * y, [apply("exp", [y / x]) <= apply("log", [y])]
    )


def completion_problem() -> llcp.Problem:
    X = variable("X", (3, 3))
    known = {(0, 0): 1.0, (0, 2): 1.9, (1, 1): 0.8, (2, 0): 3.2, (2, 1): 5.9}
    cons = [
        apply("index", [X], param=ij) == constant(v) for ij, v in known.items()
    ]
    free = [(0, 1), (1, 0), (1, 2), (2, 2)]
    prod = apply("index", [X], param=free[0])
    for ij in free[1:]:
        prod = prod * apply("index", [X], param=ij)
    cons.append(prod == constant(1.0))
    return llcp.Problem("minimize", apply("pf_eigenvalue", [X]), cons)


@pytest.fixture
def hello():
    return hello_problem()


@pytest.fixture
def completion():
    return completion_problem()


# ---------------------------------------------------------------------------
# in-domain samplers, closed under entrywise geometric mixing


def positive(rng, shape, lo=0.2, hi=5.0):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), shape))


def _scaled_to_radius(rng, n, rho):
    x = rng.uniform(0.1, 1.0, (n, n))
    return x * (rho / max(abs(np.linalg.eigvals(x))))


def atom_sampler(name: str, rng):
    """Structure for one atom: returns ``(draw, param)``.

    ``draw(rng)`` yields an in-domain argument list; two draws of the same
    structure stay in-domain under entrywise geometric mixing, which the
    Jensen checks rely on.
    """
    square = int(rng.integers(2, 5))
    length = int(rng.integers(3, 7))
    shape = [(1, 1), (3, 1), (2, 2)][int(rng.integers(0, 3))]

    if name in ("add", "max", "min"):
        k = int(rng.integers(2, 5))
        return (lambda r: [positive(r, shape) for _ in range(k)]), None
    if name == "mul" or name == "div":
        return (lambda r: [positive(r, shape), positive(r, shape)]), None
    if name == "pow":
        return (lambda r: [positive(r, shape)]), float(rng.uniform(-3.0, 3.0))
    if name == "sum_largest":
        r_count = int(rng.integers(1, length + 1))
        return (lambda r: [positive(r, (length, 1))]), r_count
    if name == "one_minus" or name == "entropy":
        return (lambda r: [positive(r, shape, 0.02, 0.95)]), None
    if name == "diff_pos":

        def draw(r):
            x2 = positive(r, shape)
            return [x2 * r.uniform(1.3, 3.0, shape), x2]

        return draw, None
    if name in ("geo_mean", "harmonic_mean"):
        return (lambda r: [positive(r, (length, 1))]), None
    if name == "pnorm":
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        return (lambda r: [positive(r, (length, 1))]), p
    if name == "exp":
        return (lambda r: [positive(r, shape, 0.05, 3.0)]), None
    if name == "log":
        return (lambda r: [positive(r, shape, 1.05, 8.0)]), None
    if name == "trace" or name == "pf_eigenvalue":
        return (lambda r: [positive(r, (square, square))]), None
    if name == "matmul":
        m, k, p = (int(rng.integers(1, 4)) for _ in range(3))
        return (lambda r: [positive(r, (m, k)), positive(r, (k, p))]), None
    if name == "eye_minus_inv":
        return (
            lambda r: [_scaled_to_radius(r, square, r.uniform(0.2, 0.85))]
        ), None
    if name == "resolvent":
        s = float(rng.uniform(0.5, 3.0))
        return (
            lambda r: [_scaled_to_radius(r, square, s * r.uniform(0.2, 0.8))]
        ), s
    if name == "index":
        rows, cols = shape
        ij = (int(rng.integers(0, rows)), int(rng.integers(0, cols)))
        return (lambda r: [positive(r, shape)]), ij
    if name == "slice":
        rows, cols = 3, 3
        r0 = int(rng.integers(0, 2))
        c0 = int(rng.integers(0, 2))
        window = (r0, int(rng.integers(r0 + 1, 4)), c0, int(rng.integers(c0 + 1, 4)))
        return (lambda r: [positive(r, (rows, cols))]), window
    raise KeyError(name)


# unary scalar atoms and probe intervals for the second-order check
UNARY_SCALAR_INTERVALS = {
    "pow": (0.2, 5.0),
    "one_minus": (0.03, 0.9),
    "exp": (0.05, 3.0),
    "log": (1.05, 8.0),
    "entropy": (0.02, 0.95),
    "eye_minus_inv": (0.05, 0.9),
    "resolvent": (0.05, 1.8),
}

UNARY_SCALAR_PARAMS = {"pow": 2.5, "resolvent": 2.0}


def ray_expression(expr, anchors, ray_var):
    """Substitute each variable with a monomial ``c * w^d`` of one variable.

    Used to probe multivariate expressions along positive one-dimensional
    rays; log-log curvature is preserved under monomial substitution.
    """
    from llcp.expressions import AtomApplication, Constant, Variable

    def rebuild(node):
        if isinstance(node, Variable):
            c, d = anchors[node.name]
            return apply(
                "mul", [constant(np.asarray(c)), apply("pow", [ray_var], param=d)]
            )
        if isinstance(node, Constant):
            return node
        assert isinstance(node, AtomApplication)
        return apply(node.atom, [rebuild(ch) for ch in node.children], node.param)

    return rebuild(expr)
