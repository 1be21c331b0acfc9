"""Atom catalog: log-log curvature, monotonicity, domains, and evaluators.

Every function that may appear in an expression tree is registered here as
an :class:`AtomDescriptor`.  The descriptor records the atom's curvature
under the log-log transformation, its per-argument monotonicity, a
human-readable domain, and a numeric evaluator.  The registry is built once
at import time and is read-only afterwards, so lookups and evaluations are
safe from concurrent contexts.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from math import comb
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ShapeError, UnknownAtomError
from .shapes import SCALAR, Shape, broadcast_shapes


class Curvature(Enum):
    """Curvature classes under the log-log transformation.

    The classes form a lattice: CONSTANT below AFFINE, AFFINE below both
    CONVEX and CONCAVE, and UNKNOWN on top.
    """

    CONSTANT = "log-log constant"
    AFFINE = "log-log affine"
    CONVEX = "log-log convex"
    CONCAVE = "log-log concave"
    UNKNOWN = "unknown"

    def is_affine(self) -> bool:
        return curvature_under(self, Curvature.AFFINE)

    def is_convex(self) -> bool:
        return curvature_under(self, Curvature.CONVEX)

    def is_concave(self) -> bool:
        return curvature_under(self, Curvature.CONCAVE)

    def __str__(self) -> str:
        return self.value


_RANK = {
    Curvature.CONSTANT: 0,
    Curvature.AFFINE: 1,
    Curvature.CONVEX: 2,
    Curvature.CONCAVE: 2,
    Curvature.UNKNOWN: 3,
}


def curvature_under(a: Curvature, b: Curvature) -> bool:
    """Partial order of the curvature lattice: is ``a`` below or equal ``b``?"""
    if a == b or b is Curvature.UNKNOWN:
        return True
    if a is Curvature.CONSTANT:
        return True
    if a is Curvature.AFFINE:
        return b is not Curvature.CONSTANT
    return False


def curvature_join(a: Curvature, b: Curvature) -> Curvature:
    """Least upper bound; join of CONVEX and CONCAVE is UNKNOWN."""
    if curvature_under(a, b):
        return b
    if curvature_under(b, a):
        return a
    return Curvature.UNKNOWN


def curvature_meet(a: Curvature, b: Curvature) -> Curvature:
    """Greatest lower bound; meet of CONVEX and CONCAVE is AFFINE."""
    if curvature_under(a, b):
        return a
    if curvature_under(b, a):
        return b
    return Curvature.AFFINE


class Monotonicity(Enum):
    NONDECREASING = "nondecreasing"
    NONINCREASING = "nonincreasing"
    NEITHER = "neither"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class AtomDescriptor:
    """Registered atom: signature, curvature, domain, and numeric semantics.

    ``arity`` is a fixed argument count, or ``None`` for variadic atoms
    (two or more arguments).  Parameterized atoms (``pow``, ``sum_largest``,
    ``pnorm``, ``resolvent``, ``index``, ``slice``) carry static data that
    is known at analysis time; ``param_name`` documents it and
    ``param_check`` validates it.
    """

    name: str
    arity: Optional[int]
    curvature: Curvature
    domain: str
    shape_rule: Callable = None
    evaluator: Callable = None
    monotonicity_rule: Callable = None
    param_name: Optional[str] = None
    param_check: Callable = None

    def check_arity(self, nargs: int) -> None:
        if self.arity is None:
            if nargs < 2:
                raise ShapeError(
                    f"{self.name}: expected at least 2 arguments, got {nargs}"
                )
        elif nargs != self.arity:
            raise ShapeError(
                f"{self.name}: expected {self.arity} argument(s), got {nargs}"
            )

    def check_param(self, param):
        if self.param_name is None:
            if param is not None:
                raise ShapeError(f"{self.name} takes no parameter")
            return None
        if param is None:
            raise ShapeError(f"{self.name} requires parameter {self.param_name}")
        return self.param_check(param)

    def output_shape(self, shapes, param=None) -> Shape:
        return self.shape_rule(list(shapes), param)

    def arg_monotonicity(self, nargs: int, param=None) -> tuple:
        """Per-argument monotonicity, resolved for a concrete parameter."""
        return self.monotonicity_rule(nargs, param)


_REGISTRY: "dict[str, AtomDescriptor]" = {}


def _register(**kwargs) -> None:
    desc = AtomDescriptor(**kwargs)
    if desc.name in _REGISTRY:
        raise ValueError(f"atom {desc.name!r} registered twice")
    _REGISTRY[desc.name] = desc


def atom_info(name: str) -> AtomDescriptor:
    """Descriptor for a registered atom; suggests near matches on failure."""
    try:
        return _REGISTRY[name]
    except KeyError:
        close = difflib.get_close_matches(str(name), _REGISTRY.keys(), n=3)
        hint = f"; did you mean {', '.join(close)}?" if close else ""
        raise UnknownAtomError(f"unknown atom {name!r}{hint}") from None


def list_atoms() -> list:
    """All registered atoms in deterministic (registration) order."""
    return list(_REGISTRY.values())


# ---------------------------------------------------------------------------
# shape rules

def _ew_shape(name):
    def rule(shapes, param):
        return broadcast_shapes(shapes, name)

    return rule


def _unary_shape(shapes, param):
    return shapes[0]


def _vector_shape(name):
    def rule(shapes, param):
        (s,) = shapes
        if not s.is_vector():
            raise ShapeError(f"{name}: expected an n x 1 vector, got {s}")
        return SCALAR

    return rule


def _square_shape(name, out="same"):
    def rule(shapes, param):
        (s,) = shapes
        if not s.is_square():
            raise ShapeError(f"{name}: expected a square matrix, got {s}")
        return SCALAR if out == "scalar" else s

    return rule


def _matmul_shape(shapes, param):
    a, b = shapes
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dimensions disagree, {a} x {b}")
    return Shape(a.rows, b.cols)


def _sum_largest_shape(shapes, param):
    (s,) = shapes
    if not s.is_vector():
        raise ShapeError(f"sum_largest: expected an n x 1 vector, got {s}")
    if param > s.rows:
        raise ShapeError(
            f"sum_largest: count {param} exceeds vector length {s.rows}"
        )
    return SCALAR


def _index_shape(shapes, param):
    (s,) = shapes
    i, j = param
    if not (0 <= i < s.rows and 0 <= j < s.cols):
        raise ShapeError(f"index: ({i}, {j}) out of bounds for {s}")
    return SCALAR


def _slice_shape(shapes, param):
    (s,) = shapes
    r0, r1, c0, c1 = param
    if not (0 <= r0 < r1 <= s.rows and 0 <= c0 < c1 <= s.cols):
        raise ShapeError(f"slice: window {param} out of bounds for {s}")
    return Shape(r1 - r0, c1 - c0)


# ---------------------------------------------------------------------------
# monotonicity rules

def _mono_all(kind):
    def rule(nargs, param):
        return (kind,) * nargs

    return rule


def _mono_ratio(nargs, param):
    return (Monotonicity.NONDECREASING, Monotonicity.NONINCREASING)


def _mono_pow(nargs, param):
    if param >= 0:
        return (Monotonicity.NONDECREASING,)
    return (Monotonicity.NONINCREASING,)


# ---------------------------------------------------------------------------
# parameter checks

def _real_param(name):
    def check(p):
        p = float(p)
        if not np.isfinite(p):
            raise ShapeError(f"{name}: parameter must be finite")
        return p

    return check


def _count_param(p):
    if isinstance(p, bool) or int(p) != p or int(p) < 1:
        raise ShapeError("sum_largest: count must be a positive integer")
    return int(p)


def _pnorm_param(p):
    p = float(p)
    if not np.isfinite(p) or p < 1.0:
        raise ShapeError("pnorm: order must satisfy p >= 1")
    return p


def _resolvent_param(s):
    s = float(s)
    if not (np.isfinite(s) and s > 0.0):
        raise ShapeError("resolvent: scalar must be positive")
    return s


def _index_param(p):
    try:
        i, j = p
    except (TypeError, ValueError):
        raise ShapeError("index: parameter must be a (row, col) pair") from None
    return (int(i), int(j))


def _slice_param(p):
    try:
        r0, r1, c0, c1 = p
    except (TypeError, ValueError):
        raise ShapeError("slice: parameter must be (r0, r1, c0, c1)") from None
    return (int(r0), int(r1), int(c0), int(c1))


# ---------------------------------------------------------------------------
# numeric evaluators (inputs are strictly positive 2-D float arrays)

def perron_pair(matrix, tol: float = 1e-12, max_iter: int = 10000):
    """Perron eigenvalue and eigenvector of an entrywise positive matrix.

    Power iteration with Collatz-Wielandt two-sided bounds, which converge
    for positive matrices; no general eigensolver is involved.
    """
    x = np.asarray(matrix, dtype=float)
    n = x.shape[0]
    v = np.ones(n)
    lam = float(x[0, 0]) if n == 1 else 0.0
    for _ in range(max_iter):
        w = x @ v
        ratios = w / v
        lo, hi = float(ratios.min()), float(ratios.max())
        lam = 0.5 * (lo + hi)
        if hi - lo <= tol * hi:
            v = w / w.max()
            break
        v = w / w.max()
    return lam, v / v.sum()


def spectral_radius_positive(matrix, tol: float = 1e-12) -> float:
    return perron_pair(matrix, tol=tol)[0]


def _eval_add(args, param):
    out = args[0]
    for a in args[1:]:
        out = out + a
    return out


def _eval_mul(args, param):
    return args[0] * args[1]


def _eval_div(args, param):
    return args[0] / args[1]


def _eval_pow(args, param):
    return args[0] ** param


def _eval_max(args, param):
    out = args[0]
    for a in args[1:]:
        out = np.maximum(out, a)
    return out


def _eval_min(args, param):
    out = args[0]
    for a in args[1:]:
        out = np.minimum(out, a)
    return out


def _eval_sum_largest(args, param):
    flat = np.sort(args[0].ravel())[::-1]
    return np.array([[flat[:param].sum()]])


def _eval_one_minus(args, param):
    x = args[0]
    if np.any(x >= 1.0):
        raise DomainError("one_minus: arguments must lie in (0, 1)")
    return 1.0 - x


def _eval_diff_pos(args, param):
    a, b = np.broadcast_arrays(args[0], args[1])
    if np.any(a <= b):
        raise DomainError("diff_pos: first argument must exceed the second")
    return a - b


def _eval_geo_mean(args, param):
    logs = np.log(args[0])
    return np.array([[float(np.exp(logs.mean()))]])


def _eval_harmonic_mean(args, param):
    x = args[0]
    return np.array([[x.size / float((1.0 / x).sum())]])


def _eval_pnorm(args, param):
    x = args[0].ravel()
    top = x.max()
    return np.array([[top * float(((x / top) ** param).sum()) ** (1.0 / param)]])


def _eval_exp(args, param):
    return np.exp(args[0])


def _eval_log(args, param):
    x = args[0]
    if np.any(x <= 1.0):
        raise DomainError("log: arguments must be greater than 1")
    return np.log(x)


def _eval_entropy(args, param):
    x = args[0]
    if np.any(x >= 1.0):
        raise DomainError("entropy: arguments must lie in (0, 1)")
    return -x * np.log(x)


def _eval_trace(args, param):
    return np.array([[float(np.trace(args[0]))]])


def _eval_matmul(args, param):
    return args[0] @ args[1]


def _eval_pf_eigenvalue(args, param):
    lam, _ = perron_pair(args[0])
    return np.array([[lam]])


def _eval_eye_minus_inv(args, param):
    x = args[0]
    rho = spectral_radius_positive(x)
    if rho >= 1.0:
        raise DomainError(
            f"eye_minus_inv: spectral radius {rho:.6g} must be below 1"
        )
    n = x.shape[0]
    return np.linalg.solve(np.eye(n) - x, np.eye(n))


def _eval_resolvent(args, param):
    x = args[0]
    rho = spectral_radius_positive(x)
    if rho >= param:
        raise DomainError(
            f"resolvent: spectral radius {rho:.6g} must be below s = {param:g}"
        )
    n = x.shape[0]
    return np.linalg.solve(param * np.eye(n) - x, np.eye(n))


def _eval_index(args, param):
    i, j = param
    return np.array([[args[0][i, j]]])


def _eval_slice(args, param):
    r0, r1, c0, c1 = param
    return args[0][r0:r1, c0:c1]


# ---------------------------------------------------------------------------
# registry

_ND = Monotonicity.NONDECREASING
_NI = Monotonicity.NONINCREASING

_register(
    name="add", arity=None, curvature=Curvature.CONVEX,
    domain="entrywise positive",
    shape_rule=_ew_shape("add"), evaluator=_eval_add,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="mul", arity=2, curvature=Curvature.AFFINE,
    domain="entrywise positive",
    shape_rule=_ew_shape("mul"), evaluator=_eval_mul,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="div", arity=2, curvature=Curvature.AFFINE,
    domain="entrywise positive",
    shape_rule=_ew_shape("div"), evaluator=_eval_div,
    monotonicity_rule=_mono_ratio,
)
_register(
    name="pow", arity=1, curvature=Curvature.AFFINE,
    domain="positive",
    shape_rule=_unary_shape, evaluator=_eval_pow,
    monotonicity_rule=_mono_pow,
    param_name="exponent", param_check=_real_param("pow"),
)
_register(
    name="max", arity=None, curvature=Curvature.CONVEX,
    domain="entrywise positive",
    shape_rule=_ew_shape("max"), evaluator=_eval_max,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="min", arity=None, curvature=Curvature.CONCAVE,
    domain="entrywise positive",
    shape_rule=_ew_shape("min"), evaluator=_eval_min,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="sum_largest", arity=1, curvature=Curvature.CONVEX,
    domain="positive vector",
    shape_rule=_sum_largest_shape, evaluator=_eval_sum_largest,
    monotonicity_rule=_mono_all(_ND),
    param_name="count", param_check=_count_param,
)
_register(
    name="one_minus", arity=1, curvature=Curvature.CONCAVE,
    domain="(0, 1)",
    shape_rule=_unary_shape, evaluator=_eval_one_minus,
    monotonicity_rule=_mono_all(_NI),
)
_register(
    name="diff_pos", arity=2, curvature=Curvature.CONCAVE,
    domain="x1 > x2 > 0",
    shape_rule=_ew_shape("diff_pos"), evaluator=_eval_diff_pos,
    monotonicity_rule=_mono_ratio,
)
_register(
    name="geo_mean", arity=1, curvature=Curvature.AFFINE,
    domain="positive vector",
    shape_rule=_vector_shape("geo_mean"), evaluator=_eval_geo_mean,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="harmonic_mean", arity=1, curvature=Curvature.CONCAVE,
    domain="positive vector",
    shape_rule=_vector_shape("harmonic_mean"), evaluator=_eval_harmonic_mean,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="pnorm", arity=1, curvature=Curvature.CONVEX,
    domain="positive vector",
    shape_rule=_vector_shape("pnorm"), evaluator=_eval_pnorm,
    monotonicity_rule=_mono_all(_ND),
    param_name="order", param_check=_pnorm_param,
)
_register(
    name="exp", arity=1, curvature=Curvature.CONVEX,
    domain="x > 0",
    shape_rule=_unary_shape, evaluator=_eval_exp,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="log", arity=1, curvature=Curvature.CONCAVE,
    domain="(1, inf)",
    shape_rule=_unary_shape, evaluator=_eval_log,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="entropy", arity=1, curvature=Curvature.CONCAVE,
    domain="(0, 1)",
    shape_rule=_unary_shape, evaluator=_eval_entropy,
    monotonicity_rule=_mono_all(Monotonicity.NEITHER),
)
_register(
    name="trace", arity=1, curvature=Curvature.CONVEX,
    domain="positive square matrix",
    shape_rule=_square_shape("trace", out="scalar"), evaluator=_eval_trace,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="matmul", arity=2, curvature=Curvature.CONVEX,
    domain="positive matrices",
    shape_rule=_matmul_shape, evaluator=_eval_matmul,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="pf_eigenvalue", arity=1, curvature=Curvature.CONVEX,
    domain="positive square matrix",
    shape_rule=_square_shape("pf_eigenvalue", out="scalar"),
    evaluator=_eval_pf_eigenvalue,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="eye_minus_inv", arity=1, curvature=Curvature.CONVEX,
    domain="positive square matrix with spectral radius below 1",
    shape_rule=_square_shape("eye_minus_inv"), evaluator=_eval_eye_minus_inv,
    monotonicity_rule=_mono_all(_ND),
)
_register(
    name="resolvent", arity=1, curvature=Curvature.CONVEX,
    domain="positive square matrix with spectral radius below s",
    shape_rule=_square_shape("resolvent"), evaluator=_eval_resolvent,
    monotonicity_rule=_mono_all(_ND),
    param_name="scalar", param_check=_resolvent_param,
)
_register(
    name="index", arity=1, curvature=Curvature.AFFINE,
    domain="positive",
    shape_rule=_index_shape, evaluator=_eval_index,
    monotonicity_rule=_mono_all(_ND),
    param_name="entry", param_check=_index_param,
)
_register(
    name="slice", arity=1, curvature=Curvature.AFFINE,
    domain="positive",
    shape_rule=_slice_shape, evaluator=_eval_slice,
    monotonicity_rule=_mono_all(_ND),
    param_name="window", param_check=_slice_param,
)


def _coerce_arg(name, k, value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise ShapeError(f"{name}: argument {k} has {arr.ndim} dimensions")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError(f"{name}: argument {k} must be entrywise positive and finite")
    return arr


def eval_atom(name: str, args, param=None) -> np.ndarray:
    """Numeric value of an atom at concrete positive inputs.

    Arguments are coerced to 2-D arrays (vectors become columns).  Raises
    :class:`DomainError` when an input leaves the atom's domain and
    :class:`ShapeError` on arity or shape violations.
    """
    desc = atom_info(name)
    if isinstance(args, np.ndarray) or np.isscalar(args):
        args = [args]
    arrays = [_coerce_arg(name, k, a) for k, a in enumerate(args)]
    param = desc.check_param(param)
    desc.check_arity(len(arrays))
    desc.output_shape([Shape(*a.shape) for a in arrays], param)
    with np.errstate(over="ignore", under="ignore"):
        out = np.atleast_2d(np.asarray(desc.evaluator(arrays, param), dtype=float))
    # extended values (0, +inf) never escape the evaluator
    if not np.all(np.isfinite(out)) or np.any(out <= 0.0):
        raise DomainError(
            f"{name}: result leaves the positive floating-point range"
        )
    return out


def sum_largest_subsets(n: int, r: int, limit: int = 10000):
    """All size-r index subsets of range(n), guarded against blowup."""
    total = comb(n, r)
    if total > limit:
        raise ShapeError(
            f"sum_largest: expansion needs {total} constraints, limit is {limit}"
        )
    return list(combinations(range(n), r))
