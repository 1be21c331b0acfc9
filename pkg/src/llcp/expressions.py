"""Immutable expression trees over positive variables.

Expressions are built from positive variables, strictly positive constants,
and atom applications.  Trees are immutable after construction, so subtrees
can be shared freely between expressions, constraints, and problems; the
evaluator memoizes shared subtrees within a call.

Infix operators (``+``, ``*``, ``/``, ``**``, ``<=``, ``>=``, ``==``) are
construction sugar over :func:`apply`; comparison operators build
:class:`Constraint` objects, mirroring the usual modeling-language
convention.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from . import atoms
from .errors import DomainError, ProblemError, ShapeError
from .shapes import SCALAR, Shape, as_shape, broadcast_shapes


class Expression:
    """A node of an immutable expression tree."""

    __slots__ = ("shape",)

    children: tuple = ()

    def __init__(self, shape: Shape):
        self.shape = shape

    # -- construction sugar -------------------------------------------------
    @staticmethod
    def _coerce(value) -> "Expression":
        if isinstance(value, Expression):
            return value
        return Constant(value)

    def __add__(self, other):
        return apply("add", [self, self._coerce(other)])

    def __radd__(self, other):
        return apply("add", [self._coerce(other), self])

    def __mul__(self, other):
        return apply("mul", [self, self._coerce(other)])

    def __rmul__(self, other):
        return apply("mul", [self._coerce(other), self])

    def __truediv__(self, other):
        return apply("div", [self, self._coerce(other)])

    def __rtruediv__(self, other):
        return apply("div", [self._coerce(other), self])

    def __pow__(self, exponent):
        return apply("pow", [self], param=float(exponent))

    def __le__(self, other):
        return Constraint("leq", self, self._coerce(other))

    def __ge__(self, other):
        return Constraint("leq", self._coerce(other), self)

    def __eq__(self, other):  # noqa: PLE0302 - builds a Constraint, cvx-style
        return Constraint("eq", self, self._coerce(other))

    __hash__ = object.__hash__

    def equals(self, other) -> bool:
        """Structural equality (``==`` is reserved for constraints)."""
        if self is other:
            return True
        if type(self) is not type(other) or self.shape != other.shape:
            return False
        if isinstance(self, Variable):
            return self.name == other.name
        if isinstance(self, Constant):
            return bool(np.array_equal(self.value, other.value))
        return (
            self.atom == other.atom
            and self.param == other.param
            and len(self.children) == len(other.children)
            and all(a.equals(b) for a, b in zip(self.children, other.children))
        )

    def variables(self) -> list:
        """Distinct variables of the tree in first-appearance order."""
        seen, out = set(), []
        stack = [self]
        while stack:
            node = stack.pop(0)
            if isinstance(node, Variable):
                if id(node) not in seen:
                    seen.add(id(node))
                    out.append(node)
            else:
                stack = list(node.children) + stack
        return out


class Variable(Expression):
    """Positive decision variable leaf."""

    __slots__ = ("name",)

    def __init__(self, name: str, shape=SCALAR):
        if not isinstance(name, str) or not name:
            raise ProblemError("variable name must be a nonempty string")
        super().__init__(as_shape(shape))
        self.name = name

    @property
    def pos(self) -> bool:
        # every variable is positive by construction
        return True

    def __repr__(self) -> str:
        return f"Variable({self.name!r}, {self.shape!r})"


class Constant(Expression):
    """Strictly positive constant leaf.

    Entries equal to zero are rejected: canonicalization takes logarithms
    of all data, so extended values never appear in user-facing trees.
    """

    __slots__ = ("value",)

    def __init__(self, value):
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.ndim != 2:
            raise ShapeError(f"constants must be at most 2-D, got {arr.ndim}-D")
        bad = ~(np.isfinite(arr) & (arr > 0.0))
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            raise DomainError(
                f"constant entry ({i}, {j}) = {arr[i, j]!r} is not strictly "
                "positive and finite"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        super().__init__(Shape(*arr.shape))
        self.value = arr

    def __repr__(self) -> str:
        if self.shape.is_scalar():
            return f"Constant({self.value[0, 0]!r})"
        return f"Constant(<{self.shape!r}>)"


class AtomApplication(Expression):
    """Application of a registered atom to child expressions."""

    __slots__ = ("atom", "children", "param")

    def __init__(self, atom: str, children: tuple, param, shape: Shape):
        super().__init__(shape)
        self.atom = atom
        self.children = children
        self.param = param

    def __repr__(self) -> str:
        inner = ", ".join(repr(c) for c in self.children)
        if self.param is not None:
            return f"{self.atom}[{self.param!r}]({inner})"
        return f"{self.atom}({inner})"


def variable(name: str, shape=SCALAR) -> Variable:
    """Declare a positive variable with the given name and shape."""
    return Variable(name, shape)


def constant(value) -> Constant:
    """Wrap a strictly positive scalar or array as a constant leaf."""
    return Constant(value)


def apply(atom_name: str, children, param=None) -> AtomApplication:
    """Apply a registered atom to child expressions.

    Children that are plain numbers or arrays are wrapped as constants.
    Raises :class:`UnknownAtomError` for unregistered names and
    :class:`ShapeError` on arity/shape violations, naming the atom and the
    expected signature.
    """
    desc = atoms.atom_info(atom_name)
    kids = tuple(Expression._coerce(c) for c in children)
    param = desc.check_param(param)
    desc.check_arity(len(kids))
    shape = desc.output_shape([c.shape for c in kids], param)
    return AtomApplication(desc.name, kids, param, shape)


_constraint_counter = itertools.count()


class Constraint:
    """Elementwise relation (``leq`` or ``eq``) between two expressions.

    Identity is the unique ``id`` assigned at construction; it is the key
    under which dual values are reported.
    """

    __slots__ = ("op", "lhs", "rhs", "id")

    def __init__(self, op: str, lhs, rhs):
        if op not in ("leq", "eq"):
            raise ProblemError(f"unknown constraint kind {op!r}")
        lhs = Expression._coerce(lhs)
        rhs = Expression._coerce(rhs)
        # sides must agree elementwise; a 1x1 side broadcasts
        broadcast_shapes([lhs.shape, rhs.shape], "constraint")
        self.op = op
        self.lhs = lhs
        self.rhs = rhs
        self.id = next(_constraint_counter)

    @property
    def shape(self) -> Shape:
        return broadcast_shapes([self.lhs.shape, self.rhs.shape], "constraint")

    def __bool__(self):
        raise TypeError(
            "constraints are not truth-valued; pass them to Problem(...)"
        )

    def __repr__(self) -> str:
        sym = "<=" if self.op == "leq" else "=="
        return f"Constraint#{self.id}({self.lhs!r} {sym} {self.rhs!r})"


class Sense(Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class Status(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"


class Problem:
    """Objective sense, scalar objective expression, and constraints."""

    def __init__(self, sense, objective: Expression, constraints=()):
        self.sense = Sense(sense) if not isinstance(sense, Sense) else sense
        if not isinstance(objective, Expression):
            raise ProblemError("objective must be an Expression")
        if not objective.shape.is_scalar():
            raise ProblemError(
                f"objective must be scalar, got shape {objective.shape!r}"
            )
        self.objective = objective
        self.constraints = tuple(constraints)
        for c in self.constraints:
            if not isinstance(c, Constraint):
                raise ProblemError(f"not a constraint: {c!r}")
        self.variables = self._collect_variables()

    def _collect_variables(self) -> tuple:
        by_name: "dict[str, Variable]" = {}
        trees = [self.objective]
        for c in self.constraints:
            trees.extend((c.lhs, c.rhs))
        ordered = []
        for tree in trees:
            for v in tree.variables():
                known = by_name.get(v.name)
                if known is None:
                    by_name[v.name] = v
                    ordered.append(v)
                elif known is not v:
                    raise ProblemError(
                        f"two distinct variables share the name {v.name!r}"
                    )
        return tuple(ordered)

    def is_dgp(self) -> bool:
        from .analysis import is_dgp

        return is_dgp(self)

    def explain(self):
        from .analysis import explain

        return explain(self)

    def solve(self, settings=None):
        """Verify, canonicalize, solve, and retrieve a :class:`Solution`."""
        from .barrier import solve as barrier_solve
        from .canonicalize import lower, retrieve

        program, rmap = lower(self)
        result = barrier_solve(program, settings)
        return retrieve(rmap, result)

    def __repr__(self) -> str:
        return (
            f"Problem({self.sense.value}, {self.objective!r}, "
            f"{len(self.constraints)} constraint(s))"
        )


@dataclass
class Solution:
    """Result of solving a problem, mapped back to original variables.

    ``dual_values`` maps constraint ids to the multipliers of their
    principal canonical constraints; inequality duals are nonnegative,
    equality duals may take either sign.
    """

    status: Status
    optimal_value: float
    variable_values: "dict[str, np.ndarray]" = field(default_factory=dict)
    dual_values: "dict[int, np.ndarray]" = field(default_factory=dict)
    solver_stats: dict = field(default_factory=dict)


def _check_assignment(expr: Expression, assignment: Mapping) -> dict:
    values = {}
    for v in expr.variables():
        if v.name not in assignment:
            raise DomainError(f"no value supplied for variable {v.name!r}")
        arr = np.asarray(assignment[v.name], dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.shape != tuple(v.shape):
            raise ShapeError(
                f"value for {v.name!r} has shape {arr.shape}, expected {v.shape!r}"
            )
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise DomainError(f"value for {v.name!r} must be entrywise positive")
        values[v.name] = arr
    return values


def evaluate(expr: Expression, assignment: Mapping) -> np.ndarray:
    """Numeric value of an expression at a positive assignment.

    Values are computed bottom-up with shared subtrees evaluated once.
    Domain violations raise :class:`DomainError` carrying the path from the
    root to the offending subtree.
    """
    values = _check_assignment(expr, assignment)
    memo: "dict[int, np.ndarray]" = {}

    def rec(node, path):
        found = memo.get(id(node))
        if found is not None:
            return found
        if isinstance(node, Variable):
            out = values[node.name]
        elif isinstance(node, Constant):
            out = node.value
        else:
            args = [
                rec(child, path + (f"{node.atom}[{k}]",))
                for k, child in enumerate(node.children)
            ]
            try:
                out = atoms.eval_atom(node.atom, args, node.param)
            except DomainError as err:
                raise DomainError(str(err), path + (node.atom,)) from None
        memo[id(node)] = out
        return out

    return rec(expr, ())
