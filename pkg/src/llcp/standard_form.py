"""Log-space standard form: linear objective, exponential-sum inequalities,
and affine equalities over canonical coordinates ``u``.

Every inequality has the shape ``sum_k exp(a_k^T u + b_k) + f^T u + g <= 0``
and is convex by construction.  Programs are immutable once finalized; a
packed array representation of all constraints is built eagerly for the
numeric kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class AffineForm:
    """Sparse affine functional ``sum_i coeffs[i] * u_i + const``."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const: float = 0.0):
        self.coeffs = dict(coeffs) if coeffs else {}
        self.const = float(const)

    @classmethod
    def coordinate(cls, index: int) -> "AffineForm":
        return cls({index: 1.0})

    @classmethod
    def of_constant(cls, value: float) -> "AffineForm":
        return cls(None, value)

    def plus(self, other: "AffineForm") -> "AffineForm":
        coeffs = dict(self.coeffs)
        for i, c in other.coeffs.items():
            coeffs[i] = coeffs.get(i, 0.0) + c
        return AffineForm(coeffs, self.const + other.const)

    def minus(self, other: "AffineForm") -> "AffineForm":
        return self.plus(other.scaled(-1.0))

    def scaled(self, a: float) -> "AffineForm":
        return AffineForm({i: a * c for i, c in self.coeffs.items()}, a * self.const)

    def shifted(self, b: float) -> "AffineForm":
        return AffineForm(self.coeffs, self.const + b)

    def value(self, u) -> float:
        return self.const + sum(c * u[i] for i, c in self.coeffs.items())

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for i, c in self.coeffs.items():
            out[i] = c
        return out

    def items_sorted(self):
        return sorted(self.coeffs.items())

    def render(self) -> str:
        parts = [f"{c:+g} u{i}" for i, c in self.items_sorted() if c != 0.0]
        if self.const != 0.0 or not parts:
            parts.append(f"{self.const:+g}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"AffineForm({self.render()})"


@dataclass(frozen=True, eq=False)
class CoordInfo:
    """Origin record for one canonical coordinate.

    ``kind`` is ``"variable"`` (log of an original variable entry),
    ``"atom_value"`` (auxiliary equal at tightness to the log of ``expr``'s
    value at ``detail``), ``"pf_vector"`` (log of the Perron eigenvector
    entry of ``expr``'s argument), or ``"slack"``.
    """

    index: int
    name: str
    kind: str
    expr: object = None
    detail: tuple = ()


@dataclass(frozen=True, eq=False)
class ExpSumConstraint:
    """``sum_k exp(terms_k(u)) + tail(u) <= 0``."""

    terms: tuple
    tail: AffineForm
    origin: str
    principal: bool = False

    def value(self, u) -> float:
        # unguarded evaluation; the solver path uses the guarded kernels
        return float(
            sum(np.exp(t.value(u)) for t in self.terms) + self.tail.value(u)
        )

    def render(self) -> str:
        parts = [f"exp({t.render()})" for t in self.terms]
        tail = self.tail.render()
        if tail != "+0" or not parts:
            parts.append(tail)
        return " + ".join(parts) + " <= 0"


@dataclass
class PackedConstraints:
    """Flat array view of all inequality constraints for the kernels.

    Exponential-term coefficient rows are stored in CSR layout
    (``a_indptr``, ``a_idx``, ``a_val``); affine tails likewise.
    ``term_cons`` maps each term to its owning constraint, and
    ``nnz_term`` / ``nnz_cons`` map each coefficient entry to its term and
    constraint (precomputed for the fallback kernels).
    """

    n: int
    m: int
    t: int
    term_cons: np.ndarray
    a_indptr: np.ndarray
    a_idx: np.ndarray
    a_val: np.ndarray
    b: np.ndarray
    f_indptr: np.ndarray
    f_idx: np.ndarray
    f_val: np.ndarray
    g: np.ndarray
    nnz_term: np.ndarray = None
    nnz_cons: np.ndarray = None
    f_cons: np.ndarray = None

    def __post_init__(self):
        if self.nnz_term is None:
            reps = np.diff(self.a_indptr)
            self.nnz_term = np.repeat(np.arange(self.t, dtype=np.int64), reps)
            self.nnz_cons = self.term_cons[self.nnz_term] if self.t else np.empty(
                0, dtype=np.int64
            )
            self.f_cons = np.repeat(
                np.arange(self.m, dtype=np.int64), np.diff(self.f_indptr)
            )


def pack_constraints(ineqs, n: int) -> PackedConstraints:
    term_cons, b = [], []
    a_indptr, a_idx, a_val = [0], [], []
    f_indptr, f_idx, f_val = [0], [], []
    g = []
    for ci, cons in enumerate(ineqs):
        for form in cons.terms:
            term_cons.append(ci)
            b.append(form.const)
            for i, c in form.items_sorted():
                a_idx.append(i)
                a_val.append(c)
            a_indptr.append(len(a_idx))
        for i, c in cons.tail.items_sorted():
            f_idx.append(i)
            f_val.append(c)
        f_indptr.append(len(f_idx))
        g.append(cons.tail.const)
    return PackedConstraints(
        n=n,
        m=len(ineqs),
        t=len(term_cons),
        term_cons=np.asarray(term_cons, dtype=np.int64),
        a_indptr=np.asarray(a_indptr, dtype=np.int64),
        a_idx=np.asarray(a_idx, dtype=np.int64),
        a_val=np.asarray(a_val, dtype=float),
        b=np.asarray(b, dtype=float),
        f_indptr=np.asarray(f_indptr, dtype=np.int64),
        f_idx=np.asarray(f_idx, dtype=np.int64),
        f_val=np.asarray(f_val, dtype=float),
        g=np.asarray(g, dtype=float),
    )


def extend_with_slack(pack: PackedConstraints) -> PackedConstraints:
    """Append one coordinate ``s`` and turn every row into ``h_i(u) - s <= 0``."""
    s = pack.n
    f_idx, f_val = [], []
    f_indptr = [0]
    for i in range(pack.m):
        lo, hi = pack.f_indptr[i], pack.f_indptr[i + 1]
        f_idx.extend(pack.f_idx[lo:hi])
        f_val.extend(pack.f_val[lo:hi])
        f_idx.append(s)
        f_val.append(-1.0)
        f_indptr.append(len(f_idx))
    return PackedConstraints(
        n=pack.n + 1,
        m=pack.m,
        t=pack.t,
        term_cons=pack.term_cons,
        a_indptr=pack.a_indptr,
        a_idx=pack.a_idx,
        a_val=pack.a_val,
        b=pack.b,
        f_indptr=np.asarray(f_indptr, dtype=np.int64),
        f_idx=np.asarray(f_idx, dtype=np.int64),
        f_val=np.asarray(f_val, dtype=float),
        g=pack.g,
    )


@dataclass
class ExpSumProgram:
    """Finalized standard form: ``minimize c^T u`` subject to the packed
    exponential-sum inequalities and ``A u = d``."""

    n: int
    c: np.ndarray
    ineqs: tuple
    a_eq: np.ndarray
    d_eq: np.ndarray
    eq_origins: tuple
    coords: tuple
    packed: PackedConstraints

    @property
    def m(self) -> int:
        return len(self.ineqs)

    @property
    def p(self) -> int:
        return self.a_eq.shape[0]

    def dump(self) -> str:
        """Deterministic listing of coordinates, inequalities, and rows."""
        lines = [
            f"coordinates: {self.n}   inequalities: {self.m}   "
            f"equality rows: {self.p}"
        ]
        for info in self.coords:
            lines.append(f"  u{info.index}  {info.name}  [{info.kind}]")
        obj = AffineForm({i: c for i, c in enumerate(self.c) if c != 0.0})
        lines.append(f"minimize: {obj.render()}")
        lines.append("inequality constraints:")
        for k, cons in enumerate(self.ineqs):
            star = " principal" if cons.principal else ""
            lines.append(f"  [{k}] ({cons.origin}{star}) {cons.render()}")
        lines.append("equality rows:")
        for k in range(self.p):
            row = AffineForm(
                {i: v for i, v in enumerate(self.a_eq[k]) if v != 0.0}
            )
            lines.append(
                f"  [{k}] ({self.eq_origins[k]}) {row.render()} = {self.d_eq[k]:g}"
            )
        return "\n".join(lines)


class ProgramBuilder:
    """Incrementally assembles an :class:`ExpSumProgram`.

    Coordinates are numbered in creation order; constraints and equality
    rows keep emission order, so identical build sequences produce
    identical programs.
    """

    def __init__(self):
        self._coords: list = []
        self._ineqs: list = []
        self._eq_forms: list = []
        self._eq_origins: list = []
        self._objective: Optional[AffineForm] = None

    @property
    def num_coords(self) -> int:
        return len(self._coords)

    @property
    def num_ineqs(self) -> int:
        return len(self._ineqs)

    def new_coord(self, name: str, kind: str, expr=None, detail=()) -> int:
        index = len(self._coords)
        self._coords.append(
            CoordInfo(index=index, name=name, kind=kind, expr=expr, detail=detail)
        )
        return index

    def coord_form(self, index: int) -> AffineForm:
        return AffineForm.coordinate(index)

    def add_inequality(self, terms, tail, origin: str, principal=False) -> int:
        index = len(self._ineqs)
        self._ineqs.append(
            ExpSumConstraint(
                terms=tuple(terms), tail=tail, origin=origin, principal=principal
            )
        )
        return index

    def add_equality(self, form: AffineForm, origin: str) -> int:
        index = len(self._eq_forms)
        self._eq_forms.append(form)
        self._eq_origins.append(origin)
        return index

    def set_objective(self, form: AffineForm) -> None:
        if form.const != 0.0:
            raise ValueError(
                "objective offsets are tracked by the retrieval map; "
                "pass a pure linear functional"
            )
        self._objective = form

    def finalize(self) -> ExpSumProgram:
        n = len(self._coords)
        c = (self._objective or AffineForm()).dense(n)
        p = len(self._eq_forms)
        a_eq = np.zeros((p, n))
        d_eq = np.zeros(p)
        for k, form in enumerate(self._eq_forms):
            for i, v in form.items_sorted():
                a_eq[k, i] = v
            d_eq[k] = -form.const
        ineqs = tuple(self._ineqs)
        return ExpSumProgram(
            n=n,
            c=c,
            ineqs=ineqs,
            a_eq=a_eq,
            d_eq=d_eq,
            eq_origins=tuple(self._eq_origins),
            coords=tuple(self._coords),
            packed=pack_constraints(ineqs, n),
        )
