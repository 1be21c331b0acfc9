"""Row/column extents for expressions: scalars are 1x1, vectors are n x 1."""

from __future__ import annotations

from .errors import ShapeError


class Shape(tuple):
    """Extent of an expression; both dimensions are at least 1."""

    __slots__ = ()

    def __new__(cls, rows: int, cols: int) -> "Shape":
        r, c = int(rows), int(cols)
        if r < 1 or c < 1:
            raise ShapeError(f"extents must be at least 1, got {r}x{c}")
        return super().__new__(cls, (r, c))

    @property
    def rows(self) -> int:
        return self[0]

    @property
    def cols(self) -> int:
        return self[1]

    @property
    def size(self) -> int:
        return self[0] * self[1]

    def is_scalar(self) -> bool:
        return self[0] == 1 and self[1] == 1

    def is_square(self) -> bool:
        return self[0] == self[1]

    def is_vector(self) -> bool:
        return self[1] == 1

    def __repr__(self) -> str:
        return f"{self[0]}x{self[1]}"


SCALAR = Shape(1, 1)


def as_shape(value) -> Shape:
    """Coerce an int, pair, or Shape into a Shape."""
    if isinstance(value, Shape):
        return value
    if isinstance(value, int):
        return Shape(value, 1)
    try:
        rows, cols = value
    except (TypeError, ValueError):
        raise ShapeError(f"cannot interpret {value!r} as a shape") from None
    return Shape(rows, cols)


def broadcast_shapes(shapes, context: str) -> Shape:
    """Common elementwise shape: scalars broadcast, everything else must agree."""
    out = SCALAR
    for s in shapes:
        if s.is_scalar():
            continue
        if out.is_scalar():
            out = s
        elif out != s:
            raise ShapeError(f"{context}: incompatible shapes {out} and {s}")
    return out
