"""Exact lattice-point arithmetic and the combinatorial containers.

Everything in this module is exact: coordinates are ints or Fractions,
squared norms are computed with integer/rational arithmetic, and no float
ever enters a predicate.  Points are ordered lexicographically by (x, y);
that fixed total order is used wherever an arbitrary-but-fixed ordering of
frequencies is required.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence, Union

Coord = Union[int, Fraction]


class LatticePoint(NamedTuple):
    """Point of Z^2 (or Q^2 during construction), compared lexicographically."""

    x: Coord
    y: Coord

    @property
    def norm2(self) -> Coord:
        return self.x * self.x + self.y * self.y

    def __add__(self, other: "LatticePoint") -> "LatticePoint":  # type: ignore[override]
        return LatticePoint(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "LatticePoint") -> "LatticePoint":
        return LatticePoint(self.x - other.x, self.y - other.y)

    def scale(self, m: Coord) -> "LatticePoint":
        return LatticePoint(self.x * m, self.y * m)

    def dot(self, other: "LatticePoint") -> Coord:
        return self.x * other.x + self.y * other.y

    def is_integral(self) -> bool:
        return isinstance(self.x, int) and isinstance(self.y, int)


def pt(x: Coord, y: Coord) -> LatticePoint:
    """Normalize Fractions with denominator 1 down to ints."""
    if isinstance(x, Fraction) and x.denominator == 1:
        x = int(x)
    if isinstance(y, Fraction) and y.denominator == 1:
        y = int(y)
    return LatticePoint(x, y)


ZERO = pt(0, 0)


class Family(NamedTuple):
    """One procreation rectangle: indices into the point list of a set.

    parent1, parent2 belong to generation `age`, child1, child2 to
    generation `age + 1`.
    """

    parent1: int
    parent2: int
    child1: int
    child2: int
    age: int

    @property
    def members(self) -> tuple[int, int, int, int]:
        return (self.parent1, self.parent2, self.child1, self.child2)


class StructuralError(ValueError):
    """A set failed a structural (non-spectral) validity condition."""


class IncompleteSetError(ValueError):
    """An operation required a complete set and the input is not complete."""


def family_identities_hold(points: Sequence[LatticePoint], fam: Family) -> bool:
    """Exact check of the two rectangle identities for one family."""
    v1, v2 = points[fam.parent1], points[fam.parent2]
    v3, v4 = points[fam.child1], points[fam.child2]
    return (v1 + v2 == v3 + v4) and (v1.norm2 + v2.norm2 == v3.norm2 + v4.norm2)


def family_is_nondegenerate_rectangle(points: Sequence[LatticePoint], fam: Family) -> bool:
    """v1 != v2 and the children are not copies of the parents."""
    v1, v2 = points[fam.parent1], points[fam.parent2]
    v3 = points[fam.child1]
    return v1 != v2 and v3 not in (v1, v2)


@dataclass(frozen=True)
class GenerationSet:
    """N generations of lattice points with their family table.

    points[i] belongs to generation gen[i] (1-based).  Families reference
    point indices.  The container makes no validity promise by itself; use
    :func:`validate_structure` / resonance-level certificates.
    """

    points: tuple[LatticePoint, ...]
    gen: tuple[int, ...]
    families: tuple[Family, ...]
    N: int

    def __post_init__(self) -> None:
        if len(self.points) != len(self.gen):
            raise StructuralError("points and generation labels differ in length")

    @property
    def n(self) -> int:
        """Points per generation (generations are equally sized)."""
        return len(self.points) // self.N

    def generation_indices(self, i: int) -> list[int]:
        return [k for k, g in enumerate(self.gen) if g == i]

    def generation_points(self, i: int) -> list[LatticePoint]:
        return [self.points[k] for k, g in enumerate(self.gen) if g == i]

    def is_integral(self) -> bool:
        return all(p.is_integral() for p in self.points)

    def min_norm2(self) -> Coord:
        return min(p.norm2 for p in self.points)


def validate_structure(gset: GenerationSet) -> None:
    """Check Definition-level generation-set structure, raising StructuralError.

    Conditions: correct generation sizes, every non-terminal point is parent
    in exactly one family of its age, every non-initial point is child in
    exactly one family of the previous age, spouse != sibling in middle
    generations, exact rectangle identities, and non-degenerate rectangles.
    """
    N = gset.N
    sizes = [len(gset.generation_indices(i)) for i in range(1, N + 1)]
    if len(set(sizes)) != 1:
        raise StructuralError(f"unequal generation sizes {sizes}")

    parent_of: dict[int, list[Family]] = {}
    child_of: dict[int, list[Family]] = {}
    for fam in gset.families:
        if not (1 <= fam.age <= N - 1):
            raise StructuralError(f"family age {fam.age} out of range")
        for p in (fam.parent1, fam.parent2):
            if gset.gen[p] != fam.age:
                raise StructuralError(f"parent {p} not in generation {fam.age}")
            parent_of.setdefault(p, []).append(fam)
        for c in (fam.child1, fam.child2):
            if gset.gen[c] != fam.age + 1:
                raise StructuralError(f"child {c} not in generation {fam.age + 1}")
            child_of.setdefault(c, []).append(fam)
        if not family_identities_hold(gset.points, fam):
            raise StructuralError(f"family {fam} violates the rectangle identities")
        if not family_is_nondegenerate_rectangle(gset.points, fam):
            raise StructuralError(f"family {fam} is a degenerate rectangle")

    for k, g in enumerate(gset.gen):
        if g <= N - 1 and len(parent_of.get(k, [])) != 1:
            raise StructuralError(f"point {k} is parent in {len(parent_of.get(k, []))} families")
        if g >= 2 and len(child_of.get(k, [])) != 1:
            raise StructuralError(f"point {k} is child in {len(child_of.get(k, []))} families")

    # spouse != sibling for middle generations
    for k, g in enumerate(gset.gen):
        if 2 <= g <= N - 1:
            fam_up = parent_of[k][0]
            fam_down = child_of[k][0]
            spouse = fam_up.parent2 if fam_up.parent1 == k else fam_up.parent1
            sibling = fam_down.child2 if fam_down.child1 == k else fam_down.child1
            if spouse == sibling:
                raise StructuralError(f"point {k}: spouse equals sibling")

    if len(set(gset.points)) != len(gset.points):
        raise StructuralError("coincident points")


# ---------------------------------------------------------------------------
# plain-text serialization
#
#   N n
#   gen_index x y          (one line per point; rationals printed as p/q)
#   age i1 i2 i3 i4        (one line per family; indices into point list)
# ---------------------------------------------------------------------------

def _fmt_coord(c: Coord) -> str:
    if isinstance(c, Fraction) and c.denominator != 1:
        return f"{c.numerator}/{c.denominator}"
    return str(int(c))


def _parse_coord(s: str) -> Coord:
    if "/" in s:
        num, den = s.split("/")
        return Fraction(int(num), int(den))
    return int(s)


def dumps(gset: GenerationSet) -> str:
    lines = [f"{gset.N} {gset.n}"]
    for p, g in zip(gset.points, gset.gen):
        lines.append(f"{g} {_fmt_coord(p.x)} {_fmt_coord(p.y)}")
    for fam in gset.families:
        lines.append(f"{fam.age} {fam.parent1} {fam.parent2} {fam.child1} {fam.child2}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> GenerationSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    N, n = (int(tok) for tok in lines[0].split())
    npoints = N * n
    points: list[LatticePoint] = []
    gens: list[int] = []
    for ln in lines[1 : 1 + npoints]:
        g, xs, ys = ln.split()
        gens.append(int(g))
        points.append(pt(_parse_coord(xs), _parse_coord(ys)))
    families: list[Family] = []
    for ln in lines[1 + npoints :]:
        age, i1, i2, i3, i4 = (int(tok) for tok in ln.split())
        families.append(Family(i1, i2, i3, i4, age))
    return GenerationSet(tuple(points), tuple(gens), tuple(families), N)


def save(gset: GenerationSet, path: str) -> None:
    import os
    import tempfile

    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".genset-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(dumps(gset))
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def load(path: str) -> GenerationSet:
    with open(path) as fh:
        return loads(fh.read())
