from fractions import Fraction

import pytest

from quintic_cascade import lattice
from quintic_cascade.lattice import Family, GenerationSet, pt


def test_norm2_exact_rational():
    p = pt(Fraction(12, 5), Fraction(6, 5))
    assert p.norm2 == Fraction(36, 5)
    assert pt(3, 4).norm2 == 25


def test_fraction_normalization_and_order():
    assert pt(Fraction(4, 2), 1) == pt(2, 1)
    assert pt(0, 1) < pt(1, 0)
    assert pt(1, -1) < pt(1, 0)


def test_point_arithmetic():
    a, b = pt(1, 2), pt(3, -1)
    assert a + b == pt(4, 1)
    assert a - b == pt(-2, 3)
    assert a.scale(3) == pt(3, 6)
    assert a.dot(b) == 1


def _tiny_set():
    points = (pt(0, 0), pt(2, 2), pt(2, 0), pt(0, 2))
    return GenerationSet(points, (1, 1, 2, 2), (Family(0, 1, 2, 3, 1),), 2)


def test_serialization_roundtrip(tmp_path):
    g = _tiny_set()
    path = tmp_path / "set.txt"
    lattice.save(g, str(path))
    back = lattice.load(str(path))
    assert back == g


def test_serialization_rationals():
    points = (pt(0, 0), pt(2, 2), pt(Fraction(12, 5), Fraction(6, 5)),
              pt(Fraction(-2, 5), Fraction(4, 5)))
    g = GenerationSet(points, (1, 1, 2, 2), (Family(0, 1, 2, 3, 1),), 2)
    assert lattice.loads(lattice.dumps(g)) == g
    assert "12/5" in lattice.dumps(g)


def test_validate_structure_accepts_rectangle():
    lattice.validate_structure(_tiny_set())


def test_validate_structure_rejects_broken_identity():
    points = (pt(0, 0), pt(2, 2), pt(2, 0), pt(1, 2))
    g = GenerationSet(points, (1, 1, 2, 2), (Family(0, 1, 2, 3, 1),), 2)
    with pytest.raises(lattice.StructuralError):
        lattice.validate_structure(g)


def test_validate_structure_rejects_degenerate_rectangle():
    points = (pt(0, 0), pt(2, 2), pt(0, 0), pt(2, 2))
    g = GenerationSet(points, (1, 1, 2, 2), (Family(0, 1, 2, 3, 1),), 2)
    with pytest.raises(lattice.StructuralError):
        lattice.validate_structure(g)
