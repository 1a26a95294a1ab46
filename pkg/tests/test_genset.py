import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quintic_cascade import lattice, resonance
from quintic_cascade.genset import (
    BuildBudgetError,
    DegenerateChordError,
    angle_constraints,
    build_combinatorial_model,
    build_for_target,
    check_norm_explosion,
    dilate_to_integers,
    perturb_to_nondegenerate,
    prototype_embedding,
    prototype_zero_counts,
    rational_circle_point,
    slope_candidates,
    sobolev_weights,
)
from quintic_cascade.lattice import StructuralError, pt, validate_structure


# -- combinatorial model ----------------------------------------------------

def test_model_smallest():
    m = build_combinatorial_model(2)
    assert m.n == 2
    assert len(m.families) == 1


def test_model_counts_n5():
    m = build_combinatorial_model(5)
    assert m.n == 16
    assert len(m.families) == (5 - 1) * 2 ** (5 - 2) == 32


def test_model_spouse_vs_sibling():
    # condition 3 is checked at construction; reaching here means it held
    for N in (3, 4, 5):
        build_combinatorial_model(N)


# -- prototype ----------------------------------------------------------------

def test_prototype_zero_counts_five_generations():
    assert prototype_zero_counts(build_combinatorial_model(5)) == [0, 8, 12, 14, 15]


def test_prototype_family_identities():
    proto = prototype_embedding(build_combinatorial_model(4))
    for fam in proto.families:
        assert lattice.family_identities_hold(proto.points, fam)


def test_prototype_is_rejected_structurally():
    proto = prototype_embedding(build_combinatorial_model(3))
    with pytest.raises(StructuralError):
        validate_structure(proto)


def test_prototype_weight_doubling():
    proto = prototype_embedding(build_combinatorial_model(6))
    w = sobolev_weights(proto, 2)
    for a, b in zip(w, w[1:]):
        assert Fraction(b) / Fraction(a) == 2  # 2^{s-1} with s = 2


# -- circle chords -------------------------------------------------------------

def test_rational_circle_point_axis_chord():
    c1, c2 = rational_circle_point(pt(0, 0), pt(2, 2), Fraction(0))
    assert (c1, c2) == (pt(2, 0), pt(0, 2))


def test_rational_circle_point_half_slope():
    c1, c2 = rational_circle_point(pt(0, 0), pt(2, 2), Fraction(1, 2))
    assert c1 == pt(Fraction(12, 5), Fraction(6, 5))
    assert c2 == pt(Fraction(-2, 5), Fraction(4, 5))
    assert c1.norm2 + c2.norm2 == 8


def test_rational_circle_point_diameter_rejected():
    with pytest.raises(DegenerateChordError):
        rational_circle_point(pt(0, 0), pt(2, 2), Fraction(1))


@given(st.integers(-9, 9), st.integers(1, 7))
@settings(max_examples=40, deadline=None)
def test_chord_identities_exact(num, den):
    t = Fraction(num, den)
    p1, p2 = pt(1, -2), pt(5, 4)
    try:
        c1, c2 = rational_circle_point(p1, p2, t)
    except DegenerateChordError:
        return
    assert c1 + c2 == p1 + p2
    assert c1.norm2 + c2.norm2 == p1.norm2 + p2.norm2


def test_slope_candidates_order():
    seq = list(slope_candidates(2))
    assert seq[0] == 0
    assert all(s.denominator <= 2 for s in seq)
    assert len(seq) == len(set(seq))


# -- angle constraints ---------------------------------------------------------

def test_angle_constraint_constancy_routing():
    p1, p2 = pt(0, 0), pt(2, 2)
    placed = [p1, p2, pt(5, 1)]
    cons = angle_constraints((p1, p2), placed, mu_support_cap=2)
    # A == B is always constant
    assert all(c.constant for c in cons if c.A == c.B)
    # mu = e_{p1}+e_{p2} with (A,B) = (-1,0): (A+B-1)center + q = 0
    special = [
        c for c in cons
        if (c.A, c.B) == (-1, 0) and c.mu.as_dict() == {0: 1, 1: 1}
    ]
    assert special and all(c.constant for c in special)
    # the family identity evaluates to exactly zero on the circle
    c1, c2 = rational_circle_point(p1, p2, Fraction(1, 3))
    for c in special:
        assert c.value(c1, c2) == 0


def test_angle_constraint_nonconstant_generic():
    p1, p2 = pt(0, 0), pt(2, 2)
    cons = angle_constraints((p1, p2), [p1, p2], mu_support_cap=1)
    live = [c for c in cons if not c.constant]
    assert live
    c1a, c2a = rational_circle_point(p1, p2, Fraction(0))
    c1b, c2b = rational_circle_point(p1, p2, Fraction(1, 2))
    moved = sum(1 for c in live if c.value(c1a, c2a) != c.value(c1b, c2b))
    assert moved > 0


# -- perturbed placement -------------------------------------------------------

def test_perturb_smallest_model():
    g = perturb_to_nondegenerate(build_combinatorial_model(2), seed=3)
    validate_structure(g)
    gi, _ = dilate_to_integers(g)
    assert resonance.check_nondegeneracy(gi).status == "nondegenerate"


def test_perturb_deterministic():
    m = build_combinatorial_model(3)
    a = perturb_to_nondegenerate(m, seed=7)
    b = perturb_to_nondegenerate(m, seed=7)
    assert lattice.dumps(a) == lattice.dumps(b)
    c = perturb_to_nondegenerate(m, seed=8)
    assert lattice.dumps(a) != lattice.dumps(c)


def test_full_pipeline_certificates(gset3):
    assert resonance.is_complete(gset3).ok
    assert resonance.check_nondegeneracy(gset3).status == "nondegenerate"
    for v in resonance.enumerate_resonant_vectors(gset3):
        assert resonance.classify_resonant_vector(v, gset3) in ("family", "CF")


# -- dilation ------------------------------------------------------------------

def test_dilate_identity_on_integers(gset3):
    out, m = dilate_to_integers(gset3)
    assert m == 1 and out.points == gset3.points


def test_dilate_min_norm(gset3):
    out, m = dilate_to_integers(gset3, min_norm=10**6)
    assert min(float(p.norm2) for p in out.points) >= (10**6) ** 2
    assert out.is_integral()


def test_dilate_preserves_explosion_ratio():
    proto = prototype_embedding(build_combinatorial_model(6))
    # dilating by 3 preserves the (exact) ratio
    scaled = lattice.GenerationSet(
        tuple(p.scale(3) for p in proto.points), proto.gen, proto.families, proto.N
    )
    _, r1 = check_norm_explosion(proto, 2)
    _, r2 = check_norm_explosion(scaled, 2)
    assert r1 == r2


# -- norm explosion ------------------------------------------------------------

def test_norm_explosion_prototype_n7():
    proto = prototype_embedding(build_combinatorial_model(7))
    holds, ratio = check_norm_explosion(proto, 2)
    assert holds
    assert ratio == 4  # J_{N-2}/J_3 = 2^{(s-1)(N-5)} on the prototype


def test_norm_explosion_requires_six_generations():
    proto = prototype_embedding(build_combinatorial_model(5))
    with pytest.raises(ValueError):
        check_norm_explosion(proto, 2)


def test_norm_explosion_noninteger_s():
    proto = prototype_embedding(build_combinatorial_model(7))
    holds, ratio = check_norm_explosion(proto, Fraction(3, 2))
    assert holds
    assert abs(float(ratio) - 2.0) < 1e-30  # 2^{(1/2) * 2}


def test_simplex_extremes_property():
    # sum x_i^{2s} on the unit sphere: max at a vertex, min at the barycenter
    rng = np.random.default_rng(0)
    s = 2
    for m in (2, 5, 9):
        x = rng.normal(size=(200, m))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        vals = (x ** (2 * s)).sum(axis=1)
        assert vals.max() <= 1.0 + 1e-12
        assert vals.min() >= m ** (1 - s) - 1e-12


def test_per_family_weight_ratio_bound(gset4):
    # children's H^s weight never exceeds 2^{s-1} times the parents'
    s = 2
    for fam in gset4.families:
        pts = gset4.points
        num = float(pts[fam.child1].norm2) ** s + float(pts[fam.child2].norm2) ** s
        den = float(pts[fam.parent1].norm2) ** s + float(pts[fam.parent2].norm2) ** s
        assert num <= 2 ** (s - 1) * den * (1 + 1e-12)


# -- build_for_target ----------------------------------------------------------

def test_build_for_target_small():
    # K/delta = 2, s = 2: the margin rule picks N = 8
    gset, report = build_for_target(K=2, delta=1, min_norm=10, s=2, seed=0)
    assert report.N == 8
    assert float(report.ratio) >= 4
    assert report.min_norm2 >= 100
    holds, _ = check_norm_explosion(gset, 2)
    assert holds
