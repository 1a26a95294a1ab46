from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quintic_cascade import genset, resonance
from quintic_cascade.lattice import Family, GenerationSet, IncompleteSetError, pt
from quintic_cascade.resonance import (
    CoefficientVector,
    check_nondegeneracy,
    classify_nd_witness,
    classify_resonant_vector,
    complete_quintuple,
    enumerate_resonant_vectors,
    family_rank_check,
    family_vectors,
    indicator,
    is_action_preserving,
    is_complete,
    is_resonance,
    verify_small_support_classification,
)

RECT = [pt(0, 0), pt(2, 2), pt(2, 0), pt(0, 2)]


def rect_set():
    return GenerationSet(tuple(RECT), (1, 1, 2, 2), (Family(0, 1, 2, 3, 1),), 2)


# -- sextuple / quintuple predicates ---------------------------------------

def test_is_resonance_trivial_identity():
    s = [pt(0, 0), pt(2, 2), pt(1, 1)] * 2
    assert is_resonance(s) == "trivial"


def test_is_resonance_trivial_permuted():
    assert is_resonance([pt(0, 0), pt(2, 2), pt(1, 1),
                         pt(1, 1), pt(0, 0), pt(2, 2)]) == "trivial"


def test_is_resonance_nontrivial():
    s = [pt(0, 0), pt(2, 2), pt(0, 0), pt(2, 0), pt(0, 2), pt(0, 0)]
    assert is_resonance(s) == "nontrivial"


def test_is_resonance_none():
    # momentum balances, kinetic sums 4 vs 2 do not
    s = [pt(2, 0), pt(0, 0), pt(0, 0), pt(1, 0), pt(1, 0), pt(0, 0)]
    assert is_resonance(s) == "none"


def test_is_resonance_momentum_ok_norms_ok_is_resonant():
    # the kinetic sums here are 2 = 2: a genuine nontrivial resonance
    s = [pt(0, 0), pt(1, 0), pt(0, 1), pt(0, 0), pt(0, 0), pt(1, 1)]
    assert is_resonance(s) == "nontrivial"


@given(st.tuples(st.integers(-20, 20), st.integers(-20, 20)))
def test_complete_quintuple_diagonal(k):
    p = pt(*k)
    assert complete_quintuple([p] * 5) == p


def test_complete_quintuple_examples():
    assert complete_quintuple([pt(2, 0), pt(0, 2), pt(0, 0), pt(0, 0), pt(0, 0)]) == pt(2, 2)
    assert complete_quintuple([pt(1, 0), pt(0, 1), pt(0, 0), pt(1, 1), pt(0, 0)]) == pt(0, 0)
    assert complete_quintuple([pt(2, 0), pt(0, 0), pt(0, 0), pt(1, 0), pt(1, 0)]) is None


def test_is_complete_singleton():
    assert is_complete([pt(3, 4)]).ok


def test_is_complete_rectangle():
    assert is_complete(RECT).ok


def test_is_complete_missing_vertex():
    rep = is_complete([pt(0, 0), pt(2, 2), pt(2, 0)])
    assert not rep.ok
    assert pt(0, 2) in rep.missing


def test_small_set_exact_vs_numpy_backends():
    # same verdict whether or not the int64 fast path is taken
    pts = RECT + [pt(7, -3), pt(-1, 5)]
    a = resonance._is_complete_exact(pts, True)
    b = resonance._is_complete_numpy(pts, True)
    assert a.ok == b.ok and set(a.missing) == set(b.missing)


def test_action_preserving_singleton():
    assert is_action_preserving([pt(5, 1)])


def test_action_preserving_rectangle_false():
    assert not is_action_preserving(RECT)


def test_action_preserving_requires_complete():
    with pytest.raises(IncompleteSetError):
        is_action_preserving([pt(0, 0), pt(2, 2), pt(2, 0)])


def test_single_generation_action_preserving(gset3):
    for i in range(1, 4):
        assert is_action_preserving(gset3.generation_points(i))


# -- coefficient vectors -----------------------------------------------------

def test_coefficient_vector_algebra():
    a = CoefficientVector({0: 1, 2: -1})
    b = CoefficientVector({2: 1, 3: 4})
    assert (a + b).as_dict() == {0: 1, 3: 4}
    assert (-a).as_dict() == {0: -1, 2: 1}
    assert a.l1() == 2 and a.total() == 0
    assert CoefficientVector({1: -2}).canonical_sign().as_dict() == {1: 2}
    assert CoefficientVector({0: 2, 1: -4}).multiple_of(
        CoefficientVector({0: 1, 1: -2})
    ) == 2
    assert CoefficientVector({0: 2, 1: -4}).multiple_of(
        CoefficientVector({0: 1, 1: -1})
    ) is None


def test_family_vectors_identities():
    fam = Family(0, 1, 2, 3, 1)
    lam, lam_p, lam_c = family_vectors(fam)
    assert lam == lam_p - lam_c
    assert lam.l1() == 4
    assert lam_p.l1() == 2 and lam_p.total() == 2
    assert resonance.is_resonant_vector(lam, RECT)


def test_enumerate_rectangle_only_family_vector():
    vecs = enumerate_resonant_vectors(RECT)
    lam = family_vectors(Family(0, 1, 2, 3, 1))[0].canonical_sign()
    assert vecs == [lam]


def test_enumerate_on_action_preserving_set_empty(gset3):
    pts = gset3.generation_points(2)
    assert enumerate_resonant_vectors(pts) == []


def test_enumerate_includes_cf(gset3):
    vecs = set(enumerate_resonant_vectors(gset3))
    cf = resonance.cf_vectors(gset3.families)
    assert cf  # families sharing members exist
    for v in cf:
        assert v in vecs


def test_classify_family_and_cf(gset3):
    counts = Counter(
        classify_resonant_vector(v, gset3) for v in enumerate_resonant_vectors(gset3)
    )
    assert counts["family"] == len(gset3.families) == 4
    assert counts["CF"] == 4
    assert counts["other"] == 0


def test_classify_other_without_family_table():
    from quintic_cascade.reduced import default_s2_configuration

    cfg = default_s2_configuration()
    bare = GenerationSet(tuple(cfg), (1,) * 6, (), 1)
    vecs = enumerate_resonant_vectors(bare)
    assert vecs and all(classify_resonant_vector(v, bare) == "other" for v in vecs)


def test_classify_rejects_nonresonant(gset3):
    with pytest.raises(ValueError):
        classify_resonant_vector(indicator(0), gset3)


# -- non-degeneracy ----------------------------------------------------------

def test_check_nondegeneracy_certificate(gset3):
    rep = check_nondegeneracy(gset3)
    assert rep.status == "nondegenerate"
    counts = Counter(case for _, case in rep.witnesses)
    m = len(gset3.points)          # 12
    nf = len(gset3.families)       # 4
    ncf = len(resonance.cf_vectors(gset3.families))  # 4
    assert counts["case1"] == m
    assert counts["case2"] == 4 * nf
    # +-lam^F + e_v drops to |lam|=3 for the four in-family choices of v
    assert counts["case3"] == 2 * nf * m - 4 * nf
    assert counts["case4"] == 6 * ncf
    assert counts["forbidden"] == 0


def test_case_assignments(gset3):
    fam = gset3.families[0]
    lam2 = CoefficientVector({fam.parent1: 1, fam.parent2: 1, fam.child1: -1})
    assert classify_nd_witness(lam2, gset3) == "case2"
    lam2c = CoefficientVector({fam.child1: 1, fam.child2: 1, fam.parent2: -1})
    assert classify_nd_witness(lam2c, gset3) == "case2"
    assert classify_nd_witness(indicator(5), gset3) == "case1"
    lam_f = family_vectors(fam)[0]
    other = 8 if 8 not in fam.members else 11
    lam3 = lam_f + indicator(other)
    assert classify_nd_witness(lam3, gset3) == "case3"
    # mixed-sign support inside one family is not an allowed shape
    bad = CoefficientVector({fam.parent1: 1, fam.child1: 1, fam.parent2: -1})
    assert classify_nd_witness(bad, gset3) == "forbidden"


def test_prototype_embedding_is_degenerate():
    from quintic_cascade.genset import build_combinatorial_model, prototype_embedding
    from quintic_cascade.lattice import StructuralError, validate_structure

    proto = prototype_embedding(build_combinatorial_model(3))
    with pytest.raises(StructuralError):
        validate_structure(proto)
    rep = check_nondegeneracy(proto, validate=False)
    assert rep.status == "degenerate"
    assert rep.forbidden


def test_nd_backends_agree(gset3):
    pts = list(gset3.points)
    a = {v.entries for v in resonance._nd_candidates_exact(pts)}
    b = {v.entries for v in resonance._nd_candidates_numpy(pts)}
    assert a == b


def test_verify_small_support(gset3):
    ok, witness = verify_small_support_classification(gset3)
    assert ok, witness


def test_small_support_multiples_and_chains(gset3):
    lam_f = [family_vectors(f)[0] for f in gset3.families]
    # 2*lam^F is recognized as a multiple of a family vector
    assert lam_f[0].scale(2).multiple_of(lam_f[0]) == 2
    # a three-family chain along child relations is supported on >= 8 elements
    chains = 0
    for a in range(len(lam_f)):
        for b in range(len(lam_f)):
            for c in range(len(lam_f)):
                if len({a, b, c}) != 3:
                    continue
                shared_ab = set(gset3.families[a].members) & set(gset3.families[b].members)
                shared_bc = set(gset3.families[b].members) & set(gset3.families[c].members)
                if shared_ab and shared_bc:
                    r = lam_f[a] + lam_f[b] + lam_f[c]
                    assert len(r.support) >= 8
                    chains += 1
    assert chains > 0


def test_family_rank(gset3):
    ok, rank = family_rank_check(gset3)
    assert ok and rank == 4


def test_rank_deficiency_detected():
    rows = [CoefficientVector({0: 1, 1: 1, 2: -1, 3: -1})] * 2
    assert resonance._rational_rank(rows, 4) == 1


# -- invariants --------------------------------------------------------------

def test_family_resonance_shape(gset3):
    fam = gset3.families[0]
    p = gset3.points
    for k in range(len(p)):
        sext = [p[fam.parent1], p[fam.parent2], p[k],
                p[fam.child1], p[fam.child2], p[k]]
        assert is_resonance(sext) == "nontrivial"


@st.composite
def small_point_sets(draw):
    m = draw(st.integers(2, 5))
    pts = draw(
        st.lists(
            st.tuples(st.integers(-6, 6), st.integers(-6, 6)),
            min_size=m, max_size=m, unique=True,
        )
    )
    return [pt(x, y) for x, y in pts]


@given(small_point_sets(), st.integers(1, 5))
@settings(max_examples=25, deadline=None)
def test_completeness_dilation_invariant(pts, mfac):
    a = is_complete(pts).ok
    b = is_complete([p.scale(mfac) for p in pts]).ok
    assert a == b


@given(small_point_sets())
@settings(max_examples=25, deadline=None)
def test_completeness_isometry_invariant(pts):
    a = is_complete(pts).ok
    rot = [pt(-p.y, p.x) for p in pts]
    refl = [pt(p.y, p.x) for p in pts]
    assert is_complete(rot).ok == a
    assert is_complete(refl).ok == a


@given(small_point_sets())
@settings(max_examples=20, deadline=None)
def test_nd_candidate_backends_property(pts):
    a = {v.entries for v in resonance._nd_candidates_exact(pts)}
    b = {v.entries for v in resonance._nd_candidates_numpy(pts)}
    assert a == b
