"""Symbolic resonant Hamiltonians with exact rational coefficients.

A monomial is stored as a sorted tuple of (variable, plain-degree,
conjugate-degree) entries; the Hamiltonian is a dict from monomial to
Fraction.  The restricted Hamiltonian of a complete set is assembled from
ordered resonant sextuples with the 1/3 prefactor, i.e. each unordered pair
of index triples contributes (#orderings of T1)(#orderings of T2)/3.

Symbolic equality is dict equality after canonicalization, which is what
the identity checks against the structural formulas rely on.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .lattice import Family, GenerationSet, IncompleteSetError, LatticePoint
from . import resonance

Monomial = tuple[tuple[int, int, int], ...]  # ((var, p, q), ...) sorted by var


def _mono(plain: Iterable[int], conj: Iterable[int]) -> Monomial:
    acc: dict[int, list[int]] = {}
    for v in plain:
        acc.setdefault(v, [0, 0])[0] += 1
    for v in conj:
        acc.setdefault(v, [0, 0])[1] += 1
    return tuple((v, p, q) for v, (p, q) in sorted(acc.items()) if (p, q) != (0, 0))


class PolynomialHamiltonian:
    """Exact polynomial in variables b_k and their conjugates."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, Fraction]] = None):
        self.terms: dict[Monomial, Fraction] = {}
        if terms:
            for k, c in terms.items():
                if c:
                    self.terms[k] = Fraction(c)

    def add_monomial(self, plain: Iterable[int], conj: Iterable[int], coeff) -> None:
        key = _mono(plain, conj)
        c = self.terms.get(key, Fraction(0)) + Fraction(coeff)
        if c:
            self.terms[key] = c
        else:
            self.terms.pop(key, None)

    # -- algebra ----------------------------------------------------------
    def __add__(self, other: "PolynomialHamiltonian") -> "PolynomialHamiltonian":
        out = PolynomialHamiltonian(self.terms)
        for k, c in other.terms.items():
            cc = out.terms.get(k, Fraction(0)) + c
            if cc:
                out.terms[k] = cc
            else:
                out.terms.pop(k, None)
        return out

    def __sub__(self, other: "PolynomialHamiltonian") -> "PolynomialHamiltonian":
        return self + other.scale(-1)

    def scale(self, factor) -> "PolynomialHamiltonian":
        f = Fraction(factor)
        return PolynomialHamiltonian({k: c * f for k, c in self.terms.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, PolynomialHamiltonian) and self.terms == other.terms

    def __hash__(self):  # polynomials are mutable in spirit; disable hashing
        raise TypeError("unhashable")

    def is_zero(self) -> bool:
        return not self.terms

    def conjugated(self) -> "PolynomialHamiltonian":
        return PolynomialHamiltonian(
            {tuple((v, q, p) for v, p, q in k): c for k, c in self.terms.items()}
        )

    def is_real(self) -> bool:
        return self == self.conjugated()

    def is_gauge_invariant(self) -> bool:
        return all(sum(p for _, p, _ in k) == sum(q for _, _, q in k) for k in self.terms)

    def variables(self) -> list[int]:
        return sorted({v for k in self.terms for v, _, _ in k})

    # -- substitution and evaluation --------------------------------------
    def substitute(self, var_map: Mapping[int, int]) -> "PolynomialHamiltonian":
        """Identify variables (e.g. collapse a set onto generation modes)."""
        out = PolynomialHamiltonian()
        for key, c in self.terms.items():
            plain: list[int] = []
            conj: list[int] = []
            for v, p, q in key:
                w = var_map.get(v, v)
                plain += [w] * p
                conj += [w] * q
            out.add_monomial(plain, conj, c)
        return out

    def evaluate(self, b: Sequence[complex]) -> complex:
        tot = 0j
        for key, c in self.terms.items():
            m = complex(c)
            for v, p, q in key:
                if p:
                    m *= b[v] ** p
                if q:
                    m *= b[v].conjugate() ** q
            tot += m
        return tot

    def evaluate_exact(self, b: Sequence[tuple[Fraction, Fraction]]) -> tuple[Fraction, Fraction]:
        """Evaluate with exact rational complex arithmetic; returns (re, im)."""

        def cmul(a, b):
            return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])

        tot = (Fraction(0), Fraction(0))
        for key, c in self.terms.items():
            m = (Fraction(c), Fraction(0))
            for v, p, q in key:
                z = (Fraction(b[v][0]), Fraction(b[v][1]))
                zb = (z[0], -z[1])
                for _ in range(p):
                    m = cmul(m, z)
                for _ in range(q):
                    m = cmul(m, zb)
            tot = (tot[0] + m[0], tot[1] + m[1])
        return tot

    def gradient_wrt_conj(self, var: int) -> "PolynomialHamiltonian":
        out = PolynomialHamiltonian()
        for key, c in self.terms.items():
            for i, (v, p, q) in enumerate(key):
                if v == var and q:
                    rest = list(key)
                    rest[i] = (v, p, q - 1)
                    newkey = tuple(e for e in rest if (e[1], e[2]) != (0, 0))
                    cc = out.terms.get(newkey, Fraction(0)) + c * q
                    if cc:
                        out.terms[newkey] = cc
                    else:
                        out.terms.pop(newkey, None)
        return out

    def poisson_with_action(self, weights: Sequence) -> "PolynomialHamiltonian":
        """Bracket with G = sum w_k |b_k|^2, up to a global factor i.

        For the flow b' = i dH/d(conj b), dG/dt = i * sum_k w_k (q_k - p_k)
        per monomial; the returned polynomial is zero iff G commutes with H.
        """
        out = PolynomialHamiltonian()
        for key, c in self.terms.items():
            f = sum(Fraction(weights[v]) * (q - p) for v, p, q in key)
            if f:
                out.terms[key] = c * f
        return out

    def to_text(self) -> str:
        """`coeff : var^p var~^q ...` lines, canonical order."""
        lines = []
        for key in sorted(self.terms):
            parts = []
            for v, p, q in key:
                if p:
                    parts.append(f"b{v}^{p}")
                if q:
                    parts.append(f"b~{v}^{q}")
            lines.append(f"{self.terms[key]} : " + " ".join(parts))
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return f"PolynomialHamiltonian({len(self.terms)} monomials)"


def _orderings(t: tuple[int, ...]) -> int:
    counts: dict[int, int] = {}
    for x in t:
        counts[x] = counts.get(x, 0) + 1
    n = math.factorial(len(t))
    for c in counts.values():
        n //= math.factorial(c)
    return n


def restricted_hamiltonian(S, check_complete: bool = True) -> PolynomialHamiltonian:
    """(1/3) sum over ordered resonant sextuples inside S.

    Raises IncompleteSetError for incomplete sets: the restriction of the
    resonant system to S is only self-contained when S is complete.
    """
    points = S.points if isinstance(S, GenerationSet) else tuple(S)
    if check_complete:
        rep = resonance.is_complete(points, collect_missing=False)
        if not rep.ok:
            raise IncompleteSetError("restricted Hamiltonian needs a complete set")
    H = PolynomialHamiltonian()
    for bucket in resonance.triple_buckets(points).values():
        for t1 in bucket:
            w1 = _orderings(t1)
            for t2 in bucket:
                H.add_monomial(t1, t2, Fraction(w1 * _orderings(t2), 3))
    return H


def action_only_hamiltonian(m: int) -> PolynomialHamiltonian:
    """(1/3)(sum |b|^6 + 9 sum_{j!=k} |b_j|^4 |b_k|^2 + 36 sum_{j<k<l} ...),
    the restriction to any complete action-preserving set of m points."""
    H = PolynomialHamiltonian()
    for j in range(m):
        H.add_monomial([j] * 3, [j] * 3, Fraction(1, 3))
    for j in range(m):
        for k in range(m):
            if j != k:
                H.add_monomial([j, j, k], [j, j, k], Fraction(9, 3))
    for tri in itertools.combinations(range(m), 3):
        H.add_monomial(tri, tri, Fraction(36, 3))
    return H


def _relative_maps(gset: GenerationSet):
    spouse: dict[int, int] = {}
    children: dict[int, tuple[int, int]] = {}
    parents: dict[int, tuple[int, int]] = {}
    sibling: dict[int, int] = {}
    own_family: dict[int, Family] = {}
    for fam in gset.families:
        spouse[fam.parent1] = fam.parent2
        spouse[fam.parent2] = fam.parent1
        children[fam.parent1] = (fam.child1, fam.child2)
        children[fam.parent2] = (fam.child1, fam.child2)
        own_family[fam.parent1] = fam
        own_family[fam.parent2] = fam
        parents[fam.child1] = (fam.parent1, fam.parent2)
        parents[fam.child2] = (fam.parent1, fam.parent2)
        sibling[fam.child1] = fam.child2
        sibling[fam.child2] = fam.child1
    return spouse, children, parents, sibling, own_family


def hamish_polynomial(gset: GenerationSet) -> PolynomialHamiltonian:
    """Structural form of the restricted Hamiltonian of a non-degenerate
    generation set: action part + family terms (prefactor 3 with the 2/1
    spectator weights) + couple-of-family terms (prefactor 12)."""
    m = len(gset.points)
    H = action_only_hamiltonian(m)
    spouse, children, parents, sibling, own_family = _relative_maps(gset)
    for j in range(m):
        if gset.gen[j] <= gset.N - 1:
            sp = spouse[j]
            c1, c2 = children[j]
            fam_members = set(own_family[j].members)
            for k in range(m):
                w = 1 if k in fam_members else 2
                H.add_monomial([j, sp, k], [c1, c2, k], Fraction(3 * w))
                H.add_monomial([c1, c2, k], [j, sp, k], Fraction(3 * w))
    for j in range(m):
        if 2 <= gset.gen[j] <= gset.N - 1:
            pa1, pa2 = parents[j]
            sp = spouse[j]
            sib = sibling[j]
            c1, c2 = children[j]
            H.add_monomial([pa1, pa2, sp], [sib, c1, c2], Fraction(12))
            H.add_monomial([sib, c1, c2], [pa1, pa2, sp], Fraction(12))
    return H


def mass_cubed_polynomial(nvars: int) -> PolynomialHamiltonian:
    """(sum_k |b_k|^2)^3 expanded exactly."""
    out = PolynomialHamiltonian()
    for t in itertools.combinations_with_replacement(range(nvars), 3):
        out.add_monomial(t, t, _orderings(t))
    return out


def diagonal_restriction(H: PolynomialHamiltonian, gen_of: Sequence[int], n: int
                         ) -> PolynomialHamiltonian:
    """Collapse beta_k -> b_{i} for k in generation i, return 3 H|_D / n
    minus the pure-mass term 6 n^2 J^3.

    Dropping the mass-cubed term (a function of the Casimir J alone, which
    only generates a global phase rotation) is what aligns the result with
    the closed-form toy Hamiltonian.
    """
    var_map = {k: g - 1 for k, g in enumerate(gen_of)}
    collapsed = H.substitute(var_map).scale(Fraction(3, n))
    N = max(gen_of)
    return collapsed - mass_cubed_polynomial(N).scale(6 * n * n)


def hacca_polynomial(N: int, n: int) -> PolynomialHamiltonian:
    """Direct transcription of the toy-model Hamiltonian (times 3):

    3h = 4 sum |b|^6 - 9n sum_h |b_h|^2 [sum |b_k|^4 - 2 sum pair_k]
         + 18 sum (-|b_k|^2 - |b_{k+1}|^2) pair_k
         + 36 sum |b_k|^2 skip-pair_k,
    pair_k = b_k^2 conj(b_{k+1})^2 + c.c.
    """
    H = PolynomialHamiltonian()
    for k in range(N):
        H.add_monomial([k] * 3, [k] * 3, 4)
    for h in range(N):
        for k in range(N):
            H.add_monomial([h, k, k], [h, k, k], -9 * n)
        for k in range(N - 1):
            H.add_monomial([h, k, k], [h, k + 1, k + 1], 18 * n)
            H.add_monomial([h, k + 1, k + 1], [h, k, k], 18 * n)
    for k in range(N - 1):
        for m in (k, k + 1):
            H.add_monomial([m, k, k], [m, k + 1, k + 1], -18)
            H.add_monomial([m, k + 1, k + 1], [m, k, k], -18)
    for k in range(1, N - 1):
        H.add_monomial([k, k - 1, k - 1], [k, k + 1, k + 1], 36)
        H.add_monomial([k, k + 1, k + 1], [k, k - 1, k - 1], 36)
    return H


def two_generation_polynomial(n: int) -> PolynomialHamiltonian:
    """3 h_2g: the toy Hamiltonian restricted to two adjacent modes (0, 1)."""
    return hacca_polynomial(2, n)


# ---------------------------------------------------------------------------
# action-angle (polar) form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolarForm:
    """sum over (I-exponents, mu) of coeff * prod I^e * cos(mu . theta);
    mu = 0 rows are the action-only part.  Exponents are Fractions (half
    integers appear for odd-degree amplitude factors)."""

    terms: tuple[tuple[tuple[Fraction, ...], tuple[int, ...], Fraction], ...]

    def as_dict(self) -> dict[tuple[tuple[Fraction, ...], tuple[int, ...]], Fraction]:
        return {(e, mu): c for e, mu, c in self.terms}

    def evaluate(self, actions: Sequence[float], angles: Sequence[float]) -> float:
        tot = 0.0
        for exps, mu, c in self.terms:
            m = float(c)
            for a, e in zip(actions, exps):
                m *= a ** float(e)
            ph = sum(mi * th for mi, th in zip(mu, angles))
            tot += m * math.cos(ph)
        return tot


def polar_form(H: PolynomialHamiltonian, nvars: Optional[int] = None) -> PolarForm:
    """Rewrite a gauge-invariant real polynomial in action-angle variables."""
    if not H.is_gauge_invariant():
        raise ValueError("polar form needs a gauge-invariant Hamiltonian")
    if not H.is_real():
        raise ValueError("polar form needs a real Hamiltonian")
    if nvars is None:
        nvars = (max(H.variables()) + 1) if H.terms else 0
    acc: dict[tuple[tuple[Fraction, ...], tuple[int, ...]], Fraction] = defaultdict(Fraction)
    for key, c in H.terms.items():
        exps = [Fraction(0)] * nvars
        mu = [0] * nvars
        for v, p, q in key:
            exps[v] = Fraction(p + q, 2)
            mu[v] = p - q
        first = next((x for x in mu if x), 0)
        if first < 0:
            mu = [-x for x in mu]
        acc[(tuple(exps), tuple(mu))] += c
    terms = tuple(
        sorted((e, mu, c) for (e, mu), c in acc.items() if c)
    )
    return PolarForm(terms)


def appendix_display_s2() -> PolarForm:
    """The two-variable reduced Hamiltonian displayed for the six-point
    comparison system: 31 (I1+I2)^3 - 66 I1 I2 (I1+I2)
    + 24 I1^{3/2} I2^{3/2} cos(3(th1-th2))."""
    acc: dict[tuple[tuple[Fraction, ...], tuple[int, ...]], Fraction] = defaultdict(Fraction)
    for a in range(4):  # (I1+I2)^3
        acc[((Fraction(a), Fraction(3 - a)), (0, 0))] += 31 * math.comb(3, a)
    for e in ((2, 1), (1, 2)):  # -66 I1 I2 (I1+I2)
        acc[((Fraction(e[0]), Fraction(e[1])), (0, 0))] += -66
    acc[((Fraction(3, 2), Fraction(3, 2)), (3, -3))] += 24
    return PolarForm(tuple(sorted((e, mu, c) for (e, mu), c in acc.items() if c)))


def frakS3_constraint(k1: LatticePoint, k2: LatticePoint, k3: LatticePoint,
                      k4: LatticePoint) -> bool:
    """k1 + 2k2 - 2k3 - k4 = 0 with the matching squared-norm relation."""
    mom_ok = (
        k1.x + 2 * k2.x - 2 * k3.x - k4.x == 0
        and k1.y + 2 * k2.y - 2 * k3.y - k4.y == 0
    )
    return mom_ok and k1.norm2 + 2 * k2.norm2 - 2 * k3.norm2 - k4.norm2 == 0
