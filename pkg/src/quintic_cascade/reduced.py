"""Comparison systems without full energy transfer.

Two reduced models are exposed: the six-point coupling collapsed to two
complex modes, and the (1,2,2,1)-weighted four-point coupling.  Both are
integrated in complex mode coordinates z = sqrt(I) e^{i theta}, which keeps
the vector field polynomial and avoids the action-angle pole at I = 0.

For the six-point system two variants exist: `display` is the two-degree
Hamiltonian exactly as printed in the source appendix (31, -66, 24), while
`derived` rebuilds it from an explicit lattice configuration through the
generic restricted-Hamiltonian machinery.  Their action parts differ (the
printout drops the mixed action triples; see the test suite), but both
refuse to move mass across the gap: that is the point of the scan.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .lattice import LatticePoint, pt
from . import hamiltonian as ham
from . import resonance
from . import toy


@dataclass
class ReducedSystem:
    name: str
    nmodes: int
    hamiltonian: Callable[[np.ndarray], float]
    field: Callable[[np.ndarray], np.ndarray]
    make_initial: Callable[[float, float], np.ndarray]
    I1_of: Callable[[np.ndarray], float]
    angular_period: float


def _integrate_system(system: ReducedSystem, z0: np.ndarray, T: float,
                      rtol: float = 1e-10, atol: float = 1e-12,
                      samples: int = 400):
    m = system.nmodes

    def rhs(t, y):
        z = y[:m] + 1j * y[m:]
        f = system.field(z)
        return np.concatenate([f.real, f.imag])

    ts = np.linspace(0, T, samples)
    sol = solve_ivp(rhs, (0, T), np.concatenate([z0.real, z0.imag]),
                    method="DOP853", rtol=rtol, atol=atol, t_eval=ts)
    if not sol.success:
        raise RuntimeError(f"reduced-system integration failed: {sol.message}")
    return sol.t, (sol.y[:m] + 1j * sol.y[m:]).T


# ---------------------------------------------------------------------------
# six-point system
# ---------------------------------------------------------------------------

def find_s2_configuration(box: int = 3) -> tuple[LatticePoint, ...]:
    """Smallest-box six distinct points splitting into two triples with equal
    momentum and kinetic sum, whose set is complete with exactly that one
    resonance class."""
    pts = [pt(x, y) for x in range(-box, box + 1) for y in range(-box, box + 1)]
    buckets: dict[tuple, list[tuple[int, ...]]] = {}
    for tri in itertools.combinations(range(len(pts)), 3):
        key = (
            sum(pts[i].x for i in tri),
            sum(pts[i].y for i in tri),
            sum(pts[i].norm2 for i in tri),
        )
        buckets.setdefault(key, []).append(tri)
    for key in sorted(buckets):
        group = buckets[key]
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                ia, ib = set(group[a]), set(group[b])
                if ia & ib:
                    continue
                combo = tuple(pts[i] for i in group[a]) + tuple(pts[i] for i in group[b])
                S = list(combo)
                if len(set(S)) != 6:
                    continue
                if not resonance.is_complete(S, collect_missing=False).ok:
                    continue
                res = [
                    lam
                    for lam in resonance.enumerate_resonant_vectors(S)
                    if lam.l1() == 6
                ]
                if len(res) == 1 and resonance.enumerate_resonant_vectors(S) == res:
                    return combo
    raise RuntimeError("no six-point configuration found in the box")


_DEFAULT_S2: Optional[tuple[LatticePoint, ...]] = None


def default_s2_configuration() -> tuple[LatticePoint, ...]:
    global _DEFAULT_S2
    if _DEFAULT_S2 is None:
        _DEFAULT_S2 = find_s2_configuration()
    return _DEFAULT_S2


def s2_reduced_polynomial(config: Optional[Sequence[LatticePoint]] = None
                          ) -> ham.PolynomialHamiltonian:
    """Restricted Hamiltonian collapsed onto the two locked triples."""
    if config is None:
        config = default_s2_configuration()
    H6 = ham.restricted_hamiltonian(config)
    return H6.substitute({0: 0, 1: 0, 2: 0, 3: 1, 4: 1, 5: 1})


def frakS2_system(source: str = "display") -> ReducedSystem:
    """The two-mode six-point comparison system.

    source='display': H = 31 J^3 - 66 I1 I2 J + 24 (I1 I2)^{3/2} cos(3 dth),
    integrated as H(z1, z2) with the symplectic gradient.
    source='derived': the same reduction computed from an explicit lattice
    configuration (per-mode effective Hamiltonian, i.e. divided by the
    group size 3).
    """
    if source == "display":

        def H(z: np.ndarray) -> float:
            I1, I2 = abs(z[0]) ** 2, abs(z[1]) ** 2
            J = I1 + I2
            return float(31 * J**3 - 66 * I1 * I2 * J
                         + 24 * (z[0] ** 3 * np.conj(z[1]) ** 3).real)

        def field(z: np.ndarray) -> np.ndarray:
            z1, z2 = z
            I1, I2 = abs(z1) ** 2, abs(z2) ** 2
            J = I1 + I2
            g1 = 93 * J**2 * z1 - 66 * z1 * I2 * (J + I1) + 36 * np.conj(z1) ** 2 * z2**3
            g2 = 93 * J**2 * z2 - 66 * z2 * I1 * (J + I2) + 36 * np.conj(z2) ** 2 * z1**3
            return 1j * np.array([g1, g2])

        name = "frakS2-display"
    elif source == "derived":
        poly = s2_reduced_polynomial().scale(Fraction(1, 3))
        g0 = poly.gradient_wrt_conj(0)
        g1 = poly.gradient_wrt_conj(1)

        def H(z: np.ndarray) -> float:
            return float(poly.evaluate(list(z)).real)

        def field(z: np.ndarray) -> np.ndarray:
            zz = list(z)
            return 1j * np.array([g0.evaluate(zz), g1.evaluate(zz)])

        name = "frakS2-derived"
    else:
        raise ValueError("source must be 'display' or 'derived'")

    def make_initial(I1: float, phase: float) -> np.ndarray:
        return np.array(
            [math.sqrt(I1) * np.exp(1j * phase), math.sqrt(1.0 - I1)], dtype=complex
        )

    return ReducedSystem(
        name=name,
        nmodes=2,
        hamiltonian=H,
        field=field,
        make_initial=make_initial,
        I1_of=lambda z: float(abs(z[0]) ** 2),
        angular_period=2 * math.pi / 3,
    )


# ---------------------------------------------------------------------------
# four-point (1,2,2,1) system
# ---------------------------------------------------------------------------

def find_s3_quadruple(box: int = 10) -> tuple[LatticePoint, ...]:
    """Distinct quadruple with k1 + 2k2 - 2k3 - k4 = 0 and matching norms,
    whose four-point set is complete."""
    for x1 in range(0, box + 1):
        for x2 in range(-box, box + 1):
            for x3 in range(-box, box + 1):
                x4 = x1 + 2 * x2 - 2 * x3
                if abs(x4) > box:
                    continue
                q = (pt(x1, 0), pt(x2, 0), pt(x3, 0), pt(x4, 0))
                if len({*q}) != 4:
                    continue
                if not ham.frakS3_constraint(*q):
                    continue
                if resonance.is_complete(list(q), collect_missing=False).ok:
                    return q
    raise RuntimeError("no quadruple found")


_DEFAULT_S3: Optional[tuple[LatticePoint, ...]] = None


def default_s3_quadruple() -> tuple[LatticePoint, ...]:
    global _DEFAULT_S3
    if _DEFAULT_S3 is None:
        _DEFAULT_S3 = find_s3_quadruple()
    return _DEFAULT_S3


def frakS3_system(quadruple: Optional[Sequence[LatticePoint]] = None) -> ReducedSystem:
    """Four-mode flow of the restricted Hamiltonian on a (1,2,2,1) quadruple.

    The transfer slice locks J2 = 2 J1 and J3 = 2 J4 (preserved by the flow,
    whose action rates are proportional to (1,2,-2,-1)); I1 = J1 + J2 is the
    mass on the receiving pair.  The single active angle is
    psi = th1 + 2 th2 - 2 th3 - th4, so the portrait angle psi/2 has period pi.
    """
    if quadruple is None:
        quadruple = default_s3_quadruple()
    poly = ham.restricted_hamiltonian(quadruple)
    grads = [poly.gradient_wrt_conj(k) for k in range(4)]

    def H(z: np.ndarray) -> float:
        return float(poly.evaluate(list(z)).real)

    def field(z: np.ndarray) -> np.ndarray:
        zz = list(z)
        return 1j * np.array([g.evaluate(zz) for g in grads])

    def make_initial(I1: float, phase: float) -> np.ndarray:
        # `phase` is the portrait angle psi/2; putting psi on theta_1 alone
        J1 = I1 / 3.0
        J2 = 2.0 * I1 / 3.0
        J3 = 2.0 * (1.0 - I1) / 3.0
        J4 = (1.0 - I1) / 3.0
        return np.array(
            [
                math.sqrt(J1) * np.exp(2j * phase),
                math.sqrt(J2),
                math.sqrt(J3),
                math.sqrt(J4),
            ],
            dtype=complex,
        )

    return ReducedSystem(
        name="frakS3",
        nmodes=4,
        hamiltonian=H,
        field=field,
        make_initial=make_initial,
        I1_of=lambda z: float(abs(z[0]) ** 2 + abs(z[1]) ** 2),
        angular_period=math.pi,
    )


# ---------------------------------------------------------------------------
# scans and portraits
# ---------------------------------------------------------------------------

@dataclass
class ScanRow:
    phase: float
    sup_I1: float
    H_drift: float
    J_drift: float


def no_full_transfer_scan(
    system: ReducedSystem,
    I1_0: float,
    phases: int | Sequence[float] = 100,
    T: float = 100.0,
    margin: float = 0.1,
    rtol: float = 1e-10,
    samples: int = 2000,
) -> tuple[bool, float, list[ScanRow]]:
    """Integrate a fan of initial phases and report sup_t,phase I1."""
    if not (0 < I1_0 < 0.5):
        raise ValueError("start in (0, 0.5)")
    if isinstance(phases, int):
        phases = np.linspace(0, system.angular_period, phases, endpoint=False)
    rows: list[ScanRow] = []
    sup = 0.0
    for phase in phases:
        z0 = system.make_initial(I1_0, float(phase))
        ts, zs = _integrate_system(system, z0, T, rtol=rtol, samples=samples)
        I1s = np.array([system.I1_of(z) for z in zs])
        Hs = np.array([system.hamiltonian(z) for z in zs])
        Js = (np.abs(zs) ** 2).sum(axis=1)
        rows.append(
            ScanRow(
                phase=float(phase),
                sup_I1=float(I1s.max()),
                H_drift=float(np.abs(Hs - Hs[0]).max() / max(1.0, abs(Hs[0]))),
                J_drift=float(np.abs(Js - Js[0]).max()),
            )
        )
        sup = max(sup, rows[-1].sup_I1)
    return sup <= 1.0 - margin, sup, rows


def rectangle_full_transfer(I1_0: float = 1e-3, T: float = 10.0,
                            rtol: float = 1e-11) -> float:
    """Positive control: the rectangle two-generation system moves all mass.

    Started on the fixed-angle line, the receiving action climbs the
    logistic; returns sup_t I1.
    """
    n = 2
    b0 = toy.two_generation_initial(n, I1_0)
    lam = toy.lyapunov_rate(n)
    # time to reach 1 - I1_0/4 on the logistic, plus slack
    need = (math.log((1 - I1_0 / 4) / (I1_0 / 4)) - math.log(I1_0 / (1 - I1_0))) / (
        2 * lam
    )
    traj = toy.integrate(b0, min(T, need * 1.5), n, tol=1e-9, samples=800)
    return float((np.abs(traj.b[:, 1]) ** 2).max())


def phase_portrait(system: ReducedSystem, n_angle: int = 121, n_action: int = 81
                   ) -> list[tuple[float, float, float]]:
    """(delta-theta, I1, H) samples over the fundamental angular domain."""
    half = system.angular_period / 2
    out = []
    for dth in np.linspace(-half, half, n_angle):
        for I1 in np.linspace(0.0, 1.0, n_action):
            z = system.make_initial(float(I1), float(dth))
            out.append((float(dth), float(I1), system.hamiltonian(z)))
    return out
