"""Finite-support quintic NLS dynamics in the moving frame, and the
resonant-truncation comparison experiment.

States are finitely supported Fourier coefficient maps Z^2 -> C.  The full
system on a fixed support S is

    -i da_j/dt = sum_{j1+j2+j3-j4-j5=j, all in S} a a a conj(a) conj(a) e^{i omega6 t},

with omega6 the kinetic mismatch; dropping the omega6 != 0 rows gives the
resonant truncation.  Both flows conserve mass and momentum exactly, which
the integrators monitor.  Interaction tables are precomputed index arrays
grouped by omega6, so one right-hand side is a handful of gathers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .lattice import GenerationSet, LatticePoint, pt


@dataclass
class FourierState:
    points: tuple[LatticePoint, ...]
    amp: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        self.amp = np.asarray(self.amp, dtype=complex)
        if len(self.amp) != len(self.points):
            raise ValueError("amplitude/support size mismatch")

    def l1(self) -> float:
        return float(np.abs(self.amp).sum())

    def l2(self) -> float:
        return float(np.sqrt((np.abs(self.amp) ** 2).sum()))

    def sobolev(self, s: float) -> float:
        return sobolev_norm(self.points, self.amp, s)


def sobolev_norm(points: Sequence[LatticePoint], amp: np.ndarray, s: float) -> float:
    w = np.array([float(p.norm2) ** s for p in points])
    return float(np.sqrt((np.abs(np.asarray(amp)) ** 2 * w).sum()))


def mass(amp: np.ndarray) -> float:
    return float((np.abs(amp) ** 2).sum())


def momentum(points: Sequence[LatticePoint], amp: np.ndarray) -> tuple[float, float]:
    a2 = np.abs(np.asarray(amp)) ** 2
    mx = sum(float(p.x) * v for p, v in zip(points, a2))
    my = sum(float(p.y) * v for p, v in zip(points, a2))
    return mx, my


class InteractionTable:
    """Index table for the quintic convolution over finite supports.

    Rows are all (i1..i5, j) with j1+j2+j3-j4-j5 = j landing in the output
    support; `kind` selects all rows, only resonant (omega6 = 0), or only
    non-resonant ones.
    """

    def __init__(self, in_points: Sequence[LatticePoint],
                 out_points: Optional[Sequence[LatticePoint]] = None,
                 kind: str = "all", max_rows: int = 60_000_000):
        m = len(in_points)
        if m**5 > max_rows:
            raise MemoryError(f"interaction table with {m}^5 rows refused")
        xs = np.array([int(p.x) for p in in_points], dtype=np.int64)
        ys = np.array([int(p.y) for p in in_points], dtype=np.int64)
        qs = np.array([int(p.norm2) for p in in_points], dtype=np.int64)
        grids = np.meshgrid(*([np.arange(m, dtype=np.int32)] * 5), indexing="ij")
        idx = np.stack([g.ravel() for g in grids])
        jx = xs[idx[0]] + xs[idx[1]] + xs[idx[2]] - xs[idx[3]] - xs[idx[4]]
        jy = ys[idx[0]] + ys[idx[1]] + ys[idx[2]] - ys[idx[3]] - ys[idx[4]]
        omega = (
            qs[idx[0]] + qs[idx[1]] + qs[idx[2]] - qs[idx[3]] - qs[idx[4]]
            - (jx * jx + jy * jy)
        )
        if out_points is None:
            coords = sorted({(int(a), int(b)) for a, b in zip(jx, jy)})
            out_points = [pt(a, b) for a, b in coords]
        out_map = {(int(p.x), int(p.y)): i for i, p in enumerate(out_points)}
        out_idx = np.full(idx.shape[1], -1, dtype=np.int64)
        # vectorized membership via encoding
        off = int(max(np.abs(jx).max(initial=0), np.abs(jy).max(initial=0),
                      max((abs(int(p.x)) for p in out_points), default=0),
                      max((abs(int(p.y)) for p in out_points), default=0))) + 1
        base = 2 * off + 1
        enc_rows = (jx + off) * base + (jy + off)
        enc_out = np.array([(int(p.x) + off) * base + (int(p.y) + off)
                            for p in out_points], dtype=np.int64)
        order = np.argsort(enc_out)
        pos = np.searchsorted(enc_out[order], enc_rows)
        pos[pos >= len(enc_out)] = len(enc_out) - 1
        hit = enc_out[order][pos] == enc_rows
        out_idx[hit] = order[pos[hit]]
        keep = hit
        if kind == "resonant":
            keep = keep & (omega == 0)
        elif kind == "nonresonant":
            keep = keep & (omega != 0)
        elif kind != "all":
            raise ValueError(f"unknown table kind {kind!r}")
        self.idx = idx[:, keep]
        self.out = out_idx[keep]
        self.omega = omega[keep]
        self.points = tuple(out_points)
        self.in_points = tuple(in_points)
        om_unique, om_inverse = np.unique(self.omega, return_inverse=True)
        self.om_unique = om_unique
        self.om_inverse = om_inverse

    def __len__(self) -> int:
        return self.idx.shape[1]

    def evaluate(self, t: float, a, b=None, c=None, d=None, f=None) -> np.ndarray:
        """N(t)(a,b,c,d,f) on the output support (all inputs default to a)."""
        b = a if b is None else b
        c = a if c is None else c
        d = a if d is None else d
        f = a if f is None else f
        i1, i2, i3, i4, i5 = self.idx
        vals = a[i1] * b[i2] * c[i3] * np.conj(d[i4]) * np.conj(f[i5])
        if t != 0.0 or self.om_unique.any():
            phases = np.exp(1j * t * self.om_unique)
            vals = vals * phases[self.om_inverse]
        out = np.zeros(len(self.points), dtype=complex)
        np.add.at(out, self.out, vals)
        return out


def multilinear_N(t: float, states: Sequence[FourierState],
                  out_support: Optional[Sequence[LatticePoint]] = None) -> FourierState:
    """One-off evaluation of the multilinear operator on five states.

    The inputs are re-indexed onto their common support; with out_support
    given the result is the Galerkin projection onto it, otherwise the full
    arising support is returned.
    """
    if len(states) != 5:
        raise ValueError("the operator is quintic: five inputs")
    support = sorted({p for st in states for p in st.points})
    arrs = []
    for st in states:
        lookup = {p: i for i, p in enumerate(st.points)}
        arr = np.zeros(len(support), complex)
        for i, p in enumerate(support):
            if p in lookup:
                arr[i] = st.amp[lookup[p]]
        arrs.append(arr)
    table = InteractionTable(support, out_support)
    return FourierState(table.points, table.evaluate(t, *arrs))


@dataclass
class GalerkinTrajectory:
    t: np.ndarray
    a: np.ndarray  # (len(t), m)
    points: tuple[LatticePoint, ...]
    stats: dict = field(default_factory=dict)

    @property
    def L(self) -> np.ndarray:
        return (np.abs(self.a) ** 2).sum(axis=1)

    @property
    def M(self) -> np.ndarray:
        xs = np.array([float(p.x) for p in self.points])
        ys = np.array([float(p.y) for p in self.points])
        a2 = np.abs(self.a) ** 2
        return np.stack([a2 @ xs, a2 @ ys], axis=1)

    @property
    def L_drift(self) -> float:
        L = self.L
        return float(np.max(np.abs(L - L[0])))

    @property
    def M_drift(self) -> float:
        M = self.M
        return float(np.max(np.abs(M - M[0])))

    def state(self, i: int) -> FourierState:
        return FourierState(self.points, self.a[i], t0=float(self.t[i]))


def _integrate_table(table: InteractionTable, a0: np.ndarray, T: float,
                     rtol: float, atol: float, samples: int, t0: float = 0.0
                     ) -> GalerkinTrajectory:
    m = len(a0)

    def rhs(t, y):
        a = y[:m] + 1j * y[m:]
        f = 1j * table.evaluate(t, a)
        return np.concatenate([f.real, f.imag])

    ts = np.linspace(t0, t0 + T, samples)
    sol = solve_ivp(rhs, (t0, t0 + T), np.concatenate([a0.real, a0.imag]),
                    method="DOP853", rtol=rtol, atol=atol, t_eval=ts)
    if not sol.success:
        raise RuntimeError(f"Galerkin integration failed: {sol.message}")
    a = (sol.y[:m] + 1j * sol.y[m:]).T
    return GalerkinTrajectory(t=sol.t, a=a, points=table.points,
                              stats={"nfev": sol.nfev, "rtol": rtol})


def integrate_full_nls(state: FourierState, T: float, rtol: float = 1e-11,
                       atol: float = 1e-13, samples: int = 200,
                       shell: int = 0) -> GalerkinTrajectory:
    """Full (projected) flow on the state's support.

    shell=1 adds one convolution shell to the carrier for a first-order
    leakage study: the extra modes receive forcing from the core support
    but their own feedback is not expanded (keeping the table quintic in
    the core), so it is a sensitivity diagnostic, not a larger Galerkin
    system.
    """
    if shell == 0:
        table = InteractionTable(state.points, state.points)
        return _integrate_table(table, state.amp, T, rtol, atol, samples,
                                t0=state.t0)
    table = InteractionTable(state.points, None)
    m_out = len(table.points)
    out_lookup = {p: i for i, p in enumerate(table.points)}
    core_pos = np.array([out_lookup[p] for p in state.points])

    def rhs(t, y):
        full = y[:m_out] + 1j * y[m_out:]
        f = 1j * table.evaluate(t, full[core_pos])
        return np.concatenate([f.real, f.imag])

    a0 = np.zeros(m_out, complex)
    a0[core_pos] = state.amp
    ts = np.linspace(state.t0, state.t0 + T, samples)
    sol = solve_ivp(rhs, (state.t0, state.t0 + T),
                    np.concatenate([a0.real, a0.imag]), method="DOP853",
                    rtol=rtol, atol=atol, t_eval=ts)
    a = (sol.y[:m_out] + 1j * sol.y[m_out:]).T
    return GalerkinTrajectory(t=sol.t, a=a, points=table.points,
                              stats={"nfev": sol.nfev, "shell": 1})


def integrate_resonant(state: FourierState, T: float, rtol: float = 1e-11,
                       atol: float = 1e-13, samples: int = 200) -> GalerkinTrajectory:
    table = InteractionTable(state.points, state.points, kind="resonant")
    return _integrate_table(table, state.amp, T, rtol, atol, samples, t0=state.t0)


# ---------------------------------------------------------------------------
# initial data, error term, comparison experiment
# ---------------------------------------------------------------------------

def build_initial_data(gset: GenerationSet, b0: Sequence[complex], lam: float
                       ) -> FourierState:
    """a_j(0) = b_i(0)/lam for j in generation i."""
    if len(b0) != gset.N:
        raise ValueError("toy state size must equal the generation count")
    amp = np.array([complex(b0[g - 1]) / lam for g in gset.gen])
    return FourierState(gset.points, amp)


def first_generation_rate(n: int, u: float) -> float:
    """Phase rate of the equal-amplitude first-generation orbit, per-mode
    action u: the action-only Hamiltonian gives (6n^2-9n+4) u^2."""
    return (6 * n * n - 9 * n + 4) * u * u


def periodic_first_generation_g(gset: GenerationSet, lam: float):
    """Closed-form resonant solution concentrated on generation 1.

    Returns (g(t) callable -> amplitude array over gset.points, rate).
    Generation 1 is complete and action preserving inside a non-degenerate
    set, so equal amplitudes just rotate at one frequency.
    """
    n = gset.n
    A = 1.0 / lam
    rate = first_generation_rate(n, A * A)
    mask = np.array([1.0 if g == 1 else 0.0 for g in gset.gen])

    def g(t: float) -> np.ndarray:
        return mask * A * np.exp(1j * rate * t)

    return g, rate


def error_term_table(gset: GenerationSet) -> InteractionTable:
    """Nonresonant rows with inputs in S and outputs on the convolution set."""
    return InteractionTable(gset.points, None, kind="nonresonant")


def error_term(gset: GenerationSet, g_amp: np.ndarray, t: float,
               table: Optional[InteractionTable] = None) -> FourierState:
    """E_j(t) = - sum_{omega6 != 0} g g g conj(g) conj(g) e^{i omega6 t}."""
    if table is None:
        table = error_term_table(gset)
    return FourierState(table.points, -table.evaluate(t, np.asarray(g_amp, complex)))


def integral_error_curve_periodic(gset: GenerationSet, lam: float, T: float,
                                  samples: int = 120) -> tuple[np.ndarray, np.ndarray]:
    """l^1 norm of int_0^t E dtau for the closed-form first-generation g.

    Every row of E oscillates like e^{i(rate+omega6) t}, so the time
    integral is exact per row; no quadrature error enters.
    """
    table = error_term_table(gset)
    g, rate = periodic_first_generation_g(gset, lam)
    amp0 = g(0.0)
    i1, i2, i3, i4, i5 = table.idx
    vals = (amp0[i1] * amp0[i2] * amp0[i3] * np.conj(amp0[i4]) * np.conj(amp0[i5]))
    freq = rate + table.omega
    ts = np.linspace(0.0, T, samples)
    norms = np.empty_like(ts)
    out = np.zeros(len(table.points), complex)
    for k, t in enumerate(ts):
        osc = (np.exp(1j * freq * t) - 1.0) / (1j * freq)
        out[:] = 0
        np.add.at(out, table.out, -vals * osc)
        norms[k] = np.abs(out).sum()
    return ts, norms


def leading_error_bound_periodic(gset: GenerationSet, lam: float) -> float:
    """Boundary-term size of the integrated error: 2 * l^1 of rows/omega.

    Integrating the phase by parts leaves boundary terms at both ends of
    magnitude |rows| / |rate+omega|; their l^1 sum is the lambda^{-5}
    leading term of the error-integral bound.
    """
    table = error_term_table(gset)
    g, rate = periodic_first_generation_g(gset, lam)
    amp0 = g(0.0)
    i1, i2, i3, i4, i5 = table.idx
    vals = amp0[i1] * amp0[i2] * amp0[i3] * np.conj(amp0[i4]) * np.conj(amp0[i5])
    freq = rate + table.omega
    out = np.zeros(len(table.points), complex)
    np.add.at(out, table.out, vals / freq)
    return 2.0 * float(np.abs(out).sum())


@dataclass
class ComparisonReport:
    lambdas: list[float]
    B: list[float]
    final_errors: list[float]
    bound_curve: list[float]
    fitted_exponent: float
    sigma: float
    T0: float
    error_integrals: list[float]
    error_integral_leading: list[float]
    C_N: float
    times: list[np.ndarray] = field(default_factory=list)
    error_curves: list[np.ndarray] = field(default_factory=list)


def approximation_experiment(
    gset: GenerationSet,
    lambdas: Sequence[float],
    sigma: float = 0.5,
    T0: float = 1e-3,
    rtol: float = 1e-11,
    samples: int = 160,
) -> ComparisonReport:
    """Full-vs-resonant comparison across an amplitude ladder.

    Initial data: the periodic first-generation state at scale 1/lambda; g
    is its closed-form resonant evolution, a solves the full projected
    system from a(0) = g(0) up to T = lambda^4 T0.  Reported: final-time
    l^1 errors against B^{-1-sigma/2} with B = C(N) lambda, the fitted decay
    exponent, and the integrated error term against its lambda^{-5} leading
    size.  Raises if T leaves the T << B^4 log B regime.
    """
    if not (0 < sigma < 1):
        raise ValueError("sigma must lie in (0,1)")
    n = gset.n
    C_N = float(n)  # l^1 mass of the unit toy state spread over generation 1
    finals, Bs, bounds, eis, leads = [], [], [], [], []
    times, curves = [], []
    for lam in lambdas:
        B = C_N * lam
        T = lam**4 * T0
        if T >= 0.5 * B**4 * math.log(B):
            raise ValueError(
                f"T={T} outside the approximation regime for B={B}"
            )
        g, rate = periodic_first_generation_g(gset, lam)
        state0 = FourierState(gset.points, g(0.0))
        full = integrate_full_nls(state0, T, rtol=rtol, samples=samples)
        gvals = np.array([g(t) for t in full.t])
        err = np.abs(full.a - gvals).sum(axis=1)
        finals.append(float(err[-1]))
        Bs.append(B)
        bounds.append(B ** (-1 - sigma / 2))
        _, ecurve = integral_error_curve_periodic(gset, lam, T)
        eis.append(float(ecurve.max()))
        leads.append(leading_error_bound_periodic(gset, lam))
        times.append(full.t)
        curves.append(err)
    slope = float(np.polyfit(np.log(Bs), np.log(finals), 1)[0])
    return ComparisonReport(
        lambdas=list(lambdas),
        B=Bs,
        final_errors=finals,
        bound_curve=bounds,
        fitted_exponent=slope,
        sigma=sigma,
        T0=T0,
        error_integrals=eis,
        error_integral_leading=leads,
        C_N=C_N,
        times=times,
        error_curves=curves,
    )


def growth_ratio(traj: GalerkinTrajectory, s: float) -> float:
    """Q: final-to-initial ratio of the squared H^s weight."""
    w = np.array([float(p.norm2) ** s for p in traj.points])
    num = float((np.abs(traj.a[-1]) ** 2 * w).sum())
    den = float((np.abs(traj.a[0]) ** 2 * w).sum())
    return num / den


def growth_ratio_states(points: Sequence[LatticePoint], a_start: np.ndarray,
                        a_end: np.ndarray, s: float) -> float:
    w = np.array([float(p.norm2) ** s for p in points])
    return float((np.abs(a_end) ** 2 * w).sum() / (np.abs(a_start) ** 2 * w).sum())


def slider_endpoint_bound(gset: GenerationSet, eps: float, s: float) -> float:
    """(1-eps) / (eps sum_i J_i/J_{N-2} + (1-eps) J_3/J_{N-2}) with the
    per-generation Sobolev weights."""
    w = [float(x) for x in _weights_float(gset, s)]
    jn2 = w[gset.N - 3]
    return (1 - eps) / (eps * sum(x / jn2 for x in w) + (1 - eps) * w[2] / jn2)


def _weights_float(gset: GenerationSet, s: float) -> list[float]:
    out = []
    for i in range(1, gset.N + 1):
        out.append(sum(float(p.norm2) ** s for p in gset.generation_points(i)))
    return out
