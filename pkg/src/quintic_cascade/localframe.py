"""Local analysis near the single-mode periodic orbits and the slider search.

Mode indices are 0-based throughout this module; the cascade of interest
runs from mode 2 (the third mode) to mode N-3 (the third-to-last), matching
the convention "b_3 to b_{N-2}" used with 1-based labels.

Conventions fixed here and verified numerically by the test suite:
 * local coordinates c_k = b_k e^{-i theta_j} on the chart b_j != 0;
 * on the connection transferring mass j -> j+1 the receiving mode leads
   the donor phase by +phi0, so the unstable ray of mode j+1 at the orbit
   T_j is c_{j+1} ~ omega = e^{i phi0} and the stable ray of mode j-1 is
   c_{j-1} ~ conj(omega);
 * the hyperbolic pair (c^+, c^-) with c = (conj(omega) c^- + omega c^+) /
   sqrt(2 Im omega^2) is real on the physical subspace and the quadratic
   Hamiltonian there is sqrt((9n-8)(3n-4)) (c^+ c^- + ...) times 2 J^2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from . import toy
from .toy import (
    Trajectory,
    fixed_angle,
    lyapunov_rate,
    rescale_factor,
    toy_vector_field,
    integrate,
)

SQRT3 = math.sqrt(3.0)


class ChartError(ValueError):
    """Local chart is singular (b_j = 0), or |c| exceeds the mass shell."""


@dataclass
class LocalState:
    j: int
    J: float
    theta: float
    c: np.ndarray  # complex, modes in order with mode j removed

    def mode_index(self, k: int) -> int:
        """Position of original mode k inside the c array."""
        if k == self.j:
            raise ValueError("mode j has no c coordinate")
        return k if k < self.j else k - 1


def to_local(b: Sequence[complex], j: int) -> LocalState:
    b = np.asarray(b, dtype=complex)
    if b[j] == 0:
        raise ChartError("chart requires b_j != 0")
    theta = float(np.angle(b[j]))
    c = np.delete(b, j) * np.exp(-1j * theta)
    return LocalState(j=j, J=float((np.abs(b) ** 2).sum()), theta=theta, c=c)


def from_local(state: LocalState, N: Optional[int] = None) -> np.ndarray:
    if N is None:
        N = len(state.c) + 1
    rest = float((np.abs(state.c) ** 2).sum())
    if rest > state.J + 1e-15:
        raise ChartError("|c|^2 exceeds J")
    bj = math.sqrt(max(state.J - rest, 0.0)) * cmath.exp(1j * state.theta)
    b = np.empty(N, dtype=complex)
    b[state.j] = bj
    others = np.concatenate([np.arange(state.j), np.arange(state.j + 1, N)])
    b[others] = state.c * cmath.exp(1j * state.theta)
    return b


def local_vector_field(c: np.ndarray, j: int, n: int, N: int, J: float = 1.0,
                       rescaled: bool = False) -> np.ndarray:
    """Pushforward of the toy field to the co-rotating chart at theta = 0."""
    state = LocalState(j=j, J=J, theta=0.0, c=np.asarray(c, dtype=complex))
    b = from_local(state, N)
    f = toy_vector_field(b, n, rescaled)
    theta_dot = (f[j] / b[j]).imag
    others = np.concatenate([np.arange(j), np.arange(j + 1, N)])
    return f[others] - 1j * theta_dot * b[others]


def integrate_local(c0: np.ndarray, j: int, T: float, n: int, N: int,
                    J: float = 1.0, rescaled: bool = False, samples: int = 200,
                    rtol: float = 1e-12):
    """Direct integration of the reduced system (for conjugation checks)."""
    from scipy.integrate import solve_ivp

    def rhs(t, y):
        m = len(y) // 2
        c = y[:m] + 1j * y[m:]
        f = local_vector_field(c, j, n, N, J, rescaled)
        return np.concatenate([f.real, f.imag])

    y0 = np.concatenate([np.asarray(c0).real, np.asarray(c0).imag])
    ts = np.linspace(0, T, samples)
    sol = solve_ivp(rhs, (0, T), y0, method="DOP853", rtol=rtol, atol=1e-14, t_eval=ts)
    m = len(c0)
    return sol.t, (sol.y[:m] + 1j * sol.y[m:]).T


# ---------------------------------------------------------------------------
# hyperbolic diagonalization
# ---------------------------------------------------------------------------

def _omega_scale(n: int) -> tuple[complex, float]:
    phi0 = fixed_angle(n)
    omega = cmath.exp(1j * phi0)
    s = math.sqrt(2 * math.sin(2 * phi0))  # sqrt(2 Im omega^2) > 0 for n >= 2
    return omega, s


def hyperbolic_merge(c_plus: complex, c_minus: complex, n: int) -> complex:
    omega, s = _omega_scale(n)
    return (omega.conjugate() * c_minus + omega * c_plus) / s


def hyperbolic_split(c: complex, n: int) -> tuple[complex, complex]:
    """(c^+, c^-) from c, treating conj(c) as the literal conjugate.

    Real outputs correspond to physical states; the map is the inverse of
    :func:`hyperbolic_merge` on that subspace.
    """
    omega, s = _omega_scale(n)
    cbar = complex(c).conjugate()
    c_minus = 1j * (omega.conjugate() * c - omega * cbar) / s
    c_plus = 1j * (omega.conjugate() * cbar - omega * c) / s
    return c_plus, c_minus


def kappa(n: int) -> float:
    """Elliptic frequency of the rescaled flow: sqrt(3)(3n-2)/sqrt((9n-8)(3n-4))."""
    return SQRT3 * (3 * n - 2) / math.sqrt((9 * n - 8) * (3 * n - 4))


def predicted_hyperbolic(n: int, J: float = 1.0) -> float:
    return lyapunov_rate(n, J)


def predicted_elliptic(n: int, J: float = 1.0, variant: Literal["h2", "brut"] = "h2") -> float:
    """Elliptic rotation rate of the peripheral modes in the local frame.

    The quadratic-form coefficient is (3n-2); the equations-of-motion
    display carries (3n+2) instead.  The spectrum check below measures the
    rate and the tests record which constant the flow realizes.
    """
    return 2 * J * J * ((3 * n - 2) if variant == "h2" else (3 * n + 2))


def linearization_spectrum(j: int, n: int, N: int, J: float = 1.0,
                           rescaled: bool = False, h: float = 1e-5) -> dict:
    """Eigenvalues of the reduced field's Jacobian at T_j (central FD)."""
    m = N - 1
    A = np.zeros((2 * m, 2 * m))
    for col in range(2 * m):
        dc = np.zeros(m, complex)
        if col < m:
            dc[col] = h
        else:
            dc[col - m] = 1j * h
        fp = local_vector_field(dc, j, n, N, J, rescaled)
        fm = local_vector_field(-dc, j, n, N, J, rescaled)
        d = (fp - fm) / (2 * h)
        A[:m, col] = d.real
        A[m:, col] = d.imag
    eigs = np.linalg.eigvals(A)
    hyper = sorted((e.real for e in eigs if abs(e.real) > 1e-6 * max(1.0, abs(e))),
                   reverse=True)
    elliptic = sorted({round(abs(e.imag), 9) for e in eigs if abs(e.imag) > 1e-9})
    return {
        "eigenvalues": np.sort_complex(eigs),
        "hyperbolic": float(hyper[0]) if hyper else 0.0,
        "elliptic": [float(x) for x in elliptic],
    }


# ---------------------------------------------------------------------------
# targets and semi-metrics
# ---------------------------------------------------------------------------

TargetKind = Literal["incoming", "ricochet", "outgoing"]


@dataclass(frozen=True)
class TargetSpec:
    """(M, d, R) data for one mode index; exponents/scales are bookkeeping
    from the covering argument and only enter diagnostics here."""

    kind: TargetKind
    j: int
    sigma: float
    T: float
    r: float = 1.0
    A: float = 1.0

    def __post_init__(self):
        if not (0 < self.sigma < 1):
            raise ValueError("sigma must lie in (0,1)")
        if self.T < 1:
            raise ValueError("T must be >= 1")

    @property
    def radius(self) -> float:
        return self.T**self.A


def _blocks(b: Sequence[complex], j: int, n: int):
    """Local blocks at T_j: trailing, (c^+,c^-) at j-1 and j+1, leading."""
    b = np.asarray(b, dtype=complex)
    loc = to_local(b, j)
    N = len(b)
    c_full = np.zeros(N, complex)  # indexed by original mode, entry j unused
    others = [k for k in range(N) if k != j]
    for pos, k in enumerate(others):
        c_full[k] = loc.c[pos]
    out = {
        "trail_far": c_full[: max(j - 1, 0)],        # modes <= j-2
        "lead_far": c_full[j + 2:],                   # modes >= j+2
        "lead_all": c_full[j + 1:],                   # modes >= j+1
        "trail_all": c_full[:j],                      # modes <= j-1
    }
    if j - 1 >= 0:
        out["minus_pm"] = hyperbolic_split(c_full[j - 1], n)
    if j + 1 < N:
        out["plus_pm"] = hyperbolic_split(c_full[j + 1], n)
    return out


def _norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def target_membership(b: Sequence[complex], spec: TargetSpec, n: int,
                      tol_eq: float = 1e-9) -> tuple[bool, dict]:
    """Do the defining (in)equalities of the target set hold at b?

    Equalities are tested within tol_eq; each constraint's measured value is
    returned for diagnostics.
    """
    e = math.exp
    T = spec.T
    blk = _blocks(b, spec.j, n)
    comp: dict[str, float] = {}
    ok = True
    if spec.kind == "incoming":
        cp, cm = blk["minus_pm"]
        comp["trail_far"] = _norm(blk["trail_far"])
        comp["c_plus"] = abs(cp)
        comp["c_minus_minus_sigma"] = abs(cm - spec.sigma)
        comp["lead_all"] = _norm(blk["lead_all"])
        ok = (
            comp["trail_far"] <= tol_eq
            and comp["c_plus"] <= tol_eq
            and comp["c_minus_minus_sigma"] <= tol_eq
            and comp["lead_all"] <= spec.r * e(-2 * SQRT3 * T)
        )
    elif spec.kind == "ricochet":
        cp, cm = blk["plus_pm"]
        comp["trail_all"] = _norm(blk["trail_all"])
        comp["c_minus"] = abs(cm)
        comp["c_plus"] = abs(cp)
        comp["lead_far"] = _norm(blk["lead_far"])
        ok = (
            comp["trail_all"] <= tol_eq
            and comp["c_minus"] <= tol_eq
            and comp["c_plus"] <= spec.r * e(-SQRT3 * T)
            and comp["lead_far"] <= spec.r * e(-2 * SQRT3 * T)
        )
    else:  # outgoing
        cp, cm = blk["plus_pm"]
        comp["trail_all"] = _norm(blk["trail_all"])
        comp["c_minus"] = abs(cm)
        comp["c_plus_minus_sigma"] = abs(cp - spec.sigma)
        comp["lead_far"] = _norm(blk["lead_far"])
        ok = (
            comp["trail_all"] <= tol_eq
            and comp["c_minus"] <= tol_eq
            and comp["c_plus_minus_sigma"] <= tol_eq
            and comp["lead_far"] <= spec.r * e(-2 * SQRT3 * T)
        )
    return bool(ok), comp


def semi_metric(b: Sequence[complex], b_ref: Sequence[complex], spec: TargetSpec,
                n: int) -> tuple[float, dict]:
    """The target's weighted semi-metric between two states (literal form)."""
    e = math.exp
    T = spec.T
    x = _blocks(b, spec.j, n)
    y = _blocks(b_ref, spec.j, n)
    comp: dict[str, float] = {}
    if spec.kind == "incoming":
        xp, xm = x["minus_pm"]
        yp, ym = y["minus_pm"]
        comp["trail_far"] = e(2 * SQRT3 * T) * _norm(x["trail_far"] - y["trail_far"])
        comp["c_minus"] = e(SQRT3 * T) * abs(xm - ym)
        comp["c_plus"] = e(4 * SQRT3 * T) * abs(xp + yp)
        comp["lead_all"] = e(3 * SQRT3 * T) * _norm(x["lead_all"] - y["lead_all"])
    elif spec.kind == "ricochet":
        xmp, xmm = x["minus_pm"] if "minus_pm" in x else (0, 0)
        ymp, ymm = y["minus_pm"] if "minus_pm" in y else (0, 0)
        xpp, xpm = x["plus_pm"]
        ypp, ypm = y["plus_pm"]
        comp["trail_far"] = e(2 * SQRT3 * T) * _norm(x["trail_far"] - y["trail_far"])
        comp["c_plus_lead"] = e(2 * SQRT3 * T) * abs(xpp + ypp)
        comp["c_minus_trail"] = e(SQRT3 * T) * abs(xmm - ymm)
        comp["c_plus_trail"] = e(3 * SQRT3 * T) * abs(xmp + ymp)
        comp["c_minus_lead"] = e(3 * SQRT3 * T) * abs(xpm + ypm)
        comp["lead_far"] = e(3 * SQRT3 * T) * _norm(x["lead_far"] - y["lead_far"])
    else:
        xpp, xpm = x["plus_pm"]
        ypp, ypm = y["plus_pm"]
        comp["trail_all"] = e(2 * SQRT3 * T) * _norm(x["trail_all"] - y["trail_all"])
        comp["c_minus"] = e(4 * SQRT3 * T) * abs(xpm - ypm)
        comp["c_plus"] = e(SQRT3 * T) * abs(xpp + ypp)
        comp["lead_far"] = e(3 * SQRT3 * T) * _norm(x["lead_far"] - y["lead_far"])
    return float(sum(comp.values())), comp


# ---------------------------------------------------------------------------
# slider search
# ---------------------------------------------------------------------------

@dataclass
class HopRecord:
    hop: int
    from_mode: int
    to_mode: int
    injection: float
    bisection_iters: int
    residual: float
    duration: float
    precision: str


@dataclass
class SliderResult:
    x3: np.ndarray
    T0: float
    traj: Trajectory
    hops: list[HopRecord]
    ok: bool
    deepest_mode: int


def _hop_event(mode: int, level: float):
    def ev(t, y):
        m = len(y) // 2
        return (y[mode] ** 2 + y[m + mode] ** 2) - level

    ev.terminal = True
    ev.direction = 1
    return ev


def _run_hop(b_from: np.ndarray, mode_to: int, n: int, level: float,
             t_cap: float, rescaled: bool, rtol: float) -> tuple[Trajectory, bool]:
    ev = _hop_event(mode_to, level)
    traj = integrate(
        b_from, t_cap, n, tol=1e-8, rescaled=rescaled, samples=600,
        rtol=rtol, events=[ev],
    )
    hit = "t_events" in traj.stats and len(traj.stats["t_events"][0]) > 0
    if hit:
        t_hit = float(traj.stats["t_events"][0][0])
        y_hit = traj.stats["y_events"][0][0]
        m = len(y_hit) // 2
        b_hit = y_hit[:m] + 1j * y_hit[m:]
        keep = traj.t <= t_hit
        traj = Trajectory(
            t=np.append(traj.t[keep], t_hit),
            b=np.vstack([traj.b[keep], b_hit]),
            n=n,
            rescaled=rescaled,
            stats=traj.stats,
        )
    return traj, hit


def slider_shoot(
    N: int,
    eps: float = 0.1,
    sigma: float = 1e-2,
    n: Optional[int] = None,
    rescaled: bool = True,
    residual_tol: float = 1e-4,
    t_cap: float = 40.0,
    max_bisection: int = 12,
    rtol: float = 1e-12,
) -> SliderResult:
    """Hop-by-hop shooting along the chain from mode 2 to mode N-3 (0-based).

    The first segment starts on the exact two-generation connection out of
    the third periodic orbit.  At each later hop the next mode is injected
    on its unstable ray; the injected amplitude is selected by bisection so
    that the segment exits along the next connection (the exit residual --
    the mass outside the two active modes, the outgoing-target diagnostic --
    stays below residual_tol).  N = 6 needs no injection at all: the search
    degenerates to the single heteroclinic segment.
    """
    if N < 6:
        raise ValueError("slider needs N >= 6")
    if n is None:
        n = 1 << (N - 1)
    phi0 = fixed_angle(n)
    start, end = 2, N - 3
    level = 1.0 - sigma**2

    b = np.zeros(N, complex)
    b[start] = math.sqrt(1.0 - sigma**2)
    b[start + 1] = sigma * cmath.exp(1j * phi0)
    x3 = b.copy()

    pieces: list[Trajectory] = []
    hops: list[HopRecord] = []
    t_offset = 0.0
    ok = True
    deepest = start

    for j in range(start, end):
        seg, hit = _run_hop(b, j + 1, n, level, t_cap, rescaled, rtol)
        seg_shift = Trajectory(t=seg.t + t_offset, b=seg.b, n=n, rescaled=rescaled,
                               stats=seg.stats)
        pieces.append(seg_shift)
        if not hit:
            ok = False
            break
        deepest = j + 1
        t_offset = seg_shift.t[-1]
        b_end = seg.b[-1]
        if j + 1 == end:
            b = b_end
            break
        # inject the next mode on its unstable ray and refine by bisection
        theta_next = float(np.angle(b_end[j + 1]))
        target_mode = j + 2

        def attempt(x: float):
            cand = b_end.copy()
            cand[target_mode] = x * cmath.exp(1j * (theta_next + phi0))
            cand /= math.sqrt(float((np.abs(cand) ** 2).sum()))
            seg2, hit2 = _run_hop(cand, target_mode, n, level, t_cap, rescaled, rtol)
            if not hit2:
                return None, seg2, math.inf
            fin = seg2.b[-1]
            resid = float(
                sum(abs(fin[k]) ** 2 for k in range(N) if k not in (j + 1, target_mode))
            )
            return cand, seg2, resid

        x_hi = sigma
        iters = 0
        best = None
        cand, seg2, resid = attempt(x_hi)
        iters += 1
        if cand is not None and resid <= residual_tol:
            best = (x_hi, cand, seg2, resid)
        else:
            # residual shrinks with the injected amplitude; bracket downward
            x_lo = x_hi
            for _ in range(max_bisection):
                x_lo /= 2.0
                iters += 1
                cand, seg2, r2 = attempt(x_lo)
                if cand is not None and r2 <= residual_tol:
                    best = (x_lo, cand, seg2, r2)
                    break
            if best is not None:
                lo, hi = best[0], best[0] * 2
                for _ in range(max_bisection - iters):
                    mid = 0.5 * (lo + hi)
                    iters += 1
                    cand, seg2, r2 = attempt(mid)
                    if cand is not None and r2 <= residual_tol:
                        lo = mid
                        best = (mid, cand, seg2, r2)
                    else:
                        hi = mid
        if best is None:
            ok = False
            break
        x_sel, b, seg2, resid = best
        hops.append(
            HopRecord(
                hop=j - start + 1,
                from_mode=j + 1,
                to_mode=target_mode,
                injection=x_sel,
                bisection_iters=iters,
                residual=resid,
                duration=float(seg2.t[-1]),
                precision="double",
            )
        )
        # the selected post-injection state opens the next segment; its
        # trajectory is re-integrated (and recorded) by the next loop pass

    traj = _concat(pieces, n, rescaled)
    return SliderResult(x3=x3, T0=float(traj.t[-1]), traj=traj, hops=hops, ok=ok,
                        deepest_mode=deepest)


def _concat(pieces: list[Trajectory], n: int, rescaled: bool) -> Trajectory:
    ts = np.concatenate([p.t for p in pieces])
    bs = np.vstack([p.b for p in pieces])
    return Trajectory(t=ts, b=bs, n=n, rescaled=rescaled,
                      stats={"pieces": len(pieces)})


def verify_slider(traj: Trajectory, eps: float, start: int = 2,
                  end: Optional[int] = None) -> bool:
    """Endpoint inequalities plus ordered near-full peaks along the chain."""
    N = traj.b.shape[1]
    if end is None:
        end = N - 3
    amp = np.abs(traj.b)
    first, last = amp[0], amp[-1]
    if first[start] < 1 - eps or last[end] < 1 - eps:
        return False
    if any(first[k] > eps for k in range(N) if k != start):
        return False
    if any(last[k] > eps for k in range(N) if k != end):
        return False
    peak_times = []
    for j in range(start, end + 1):
        i = int(np.argmax(amp[:, j]))
        if amp[i, j] < 1 - eps:
            return False
        peak_times.append(traj.t[i])
    if any(t2 <= t1 for t1, t2 in zip(peak_times, peak_times[1:])):
        return False
    # pigeonhole on J = 1: the sup-norm can never drop below 1/sqrt(N)
    if float(amp.max(axis=1).min()) < (1 - 1e-9) / math.sqrt(N):
        return False
    return True
