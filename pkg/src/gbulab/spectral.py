"""Principal Dirichlet eigenpair of the (negative) grid Laplacian, the
weighted-mass functional y(t) = integral of u * phi1^alpha, admissible
alpha window, and the superlinear ODE-inequality fit used in the blow-up
criterion experiment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .operators import quadrature_weights
from .problem import SolutionState, make_spec
from .stepping import COMPLETED, GBU_DETECTED, RunReport, StepControl, run


class EigenSolveError(RuntimeError):
    """Inverse power iteration failed to reach the residual tolerance."""


class EmptyAlphaWindow(ValueError):
    """The admissible-exponent interval is empty (hypothesis q > p > 2 fails)."""


class DegenerateSeriesError(ValueError):
    """The sampled functional is constant; nothing to fit."""


@dataclass(frozen=True)
class EigenData:
    """Smallest Dirichlet eigenpair: lambda1 > 0, phi1 >= 0, ||phi1||_inf = 1."""

    lambda1: float
    phi1: np.ndarray
    residual: float
    iterations: int


def _neg_laplacian(v: np.ndarray, grid: Grid) -> np.ndarray:
    """-Delta_h on interior fields (Dirichlet zero extension)."""
    dim = grid.dimension
    out = np.zeros_like(v)
    for axis in range(dim):
        h2 = grid.spacing[axis] ** 2
        pad = [(0, 0)] * dim
        pad[axis] = (1, 1)
        vp = np.pad(v, pad)
        lo = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        out += (2.0 * v - vp[tuple(lo)] - vp[tuple(hi)]) / h2
    return out


def _thomas_constant(m: int, diag: float, off: float, rhs: np.ndarray) -> np.ndarray:
    """Tridiagonal solve with constant diagonal/off-diagonal entries."""
    c = np.empty(m)
    d = np.empty(m)
    c[0] = off / diag
    d[0] = rhs[0] / diag
    for i in range(1, m):
        w = diag - off * c[i - 1]
        c[i] = off / w
        d[i] = (rhs[i] - off * d[i - 1]) / w
    x = np.empty(m)
    x[-1] = d[-1]
    for i in range(m - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _cg_solve(grid: Grid, b: np.ndarray, rtol: float = 1e-13, maxiter: int = 20000) -> np.ndarray:
    x = np.zeros_like(b)
    r = b - _neg_laplacian(x, grid)
    p = r.copy()
    rs = float(np.sum(r * r))
    bnorm = math.sqrt(float(np.sum(b * b)))
    if bnorm == 0.0:
        return x
    for _ in range(maxiter):
        ap = _neg_laplacian(p, grid)
        alpha = rs / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.sum(r * r))
        if math.sqrt(rs_new) <= rtol * bnorm:
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise EigenSolveError("inner conjugate-gradient solve did not converge")


def principal_eigenpair(grid: Grid, tol: float = 1e-10, maxiter: int = 400) -> EigenData:
    """Inverse power iteration on the 3-point (1D) / 5-point (2D) Laplacian.

    Returns the eigenpair with phi1 positive at interior nodes, zero on the
    boundary, normalized to ||phi1||_inf = 1, and eigen-residual
    ||(-Delta_h - lambda1) phi1||_inf below tol.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    inner_shape = tuple(n - 2 for n in grid.shape)
    v = np.ones(inner_shape)
    v /= math.sqrt(float(np.sum(v * v)))

    if grid.dimension == 1:
        h2 = grid.spacing[0] ** 2
        m = inner_shape[0]

        def solve(b):
            return _thomas_constant(m, 2.0 / h2, -1.0 / h2, b)

    else:

        def solve(b):
            return _cg_solve(grid, b)

    lam = math.nan
    residual = math.inf
    iterations = 0
    for iterations in range(1, maxiter + 1):
        w = solve(v)
        w /= math.sqrt(float(np.sum(w * w)))
        av = _neg_laplacian(w, grid)
        lam = float(np.sum(w * av))
        residual = float(np.max(np.abs(av - lam * w))) / float(np.max(np.abs(w)))
        v = w
        if residual <= tol:
            break
    else:
        raise EigenSolveError(
            f"no convergence after {maxiter} iterations (residual {residual:.3e})"
        )

    if float(np.sum(v)) < 0:
        v = -v
    phi = np.zeros(grid.shape)
    phi[grid.interior_slice()] = v
    phi /= float(np.max(np.abs(phi)))
    av = _neg_laplacian(phi[grid.interior_slice()], grid)
    residual = float(np.max(np.abs(av - lam * phi[grid.interior_slice()])))
    return EigenData(lambda1=lam, phi1=phi, residual=residual, iterations=iterations)


@dataclass(frozen=True)
class AlphaWindow:
    lo: float
    hi: float
    lo_inclusive: bool

    def contains(self, alpha: float) -> bool:
        above = alpha >= self.lo if self.lo_inclusive else alpha > self.lo
        return above and alpha < self.hi

    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


def alpha_window(p: float, q: float) -> AlphaWindow:
    """Admissible exponents: ((p-1)/(q-p+1), q-1) intersected with [1, inf)."""
    lo_raw = (p - 1.0) / (q - p + 1.0)
    hi = q - 1.0
    if lo_raw >= hi or hi <= 1.0:
        raise EmptyAlphaWindow(
            f"empty exponent window for p={p}, q={q}: requires q > p > 2"
        )
    if lo_raw < 1.0:
        return AlphaWindow(lo=1.0, hi=hi, lo_inclusive=True)
    return AlphaWindow(lo=lo_raw, hi=hi, lo_inclusive=False)


def blowup_functional(state: SolutionState, phi1: np.ndarray, alpha: float) -> float:
    """Trapezoid quadrature of u * phi1^alpha over the grid."""
    w = quadrature_weights(state.grid)
    return float(np.sum(w * state.u * np.power(phi1, alpha)))


@dataclass(frozen=True)
class OdeFit:
    c1: float
    c2: float
    margin: float
    compliant: bool
    misfit: float


def blowup_ode_fit(t: np.ndarray, y: np.ndarray, q: float) -> OdeFit:
    """Largest C1 >= 0 with accompanying C2 >= 0 such that y' >= C1 y^q - C2
    at every sample (y' by backward differences).

    Anchored by an active-set nonnegative least-squares fit of
    y' ~ C1 y^q - C2; C2 is then lifted so the inequality holds everywhere,
    and the largest C1 whose misfit stays within 5% of the best candidate is
    kept. A fit is compliant when C1 > 0 and the net forcing C1 y^q - C2 is
    positive at the final sample.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or y.ndim != 1:
        raise ValueError("t and y must be 1D arrays of equal length")
    if len(y) < 10:
        raise ValueError("need at least 10 samples")
    scale = float(np.max(np.abs(y)))
    if scale == 0.0 or float(np.max(y) - np.min(y)) <= 1e-14 * (1.0 + scale):
        raise DegenerateSeriesError("functional series is constant")

    dts = np.diff(t)
    if np.any(dts <= 0):
        raise ValueError("times must be strictly increasing")
    yp = np.diff(y) / dts
    yq = np.power(y[1:], q)

    def lifted_c2(c1: float) -> float:
        return max(0.0, float(np.max(c1 * yq - yp)))

    def misfit(c1: float, c2: float) -> float:
        r = yp - (c1 * yq - c2)
        return float(np.sum(r * r))

    # active-set nonnegative least squares on the two-parameter model
    a11 = float(np.sum(yq * yq))
    a12 = -float(np.sum(yq))
    a22 = float(len(yq))
    b1 = float(np.sum(yq * yp))
    b2 = -float(np.sum(yp))
    det = a11 * a22 - a12 * a12
    if det > 0:
        c1_ls = (b1 * a22 - b2 * a12) / det
        c2_ls = (a11 * b2 - a12 * b1) / det
    else:
        c1_ls, c2_ls = 0.0, 0.0
    if c1_ls < 0 or c2_ls < 0:
        # clamp each active constraint in turn, keep the better feasible fit
        cands = []
        c1_only = max(0.0, b1 / a11) if a11 > 0 else 0.0
        cands.append((c1_only, 0.0))
        cands.append((0.0, max(0.0, b2 / a22)))
        c1_ls, c2_ls = min(cands, key=lambda c: misfit(*c))

    candidates = [c1_ls]
    if c1_ls > 0:
        candidates.extend(c1_ls * np.logspace(-0.5, 0.5, 41))
    else:
        base = float(np.max(np.abs(yp))) / max(float(np.max(yq)), 1e-300)
        candidates.extend(base * np.logspace(-3, 1, 41))
    scored = []
    for c1 in candidates:
        c1 = max(0.0, float(c1))
        c2 = lifted_c2(c1)
        scored.append((misfit(c1, c2), c1, c2))
    best = min(s[0] for s in scored)
    tol = best * 1.05 + 1e-300
    feasible = [s for s in scored if s[0] <= tol]
    _, c1, c2 = max(feasible, key=lambda s: s[1])

    margin = float(np.min(yp - c1 * yq + c2))
    compliant = c1 > 0 and (c1 * yq[-1] - c2) > 0
    return OdeFit(c1=c1, c2=c2, margin=margin, compliant=compliant, misfit=misfit(c1, c2))


@dataclass
class CriterionResult:
    """Empirical blow-up threshold for the family u0 = A * sine bump."""

    amplitude_low: float  # largest amplitude observed to complete
    amplitude_high: float  # smallest amplitude observed to blow up
    functional_low: float
    functional_high: float
    t_detect: float  # detection time at amplitude_high
    runs: int
    history: list

    @property
    def threshold_functional(self) -> float:
        return 0.5 * (self.functional_low + self.functional_high)


def criterion_experiment(
    grid: Grid,
    p: float,
    q: float,
    alpha: float,
    control: StepControl,
    amplitude_low: float = 0.0,
    amplitude_high: float = 2.0,
    epsilon: float = 0.0,
    mu: float = 1.0,
    bisect_iters: int = 6,
    max_expand: int = 8,
    eigen: EigenData | None = None,
) -> CriterionResult:
    """Bisect the sine-bump amplitude between a completed and a blown-up run.

    Reports the empirical threshold of the weighted mass of u0 and the
    detection time on the blow-up side.
    """
    if not q > p > 2:
        raise ValueError(f"requires q > p > 2, got p={p}, q={q}")
    window = alpha_window(p, q)
    if not window.contains(alpha):
        raise ValueError(f"alpha={alpha} outside admissible window {window}")
    eig = eigen if eigen is not None else principal_eigenpair(grid)
    weight = np.power(eig.phi1, alpha)
    qw = quadrature_weights(grid)

    history = []
    runs = 0

    def probe(amp: float) -> tuple[str, float, RunReport]:
        nonlocal runs
        spec = make_spec(grid, p, q, epsilon=epsilon, mu=mu, profile="sine", amplitude=amp)
        y0 = float(np.sum(qw * spec.initial * weight))
        _, report = run(spec, control)
        runs += 1
        if report.verdict not in (COMPLETED, GBU_DETECTED):
            raise RuntimeError(
                f"inconclusive probe at amplitude {amp}: verdict {report.verdict}"
            )
        history.append({"amplitude": amp, "verdict": report.verdict, "y0": y0,
                        "t_detect": report.t_detect})
        return report.verdict, y0, report

    verdict_lo, y_lo, _ = probe(amplitude_low)
    if verdict_lo != COMPLETED:
        raise RuntimeError(f"low amplitude {amplitude_low} already blows up")
    lo, hi = amplitude_low, amplitude_high
    verdict_hi, y_hi, rep_hi = probe(hi)
    expand = 0
    while verdict_hi != GBU_DETECTED:
        lo, y_lo = hi, y_hi
        hi *= 2.0
        expand += 1
        if expand > max_expand:
            raise RuntimeError("no blow-up found while expanding the amplitude")
        verdict_hi, y_hi, rep_hi = probe(hi)

    t_detect = rep_hi.t_detect
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        verdict_mid, y_mid, rep_mid = probe(mid)
        if verdict_mid == GBU_DETECTED:
            hi, y_hi, t_detect = mid, y_mid, rep_mid.t_detect
        else:
            lo, y_lo = mid, y_mid

    return CriterionResult(
        amplitude_low=lo,
        amplitude_high=hi,
        functional_low=y_lo,
        functional_high=y_hi,
        t_detect=t_detect,
        runs=runs,
        history=history,
    )
