"""Analytic boundary barriers and their numerical certification.

The collar barrier is phi(s) = s (s+delta)^(-beta) added to the boundary
data along the radial coordinate of an exterior sphere of radius rho; the
outer comparison function is (C^2 K^2 + 1)^(q/2) t + C (1 - e^(-K(r-rho)))
plus the sup of the boundary data. Admissible parameters are certified by
evaluating, on a fine radial grid over the collar [rho, rho+eta], the
worst-case residuals of every inequality the construction rests on:

  ret    expanded-form supersolution residual with worst-case data norms,
         the diffusivity ratio kappa swept over [0, p-2],
  ing    beta delta (s+delta)^(-beta-2) >= 4^(q-p+3) (s+delta)^(-beta(q-p+2)),
  inegs  beta delta (s+delta)^(-beta-2) >= 4 (p-2+sqrt(N)) |D2 g|,
  jal    phi'(s) >= |grad g|.

`min_residual` is the minimum over all of them; a parameter set is
certified when it is nonnegative for every tested regularization eps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NoAdmissibleParams(RuntimeError):
    """Bisection exhausted floating-point precision without admissibility."""


def _check_phi_domain(s, delta: float, beta: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("requires s >= 0")
    if not delta > 0:
        raise ValueError("requires delta > 0")
    if not 0 < beta < 1:
        raise ValueError("requires beta in (0, 1)")
    return s


def phi(s, delta: float, beta: float):
    """Increasing concave profile s (s+delta)^(-beta)."""
    s = _check_phi_domain(s, delta, beta)
    return s * np.power(s + delta, -beta)


def phi_prime(s, delta: float, beta: float):
    """[(1-beta) s + delta] (s+delta)^(-beta-1); positive for s >= 0."""
    s = _check_phi_domain(s, delta, beta)
    return ((1.0 - beta) * s + delta) * np.power(s + delta, -beta - 1.0)


def phi_second(s, delta: float, beta: float):
    """-beta [(1-beta) s + 2 delta] (s+delta)^(-beta-2); negative for s >= 0."""
    s = _check_phi_domain(s, delta, beta)
    return -beta * ((1.0 - beta) * s + 2.0 * delta) * np.power(s + delta, -beta - 2.0)


@dataclass(frozen=True)
class BarrierParams:
    """Certified collar-barrier parameters with the data norms they assume.

    Constructed sets are only domain-checked here; the quantitative
    admissibility conditions are evaluated by check_invariants / the
    residual certificates, so deliberately inadmissible sets can be built
    for falsification tests.
    """

    rho: float
    delta: float
    eta: float
    beta: float
    K: float
    C: float
    p: float
    q: float
    N: int
    grad_g: float = 0.0
    hess_g: float = 0.0
    g_sup: float = 0.0
    g_min: float = 0.0
    data_sup: float = 1.0

    def __post_init__(self):
        if not (self.rho > 0 and self.delta > 0 and self.eta > 0):
            raise ValueError("rho, delta, eta must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must be in (0, 1)")
        if not (self.K > 0 and self.C > 0):
            raise ValueError("K and C must be positive")
        if not self.q > self.p - 1 > 1:
            raise ValueError("requires q > p - 1 > 1")
        if self.N not in (1, 2, 3):
            raise ValueError("N must be 1, 2 or 3")
        if min(self.grad_g, self.hess_g, self.g_sup, self.data_sup) < 0:
            raise ValueError("data norms must be nonnegative")

    def scaled_delta(self, factor: float) -> "BarrierParams":
        """Same parameters with delta (and the tied collar width) scaled."""
        from dataclasses import replace

        return replace(self, delta=self.delta * factor, eta=self.eta * factor)


def beta_exponent(p: float, q: float) -> float:
    return 1.0 / (2.0 * (q - p + 2.0))


def check_invariants(params: BarrierParams) -> dict[str, float]:
    """Signed margins of the admissibility conditions (>= 0 means satisfied)."""
    p, q, N = params.p, params.q, params.N
    d, e, b, rho = params.delta, params.eta, params.beta, params.rho
    margins = {
        "beta_formula": -abs(b - beta_exponent(p, q)),
        "ing_closed_form": 4.0 ** (p - q - 4.0) * b - d ** ((q - p + 3.0) / (2.0 * (q - p + 2.0))),
        "k_rate": params.K - (N + p - 3.0) / rho,
        "jal": float(phi_prime(e, d, b)) - params.grad_g,
        "inegs": b * d * (e + d) ** (-b - 2.0) - 4.0 * (p - 2.0 + math.sqrt(N)) * params.hess_g,
        "aux_scale": 4.0 * (e + d) ** (-2.0 * b) - 1.0,
        "aux_curv": b * d - max(N + p - 3.0, 0.0) * (e + d) ** 2 / rho,
    }
    return margins


def is_admissible(params: BarrierParams) -> bool:
    m = check_invariants(params)
    strict = m["k_rate"] > 0
    return strict and all(v >= 0 for k, v in m.items() if k != "k_rate")


def find_barrier_params(
    p: float,
    q: float,
    N: int,
    rho: float,
    g_norms: tuple[float, float, float] = (0.0, 0.0, 0.0),
    g_min: float = 0.0,
    data_sup: float = 1.0,
    data_lipschitz: float | None = None,
) -> BarrierParams:
    """Admissible (delta=eta, beta, K, C) for the collar construction.

    beta is pinned to 1/(2(q-p+2)); delta is the largest admissible value
    found by bisection downward from rho (the constraint set is monotone:
    shrinking an admissible delta preserves admissibility). K exceeds the
    rate floor (N+p-3)/rho; C dominates the initial data: bounded by
    data_sup overall and Lipschitz near the contact point.

    g_norms is (|grad g|_inf, |D2 g|_inf, |g|_inf).
    """
    if not q > p - 1 > 1:
        raise ValueError("requires q > p - 1 > 1")
    if not rho > 0:
        raise ValueError("requires rho > 0")
    grad_g, hess_g, g_sup = (float(v) for v in g_norms)
    beta = beta_exponent(p, q)
    K = max((N + p - 3.0) / rho, 0.0) + 1.0
    lam = data_lipschitz if data_lipschitz is not None else data_sup
    C = max(data_sup, lam * rho) / (1.0 - math.exp(-K * rho))

    def make(delta: float) -> BarrierParams:
        return BarrierParams(
            rho=rho, delta=delta, eta=delta, beta=beta, K=K, C=C,
            p=p, q=q, N=N, grad_g=grad_g, hess_g=hess_g, g_sup=g_sup,
            g_min=g_min, data_sup=data_sup,
        )

    hi = rho
    if is_admissible(make(hi)):
        return make(hi)
    lo = hi
    while not is_admissible(make(lo)):
        lo *= 0.5
        if lo < 1e-300:
            raise NoAdmissibleParams(
                f"no admissible delta above float precision for p={p}, q={q}, N={N}"
            )
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if is_admissible(make(mid)):
            lo = mid
        else:
            hi = mid
    return make(lo)


def _kappas(p: float) -> tuple[float, ...]:
    # endpoints + midpoint of the admissible diffusivity-ratio range [0, p-2]
    return tuple(f * (p - 2.0) for f in (0.0, 0.5, 1.0))


@dataclass(frozen=True)
class SupersolutionCertificate:
    min_residual: float
    ret_min: float
    ing_min: float
    inegs_min: float
    jal_min: float
    per_kappa: dict
    argmin_s: float
    certified: bool


def supersolution_residual(
    params: BarrierParams, eps: float, n_radial: int = 10000
) -> SupersolutionCertificate:
    """Worst-case residuals of the collar supersolution on [rho, rho+eta].

    The expanded-form residual uses the radial identities for phi(r-rho),
    the worst-case data-norm bounds (|grad v| between phi' -/+ |grad g|,
    Laplacian contribution of g bounded by sqrt(N) |D2 g|), and sweeps the
    diffusivity ratio kappa over the endpoints and midpoint of [0, p-2].
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("requires eps in [0, 1]")
    if n_radial < 2:
        raise ValueError("need at least 2 radial points")
    p, q, N = params.p, params.q, params.N
    d, b, rho = params.delta, params.beta, params.rho
    s = np.linspace(0.0, params.eta, n_radial)
    fp = phi_prime(s, d, b)
    fpp = phi_second(s, d, b)
    w_hi = fp + params.grad_g
    w_lo = np.maximum(fp - params.grad_g, 0.0)
    rhs = np.power(w_hi * w_hi + eps, q / 2.0) - eps ** (q / 2.0)
    sqrt_n = math.sqrt(N)

    per_kappa = {}
    ret_min = math.inf
    argmin_s = 0.0
    for kappa in _kappas(p):
        bracket = (
            -fpp
            - ((N - 1.0 + kappa) / rho) * fp
            - sqrt_n * params.hess_g
            - kappa * params.hess_g
        )
        w_pick = np.where(bracket >= 0, w_lo, w_hi)
        diff = np.power(w_pick * w_pick + eps, (p - 2.0) / 2.0) * bracket
        res = diff - rhs
        k = int(np.argmin(res))
        per_kappa[kappa] = float(res[k])
        if res[k] < ret_min:
            ret_min = float(res[k])
            argmin_s = float(s[k])

    base = b * d * np.power(s + d, -b - 2.0)
    ing = base - 4.0 ** (q - p + 3.0) * np.power(s + d, -b * (q - p + 2.0))
    inegs = base - 4.0 * (p - 2.0 + sqrt_n) * params.hess_g
    jal = fp - params.grad_g
    ing_min = float(np.min(ing))
    inegs_min = float(np.min(inegs))
    jal_min = float(np.min(jal))
    min_residual = min(ret_min, ing_min, inegs_min, jal_min)
    return SupersolutionCertificate(
        min_residual=min_residual,
        ret_min=ret_min,
        ing_min=ing_min,
        inegs_min=inegs_min,
        jal_min=jal_min,
        per_kappa=per_kappa,
        argmin_s=argmin_s,
        certified=min_residual >= 0.0,
    )


@dataclass(frozen=True)
class ExpBarrierCertificate:
    min_residual: float
    min_diffusion_term: float
    k_condition_ok: bool
    certified: bool


def exp_barrier_residual(
    C: float,
    K: float,
    rho: float,
    p: float,
    q: float,
    N: int,
    eps: float,
    g_sup: float = 0.0,
    span: float | None = None,
    n_radial: int = 10000,
    t: float = 0.0,
) -> ExpBarrierCertificate:
    """Residual of (C^2 K^2 + 1)^(q/2) t + C (1 - e^(-K(r-rho))) + |g|_inf.

    The residual is affine-free in t (the profile is affine in time), so t
    only participates formally. Evaluated on r in [rho, rho+span] with the
    kappa sweep; reports the minimum residual and the minimum of the
    diffusion term, whose sign is what K > (N+p-3)/rho guarantees.
    """
    del t, g_sup  # residual is t-independent and g enters additively
    if not (C > 0 and K > 0 and rho > 0):
        raise ValueError("C, K, rho must be positive")
    if eps < 0:
        raise ValueError("requires eps >= 0")
    span = rho if span is None else span
    r = np.linspace(rho, rho + span, n_radial)
    s = r - rho
    psi_p = C * K * np.exp(-K * s)
    psi_pp = -C * K * K * np.exp(-K * s)
    time_term = (C * C * K * K + 1.0) ** (q / 2.0)
    source = np.power(psi_p * psi_p + eps, q / 2.0) - eps ** (q / 2.0)

    min_res = math.inf
    min_diff = math.inf
    for kappa in _kappas(p):
        bracket = (1.0 + kappa) * (-psi_pp) - (N - 1.0) * psi_p / r
        diff = np.power(psi_p * psi_p + eps, (p - 2.0) / 2.0) * bracket
        min_diff = min(min_diff, float(np.min(diff)))
        res = time_term + diff - source
        min_res = min(min_res, float(np.min(res)))

    k_ok = K > (N + p - 3.0) / rho
    return ExpBarrierCertificate(
        min_residual=min_res,
        min_diffusion_term=min_diff,
        k_condition_ok=k_ok,
        certified=min_res >= 0.0 and k_ok,
    )


def collar_lipschitz_bound(params: BarrierParams) -> float:
    """sup of phi' over the collar plus |grad g|: delta^(-beta) + |grad g|."""
    return params.delta ** (-params.beta) + params.grad_g


def t0_window(params: BarrierParams) -> float:
    """Largest T0 keeping the outer comparison below the collar barrier at
    the collar edge: (C^2K^2+1)^(q/2) T0 + C(1-e^(-K eta)) + |g|_inf
    <= 2^(-beta) eta^(1-beta) + min g."""
    edge = 2.0 ** (-params.beta) * params.eta ** (1.0 - params.beta)
    room = edge + params.g_min - params.C * (1.0 - math.exp(-params.K * params.eta)) - params.g_sup
    return max(0.0, room / (params.C**2 * params.K**2 + 1.0) ** (params.q / 2.0))


def certify(
    params: BarrierParams, eps_values=(0.0, 1e-3, 1e-1, 1.0), n_radial: int = 10000
) -> dict:
    """Certification report: parameters, per-inequality minimum residuals
    for each eps, the admissible-delta upper bound, and the T0 window."""
    del_hi = params.rho
    del_lo = params.delta
    from dataclasses import replace

    def adm(dd: float) -> bool:
        return is_admissible(replace(params, delta=dd, eta=dd))

    if adm(del_hi):
        delta_upper = del_hi
    else:
        lo, hi = del_lo, del_hi
        if not adm(lo):
            delta_upper = math.nan
        else:
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if adm(mid):
                    lo = mid
                else:
                    hi = mid
            delta_upper = lo

    sup_reports = {}
    exp_reports = {}
    all_ok = True
    for eps in eps_values:
        cert = supersolution_residual(params, eps, n_radial)
        sup_reports[repr(float(eps))] = {
            "min_residual": cert.min_residual,
            "ret_min": cert.ret_min,
            "ing_min": cert.ing_min,
            "inegs_min": cert.inegs_min,
            "jal_min": cert.jal_min,
            "per_kappa": {repr(float(k)): v for k, v in cert.per_kappa.items()},
        }
        ecert = exp_barrier_residual(
            params.C, params.K, params.rho, params.p, params.q, params.N,
            eps, n_radial=n_radial,
        )
        exp_reports[repr(float(eps))] = {
            "min_residual": ecert.min_residual,
            "min_diffusion_term": ecert.min_diffusion_term,
            "k_condition_ok": ecert.k_condition_ok,
        }
        all_ok = all_ok and cert.certified and ecert.certified

    return {
        "params": {
            "rho": params.rho, "delta": params.delta, "eta": params.eta,
            "beta": params.beta, "K": params.K, "C": params.C,
            "p": params.p, "q": params.q, "N": params.N,
            "grad_g": params.grad_g, "hess_g": params.hess_g,
            "g_sup": params.g_sup,
        },
        "invariant_margins": check_invariants(params),
        "collar_lipschitz_bound": collar_lipschitz_bound(params),
        "admissible_delta_upper_bound": delta_upper,
        "t0_window": t0_window(params),
        "supersolution": sup_reports,
        "exp_barrier": exp_reports,
        "certified": bool(all_ok and is_admissible(params)),
    }
