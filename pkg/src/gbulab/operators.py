"""Discrete spatial operators: gradient, flux-form regularized diffusion,
gradient source, and strong/weak residuals.

The diffusion term is discretized in conservative flux form: face fluxes
F = (|grad u|^2 + eps)^((p-2)/2) * (normal derivative), with the face
gradient built from a two-point normal difference and (in 2D) tangential
components averaged from the four neighboring central differences. The
divergence is the difference of face fluxes. Nodal gradients use central
differences at interior nodes and one-sided second-order stencils on the
faces.
"""
from __future__ import annotations

import numpy as np

from .grid import Grid
from .problem import ProblemSpec, SolutionState


def gradient(state: SolutionState) -> tuple[np.ndarray, ...]:
    """Nodal gradient, one array per axis."""
    u = state.u
    grid = state.grid
    if grid.dimension == 1:
        h = grid.spacing[0]
        g = np.empty_like(u)
        g[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
        g[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
        g[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
        return (g,)
    out = []
    for axis in range(grid.dimension):
        h = grid.spacing[axis]
        g = np.empty_like(u)
        mid = [slice(None)] * grid.dimension
        lo = [slice(None)] * grid.dimension
        hi = [slice(None)] * grid.dimension
        mid[axis] = slice(1, -1)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        g[tuple(mid)] = (u[tuple(hi)] - u[tuple(lo)]) / (2.0 * h)

        first = [slice(None)] * grid.dimension
        first[axis] = 0
        s1 = [slice(None)] * grid.dimension
        s1[axis] = 1
        s2 = [slice(None)] * grid.dimension
        s2[axis] = 2
        g[tuple(first)] = (
            -3.0 * u[tuple(first)] + 4.0 * u[tuple(s1)] - u[tuple(s2)]
        ) / (2.0 * h)

        last = [slice(None)] * grid.dimension
        last[axis] = -1
        m1 = [slice(None)] * grid.dimension
        m1[axis] = -2
        m2 = [slice(None)] * grid.dimension
        m2[axis] = -3
        g[tuple(last)] = (
            3.0 * u[tuple(last)] - 4.0 * u[tuple(m1)] + u[tuple(m2)]
        ) / (2.0 * h)
        out.append(g)
    return tuple(out)


def face_fluxes(u: np.ndarray, grid: Grid, p: float, eps: float) -> list[np.ndarray]:
    """Diffusive flux on the faces along each axis.

    Along axis k the returned array has one fewer node in direction k; entry
    i is the flux on the face between nodes i and i+1. Tangential gradient
    components on faces touching a tangential boundary row are never used by
    interior divergences and are left zero.
    """
    dim = grid.dimension
    if dim == 1:
        h = grid.spacing[0]
        dn = (u[1:] - u[:-1]) / h
        return [np.power(dn * dn + eps, (p - 2.0) / 2.0) * dn]
    fluxes = []
    for axis in range(dim):
        h = grid.spacing[axis]
        lo = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        dn = (u[tuple(hi)] - u[tuple(lo)]) / h
        grad_sq = dn * dn
        if dim == 2:
            other = 1 - axis
            ho = grid.spacing[other]
            dt = np.zeros_like(dn)
            # average of the two nodal central differences across the face
            lo_p = [slice(None)] * 2
            lo_p[axis] = slice(0, -1)
            lo_p[other] = slice(2, None)
            lo_m = [slice(None)] * 2
            lo_m[axis] = slice(0, -1)
            lo_m[other] = slice(0, -2)
            hi_p = [slice(None)] * 2
            hi_p[axis] = slice(1, None)
            hi_p[other] = slice(2, None)
            hi_m = [slice(None)] * 2
            hi_m[axis] = slice(1, None)
            hi_m[other] = slice(0, -2)
            tang = (
                u[tuple(lo_p)] + u[tuple(hi_p)] - u[tuple(lo_m)] - u[tuple(hi_m)]
            ) / (4.0 * ho)
            mid = [slice(None)] * 2
            mid[other] = slice(1, -1)
            dt[tuple(mid)] = tang
            grad_sq = grad_sq + dt * dt
        coef = np.power(grad_sq + eps, (p - 2.0) / 2.0)
        fluxes.append(coef * dn)
    return fluxes


def regularized_diffusion(state: SolutionState, p: float, eps: float) -> np.ndarray:
    """div((|grad u|^2+eps)^((p-2)/2) grad u) at interior nodes; 0 on faces."""
    if not p > 2:
        raise ValueError(f"requires p > 2, got {p}")
    if eps < 0:
        raise ValueError("requires eps >= 0")
    grid = state.grid
    fluxes = face_fluxes(state.u, grid, p, eps)
    out = np.zeros(grid.shape)
    if grid.dimension == 1:
        flux = fluxes[0]
        out[1:-1] = (flux[1:] - flux[:-1]) / grid.spacing[0]
        return out
    inner = grid.interior_slice()
    acc = np.zeros([n - 2 for n in grid.shape])
    for axis, flux in enumerate(fluxes):
        h = grid.spacing[axis]
        lo = [slice(1, -1)] * grid.dimension
        hi = [slice(1, -1)] * grid.dimension
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        acc = acc + (flux[tuple(hi)] - flux[tuple(lo)]) / h
    out[inner] = acc
    return out


def gradient_source(
    state: SolutionState, q: float, eps: float, mu: float = 1.0
) -> np.ndarray:
    """mu * ((|grad u|^2+eps)^(q/2) - eps^(q/2)) from the nodal gradient.

    Nonnegative at every node; vanishes identically on constants for every
    eps because of the eps^(q/2) subtraction.
    """
    if eps < 0:
        raise ValueError("requires eps >= 0")
    if mu < 0:
        raise ValueError("requires mu >= 0")
    w = state.grad_mag
    return mu * (np.power(w * w + eps, q / 2.0) - eps ** (q / 2.0))


def interior_rhs(state: SolutionState, spec: ProblemSpec) -> np.ndarray:
    """diffusion + source; the explicit update direction. Zero on faces."""
    rhs = regularized_diffusion(state, spec.p, spec.epsilon)
    src = gradient_source(state, spec.q, spec.epsilon, spec.mu)
    inner = state.grid.interior_slice()
    rhs[inner] += src[inner]
    return rhs


def strong_residual(
    state: SolutionState, spec: ProblemSpec, u_t_field: np.ndarray
) -> np.ndarray:
    """u_t - diffusion - source on interior nodes (0 on faces)."""
    grid = state.grid
    res = np.zeros(grid.shape)
    inner = grid.interior_slice()
    rhs = interior_rhs(state, spec)
    res[inner] = np.asarray(u_t_field)[inner] - rhs[inner]
    return res


def quadrature_weights(grid: Grid) -> np.ndarray:
    """Trapezoid weights over the grid (tensor product in 2D)."""
    ws = []
    for axis in range(grid.dimension):
        n = grid.points_per_axis[axis]
        h = grid.spacing[axis]
        w = np.full(n, h)
        w[0] = w[-1] = h / 2.0
        ws.append(w)
    if grid.dimension == 1:
        return ws[0]
    return np.outer(ws[0], ws[1])


def integrate(grid: Grid, f: np.ndarray) -> float:
    return float(np.sum(quadrature_weights(grid) * f))


def weak_residual(states, spec: ProblemSpec, psi) -> float:
    """Space-time weak-form residual against a test function.

    Accepts a list of states or a trajectory carrying `.states`.
    psi(points, t) -> field must be nonnegative and vanish on the lateral
    boundary. The u_t term integrates the piecewise-linear-in-time u against
    the interval-averaged test function; the flux and source terms use the
    trapezoid rule in time. Near zero for genuine solutions, O(h^2 + dt)
    under refinement. Uses the unregularized forms |grad u|^(p-2), |grad u|^q.
    """
    states = getattr(states, "states", states)
    if len(states) < 2:
        raise ValueError("need at least 2 time levels")
    grid = spec.grid
    coords = grid.coords()
    bd = grid.boundary_mask()
    w = quadrature_weights(grid)

    def eval_psi(t: float) -> np.ndarray:
        f = np.asarray(psi(coords, t), dtype=float)
        if f.shape != grid.shape:
            raise ValueError("test function must evaluate to a grid field")
        if np.any(f < 0):
            raise ValueError("test function must be nonnegative")
        # accept roundoff-level boundary values (e.g. sin(pi*1.0)) and pin them
        scale = float(np.max(f)) if f.size else 0.0
        if np.any(np.abs(f[bd]) > 1e-12 * (1.0 + scale)):
            raise ValueError("test function must vanish on the lateral boundary")
        f = f.copy()
        f[bd] = 0.0
        return f

    def level_term(state: SolutionState, psi_f: np.ndarray) -> float:
        gpsi = gradient(SolutionState(grid, psi_f, state.t))
        gu = state.grad
        mag = state.grad_mag
        coef = np.power(mag, spec.p - 2.0)
        flux_dot = sum(coef * gu[k] * gpsi[k] for k in range(grid.dimension))
        source = spec.mu * np.power(mag, spec.q) * psi_f
        return float(np.sum(w * (flux_dot - source)))

    total = 0.0
    psi_prev = eval_psi(states[0].t)
    term_prev = level_term(states[0], psi_prev)
    for k in range(len(states) - 1):
        s0, s1 = states[k], states[k + 1]
        dt = s1.t - s0.t
        if dt <= 0:
            raise ValueError("states must be strictly increasing in time")
        psi_next = eval_psi(s1.t)
        term_next = level_term(s1, psi_next)
        psi_bar = 0.5 * (psi_prev + psi_next)
        total += float(np.sum(w * (s1.u - s0.u) * psi_bar))
        total += 0.5 * dt * (term_prev + term_next)
        psi_prev, term_prev = psi_next, term_next
    return total
