import numpy as np
import pytest

from gbulab import (
    SolutionState,
    build_grid,
    gradient,
    gradient_source,
    make_spec,
    regularized_diffusion,
    strong_residual,
    weak_residual,
)
from gbulab.operators import face_fluxes, integrate, quadrature_weights
from gbulab.problem import ProblemSpec


def state_1d(f, n=11, extent=(0.0, 1.0)):
    g = build_grid(extent, n)
    return SolutionState(g, f(g.axis_coords(0)))


def state_2d(f, n=11):
    g = build_grid([(0, 1), (0, 1)], (n, n))
    x, y = g.coords()
    return SolutionState(g, f(x, y))


# -- gradient ------------------------------------------------------------------

def test_gradient_constant_is_zero():
    st = state_1d(lambda x: np.full_like(x, 5.0))
    assert np.all(gradient(st)[0] == 0.0)
    st2 = state_2d(lambda x, y: np.full_like(x, 5.0))
    gx, gy = gradient(st2)
    assert np.all(gx == 0.0) and np.all(gy == 0.0)


def test_gradient_exact_on_linear_everywhere():
    st = state_1d(lambda x: x)
    assert np.allclose(gradient(st)[0], 1.0, atol=1e-13)


def test_gradient_exact_on_quadratic():
    # central difference of x^2 at x=0.5 with h=0.1 is exactly 1.0
    st = state_1d(lambda x: x * x, n=11)
    g = gradient(st)[0]
    assert g[5] == pytest.approx(1.0, abs=1e-13)
    x = st.grid.axis_coords(0)
    assert np.allclose(g, 2 * x, atol=1e-12)  # one-sided ends exact too


def test_gradient_2d_components():
    st = state_2d(lambda x, y: 2 * x + 3 * y)
    gx, gy = gradient(st)
    assert np.allclose(gx, 2.0, atol=1e-12)
    assert np.allclose(gy, 3.0, atol=1e-12)


def test_gradient_cache_matches_fresh():
    st = state_1d(np.sin, n=31)
    cached = st.grad_mag.copy()
    assert np.array_equal(cached, np.abs(gradient(st)[0]))


# -- regularized diffusion -------------------------------------------------------

def test_diffusion_constant_zero():
    st = state_1d(lambda x: np.full_like(x, 2.0))
    assert np.all(regularized_diffusion(st, 3.0, 0.1) == 0.0)


def test_diffusion_linear_zero_flux_divergence():
    # flux of u = x is the constant (1 + eps)^((p-2)/2)
    st = state_1d(lambda x: x)
    out = regularized_diffusion(st, 3.0, 0.01)
    assert np.allclose(out, 0.0, atol=1e-13)


def test_diffusion_quadratic_1d_closed_form():
    # d/dx(|2x| 2x) = 8x for x > 0; flux form is exact on this data
    st = state_1d(lambda x: x * x, n=11)
    out = regularized_diffusion(st, 3.0, 0.0)
    assert out[5] == pytest.approx(4.0, abs=1e-10)
    x = st.grid.axis_coords(0)
    assert np.allclose(out[1:-1], 8 * x[1:-1], atol=1e-9)


def closed_form_diffusion_1d(x, p, eps):
    # d/dx[ (4x^2+eps)^((p-2)/2) * 2x ] for u = x^2
    s = 4 * x * x + eps
    return (p - 2.0) * s ** ((p - 4.0) / 2.0) * 4 * x * 2 * x + s ** ((p - 2.0) / 2.0) * 2.0


def test_diffusion_order_two_on_regularized_quadratic():
    # eps > 0 makes the flux non-polynomial, so the error is genuinely O(h^2)
    p, eps = 3.0, 0.5
    errs = []
    hs = []
    for n in (33, 65, 129):
        g = build_grid((0.0, 1.0), n)
        x = g.axis_coords(0)
        st = SolutionState(g, x * x)
        out = regularized_diffusion(st, p, eps)
        exact = closed_form_diffusion_1d(x, p, eps)
        inner = slice(1, -1)
        errs.append(np.max(np.abs(out[inner] - exact[inner])))
        hs.append(g.spacing[0])
    order = np.log(errs[0] / errs[2]) / np.log(hs[0] / hs[2])
    assert order == pytest.approx(2.0, abs=0.3)


def test_diffusion_order_two_on_sine():
    p, eps = 3.0, 0.1

    def exact(x):
        up = np.pi * np.cos(np.pi * x)
        upp = -np.pi**2 * np.sin(np.pi * x)
        s = up * up + eps
        return (p - 2.0) * s ** ((p - 4.0) / 2.0) * up * upp * up + s ** ((p - 2.0) / 2.0) * upp

    errs, hs = [], []
    for n in (33, 65, 129):
        g = build_grid((0.0, 1.0), n)
        x = g.axis_coords(0)
        st = SolutionState(g, np.sin(np.pi * x))
        out = regularized_diffusion(st, p, eps)
        inner = slice(1, -1)
        errs.append(np.max(np.abs(out[inner] - exact(x)[inner])))
        hs.append(g.spacing[0])
    order = np.log(errs[0] / errs[2]) / np.log(hs[0] / hs[2])
    assert order == pytest.approx(2.0, abs=0.3)


def test_diffusion_conservative_dirichlet_1d():
    st = state_1d(lambda x: np.sin(2.2 * x) + x, n=41)
    p, eps = 3.5, 0.2
    out = regularized_diffusion(st, p, eps)
    flux = face_fluxes(st.u, st.grid, p, eps)[0]
    h = st.grid.spacing[0]
    interior_sum = np.sum(out[1:-1]) * h
    assert interior_sum == pytest.approx(flux[-1] - flux[0], rel=1e-12)


def test_diffusion_conservative_dirichlet_2d():
    st = state_2d(lambda x, y: np.sin(2 * x) * np.cos(y) + x * y, n=17)
    p, eps = 3.0, 0.3
    out = regularized_diffusion(st, p, eps)
    fx, fy = face_fluxes(st.u, st.grid, p, eps)
    hx, hy = st.grid.spacing
    interior_sum = np.sum(out[1:-1, 1:-1]) * hx * hy
    net = (
        np.sum(fx[-1, 1:-1] - fx[0, 1:-1]) * hy
        + np.sum(fy[1:-1, -1] - fy[1:-1, 0]) * hx
    )
    assert interior_sum == pytest.approx(net, rel=1e-12)


def test_diffusion_conservative_periodic_wrapper():
    # test-only periodic wrap: fluxes on all faces of the circle sum to zero
    n, h = 40, 1.0 / 40
    x = np.arange(n) * h
    u = np.sin(2 * np.pi * x) + 0.3 * np.cos(4 * np.pi * x)
    du = (np.roll(u, -1) - u) / h
    coef = np.power(du * du + 0.2, 0.5)
    flux = coef * du
    div = (flux - np.roll(flux, 1)) / h
    assert np.sum(div) == pytest.approx(0.0, abs=1e-12)


def test_diffusion_rejects_bad_args():
    st = state_1d(lambda x: x)
    with pytest.raises(ValueError):
        regularized_diffusion(st, 2.0, 0.1)
    with pytest.raises(ValueError):
        regularized_diffusion(st, 3.0, -0.1)


# -- gradient source ---------------------------------------------------------------

def test_source_constant_cancels_exactly():
    for eps in (0.0, 0.5, 1.0):
        st = state_1d(lambda x: np.full_like(x, 3.0))
        assert np.all(gradient_source(st, 3.0, eps) == 0.0)


def test_source_ramp_values():
    st = state_1d(lambda x: x)
    src = gradient_source(st, 3.0, 0.0, 1.0)
    assert np.allclose(src[1:-1], 1.0, atol=1e-12)  # |u'| = 1, 1^3
    src2 = gradient_source(st, 2.0, 1.0, 1.0)
    assert np.allclose(src2[1:-1], 1.0, atol=1e-12)  # (1+1)^1 - 1


def test_source_nonnegative_on_random_fields():
    rng = np.random.default_rng(3)
    g = build_grid((0.0, 1.0), 33)
    for _ in range(20):
        st = SolutionState(g, rng.uniform(0, 2, size=33))
        for eps in (0.0, 1e-3, 1.0):
            assert np.all(gradient_source(st, 2.7, eps) >= 0.0)


def test_source_epsilon_monotonicity_bound():
    # mean-value bound on the eps sensitivity of the source
    g = build_grid((0.0, 1.0), 65)
    x = g.axis_coords(0)
    st = SolutionState(g, np.sin(np.pi * x))
    q = 3.0
    e1, e2 = 0.01, 0.05
    s1 = gradient_source(st, q, e1)
    s2 = gradient_source(st, q, e2)
    w2 = st.grad_mag**2
    bound = abs(e2 ** (q / 2) - e1 ** (q / 2)) + q / 2 * (e2 - e1) * np.power(
        w2 + e2, q / 2 - 1
    )
    assert np.all(np.abs(s2 - s1) <= bound + 1e-12)


def test_source_exact_on_quadratic_gradient():
    # central differences are exact on x^2, so the source matches the closed
    # form to machine precision for every eps
    g = build_grid((0.0, 1.0), 33)
    x = g.axis_coords(0)
    st = SolutionState(g, x * x)
    q, eps, mu = 3.5, 0.3, 0.7
    src = gradient_source(st, q, eps, mu)
    exact = mu * (np.power(4 * x * x + eps, q / 2) - eps ** (q / 2))
    assert np.max(np.abs(src - exact)) < 1e-12


# -- strong residual ----------------------------------------------------------------

def make_spec_1d(n=41, **kw):
    g = build_grid((0.0, 1.0), n)
    kw.setdefault("p", 3.0)
    kw.setdefault("q", 2.5)
    return make_spec(g, **kw)


def test_strong_residual_stationary_constant():
    spec = make_spec_1d(profile="constant", amplitude=2.0)
    st = spec.initial_state()
    res = strong_residual(st, spec, np.zeros(41))
    assert np.all(res == 0.0)


def test_strong_residual_identity_on_random_field():
    rng = np.random.default_rng(11)
    g = build_grid((0.0, 1.0), 31)
    u0 = rng.uniform(0.0, 1.0, 31)
    u0[0] = u0[-1] = 0.4
    gfield = np.full(31, 0.4)
    spec = ProblemSpec(
        grid=g, p=3.2, q=2.8, epsilon=0.02, mu=1.0,
        boundary_values=gfield, initial=u0,
    )
    st = spec.initial_state()
    from gbulab.operators import interior_rhs

    rhs = interior_rhs(st, spec)
    res = strong_residual(st, spec, rhs)
    assert np.max(np.abs(res)) == 0.0


def test_strong_residual_manufactured_quadratic():
    # u(x, t) = x^2 + t solves u_t = 1; residual = 1 - rhs is O(h^2)-accurate
    # against the closed form because the operators are exact/2nd order
    errs = []
    for n in (33, 65):
        g = build_grid((0.0, 1.0), n)
        x = g.axis_coords(0)
        spec = ProblemSpec(
            grid=g, p=3.0, q=2.5, epsilon=0.1, mu=1.0,
            boundary_values=x * x, initial=x * x,
        )
        st = spec.initial_state()
        res = strong_residual(st, spec, np.ones(n))
        exact_rhs = closed_form_diffusion_1d(x, 3.0, 0.1) + (
            np.power(4 * x * x + 0.1, 2.5 / 2) - 0.1 ** (2.5 / 2)
        )
        exact_res = 1.0 - exact_rhs
        errs.append(np.max(np.abs(res[1:-1] - exact_res[1:-1])))
    assert errs[1] < errs[0] / 3.0  # ~O(h^2)


# -- weak residual -------------------------------------------------------------------

def bump(coords, t):
    x = coords[0]
    return np.sin(np.pi * x) ** 2


def test_weak_residual_stationary_constant():
    spec = make_spec_1d(profile="constant", amplitude=1.5)
    s0 = spec.initial_state()
    s1 = SolutionState(spec.grid, s0.u.copy(), 0.1)
    assert weak_residual([s0, s1], spec, bump) == pytest.approx(0.0, abs=1e-14)


def test_weak_residual_zero_test_function():
    spec = make_spec_1d(profile="sine")
    s0 = spec.initial_state()
    s1 = SolutionState(spec.grid, s0.u * 0.9, 0.05)
    psi0 = lambda coords, t: np.zeros_like(coords[0])
    assert weak_residual([s0, s1], spec, psi0) == 0.0


def test_weak_residual_rejects_bad_test_function():
    spec = make_spec_1d(profile="sine")
    s0 = spec.initial_state()
    s1 = SolutionState(spec.grid, s0.u * 0.9, 0.05)
    with pytest.raises(ValueError):
        weak_residual([s0, s1], spec, lambda c, t: -np.ones_like(c[0]))
    with pytest.raises(ValueError):
        weak_residual([s0, s1], spec, lambda c, t: np.ones_like(c[0]))


def test_weak_residual_small_on_solver_output():
    from gbulab import StepControl, run

    vals = []
    for n in (51, 101):
        g = build_grid((0.0, 1.0), n)
        spec = make_spec(g, p=3.0, q=2.5, epsilon=1e-3, profile="sine")
        traj, rep = run(spec, StepControl(t_end=0.01, snapshot_every=1))
        assert rep.verdict == "Completed"
        vals.append(abs(weak_residual(traj.states, spec, bump)))
    # residual is already small and shrinks (or stays tiny) under refinement
    assert vals[0] < 2e-3
    assert vals[1] < max(vals[0], 1e-6)


# -- quadrature -----------------------------------------------------------------------

def test_trapezoid_weights_sum_to_measure():
    g = build_grid((0.0, 2.0), 21)
    assert integrate(g, np.ones(21)) == pytest.approx(2.0)
    g2 = build_grid([(0, 1), (0, 3)], (11, 13))
    assert integrate(g2, np.ones((11, 13))) == pytest.approx(3.0)


def test_quadrature_weights_boundary_halved():
    g = build_grid((0.0, 1.0), 11)
    w = quadrature_weights(g)
    assert w[0] == pytest.approx(w[5] / 2)
