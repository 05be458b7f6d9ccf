import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doubletaxis.discretization import (
    advection_divergence,
    advective_flux,
    diffusion_operator,
    explicit_rhs,
    interface_velocity,
    mc_slope,
    mc_slopes,
)
from doubletaxis.grid import Grid2D, SimState, integrate
from doubletaxis.kinetics import ModelConfig


def random_state(grid, rng, with_h=False):
    m, p, v = (rng.uniform(0, 0.4, grid.shape) for _ in range(3))
    h = rng.uniform(0.1, 1.5, grid.shape) if with_h else None
    return SimState(grid, m, p, v, h)


@pytest.fixture
def unit_chi(monkeypatch):
    """chi1 = 1, chi2 = 0 regardless of the state."""
    import doubletaxis.discretization as disc

    monkeypatch.setattr(disc, "taxis_sensitivities",
                        lambda m, p, v, cfg: (np.ones_like(m), np.zeros_like(m)))
    return ModelConfig()


class TestMCSlope:
    @pytest.mark.parametrize("u, expected", [
        ((0.0, 1.0, 2.0), 1.0),
        ((0.0, 1.0, 0.0), 0.0),
        ((0.0, 1.0, 4.0), 2.0),
        ((4.0, 1.0, 0.0), -2.0),
        ((1.0, 1.0, 1.0), 0.0),
    ])
    def test_examples(self, u, expected):
        assert mc_slope(*u, 1.0) == expected

    def test_rejects_bad_width(self):
        with pytest.raises(ValueError):
            mc_slope(0.0, 1.0, 2.0, 0.0)

    @settings(max_examples=200)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), st.floats(1e-3, 10.0))
    def test_reconstruction_is_range_bounded(self, u, h):
        ul, uc, ur = u
        s = float(mc_slope(ul, uc, ur, h))
        lo, hi = min(u), max(u)
        tol = 1e-9 * (1 + abs(lo) + abs(hi))
        for face in (uc + 0.5 * h * s, uc - 0.5 * h * s):
            assert lo - tol <= face <= hi + tol

    def test_wall_slopes_vanish_normal_to_wall(self, rng):
        u = rng.uniform(size=(6, 6))
        sx, sy = mc_slopes(u, 0.5)
        assert np.all(sx[:, [0, -1]] == 0) and np.all(sy[[0, -1], :] == 0)


class TestInterfaceVelocity:
    def test_uniform_fields_give_zero(self, grid8):
        s = SimState(grid8, np.full(grid8.shape, 0.1), np.full(grid8.shape, 0.2), np.full(grid8.shape, 0.3))
        assert interface_velocity(s, ModelConfig()).max_abs() == 0.0

    def test_linear_tissue(self, grid8, unit_chi):
        x, _ = grid8.centers()
        s = SimState(grid8, grid8.zeros(), grid8.zeros(), 0.5 + 0.1 * x)
        a = interface_velocity(s, unit_chi)
        assert np.allclose(a.x_edges[:, 1:-1], 0.1, atol=1e-14)
        assert np.all(a.y_edges == 0)

    def test_hand_value(self):
        g = Grid2D(2, 2, -0.5, 0.5, -0.5, 0.5)
        v = np.array([[0.0, 0.5], [0.0, 0.5]])
        s = SimState(g, g.zeros(), g.zeros(), v)
        a = interface_velocity(s, ModelConfig(sensitivity_kind="EquilibriumValues", k_D=1.0))
        assert a.x_edges[:, 1] == pytest.approx([0.2, 0.2], rel=1e-14)

    def test_wall_faces_are_zero(self, grid8, rng):
        a = interface_velocity(random_state(grid8, rng), ModelConfig())
        assert a.x_edges.shape == (8, 9) and a.y_edges.shape == (9, 8)
        assert np.all(a.x_edges[:, [0, -1]] == 0) and np.all(a.y_edges[[0, -1], :] == 0)

    def test_acidity_target_uses_h(self, grid8, rng):
        s = random_state(grid8, rng, with_h=True)
        cfg = ModelConfig(repellent_target="Acidity")
        a = interface_velocity(s, cfg).x_edges
        flat_h = interface_velocity(s.replace(h=np.ones(grid8.shape)), cfg).x_edges
        assert not np.allclose(a, flat_h)
        with pytest.raises(ValueError):
            interface_velocity(s.replace(h=None), cfg)


class TestAdvectiveFlux:
    @pytest.mark.parametrize("a, expected", [(1.0, 2.0), (-1.0, -5.0), (0.0, 0.0)])
    def test_upwinding(self, a, expected):
        assert advective_flux(a, 2.0, 5.0) == expected


class TestAdvectionDivergence:
    def test_zero_velocity(self, grid8, rng):
        s = random_state(grid8, rng).replace(v=np.full(grid8.shape, 0.5), p=np.full(grid8.shape, 0.1))
        assert np.all(advection_divergence(s, ModelConfig()) == 0)

    def test_single_cell_hand_stencil(self, unit_chi):
        g = Grid2D.square(8)
        x, _ = g.centers()
        m = g.zeros()
        m[3, 3] = 0.2
        s = SimState(g, m, g.zeros(), 0.5 + 0.25 * x)
        div = advection_divergence(s, unit_chi)
        a = 0.25
        assert div[3, 3] == pytest.approx(-a * 0.2 / g.h, rel=1e-13)
        assert div[3, 4] == pytest.approx(a * 0.2 / g.h, rel=1e-13)
        div[3, 3] = div[3, 4] = 0.0
        assert np.all(div == 0)

    @pytest.mark.parametrize("n", [8, 16, 33])
    def test_conserves_mass(self, n, rng):
        g = Grid2D.square(n) if n % 2 == 0 else Grid2D(n, n, -2, 2, -2, 2)
        s = random_state(g, rng)
        div = advection_divergence(s, ModelConfig())
        scale = np.abs(div).sum() * g.h ** 2
        assert abs(integrate(g, div)) <= 1e-12 * max(scale, 1.0)


class TestDiffusionOperator:
    def test_constants_in_kernel(self, grid8, rng):
        L = diffusion_operator(random_state(grid8, rng), ModelConfig())
        assert np.allclose(L @ np.full(64, 3.0), 0.0, atol=1e-12)

    def test_symmetric(self, grid8, rng):
        L = diffusion_operator(random_state(grid8, rng), ModelConfig())
        assert abs(L - L.T).max() == 0.0

    def test_five_point_pattern(self, grid8, rng):
        L = diffusion_operator(random_state(grid8, rng), ModelConfig())
        assert np.diff(L.indptr).max() == 5 and np.diff(L.indptr).min() == 3

    def test_unit_stencil(self):
        g = Grid2D(5, 5, 0.0, 5.0, 0.0, 5.0)  # h = 1
        cfg = ModelConfig(diffusion_kind="Constant", D_c=1.0)
        L = diffusion_operator(SimState(g, g.zeros(), g.zeros(), g.zeros()), cfg)
        u = g.zeros()
        u[2, 2] = 1.0
        Lu = (L @ u.ravel()).reshape(g.shape)
        assert Lu[2, 2] == -4.0
        assert [Lu[1, 2], Lu[3, 2], Lu[2, 1], Lu[2, 3]] == [1.0, 1.0, 1.0, 1.0]
        assert np.abs(Lu).sum() == 8.0

    def test_exact_on_linear_interior(self):
        g = Grid2D.square(16)
        x, _ = g.centers()
        cfg = ModelConfig(diffusion_kind="Constant", D_c=0.7)
        L = diffusion_operator(SimState(g, g.zeros(), g.zeros(), g.zeros()), cfg)
        Lu = (L @ x.ravel()).reshape(g.shape)
        assert np.allclose(Lu[1:-1, 1:-1], 0.0, atol=1e-12)

    def test_second_order_truncation(self):
        # cos(pi (x + 2) / 4) satisfies the zero-flux condition on [-2, 2]
        cfg = ModelConfig(diffusion_kind="Constant", D_c=1.0)
        errors = []
        for n in (32, 64, 128):
            g = Grid2D.square(n)
            x, y = g.centers()
            k = np.pi / 4
            u = np.cos(k * (x + 2)) * np.cos(k * (y + 2))
            L = diffusion_operator(SimState(g, g.zeros(), g.zeros(), g.zeros()), cfg)
            err = (L @ u.ravel()).reshape(g.shape) + 2 * k ** 2 * u
            errors.append(np.abs(err[1:-1, 1:-1]).max())
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders >= 1.9)

    def test_acidity_species(self, grid8, rng):
        cfg = ModelConfig(repellent_target="Acidity", proliferation_kind="AcidityDependent")
        L = diffusion_operator(random_state(grid8, rng, with_h=True), cfg, "h")
        assert L.diagonal()[27] == pytest.approx(-4 * cfg.D_h / grid8.h ** 2)

    @pytest.mark.parametrize("species", ["p", "v", "h"])
    def test_non_diffusing_species(self, grid8, rng, species):
        with pytest.raises(ValueError):
            diffusion_operator(random_state(grid8, rng), ModelConfig(), species)


class TestExplicitRHS:
    def test_fixed_point(self, grid8):
        cfg = ModelConfig(lambda0=0.0, gamma0=0.0)
        one = np.ones(grid8.shape)
        s = SimState(grid8, 0 * one, 0 * one, one)  # v = 1 is a rest state of remodeling
        out = explicit_rhs(s, cfg)
        for f in out.values():
            assert np.all(f == 0)

    def test_no_mcc_leaves_switch_source(self, grid8, rng):
        cfg = ModelConfig()
        s = random_state(grid8, rng).replace(m=grid8.zeros())
        assert np.allclose(explicit_rhs(s, cfg)["m"], cfg.lambda0 * s.p, rtol=1e-14)

    def test_all_rates_zero(self, grid8):
        cfg = ModelConfig(lambda0=0.0, gamma0=0.0, mu=0.0, mu_v=0.0, delta=0.0)
        s = SimState(grid8, np.full(grid8.shape, 0.1), np.full(grid8.shape, 0.2), np.full(grid8.shape, 0.4))
        assert all(np.all(f == 0) for f in explicit_rhs(s, cfg).values())

    def test_acidity_has_four_species(self, grid8, rng):
        cfg = ModelConfig(repellent_target="Acidity", proliferation_kind="AcidityDependent")
        out = explicit_rhs(random_state(grid8, rng, with_h=True), cfg)
        assert set(out) == {"m", "p", "v", "h"}
