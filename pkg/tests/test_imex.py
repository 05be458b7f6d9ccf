import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from doubletaxis.discretization import interface_velocity
from doubletaxis.ecm import ic_random
from doubletaxis.grid import Grid2D, SimState, integrate
from doubletaxis.imex import StepControls, StepStats, ark_step, imex_step, select_dt, tableau
from doubletaxis.kinetics import ModelConfig
from doubletaxis.linsolve import SolverError

GAMMA = Fraction(1767732205903, 4055673282236)
NO_REACTIONS = dict(lambda0=0.0, gamma0=0.0, mu=0.0, mu_v=0.0, delta=0.0)


def exact_solve(M, rhs):
    """Gauss-Jordan on lists of Fractions."""
    n = len(rhs)
    aug = [list(M[i]) + [rhs[i]] for i in range(n)]
    for k in range(n):
        piv = next(r for r in range(k, n) if aug[r][k] != 0)
        aug[k], aug[piv] = aug[piv], aug[k]
        for r in range(n):
            if r != k and aug[r][k] != 0:
                f = aug[r][k] / aug[k][k]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[k])]
    return [aug[i][n] / aug[i][i] for i in range(n)]


def stability_function(z_exp, z_imp):
    """R = 1 + b^T (z_exp + z_imp) Y with (I - z_exp A_exp - z_imp A_imp) Y = 1, exactly."""
    ex = tableau().exact
    s = len(ex["b"])
    M = [[Fraction(int(i == j)) - z_exp * Fraction(ex["A_exp"][i][j]) - z_imp * Fraction(ex["A_imp"][i][j])
          for j in range(s)] for i in range(s)]
    Y = exact_solve(M, [Fraction(1)] * s)
    # stage derivatives are z_exp*Y + z_imp*Y for the split linear problem
    return 1 + sum(Fraction(b) * (z_exp + z_imp) * y for b, y in zip(ex["b"], Y))


def scalar_step(y, dt, lam_exp=0.0, lam_imp=0.0, explicit=None):
    explicit = explicit or (lambda W: {"y": lam_exp * W["y"]})
    L = sp.csr_matrix([[lam_imp]])
    out = ark_step({"y": np.array([y])}, dt, explicit, lambda W: {"y": L}, tol=1e-15)
    return float(out["y"][0])


class TestTableau:
    def test_shapes_and_nodes(self):
        t = tableau()
        assert t.stages == 4
        assert t.c[2] == 0.6
        assert t.b[3] == pytest.approx(0.4358665215, abs=1e-10)
        assert t.gamma == float(GAMMA)

    def test_exact_values(self):
        ex = tableau().exact
        assert ex["A_imp"][1][1] == GAMMA and ex["A_imp"][3][3] == GAMMA
        assert ex["c"][1] == 2 * GAMMA
        assert ex["A_exp"][3][1] == Fraction(-4246266847089, 9704473918619)

    def test_order_conditions(self):
        t = tableau()
        assert abs(t.b.sum() - 1) <= 1e-12
        assert abs(t.b @ t.c - 0.5) <= 1e-12
        assert abs(t.b @ t.c ** 2 - 1 / 3) <= 1e-12

    @pytest.mark.parametrize("which", ["A_exp", "A_imp"])
    def test_row_sums_equal_nodes(self, which):
        t = tableau()
        assert np.allclose(getattr(t, which).sum(axis=1), t.c, rtol=0, atol=1e-12)

    def test_implicit_part_stiffly_accurate(self):
        t = tableau()
        assert np.array_equal(t.A_imp[-1], t.b)

    def test_structure(self):
        t = tableau()
        assert np.all(np.triu(t.A_exp) == 0)
        assert np.all(np.triu(t.A_imp, 1) == 0)
        assert t.A_imp[0, 0] == 0 and np.all(np.diag(t.A_imp)[1:] == t.gamma)


class TestScalarProblems:
    def test_implicit_decay_matches_stability_function(self):
        R = stability_function(Fraction(0), Fraction(-1, 10))
        assert scalar_step(1.0, 0.1, lam_imp=-1.0) == pytest.approx(float(R), rel=1e-12)

    def test_explicit_decay_matches_stability_function(self):
        R = stability_function(Fraction(-1, 10), Fraction(0))
        assert scalar_step(1.0, 0.1, lam_exp=-1.0) == pytest.approx(float(R), rel=1e-14)

    @pytest.mark.parametrize("le, li", [(-0.5, -2.0), (0.3, -1.0), (-1.0, -10.0)])
    def test_split_decay_matches_stability_function(self, le, li):
        dt = Fraction(1, 10)
        R = stability_function(Fraction(le) * dt, Fraction(li) * dt)
        assert scalar_step(1.0, float(dt), lam_exp=le, lam_imp=li) == pytest.approx(float(R), rel=1e-12)

    def test_stiff_decay_is_damped(self):
        # L-stability: large implicit stiffness drives the amplification factor towards 0
        assert abs(scalar_step(1.0, 1.0, lam_imp=-1e6)) < 1e-5

    @staticmethod
    def _order(errors):
        e = np.asarray(errors)
        return np.log2(e[:-1] / e[1:])

    def test_implicit_order(self):
        errs = []
        for dt in (0.1, 0.05, 0.025):
            y = 1.0
            for _ in range(round(1 / dt)):
                y = scalar_step(y, dt, lam_imp=-1.0)
            errs.append(abs(y - math.exp(-1)))
        assert np.all(self._order(errs) >= 2.7)

    def test_additive_order_nonlinear(self):
        # y' = -y (implicit) + y^2 / 2 (explicit), a Bernoulli equation with closed form
        k, c, y0, T = 1.0, 0.5, 1.0, 1.0
        exact = k / (c + (k / y0 - c) * math.exp(k * T))
        errs = []
        for dt in (0.1, 0.05, 0.025):
            y = y0
            for _ in range(round(T / dt)):
                y = scalar_step(y, dt, lam_imp=-k, explicit=lambda W: {"y": c * W["y"] ** 2})
            errs.append(abs(y - exact))
        assert np.all(self._order(errs) >= 2.7)


class TestSelectDt:
    def test_zero_velocity_gives_cap(self, grid8):
        s = SimState(grid8, grid8.zeros(), grid8.zeros(), np.full(grid8.shape, 0.5))
        assert select_dt(s, ModelConfig(), StepControls()) == 0.01

    def test_cfl_formula(self):
        g = Grid2D.square(128)
        s = ic_random(g, seed=2)
        cfg = ModelConfig()
        amax = interface_velocity(s, cfg).max_abs()
        ctl = StepControls(cfl=0.4, dt_max=10.0)
        assert select_dt(s, cfg, ctl) == pytest.approx(0.4 * g.h / amax, rel=1e-15)

    def test_cap_applies(self, monkeypatch):
        import doubletaxis.imex as imex

        class Fake:
            def max_abs(self):
                return 0.8

        monkeypatch.setattr(imex, "interface_velocity", lambda state, cfg: Fake())
        g = Grid2D.square(128)
        s = SimState(g, g.zeros(), g.zeros(), g.zeros())
        assert 0.4 * g.h / 0.8 == 0.015625
        assert select_dt(s, ModelConfig(), StepControls()) == 0.01
        assert select_dt(s, ModelConfig(), StepControls(dt_max=1.0)) == 0.015625

    def test_fixed_overrides(self, grid8):
        s = SimState(grid8, grid8.zeros(), grid8.zeros(), grid8.zeros())
        assert select_dt(s, ModelConfig(), StepControls(dt_fixed=1e-3)) == 1e-3

    @pytest.mark.parametrize("kw", [{"cfl": 0.0}, {"cfl": 1.5}, {"dt_max": 0.0}, {"dt_fixed": -1.0}])
    def test_invalid_controls(self, kw):
        with pytest.raises(ValueError):
            StepControls(**kw)


class TestImexStep:
    def test_constant_state_is_fixed_point(self, grid8):
        cfg = ModelConfig(diffusion_kind="Constant", **NO_REACTIONS)
        f = lambda val: np.full(grid8.shape, val)  # noqa: E731
        s = SimState(grid8, f(0.3), f(0.2), f(0.4))
        out = imex_step(s, 0.01, cfg)
        for a, b in zip(out.fields().values(), s.fields().values()):
            assert np.allclose(a, b, rtol=0, atol=1e-13)
        assert out.t == pytest.approx(0.01)

    def test_mass_conserved_without_reactions(self):
        g = Grid2D.square(32)
        s = ic_random(g, seed=5)
        cfg = ModelConfig(**NO_REACTIONS)
        m0 = integrate(g, s.m)
        for _ in range(50):
            s = imex_step(s, select_dt(s, cfg, StepControls()), cfg)
        assert abs(integrate(g, s.m) - m0) <= 1e-12 * m0

    def test_tissue_and_pcc_are_explicit_only(self, grid8, rng):
        cfg = ModelConfig()
        s = SimState(grid8, *(rng.uniform(0, 0.3, grid8.shape) for _ in range(3)))
        stats = StepStats()
        imex_step(s, 0.005, cfg, stats=stats)
        assert stats.solves == 3  # one diffusing species, three implicit stages

    def test_acidity_solves_two_species(self, grid8, rng):
        cfg = ModelConfig(repellent_target="Acidity", proliferation_kind="AcidityDependent")
        s = SimState(grid8, *(rng.uniform(0, 0.3, grid8.shape) for _ in range(3)),
                     h=rng.uniform(0.2, 1.2, grid8.shape))
        stats = StepStats()
        out = imex_step(s, 0.005, cfg, stats=stats)
        assert stats.solves == 6 and out.h is not None

    def test_rejects_nonpositive_dt(self, grid8):
        s = SimState(grid8, grid8.zeros(), grid8.zeros(), grid8.zeros())
        with pytest.raises(ValueError):
            imex_step(s, 0.0, ModelConfig())

    def test_solver_failure_propagates(self, grid8, rng):
        s = SimState(grid8, *(rng.uniform(0, 0.3, grid8.shape) for _ in range(3)))
        with pytest.raises(SolverError):
            imex_step(s, 0.01, ModelConfig(D_c=50.0), max_iter=1, tol=1e-15)
