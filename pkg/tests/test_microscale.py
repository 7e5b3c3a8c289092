"""Fine-scale solvers and the fixed-step integrators."""

import numpy as np
import pytest

from holodisc import (
    ConfigError,
    StabilityError,
    burgers_rhs,
    check_scheme_legal,
    integrate,
    lattice_rhs,
    rk4_step,
    step,
)


class TestBurgersRhs:
    def test_constant_state_is_stationary(self):
        u = 0.8 * np.ones(16)
        for form in ("advective", "conservative", "skew"):
            out = burgers_rhs(u, 0.1, alpha=2.0, eps=0.0, phi=0.0, form=form)
            assert np.allclose(out, 0.0)

    def test_diffusion_eigenvalue_on_fourier_mode(self):
        n = 32
        dx = 2.0 * np.pi / n
        x = dx * np.arange(n)
        u = np.cos(x)
        out = burgers_rhs(u, dx, alpha=0.0, eps=0.0, phi=0.0)
        lam = (2.0 * np.cos(dx) - 2.0) / dx**2
        assert np.allclose(out, lam * u, atol=1e-12)

    def test_advection_forms_converge_together(self):
        """Both advection discretisations approach alpha u u_x at order 2."""
        alpha = 1.3
        sups = {}
        for n in (64, 128):
            dx = 2.0 * np.pi / n
            x = dx * np.arange(n)
            u = 0.4 + 0.3 * np.sin(x)
            exact = -0.3 * np.sin(x) - alpha * u * 0.3 * np.cos(x)
            for form in ("advective", "conservative", "skew"):
                out = burgers_rhs(u, dx, alpha, 0.0, 0.0, form=form)
                sups.setdefault(form, []).append(np.max(np.abs(out - exact)))
        for form, (coarse, fine) in sups.items():
            assert coarse / fine > 3.5, form

    def test_skew_form_conserves_energy(self, rng):
        u = rng.normal(size=24)
        dx = 0.2
        adv = burgers_rhs(u, dx, 1.0, 0.0, 0.0, form="skew") - burgers_rhs(
            u, dx, 0.0, 0.0, 0.0
        )
        assert abs(np.dot(u, adv)) < 1e-10 * np.sum(u * u)

    def test_unknown_form_rejected(self):
        with pytest.raises(ConfigError):
            burgers_rhs(np.ones(4), 0.1, 1.0, 0.0, 0.0, form="upwind")

    def test_forcing_enters_linearly(self):
        u = np.zeros(8)
        phi = np.arange(8.0)
        out = burgers_rhs(u, 0.1, 1.0, eps=0.25, phi=phi)
        assert np.allclose(out, 0.25 * phi)


class TestLatticeRhs:
    def test_constant_state_is_stationary(self):
        u = 1.1 * np.ones(8)
        assert np.allclose(lattice_rhs(u, 1.0, alpha=0.7, eps=0.0, phi=0.0), 0.0)

    def test_period_two_mode_decays_at_sixteen(self):
        H = 1.5
        u = np.array([1.0, -1.0] * 4)
        out = lattice_rhs(u, H, alpha=0.0, eps=0.0, phi=0.0)
        assert np.allclose(out, -(16.0 / H**2) * u)

    def test_period_four_mode_decays_at_eight(self):
        H = 1.5
        u = np.array([1.0, 0.0, -1.0, 0.0] * 2)
        out = lattice_rhs(u, H, alpha=0.0, eps=0.0, phi=0.0)
        assert np.allclose(out, -(8.0 / H**2) * u)

    def test_needs_positive_spacing(self):
        with pytest.raises(ConfigError):
            lattice_rhs(np.ones(4), 0.0, 1.0, 0.0, 0.0)


class TestSteppers:
    def test_rk4_accuracy_on_linear_decay(self):
        rhs = lambda u, t: -u
        u = np.array([1.0])
        for k in range(1000):
            u = rk4_step(u, rhs, k * 1e-3, 1e-3)
        assert abs(u[0] - np.exp(-1.0)) < 1e-9

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ConfigError):
            step(np.ones(2), lambda u, t: -u, 0.0, 0.1, scheme="leapfrog")

    def test_step_needs_positive_dt(self):
        with pytest.raises(ConfigError):
            step(np.ones(2), lambda u, t: -u, 0.0, 0.0)

    def test_euler_maruyama_advances_like_euler(self):
        u0 = np.array([2.0, -1.0])
        rhs = lambda u, t: -0.5 * u + t
        a = step(u0, rhs, 0.3, 0.01, scheme="euler")
        b = step(u0, rhs, 0.3, 0.01, scheme="euler-maruyama")
        assert np.array_equal(a, b)


class TestIntegrate:
    def test_records_every_k_steps_and_the_end(self):
        times, hist = integrate(
            np.ones(3), lambda u, t: -u, 0.0, 0.1, 1e-2, record_every=4
        )
        assert times[0] == 0.0
        assert np.isclose(times[-1], 0.1)
        assert hist.shape == (len(times), 3)
        assert np.allclose(np.diff(times)[:-1], 4e-2)

    def test_matches_exact_solution(self):
        times, hist = integrate(np.array([1.0]), lambda u, t: -u, 0.0, 1.0, 1e-3)
        assert np.allclose(hist[:, 0], np.exp(-times), atol=1e-9)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blowup_raises_stability_error(self):
        with pytest.raises(StabilityError, match="non-finite"):
            integrate(np.array([2.0]), lambda u, t: u * u, 0.0, 2.0, 1e-2)

    def test_window_must_be_ordered(self):
        with pytest.raises(ConfigError):
            integrate(np.ones(2), lambda u, t: -u, 1.0, 0.5, 1e-2)


class TestSchemeLegality:
    def test_white_noise_demands_euler_maruyama(self):
        with pytest.raises(ConfigError):
            check_scheme_legal("rk4", forcing_is_white=True)
        check_scheme_legal("euler-maruyama", forcing_is_white=True)
        check_scheme_legal("rk4", forcing_is_white=False)

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ConfigError):
            check_scheme_legal("heun", forcing_is_white=False)
