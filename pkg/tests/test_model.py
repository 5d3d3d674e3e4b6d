import numpy as np
import pytest

from wpp.errors import ParameterError, ShapeError
from wpp.model import (
    GaussianDataModel,
    OraclePredictor,
    ReconProfile,
    optimal_eps,
    perturbed_eps,
    recon_model_x0,
    reconstruct_x0,
    reverse_terminal_law,
)
from wpp.schedule import linear_schedule


@pytest.fixture(scope="module")
def sched():
    return linear_schedule(1000)


def forward_draw(model, sched, t, B, rng):
    x0 = model.sample(B, rng)
    eps = rng.standard_normal(x0.shape)
    ab = sched.alpha_bar[t]
    return x0, eps, np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def test_model_validation():
    with pytest.raises(ShapeError):
        GaussianDataModel(mu=np.zeros((4, 4)), s=np.ones((4, 4)))
    with pytest.raises(ShapeError):
        GaussianDataModel(mu=np.zeros((1, 4, 4)), s=np.ones((1, 2, 2)))
    with pytest.raises(ParameterError):
        GaussianDataModel(mu=np.zeros((1, 2, 2)), s=np.zeros((1, 2, 2)))
    m = GaussianDataModel.isotropic(0.5, 2.0, (3, 4, 4))
    assert m.shape == (3, 4, 4)
    assert np.all(m.s == 2.0)


def test_model_sample_moments():
    m = GaussianDataModel.isotropic(0.5, 2.0, (1, 4, 4))
    draws = m.sample(40000, np.random.default_rng(3))
    assert draws.shape == (40000, 1, 4, 4)
    assert np.allclose(draws.mean(axis=0), 0.5, atol=4 * 2.0 / np.sqrt(40000))
    assert np.allclose(draws.var(axis=0), 4.0, atol=0.2)


def test_optimal_eps_standard_normal_data(sched):
    # mu=0, s=1: posterior mean is sqrt(ab)*x, so eps* = sqrt(1-ab)*x
    m = GaussianDataModel.isotropic(0.0, 1.0, (1, 2, 2))
    rng = np.random.default_rng(5)
    x = rng.normal(size=(8, 1, 2, 2))
    for t in (1, 500, 1000):
        got = optimal_eps(m, sched, x, t)
        assert np.allclose(got, np.sqrt(1.0 - sched.alpha_bar[t]) * x, atol=1e-12)


def test_optimal_eps_near_deterministic_data(sched):
    # s -> 0 with x_t at the scaled mean: nothing to predict
    m = GaussianDataModel.isotropic(0.7, 1e-8, (1, 2, 2))
    t = 400
    x = np.sqrt(sched.alpha_bar[t]) * np.full((1, 1, 2, 2), 0.7)
    assert np.max(np.abs(optimal_eps(m, sched, x, t))) < 1e-6


def test_optimal_eps_t_range(sched):
    m = GaussianDataModel.isotropic(0.0, 1.0, (1, 2, 2))
    x = np.zeros((1, 1, 2, 2))
    with pytest.raises(ParameterError):
        optimal_eps(m, sched, x, 0)
    with pytest.raises(ParameterError):
        optimal_eps(m, sched, x, 1001)


def test_optimal_eps_beats_competitors(sched):
    # the closed form should dominate both the zero predictor and a
    # mean-mismatched predictor by a clear Monte-Carlo margin
    m = GaussianDataModel.isotropic(0.8, 1.3, (1, 2, 2))
    wrong = GaussianDataModel.isotropic(-0.8, 1.3, (1, 2, 2))
    rng = np.random.default_rng(11)
    t = 600
    _, eps, x_t = forward_draw(m, sched, t, 6000, rng)
    best = optimal_eps(m, sched, x_t, t)
    for rival in (np.zeros_like(x_t), optimal_eps(wrong, sched, x_t, t)):
        diff = np.sum((rival - eps) ** 2, axis=(1, 2, 3)) - np.sum(
            (best - eps) ** 2, axis=(1, 2, 3)
        )
        se = diff.std(ddof=1) / np.sqrt(diff.size)
        assert diff.mean() > 3 * se


def test_optimal_eps_bounded_at_small_t(sched):
    m = GaussianDataModel.isotropic(0.0, 1.5, (1, 2, 2))
    rng = np.random.default_rng(13)
    _, eps, x_t = forward_draw(m, sched, 1, 4000, rng)
    out = optimal_eps(m, sched, x_t, 1)
    assert np.all(np.isfinite(out))
    # at t=1 barely any noise has been added, so the prediction is tiny
    assert np.mean(out**2) < np.mean(eps**2)


def test_reconstruct_x0(sched):
    rng = np.random.default_rng(17)
    x0 = rng.normal(size=(4, 1, 2, 2))
    eps = rng.normal(size=x0.shape)
    t = 700
    ab = sched.alpha_bar[t]
    x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
    assert np.max(np.abs(reconstruct_x0(sched, x_t, eps, t) - x0)) <= 1e-12
    assert np.allclose(reconstruct_x0(sched, x_t, np.zeros_like(x_t), t), x_t / np.sqrt(ab))


def test_reconstruct_with_optimal_eps_is_posterior_mean(sched):
    m = GaussianDataModel.isotropic(0.4, 1.1, (1, 2, 2))
    rng = np.random.default_rng(19)
    t = 300
    _, _, x_t = forward_draw(m, sched, t, 16, rng)
    ab = sched.alpha_bar[t]
    post = (np.sqrt(ab) * m.s**2 * x_t + (1 - ab) * m.mu) / (ab * m.s**2 + 1 - ab)
    got = reconstruct_x0(sched, x_t, optimal_eps(m, sched, x_t, t), t)
    assert np.allclose(got, post, atol=1e-12)


def test_perturbed_predictor(sched):
    m = GaussianDataModel.isotropic(0.0, 1.0, (1, 4, 4))
    base = OraclePredictor(m, sched)
    rng = np.random.default_rng(23)
    x = rng.normal(size=(64, 1, 4, 4))

    plain = perturbed_eps(base, 0.0, seed=99)
    assert np.array_equal(plain(x, 500), base(x, 500))

    noisy = perturbed_eps(base, 0.1, seed=99)
    a = noisy(x, 500)
    b = noisy(x, 500)
    assert np.array_equal(a, b)
    again = perturbed_eps(base, 0.1, seed=99)
    assert np.array_equal(again(x, 500), a)

    # the injected field changes with t and with seed
    assert not np.array_equal(noisy(x, 501), a)
    other = perturbed_eps(base, 0.1, seed=100)
    assert not np.array_equal(other(x, 500), a)

    # variance bump close to eta^2
    big = rng.normal(size=(2000, 1, 4, 4))
    bump = noisy(big, 500) - base(big, 500)
    assert bump.var() == pytest.approx(0.01, rel=0.15)

    with pytest.raises(ParameterError):
        perturbed_eps(base, -0.1, seed=1)


def test_recon_profile_validation():
    with pytest.raises(ParameterError):
        ReconProfile.constant(0.0, 0.1, T=10)
    with pytest.raises(ParameterError):
        ReconProfile.constant(1.2, 0.1, T=10)
    with pytest.raises(ParameterError):
        ReconProfile.constant(0.9, 1.0, T=10, bound=1.0)
    with pytest.raises(ShapeError):
        ReconProfile(gamma=np.full(5, 0.9), phi=np.zeros(6))
    p = ReconProfile.constant(0.9, 0.2, T=10)
    assert p.gamma.shape == (11,)


def test_recon_model_x0_deterministic_cases():
    x0 = np.arange(8.0).reshape(1, 2, 4)
    exact = ReconProfile.constant(1.0, 0.0, T=5)
    assert np.array_equal(recon_model_x0(exact, x0, 3, seed=0), x0)
    shrunk = ReconProfile.constant(0.9, 0.0, T=5)
    assert np.allclose(recon_model_x0(shrunk, x0, 3, seed=0), 0.9 * x0)
    with pytest.raises(ParameterError):
        recon_model_x0(exact, x0, 6, seed=0)


def test_recon_model_x0_moments():
    x0 = np.full((1, 2, 2), 1.5)
    p = ReconProfile.constant(0.9, 0.2, T=5)
    draws = recon_model_x0(p, np.broadcast_to(x0, (20000, 1, 2, 2)), 2, seed=7)
    se_mean = 0.2 / np.sqrt(20000)
    assert np.allclose(draws.mean(axis=0), 0.9 * 1.5, atol=3 * se_mean)
    assert np.allclose(draws.var(axis=0, ddof=1), 0.04, rtol=0.1)


def test_reverse_terminal_law_exact_kernel_case():
    # for N(0,1) data and sigma=sqrt(beta), every ddpm step is the exact
    # reverse kernel, so only the noiseless final step loses variance
    sched = linear_schedule(50, sigma_option="beta")
    m = GaussianDataModel.isotropic(0.0, 1.0, (1, 2, 2))
    law = reverse_terminal_law(m, sched, kind="ddpm")
    assert np.allclose(law.mu, 0.0, atol=1e-12)
    assert np.allclose(law.s**2, sched.alpha[1], atol=1e-12)


def test_reverse_terminal_law_validation():
    sched = linear_schedule(10)
    m = GaussianDataModel.isotropic(0.0, 1.0, (1, 2, 2))
    with pytest.raises(ParameterError):
        reverse_terminal_law(m, sched, kind="edm")
    with pytest.raises(ParameterError):
        reverse_terminal_law(m, sched, eta=-0.5)
