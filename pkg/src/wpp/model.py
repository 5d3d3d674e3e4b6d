"""Noise predictors over a diagonal-Gaussian data distribution.

For data x0 ~ N(mu, diag(s^2)) the minimum-MSE noise predictor has a
closed form, so samplers can be verified against exact marginals instead
of a trained network. A perturbation wrapper injects seeded pseudo-noise
of magnitude eta to stand in for network prediction error.
"""

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ParameterError, ShapeError
from .schedule import NoiseSchedule


@runtime_checkable
class NoisePredictor(Protocol):
    """Callable predicting the forward noise from a noisy state.

    Implementations must be deterministic given (x_t, t) and any internal
    seed, and return an array of the same shape as x_t.
    """

    def __call__(self, x_t: np.ndarray, t: int) -> np.ndarray: ...


def _check_t(sched, t):
    if not 1 <= t <= sched.T:
        raise ParameterError(f"t must lie in [1, {sched.T}], got {t}")


@dataclass
class GaussianDataModel:
    """Diagonal-Gaussian data distribution with per-pixel mean and std grids.

    Attributes:
        mu: mean grid, shape (C, H, W).
        s: standard-deviation grid, same shape, strictly positive.
    """

    mu: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.s = np.asarray(self.s, dtype=np.float64)
        if self.mu.ndim != 3:
            raise ShapeError(f"mu must have shape (C, H, W), got {self.mu.shape}")
        if self.s.shape != self.mu.shape:
            raise ShapeError(
                f"s shape {self.s.shape} does not match mu shape {self.mu.shape}"
            )
        if not np.all(np.isfinite(self.mu)) or not np.all(np.isfinite(self.s)):
            raise ParameterError("mu and s must be finite")
        if np.any(self.s <= 0.0):
            raise ParameterError("s must be strictly positive everywhere")

    @classmethod
    def isotropic(cls, mu, s, shape):
        """Broadcast scalar mean/std to a (C, H, W) grid."""
        if len(shape) != 3:
            raise ShapeError(f"shape must be (C, H, W), got {shape}")
        return cls(mu=np.full(shape, float(mu)), s=np.full(shape, float(s)))

    @property
    def shape(self):
        return self.mu.shape

    def sample(self, B, rng):
        """Draw B data points, shape (B, C, H, W)."""
        rng = np.random.default_rng(rng)
        return self.mu + self.s * rng.standard_normal((B,) + self.mu.shape)


def optimal_eps(model, sched, x_t, t):
    """Minimum-MSE noise prediction for the Gaussian data model.

    Per coordinate, the posterior mean of x0 given x_t is
    (sqrt(ab)*s^2*x_t + (1-ab)*mu) / (ab*s^2 + (1-ab)) with ab = alpha_bar[t],
    and the optimal prediction is (x_t - sqrt(ab)*E[x0|x_t]) / sqrt(1-ab).

    Args:
        model: GaussianDataModel describing q(x0).
        sched: NoiseSchedule the state was diffused under.
        x_t: noisy state, shape (B, C, H, W).
        t: timestep in 1..T.

    Raises:
        ParameterError: t outside 1..T.
    """
    _check_t(sched, t)
    ab = sched.alpha_bar[t]
    root_ab = np.sqrt(ab)
    d2 = 1.0 - ab
    post_mean = (root_ab * model.s**2 * x_t + d2 * model.mu) / (
        ab * model.s**2 + d2
    )
    return (x_t - root_ab * post_mean) / np.sqrt(d2)


def reconstruct_x0(sched, x_t, eps, t):
    """One-shot estimate of x0 from a noisy state and a noise prediction.

    Inverts the forward marginal: (x_t - sqrt(1-alpha_bar[t])*eps) /
    sqrt(alpha_bar[t]).
    """
    _check_t(sched, t)
    ab = sched.alpha_bar[t]
    return (x_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)


@dataclass
class OraclePredictor:
    """NoisePredictor view of the closed-form optimal predictor."""

    model: GaussianDataModel
    sched: NoiseSchedule

    def __call__(self, x_t, t):
        return optimal_eps(self.model, self.sched, x_t, t)


@dataclass
class PerturbedPredictor:
    """Base predictor plus eta times a seeded pseudo-noise field.

    The field zeta is standard normal, derived deterministically from
    (seed, t) and the tensor shape, so repeated calls at the same timestep
    see the same perturbation and whole runs are reproducible.
    """

    base: NoisePredictor
    eta: float
    seed: int

    def __post_init__(self):
        if self.eta < 0.0:
            raise ParameterError(f"eta must be >= 0, got {self.eta}")

    def __call__(self, x_t, t):
        out = self.base(x_t, t)
        if self.eta == 0.0:
            return out
        zeta = np.random.default_rng([self.seed, int(t)]).standard_normal(x_t.shape)
        return out + self.eta * zeta


def perturbed_eps(base, eta, seed):
    """Wrap a predictor with magnitude-eta seeded prediction error."""
    return PerturbedPredictor(base=base, eta=eta, seed=seed)


@dataclass
class ReconProfile:
    """Per-timestep (gamma, phi) profile of the synthetic reconstruction model.

    The reconstruction of x0 at step t is gamma[t]*x0 + phi[t]*eps with eps
    standard normal: gamma in (0, 1] shrinks toward zero and phi adds
    prediction noise, bounded above by `bound`.
    """

    gamma: np.ndarray
    phi: np.ndarray
    bound: float = 1.0

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.phi = np.asarray(self.phi, dtype=np.float64)
        if self.gamma.shape != self.phi.shape or self.gamma.ndim != 1:
            raise ShapeError("gamma and phi must be 1-D arrays of equal length")
        if np.any(self.gamma <= 0.0) or np.any(self.gamma > 1.0):
            raise ParameterError("gamma must lie in (0, 1]")
        if np.any(self.phi < 0.0) or np.any(self.phi >= self.bound):
            raise ParameterError(f"phi must lie in [0, {self.bound})")

    @classmethod
    def constant(cls, gamma, phi, T, bound=1.0):
        """Profile holding one (gamma, phi) pair at every timestep 0..T."""
        return cls(
            gamma=np.full(T + 1, float(gamma)),
            phi=np.full(T + 1, float(phi)),
            bound=bound,
        )


def recon_model_x0(profile, x0, t, seed):
    """Draw from the synthetic reconstruction model at step t.

    Returns gamma[t]*x0 + phi[t]*eps with eps ~ N(0, I) drawn from seed;
    phi[t] = 0 makes the output deterministic.
    """
    if not 0 <= t < profile.gamma.size:
        raise ParameterError(
            f"t must lie in [0, {profile.gamma.size - 1}], got {t}"
        )
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(np.shape(x0))
    return profile.gamma[t] * x0 + profile.phi[t] * eps


def reverse_terminal_law(model, sched, kind="ddpm", eta=0.0):
    """Closed-form terminal distribution of an unregulated oracle run.

    Propagates per-coordinate mean and variance of the reverse process
    started from x_T ~ N(0, I), driven by the optimal predictor plus
    independent per-step prediction noise of magnitude eta, through the
    affine per-coordinate recursions of the ddpm or ddim update. The ddpm
    recursion injects sigma[t] noise with the final step noiseless; ddim
    is deterministic apart from the eta term.

    Returns:
        GaussianDataModel whose (mu, s) are the terminal per-coordinate
        mean and standard deviation.
    """
    if kind not in ("ddpm", "ddim"):
        raise ParameterError(f"kind must be 'ddpm' or 'ddim', got {kind!r}")
    if eta < 0.0:
        raise ParameterError(f"eta must be >= 0, got {eta}")
    m = np.zeros(model.shape)
    v = np.ones(model.shape)
    for t in range(sched.T, 0, -1):
        ab = sched.alpha_bar[t]
        ab_prev = sched.alpha_bar[t - 1]
        d2 = 1.0 - ab
        D = ab * model.s**2 + d2
        if kind == "ddpm":
            beta = sched.beta[t]
            root_alpha = np.sqrt(sched.alpha[t])
            e = (1.0 - beta / D) / root_alpha
            f = beta * np.sqrt(ab) / (D * root_alpha)
            h = beta / (np.sqrt(d2) * root_alpha)
            sig = sched.sigma[t] if t > 1 else 0.0
            m = e * m + f * model.mu
            v = e**2 * v + sig**2 + (eta * h) ** 2
        else:
            d = np.sqrt(d2)
            d_prev = np.sqrt(1.0 - ab_prev)
            r = np.sqrt(ab_prev / ab)
            g = d_prev - r * d
            k = g * d / D
            m = (r + k) * m - k * np.sqrt(ab) * model.mu
            v = (r + k) ** 2 * v + (eta * g) ** 2
    return GaussianDataModel(mu=m, s=np.sqrt(v))
