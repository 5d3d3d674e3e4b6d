"""Discrete diffusion noise schedules.

All per-step arrays have length T+1 and are indexed by the timestep t
itself, so `beta[t]` is the noise added going from x_{t-1} to x_t.
Index 0 holds sentinels for the clean state: alpha_bar[0] = 1,
beta[0] = 0, alpha[0] = 1, beta_tilde[0] = 0, sigma[0] = 0.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError

SIGMA_OPTIONS = ("posterior", "beta")


def _sigma_from(beta, beta_tilde, sigma_option):
    if sigma_option == "posterior":
        return np.sqrt(beta_tilde)
    if sigma_option == "beta":
        sigma = np.sqrt(beta)
        sigma[0] = 0.0
        return sigma
    raise ParameterError(
        f"sigma_option must be one of {SIGMA_OPTIONS}, got {sigma_option!r}"
    )


@dataclass
class NoiseSchedule:
    """A length-T discrete schedule with precomputed derived arrays.

    Attributes:
        T: number of diffusion steps.
        beta: per-step variances, shape (T+1,), beta[0] = 0.
        alpha: 1 - beta.
        alpha_bar: cumulative products of alpha, alpha_bar[0] = 1.
        beta_tilde: posterior variances (1-alpha_bar[t-1])/(1-alpha_bar[t])*beta[t].
        sigma: reverse-step noise scale per the chosen convention.
        sigma_option: "posterior" (sigma = sqrt(beta_tilde), default) or
            "beta" (sigma = sqrt(beta)).
        parent_t: for subsampled schedules, parent_t[k] is the timestep in
            the parent schedule that step k corresponds to; None otherwise.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    beta_tilde: np.ndarray
    sigma: np.ndarray
    sigma_option: str = "posterior"
    parent_t: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.T < 1:
            raise ParameterError(f"T must be >= 1, got {self.T}")
        for name in ("beta", "alpha", "alpha_bar", "beta_tilde", "sigma"):
            arr = getattr(self, name)
            if arr.shape != (self.T + 1,):
                raise ParameterError(
                    f"{name} must have shape ({self.T + 1},), got {arr.shape}"
                )

    @classmethod
    def from_betas(cls, betas, sigma_option="posterior", parent_t=None):
        """Build the full schedule from per-step betas for t = 1..T.

        Args:
            betas: array of length T with values in (0, 1).
            sigma_option: reverse-noise convention, "posterior" or "beta".
            parent_t: optional parent-timestep mapping of length T+1.
        """
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ParameterError(f"betas must be a 1-D array, got shape {betas.shape}")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ParameterError("betas must lie strictly inside (0, 1)")
        T = betas.size

        beta = np.concatenate([[0.0], betas])
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        beta_tilde = np.zeros(T + 1)
        # beta_tilde[1] = 0 since alpha_bar[0] = 1 makes the numerator vanish
        beta_tilde[1:] = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:]
        sigma = _sigma_from(beta, beta_tilde, sigma_option)
        return cls(
            T=T,
            beta=beta,
            alpha=alpha,
            alpha_bar=alpha_bar,
            beta_tilde=beta_tilde,
            sigma=sigma,
            sigma_option=sigma_option,
            parent_t=parent_t,
        )

    def subsample(self, T_sub):
        """Respace to T_sub steps, keeping alpha_bar exact at selected times.

        Selected parent timesteps are tau_k = round(k * T / T_sub) for
        k = 1..T_sub; alpha_bar is copied from the parent at those indices
        and the effective betas are recomputed from consecutive ratios, so
        the subsampled forward marginals match the parent's exactly.

        Args:
            T_sub: number of steps in the respaced schedule, 1 <= T_sub <= T.

        Returns:
            A new NoiseSchedule with parent_t recording the mapping and the
            same sigma_option as this schedule.
        """
        if not 1 <= T_sub <= self.T:
            raise ParameterError(
                f"T_sub must lie in [1, {self.T}], got {T_sub}"
            )
        ks = np.arange(1, T_sub + 1)
        taus = np.round(ks * (self.T / T_sub)).astype(np.int64)
        # increments are >= 1 because T / T_sub >= 1, so taus are strictly
        # increasing and taus[-1] == T

        alpha_bar = np.empty(T_sub + 1)
        alpha_bar[0] = 1.0
        alpha_bar[1:] = self.alpha_bar[taus]
        beta = np.zeros(T_sub + 1)
        beta[1:] = 1.0 - alpha_bar[1:] / alpha_bar[:-1]
        alpha = 1.0 - beta
        beta_tilde = np.zeros(T_sub + 1)
        beta_tilde[1:] = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:]
        sigma = _sigma_from(beta, beta_tilde, self.sigma_option)
        parent_t = np.concatenate([[0], taus])
        return NoiseSchedule(
            T=T_sub,
            beta=beta,
            alpha=alpha,
            alpha_bar=alpha_bar,
            beta_tilde=beta_tilde,
            sigma=sigma,
            sigma_option=self.sigma_option,
            parent_t=parent_t,
        )


def linear_schedule(T, beta_start=1e-4, beta_end=0.02, sigma_option="posterior"):
    """Linearly spaced betas from beta_start to beta_end over T steps."""
    if T < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ParameterError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, T)
    return NoiseSchedule.from_betas(betas, sigma_option=sigma_option)


def cosine_schedule(T, offset=0.008, sigma_option="posterior"):
    """Squared-cosine alpha_bar profile with betas clipped at 0.999.

    alpha_bar targets f(t)/f(0) with f(t) = cos^2(((t/T + offset)/(1 + offset))
    * pi/2); betas are derived from consecutive ratios, clipped to at most
    0.999, and alpha_bar is then recomputed from the clipped betas so the
    stored arrays stay mutually consistent.
    """
    if T < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    if offset <= 0.0:
        raise ParameterError(f"offset must be positive, got {offset}")
    ts = np.arange(T + 1, dtype=np.float64)
    f = np.cos((ts / T + offset) / (1.0 + offset) * (np.pi / 2.0)) ** 2
    target = f / f[0]
    betas = 1.0 - target[1:] / target[:-1]
    betas = np.clip(betas, None, 0.999)
    return NoiseSchedule.from_betas(betas, sigma_option=sigma_option)
