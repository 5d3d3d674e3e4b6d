"""Reverse-process samplers with wavelet-domain frequency regulation.

Both samplers run t = T..1 on whatever schedule they are handed (use
`NoiseSchedule.subsample` beforehand for respaced trajectories). When a
WeightPolicy is present, every produced state x_{t-1} is decomposed with
dwt2, the ll subband is scaled by the low-frequency weight and all three
detail subbands by the high-frequency weight, and the state is rebuilt
with idwt2 -- after the noise injection of the step, including the final
t=1 step. Weights are evaluated at the produced index t-1.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError
from .model import reconstruct_x0
from .wavelet import dwt2, idwt2

LOW_VARIANTS = ("constant", "turnoff", "variance")
HIGH_VARIANTS = ("turnon", "variance", "off")


@dataclass
class WeightPolicy:
    """Per-step subband multiplier rules.

    low_variant:
        constant -> w_l at every step
        turnoff  -> w_l while t >= t_mid, 1 afterwards
        variance -> 1 + w_l * sigma[t]
    high_variant:
        turnon   -> w_h once t <= t_mid, 1 before
        variance -> 1 + w_h * max(1 - sigma[t], 0)
        off      -> 1 everywhere
    t_mid is round(t_mid_frac * T) on the schedule in use. Inactive phases
    resolve to the identity multiplier 1, never 0.
    """

    low_variant: str = "constant"
    high_variant: str = "off"
    w_l: float = 1.0
    w_h: float = 1.0
    t_mid_frac: float = 0.2

    def __post_init__(self):
        if self.low_variant not in LOW_VARIANTS:
            raise ParameterError(
                f"low_variant must be one of {LOW_VARIANTS}, got {self.low_variant!r}"
            )
        if self.high_variant not in HIGH_VARIANTS:
            raise ParameterError(
                f"high_variant must be one of {HIGH_VARIANTS}, got {self.high_variant!r}"
            )
        if not np.isfinite(self.w_l) or not np.isfinite(self.w_h):
            raise ParameterError("w_l and w_h must be finite")
        if not 0.0 <= self.t_mid_frac <= 1.0:
            raise ParameterError(
                f"t_mid_frac must lie in [0, 1], got {self.t_mid_frac}"
            )

    def t_mid(self, T):
        # half-up rounding so the boundary is platform-independent
        return int(np.floor(self.t_mid_frac * T + 0.5))


def _check_multiplier(value, name, t):
    if not np.isfinite(value) or value < 0.0:
        raise ParameterError(
            f"{name} multiplier resolved to {value} at t={t}; must be finite and >= 0"
        )
    return float(value)


def low_weight(policy, sched, t):
    """Resolve the ll-subband multiplier at step t (0..T valid; sigma[0]=0)."""
    if not 0 <= t <= sched.T:
        raise ParameterError(f"t must lie in [0, {sched.T}], got {t}")
    if policy.low_variant == "constant":
        w = policy.w_l
    elif policy.low_variant == "turnoff":
        w = policy.w_l if t >= policy.t_mid(sched.T) else 1.0
    else:
        w = 1.0 + policy.w_l * sched.sigma[t]
    return _check_multiplier(w, "low", t)


def high_weight(policy, sched, t):
    """Resolve the detail-subband multiplier at step t."""
    if not 0 <= t <= sched.T:
        raise ParameterError(f"t must lie in [0, {sched.T}], got {t}")
    if policy.high_variant == "turnon":
        w = policy.w_h if t <= policy.t_mid(sched.T) else 1.0
    elif policy.high_variant == "variance":
        w = 1.0 + policy.w_h * max(1.0 - sched.sigma[t], 0.0)
    else:
        w = 1.0
    return _check_multiplier(w, "high", t)


def wpp_regulate(x, wl, wh):
    """Scale the ll subband by wl and all three detail subbands by wh."""
    wl = _check_multiplier(wl, "low", "-")
    wh = _check_multiplier(wh, "high", "-")
    bands = dwt2(x)
    return idwt2(wl * bands.ll, wh * bands.lh, wh * bands.hl, wh * bands.hh)


def ddpm_step(pred, sched, x_t, t, z):
    """One ancestral update x_t -> x_{t-1}.

    Args:
        z: standard-normal draw matching x_t for t > 1; callers must pass
            zero at t = 1 (the final step is noiseless).
    """
    if not 1 <= t <= sched.T:
        raise ParameterError(f"t must lie in [1, {sched.T}], got {t}")
    eps = pred(x_t, t)
    alpha = sched.alpha[t]
    coef = (1.0 - alpha) / np.sqrt(1.0 - sched.alpha_bar[t])
    return (x_t - coef * eps) / np.sqrt(alpha) + sched.sigma[t] * z


def ddim_step(pred, sched, x_s, s, s_prev):
    """One deterministic update x_s -> x_{s_prev} for s_prev < s."""
    if not 1 <= s <= sched.T:
        raise ParameterError(f"s must lie in [1, {sched.T}], got {s}")
    if not 0 <= s_prev < s:
        raise ParameterError(f"need 0 <= s_prev < s, got s_prev={s_prev}, s={s}")
    eps = pred(x_s, s)
    x0 = reconstruct_x0(sched, x_s, eps, s)
    ab_prev = sched.alpha_bar[s_prev]
    return np.sqrt(ab_prev) * x0 + np.sqrt(1.0 - ab_prev) * eps


@dataclass
class SamplerConfig:
    """Which sampler to run and how.

    steps must equal the T of the schedule passed to `sample`; respacing is
    the caller's job via NoiseSchedule.subsample.
    """

    kind: str
    steps: int
    seed: int
    shape: tuple
    policy: Optional[WeightPolicy] = None

    def __post_init__(self):
        if self.kind not in ("ddpm", "ddim"):
            raise ParameterError(f"kind must be 'ddpm' or 'ddim', got {self.kind!r}")
        if self.steps < 1:
            raise ParameterError(f"steps must be >= 1, got {self.steps}")
        if len(self.shape) != 3:
            raise ParameterError(f"shape must be (C, H, W), got {self.shape}")


def sample(pred, sched, cfg, B):
    """Run the full reverse loop from x_T ~ N(0, I); returns the x_0 batch.

    When cfg.policy is set, each produced x_{t-1} is frequency-regulated
    with the weights resolved at index t-1; steps whose multipliers both
    resolve to exactly 1 skip the transform entirely, so an all-identity
    policy is bit-identical to no policy.
    """
    if cfg.steps != sched.T:
        raise ParameterError(
            f"cfg.steps={cfg.steps} does not match schedule T={sched.T}"
        )
    rng = np.random.default_rng(cfg.seed)
    full_shape = (B,) + tuple(cfg.shape)
    x = rng.standard_normal(full_shape)
    for t in range(sched.T, 0, -1):
        if cfg.kind == "ddpm":
            z = rng.standard_normal(full_shape) if t > 1 else 0.0
            x = ddpm_step(pred, sched, x, t, z)
        else:
            x = ddim_step(pred, sched, x, t, t - 1)
        if cfg.policy is not None:
            wl = low_weight(cfg.policy, sched, t - 1)
            wh = high_weight(cfg.policy, sched, t - 1)
            if wl != 1.0 or wh != 1.0:
                x = wpp_regulate(x, wl, wh)
    return x
