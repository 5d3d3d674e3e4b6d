"""Reference weight settings shipped with the package.

Each preset maps a sampler-steps count to the published (w_l, w_h) pair for
one model/dataset combination.  Low weights at or above 0.9 are direct
multipliers (constant variant); smaller ones are variance-law coefficients
(variance variant, multiplier 1 + w_l * sigma_t).  High weights are always
direct multipliers switched on over the final phase (turnon variant) with
the default switch point t_mid = 0.2 * T.
"""

from __future__ import annotations

from .errors import ParameterError
from .sampler import WeightPolicy

# name -> {steps: (w_l, w_h)}
PRESETS = {
    "adm-cifar10": {20: (1.013, 1.064), 30: (1.008, 1.034), 50: (1.0036, 1.015)},
    "adm-imagenet": {20: (0.050, 0.997), 30: (0.040, 0.998), 50: (0.028, 1.001)},
    "ddpm-cifar10": {10: (1.068, 1.250), 20: (1.019, 1.140)},
    "iddpm-cifar10": {30: (1.009, 1.042), 100: (1.0011, 1.0060)},
    "adpm-cifar10-ls": {10: (0.132, 1.11), 25: (0.049, 1.038), 50: (0.03, 1.019)},
    "adpm-cifar10-cs": {10: (0.072, 1.202), 25: (0.032, 1.046), 50: (0.008, 1.018)},
    "npr-dpm-cifar10-ls": {10: (0.132, 1.105), 25: (0.048, 1.034), 50: (0.024, 1.015)},
    "npr-dpm-cifar10-cs": {10: (0.066, 1.192), 25: (0.03, 1.045), 50: (0.007, 1.017)},
    "sn-dpm-cifar10-ls": {10: (0.109, 1.013), 25: (0.043, 1.005), 50: (0.025, 1.005)},
    "sn-dpm-cifar10-cs": {10: (0.052, 1.101), 25: (0.027, 1.019), 50: (0.009, 1.01)},
    "ddim-cifar10": {10: (0.0, 1.21), 25: (0.0, 1.037), 50: (0.0, 1.011)},
    "amed-cifar10": {5: (0.0014, 0.9955), 7: (0.0012, 0.9932), 9: (0.0027, 0.9985)},
    "edm-cifar10": {13: (0.036, 1.087), 21: (0.016, 1.054), 35: (0.007, 1.022)},
    "pfgmpp-cifar10": {13: (0.037, 1.095), 21: (0.016, 1.057), 35: (0.006, 1.025)},
}


def get_preset(name: str, steps: int) -> WeightPolicy:
    """Builds the WeightPolicy for a published setting.

    Args:
        name: preset key from PRESETS.
        steps: sampler step count the setting was tuned for.

    Returns:
        A WeightPolicy with the variant conventions described above.

    Raises:
        ParameterError: on an unknown name or a step count the preset does
            not cover; the message lists what is available.
    """
    if name not in PRESETS:
        raise ParameterError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    table = PRESETS[name]
    if steps not in table:
        raise ParameterError(
            f"preset {name!r} has no entry for steps={steps}; "
            f"available: {sorted(table)}"
        )
    w_l, w_h = table[steps]
    low_variant = "constant" if w_l >= 0.9 else "variance"
    return WeightPolicy(
        low_variant=low_variant,
        high_variant="turnon",
        w_l=w_l,
        w_h=w_h,
        t_mid_frac=0.2,
    )
