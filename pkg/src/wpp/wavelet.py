"""Single-level 2-D Haar transform and subband energy accounting.

The transform is orthonormal: both analysis filters and synthesis filters
carry the 1/2 block normalization, so `idwt2(*dwt2(x))` reconstructs `x`
to floating-point roundoff and total energy is preserved exactly in exact
arithmetic (Parseval).
"""

from typing import NamedTuple

import numpy as np

from .errors import ShapeError


class SubbandSet(NamedTuple):
    """The four half-resolution subbands of a single-level 2-D transform."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray


def dwt2(x):
    """Single-level orthonormal 2-D Haar analysis over the last two axes.

    Args:
        x: array of shape (..., H, W) with H and W both even.

    Returns:
        SubbandSet of arrays shaped (..., H/2, W/2). `ll` is the coarse
        approximation; `lh` carries horizontal detail (differences along
        the width axis), `hl` vertical detail, `hh` diagonal detail.

    Raises:
        ShapeError: if the input has rank < 2 or an odd trailing dimension.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ShapeError(f"dwt2 needs at least 2 dimensions, got shape {x.shape}")
    h, w = x.shape[-2], x.shape[-1]
    if h % 2 != 0 or w % 2 != 0:
        raise ShapeError(f"dwt2 needs even spatial dims, got ({h}, {w})")

    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]

    ll = (a + b + c + d) / 2.0
    lh = (a - b + c - d) / 2.0
    hl = (a + b - c - d) / 2.0
    hh = (a - b - c + d) / 2.0
    return SubbandSet(ll=ll, lh=lh, hl=hl, hh=hh)


def idwt2(ll, lh, hl, hh):
    """Inverse of `dwt2`: reassemble (..., H, W) from four (..., H/2, W/2) bands.

    Raises:
        ShapeError: if the four subbands do not share a common shape.
    """
    ll = np.asarray(ll, dtype=np.float64)
    lh = np.asarray(lh, dtype=np.float64)
    hl = np.asarray(hl, dtype=np.float64)
    hh = np.asarray(hh, dtype=np.float64)
    if not (ll.shape == lh.shape == hl.shape == hh.shape):
        raise ShapeError(
            "idwt2 needs four subbands of identical shape, got "
            f"{ll.shape}, {lh.shape}, {hl.shape}, {hh.shape}"
        )
    if ll.ndim < 2:
        raise ShapeError(f"idwt2 needs at least 2 dimensions, got shape {ll.shape}")

    out_shape = ll.shape[:-2] + (2 * ll.shape[-2], 2 * ll.shape[-1])
    x = np.empty(out_shape, dtype=np.float64)
    x[..., 0::2, 0::2] = (ll + lh + hl + hh) / 2.0
    x[..., 0::2, 1::2] = (ll - lh + hl - hh) / 2.0
    x[..., 1::2, 0::2] = (ll + lh - hl - hh) / 2.0
    x[..., 1::2, 1::2] = (ll - lh - hl + hh) / 2.0
    return x


def subband_energy(x):
    """Mean squared coefficient per subband, averaged over everything.

    Transforms `x` and reduces each subband with a plain mean of squares
    over all axes (batch, channel, and space alike), so the result is a
    per-coefficient energy comparable across image sizes.

    Returns:
        dict with keys "ll", "lh", "hl", "hh" mapping to Python floats.
    """
    bands = dwt2(x)
    return {name: float(np.mean(np.square(band))) for name, band in zip(bands._fields, bands)}
