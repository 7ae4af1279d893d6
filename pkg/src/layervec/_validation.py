"""Input checks shared by the estimator and the command line."""
from __future__ import annotations

import numpy as np

from .render import as_color


def check_image(image, background=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Return ``image`` as a float64 ``H x W x 3`` array in [0, 1].

    Accepts gray ``H x W``, RGB and RGBA arrays. Integer input is read as
    8-bit (or 16-bit when values exceed 255); an alpha channel is
    composited over ``background``.
    """
    arr = np.asarray(image)
    if arr.dtype == object:
        raise ValueError("image must be a numeric array")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3, 4):
        raise ValueError(f"expected an H x W, H x W x 3 or H x W x 4 image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("image has zero pixels")
    if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
        scale = 65535.0 if arr.max(initial=0) > 255 else 255.0
        if arr.dtype == bool:
            scale = 1.0
        arr = arr.astype(np.float64) / scale
    else:
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("float images must lie in [0, 1]")
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    elif arr.shape[2] == 4:
        bg = as_color(background)[:3]
        a = arr[:, :, 3:4]
        arr = arr[:, :, :3] * a + bg * (1.0 - a)
    return np.ascontiguousarray(arr)


def check_budget(n) -> int:
    n = int(n)
    if n < 1:
        raise ValueError(f"path budget must be >= 1, got {n}")
    return n
