"""scikit-learn style front end to the layer-wise fitting loop."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image
from .losses import mse
from .optim import OptConfig, run
from .render import render
from .svgio import to_svg


class LayerwiseVectorizer(TransformerMixin, BaseEstimator):
    """Fit an ordered stack of flat-colored closed cubic paths to one image.

    ``fit(X)`` learns ``paths_`` and ``colors_`` for a single image ``X``
    (``H x W``, ``H x W x 3`` or ``H x W x 4``, float in [0, 1] or uint8).
    ``transform`` renders the fitted paths, so ``fit_transform(X)`` is the
    reconstruction of ``X``. Hyperparameters mirror :class:`OptConfig`.
    """

    def __init__(
        self,
        max_paths=16,
        schedule=None,
        segments=4,
        radius=5.0,
        tau=10.0,
        lam=0.01,
        point_lr=1.0,
        color_lr=0.01,
        iters_per_stage=500,
        sigma=1.0,
        export_sigma=0.5,
        c_alpha=0.1,
        bins=200,
        background=(1.0, 1.0, 1.0),
        target_mse=None,
        loss="udf",
        seed=0,
    ):
        self.max_paths = max_paths
        self.schedule = schedule
        self.segments = segments
        self.radius = radius
        self.tau = tau
        self.lam = lam
        self.point_lr = point_lr
        self.color_lr = color_lr
        self.iters_per_stage = iters_per_stage
        self.sigma = sigma
        self.export_sigma = export_sigma
        self.c_alpha = c_alpha
        self.bins = bins
        self.background = background
        self.target_mse = target_mse
        self.loss = loss
        self.seed = seed

    def _config(self) -> OptConfig:
        return OptConfig(**self.get_params())

    def fit(self, X, y=None, callback=None):
        """Vectorize ``X``; ``y`` is ignored."""
        cfg = self._config()
        target = check_image(X, cfg.background)
        result = run(target, cfg, callback=callback)
        self.config_ = cfg
        self.paths_ = result.paths
        self.colors_ = np.array(result.colors).reshape(-1, 4)
        self.metrics_ = result.metrics
        self.height_, self.width_ = target.shape[:2]
        self.n_paths_ = len(result.paths)
        self.rendered_ = result.rendered
        return self

    def transform(self, X=None, scale=1.0, sigma=None):
        """Render the fitted paths; ``X`` (may be None) only checks the image size."""
        check_is_fitted(self, ["paths_", "colors_"])
        if X is not None:
            shape = check_image(X, self.config_.background).shape[:2]
            if shape != (self.height_, self.width_):
                raise ValueError(f"image is {shape}, vectorizer was fitted on {(self.height_, self.width_)}")
        if scale <= 0:
            raise ValueError("scale must be positive")
        sigma = self.config_.export_sigma if sigma is None else sigma
        w, h = int(round(self.width_ * scale)), int(round(self.height_ * scale))
        pts = [p.points * scale for p in self.paths_]
        return render(pts, self.colors_, w, h, self.config_.background, sigma)

    def predict(self, X=None):
        return self.transform(X)

    def score(self, X, y=None):
        """Negative MSE between ``X`` and the fitted reconstruction."""
        target = check_image(X, self.background)
        return -mse(target, self.transform(target))

    def to_svg(self) -> str:
        check_is_fitted(self, ["paths_", "colors_"])
        return to_svg(self.paths_, self.colors_, self.width_, self.height_, self.config_.background)
