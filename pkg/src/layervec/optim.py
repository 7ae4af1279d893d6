"""Stage-wise fitting loop: add paths, then optimize every path with Adam."""
from __future__ import annotations

import copy
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .geometry import DEFAULT_SEGMENTS, DEFAULT_TOL, ClosedBezierPath
from .initialize import (
    DEFAULT_BINS,
    DEFAULT_C_ALPHA,
    DEFAULT_RADIUS,
    difference_map,
    init_paths,
    select_components,
)
from .losses import DEFAULT_LAMBDA, DEFAULT_TAU, mse, mse_loss, total_loss, udf_weights, xing_loss
from .render import DEFAULT_SIGMA, EXPORT_SIGMA, as_color, backprop, render, render_with_tape

logger = logging.getLogger(__name__)

MAX_STAGE_PATHS = 32
BETA1, BETA2, EPS = 0.9, 0.999, 1e-8


@dataclass
class OptConfig:
    point_lr: float = 1.0
    color_lr: float = 0.01
    iters_per_stage: int = 500
    lam: float = DEFAULT_LAMBDA
    tau: float = DEFAULT_TAU
    c_alpha: float = DEFAULT_C_ALPHA
    bins: int = DEFAULT_BINS
    radius: float = DEFAULT_RADIUS
    segments: int = DEFAULT_SEGMENTS
    sigma: float = DEFAULT_SIGMA
    export_sigma: float = EXPORT_SIGMA
    tol: float = DEFAULT_TOL
    max_paths: Optional[int] = 16
    schedule: Optional[Sequence[int]] = None
    background: tuple = (1.0, 1.0, 1.0)
    seed: int = 0
    target_mse: Optional[float] = None
    loss: str = "udf"

    def __post_init__(self):
        positive = ["point_lr", "color_lr", "iters_per_stage", "tau", "c_alpha", "bins",
                    "radius", "segments", "sigma", "export_sigma", "tol"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not self.c_alpha < 1:
            raise ValueError("c_alpha must be < 1")
        if self.max_paths is not None and self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")
        if self.schedule is not None:
            self.schedule = tuple(int(n) for n in self.schedule)
            if not self.schedule or min(self.schedule) < 1:
                raise ValueError("schedule entries must be >= 1")
        if self.loss not in ("udf", "mse"):
            raise ValueError(f"unknown loss {self.loss!r}")
        self.background = tuple(float(v) for v in as_color(self.background)[:3])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = list(self.schedule) if self.schedule is not None else None
        d["background"] = list(self.background)
        return d


def schedule(i: int, cap: int = MAX_STAGE_PATHS) -> int:
    """Number of paths added at 1-based stage ``i``."""
    if i < 1:
        raise ValueError("stage index is 1-based")
    return min(2 ** (i - 1), cap)


def planned_stages(cfg: OptConfig) -> list:
    """Paths added per stage under ``cfg`` if no stage stops early."""
    if cfg.schedule is not None:
        plan = list(cfg.schedule)
        if cfg.max_paths is not None:
            out, total = [], 0
            for n in plan:
                n = min(n, cfg.max_paths - total)
                if n <= 0:
                    break
                out.append(n)
                total += n
            plan = out
        return plan
    budget = cfg.max_paths
    plan, total, i = [], 0, 1
    while total < budget:
        n = min(schedule(i), budget - total)
        plan.append(n)
        total += n
        i += 1
    return plan


def adam_step(param, grad, m, v, lr, step, beta1=BETA1, beta2=BETA2, eps=EPS):
    """In-place bias-corrected Adam update; non-finite gradient entries are skipped.

    Returns the number of skipped entries.
    """
    ok = np.isfinite(grad)
    g = np.where(ok, grad, 0.0)
    m_new = beta1 * m + (1 - beta1) * g
    v_new = beta2 * v + (1 - beta2) * g * g
    m_hat = m_new / (1 - beta1**step)
    v_hat = v_new / (1 - beta2**step)
    upd = param - lr * m_hat / (np.sqrt(v_hat) + eps)
    np.copyto(m, m_new, where=ok)
    np.copyto(v, v_new, where=ok)
    np.copyto(param, upd, where=ok)
    bad = int(ok.size - ok.sum())
    if bad:
        logger.warning("skipped %d non-finite gradient entries", bad)
    return bad


@dataclass
class OptState:
    width: int
    height: int
    points: list = field(default_factory=list)
    colors: list = field(default_factory=list)
    m_points: list = field(default_factory=list)
    v_points: list = field(default_factory=list)
    m_colors: list = field(default_factory=list)
    v_colors: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    stage: int = 0
    iteration: int = 0
    rendered: Optional[np.ndarray] = None
    difference: Optional[np.ndarray] = None
    loss_history: list = field(default_factory=list)
    n_distance_refresh: int = 0

    @property
    def paths(self) -> list:
        return [ClosedBezierPath(p) for p in self.points]

    @property
    def n_paths(self) -> int:
        return len(self.points)

    def append(self, paths, colors):
        for p, c in zip(paths, colors, strict=True):
            pts = np.array(p.points if isinstance(p, ClosedBezierPath) else p, dtype=np.float64)
            self.points.append(pts)
            self.colors.append(as_color(c).copy())
            self.m_points.append(np.zeros_like(pts))
            self.v_points.append(np.zeros_like(pts))
            self.m_colors.append(np.zeros(4))
            self.v_colors.append(np.zeros(4))
            self.steps.append(0)


def _step_all(state: OptState, point_grads, color_grads, cfg: OptConfig):
    lo = np.array([-0.5 * state.width, -0.5 * state.height])
    hi = np.array([1.5 * state.width, 1.5 * state.height])
    for k in range(state.n_paths):
        state.steps[k] += 1
        t = state.steps[k]
        adam_step(state.points[k], point_grads[k], state.m_points[k], state.v_points[k], cfg.point_lr, t)
        adam_step(state.colors[k], color_grads[k], state.m_colors[k], state.v_colors[k], cfg.color_lr, t)
        np.clip(state.points[k], lo, hi, out=state.points[k])
        np.clip(state.colors[k], 0.0, 1.0, out=state.colors[k])


def evaluate(state: OptState, target, cfg: OptConfig) -> dict:
    """Loss terms of the current state, with coverage rendered at ``cfg.sigma``."""
    img, tape = render_with_tape(state.points, state.colors, state.width, state.height,
                                 cfg.background, cfg.sigma, cfg.tol, band=cfg.tau)
    w = udf_weights(tape.distance_maps(), cfg.tau)
    rep = total_loss(target, img, w, state.points, cfg.lam)
    return {"udf": rep.udf, "xing": rep.xing, "total": rep.total}


def run_stage(state: OptState, target, cfg: OptConfig) -> OptState:
    """Optimize all paths for ``cfg.iters_per_stage`` iterations."""
    if state.n_paths < 1:
        raise ValueError("run_stage needs at least one path")
    target = np.asarray(target, dtype=np.float64)
    for _ in range(cfg.iters_per_stage):
        img, tape = render_with_tape(state.points, state.colors, state.width, state.height,
                                     cfg.background, cfg.sigma, cfg.tol, band=cfg.tau)
        if cfg.loss == "udf":
            weights = udf_weights(tape.distance_maps(), cfg.tau)
            state.n_distance_refresh += 1
            rep = total_loss(target, img, weights, state.points, cfg.lam, with_mse=False)
            loss, image_grad, extra = rep.total, rep.image_grad, rep.point_grads
        else:
            base, image_grad = mse_loss(target, img)
            xing, xgrads, _ = xing_loss(state.points)
            loss = base + cfg.lam * xing
            extra = [cfg.lam * g for g in xgrads]
        pgrads, cgrads = backprop(tape, image_grad)
        pgrads = [a + b for a, b in zip(pgrads, extra)]
        _step_all(state, pgrads, cgrads, cfg)
        state.iteration += 1
        state.loss_history.append(float(loss))
        if not np.isfinite(loss):
            raise FloatingPointError(f"loss became non-finite at iteration {state.iteration}")
    state.rendered = render(state.points, state.colors, state.width, state.height,
                            cfg.background, cfg.export_sigma, cfg.tol)
    state.difference = difference_map(target, state.rendered)
    return state


@dataclass
class RunResult:
    paths: list
    colors: list
    metrics: list
    state: OptState
    config: OptConfig

    @property
    def rendered(self) -> np.ndarray:
        return self.state.rendered


def _add_stage(state: OptState, target, cfg: OptConfig, n_new: int):
    """Seed up to ``n_new`` paths and optimize; None when nothing is left to seed."""
    seeds = select_components(state.difference, target, n_new, cfg.c_alpha, cfg.bins)
    if not seeds:
        return None
    t0 = time.perf_counter()
    paths, colors = init_paths(seeds, cfg.radius, cfg.segments, target)
    state.append(paths, colors)
    state.stage += 1
    run_stage(state, target, cfg)
    losses = evaluate(state, target, cfg)
    row = {
        "stage": state.stage,
        "n_paths": state.n_paths,
        "mse": mse(target, state.rendered),
        "udf": losses["udf"],
        "xing": losses["xing"],
        "seconds": time.perf_counter() - t0,
    }
    logger.info("stage %d: %d paths, mse %.6f", row["stage"], row["n_paths"], row["mse"])
    return row


def _check_target(target) -> np.ndarray:
    target = np.asarray(target, dtype=np.float64)
    if target.ndim != 3 or target.shape[0] == 0 or target.shape[1] == 0 or target.shape[2] != 3:
        raise ValueError(f"target must be a non-empty H x W x 3 image, got shape {target.shape}")
    return target


def _initial_state(target, cfg: OptConfig) -> OptState:
    h, w = target.shape[:2]
    state = OptState(width=w, height=h)
    state.rendered = np.broadcast_to(np.asarray(cfg.background), target.shape).copy()
    state.difference = difference_map(target, state.rendered)
    return state


def run(target, cfg: Optional[OptConfig] = None, callback=None) -> RunResult:
    """Vectorize ``target`` stage by stage.

    Stops when the planned schedule is used up, when ``cfg.target_mse`` is
    reached, or when no wrongly rendered region is left to seed. ``callback``
    is called with ``(state, metrics_row)`` after every stage.
    """
    cfg = cfg or OptConfig()
    target = _check_target(target)
    state = _initial_state(target, cfg)
    metrics = []
    for n_new in planned_stages(cfg):
        if cfg.target_mse is not None and mse(target, state.rendered) <= cfg.target_mse:
            break
        row = _add_stage(state, target, cfg, n_new)
        if row is None:
            break
        metrics.append(row)
        if callback is not None:
            callback(state, row)
    return RunResult(state.paths, [c.copy() for c in state.colors], metrics, state, cfg)


def run_budgets(target, cfg: OptConfig, budgets: Sequence[int]) -> dict:
    """Equivalent to ``run(target, replace(cfg, max_paths=b))`` for every budget ``b``.

    Budgets whose stage plans share a prefix share the optimization of that
    prefix; the state is copied where plans diverge. The loop is
    deterministic, so results match independent runs. Each result's
    ``seconds`` in its metrics rows still refer to the stage that produced them.
    """
    target = _check_target(target)
    plans = {int(b): tuple(planned_stages(replace(cfg, max_paths=int(b)))) for b in budgets}
    state = _initial_state(target, cfg)
    results = {}

    def finish(st, metrics, members):
        for b in members:
            snap = copy.deepcopy(st)
            results[b] = RunResult(snap.paths, [c.copy() for c in snap.colors], list(metrics),
                                   snap, replace(cfg, max_paths=b))

    def grow(st, metrics, depth, members):
        done = [b for b in members if len(plans[b]) == depth]
        rest = [b for b in members if len(plans[b]) > depth]
        finish(st, metrics, done)
        if not rest:
            return
        if cfg.target_mse is not None and mse(target, st.rendered) <= cfg.target_mse:
            finish(st, metrics, rest)
            return
        groups = {}
        for b in rest:
            groups.setdefault(plans[b][depth], []).append(b)
        for i, (n_new, group) in enumerate(sorted(groups.items())):
            branch = st if i == len(groups) - 1 else copy.deepcopy(st)
            row = _add_stage(branch, target, cfg, n_new)
            if row is None:
                finish(branch, metrics, group)
                continue
            grow(branch, metrics + [row], depth + 1, group)

    grow(state, [], 0, sorted(plans))
    return results
