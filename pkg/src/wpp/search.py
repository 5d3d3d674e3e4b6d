"""Two-stage grid search for regulation weights.

The search mirrors the sequential protocol used to tune W++: first sweep
the low-band weight with the high-band weight held at its neutral value,
then sweep the high-band weight around the low-band optimum.  Each sweep
is a coarse grid pass followed by a fine pass spanning one coarse cell on
either side of the coarse minimizer.  Objectives are arbitrary callables;
the bundled one is the closed-form 2-Wasserstein distance between the
diagonal-Gaussian fit of terminal samples and an analytic Gaussian target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError, ParameterError, ShapeError
from .model import GaussianDataModel, NoisePredictor
from .sampler import SamplerConfig, WeightPolicy, sample
from .schedule import NoiseSchedule


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    # snap to 12 decimals so repeated float accumulation cannot drift the
    # grid off the nominal step values (0.049 must be exactly 0.049)
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


@dataclass
class SearchResult:
    """Trace of one two-stage sweep over a single scalar weight.

    Attributes:
        points: evaluated (stage, w, objective) triples in evaluation order;
            stage is "coarse" or "fine".
        best_w: weight attaining the minimum recorded objective (ties go to
            the lowest w).
        best_objective: the minimum recorded objective value.
        coarse_grid: the coarse-stage grid.
        fine_grid: the fine-stage grid.
    """

    points: list[tuple[str, float, float]]
    best_w: float
    best_objective: float
    coarse_grid: np.ndarray
    fine_grid: np.ndarray


def two_stage_search(
    objective: Callable[[float], float],
    lo: float,
    hi: float,
    coarse: float,
    fine: float,
) -> SearchResult:
    """Minimizes a scalar objective with a coarse pass then a fine pass.

    The coarse grid covers [lo, hi] with step `coarse`; the fine grid covers
    [w* - coarse, w* + coarse] with step `fine` around the coarse minimizer
    w*.  The fine grid may extend one coarse cell past [lo, hi].

    Args:
        objective: callable mapping a weight to a real value.
        lo: lower end of the coarse grid.
        hi: upper end of the coarse grid.
        coarse: coarse-stage step, must exceed `fine`.
        fine: fine-stage step, must be positive.

    Returns:
        SearchResult with the full evaluation trace and the overall argmin.

    Raises:
        ParameterError: if the bounds or steps are inconsistent.
        EvaluationError: if the objective returns a non-finite value; the
            exception carries the offending weight in its `w` attribute.
    """
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ParameterError(f"need finite lo < hi, got [{lo}, {hi}]")
    if not (0.0 < fine < coarse):
        raise ParameterError(f"need 0 < fine < coarse, got {fine}, {coarse}")

    def run_stage(stage, grid, points):
        if grid.size == 0:
            raise ParameterError(f"{stage} grid over [{lo}, {hi}] is empty")
        for w in grid:
            w = float(w)
            try:
                val = float(objective(w))
            except EvaluationError as err:
                if err.w is None:
                    err.w = w
                raise
            if not np.isfinite(val):
                raise EvaluationError(
                    f"objective is not finite at w={w}: {val}", w=w
                )
            points.append((stage, w, val))

    points: list[tuple[str, float, float]] = []
    coarse_grid = _grid(lo, hi, coarse)
    run_stage("coarse", coarse_grid, points)
    w_star = min(points, key=lambda p: (p[2], p[1]))[1]
    fine_grid = _grid(w_star - coarse, w_star + coarse, fine)
    run_stage("fine", fine_grid, points)
    _, best_w, best_objective = min(points, key=lambda p: (p[2], p[1]))
    return SearchResult(points, best_w, best_objective, coarse_grid, fine_grid)


def gaussian_w2_objective(samples: np.ndarray, target: GaussianDataModel) -> float:
    """Closed-form 2-Wasserstein distance from a diagonal-Gaussian fit.

    Fits an independent Gaussian per coordinate (sample mean, sample std
    with ddof=1) and evaluates
    sqrt(sum_i (mu_hat_i - mu_i)^2 + (s_hat_i - s_i)^2) against the target.

    Args:
        samples: (B, C, H, W) batch, B >= 2.
        target: analytic Gaussian whose grids match samples' trailing shape.

    Returns:
        The distance as a float.

    Raises:
        ShapeError: if samples is not 4-D or does not match the target shape.
        EvaluationError: if the batch is too small or the fit is non-finite.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 4 or samples.shape[1:] != target.shape:
        raise ShapeError(
            f"samples shape {samples.shape} does not match target {target.shape}"
        )
    if samples.shape[0] < 2:
        raise EvaluationError(f"need B >= 2 samples, got {samples.shape[0]}")
    mu_hat = samples.mean(axis=0)
    s_hat = samples.std(axis=0, ddof=1)
    gap = np.sum((mu_hat - target.mu) ** 2) + np.sum((s_hat - target.s) ** 2)
    if not np.isfinite(gap):
        raise EvaluationError("sample moments are not finite")
    return float(np.sqrt(gap))


@dataclass
class SearchContext:
    """Bundles everything one weight evaluation needs.

    Every evaluation reuses the single `seed`, so the whole search surface
    is deterministic (common random numbers); without that, a grid search
    over a Monte-Carlo objective is ill-posed at small batch sizes.

    Attributes:
        pred: noise predictor driving the sampler.
        sched: schedule the sampler traverses in full.
        kind: "ddpm" or "ddim".
        shape: per-sample (C, H, W).
        B: batch size per evaluation.
        seed: sampling seed shared by all evaluations.
        target: analytic Gaussian the objective compares against.
        low_variant: low-band policy variant, default "variance".
        high_variant: high-band policy variant, default "turnon".
        t_mid_frac: switch point for the phase-split variants.
        neutral_w_l: w_l at which the low band is untouched.
        neutral_w_h: w_h at which the high band is untouched.
        wl_lo, wl_hi: stage-1 coarse bounds for w_l.
        wh_lo, wh_hi: stage-2 coarse bounds for w_h.
        coarse: coarse step for both stages.
        fine: fine step for both stages.
    """

    pred: NoisePredictor
    sched: NoiseSchedule
    kind: str
    shape: tuple[int, int, int]
    B: int
    seed: int
    target: GaussianDataModel
    low_variant: str = "variance"
    high_variant: str = "turnon"
    t_mid_frac: float = 0.2
    neutral_w_l: float = 0.0
    neutral_w_h: float = 1.0
    wl_lo: float = 0.0
    wl_hi: float = 0.07
    wh_lo: float = 0.9
    wh_hi: float = 1.1
    coarse: float = 0.01
    fine: float = 0.001

    def objective_for(self, w_l: float, w_h: float) -> float:
        """Samples with the given weights and scores against the target."""
        policy = WeightPolicy(
            low_variant=self.low_variant,
            high_variant=self.high_variant,
            w_l=float(w_l),
            w_h=float(w_h),
            t_mid_frac=self.t_mid_frac,
        )
        cfg = SamplerConfig(
            kind=self.kind,
            steps=self.sched.T,
            seed=self.seed,
            shape=self.shape,
            policy=policy,
        )
        x = sample(self.pred, self.sched, cfg, self.B)
        return gaussian_w2_objective(x, self.target)


@dataclass
class SequentialSearchResult:
    """Outcome of the two sequential sweeps.

    Attributes:
        w_l: low-band optimum from stage 1.
        w_h: high-band optimum from stage 2 (run at w_l fixed).
        stage1: full stage-1 trace.
        stage2: full stage-2 trace.
        neutral_objective: objective at (neutral_w_l, neutral_w_h).
        objective: final objective at (w_l, w_h), i.e. stage2.best_objective.
    """

    w_l: float
    w_h: float
    stage1: SearchResult
    stage2: SearchResult
    neutral_objective: float
    objective: float


def sequential_wl_wh_search(ctx: SearchContext) -> SequentialSearchResult:
    """Runs the sequential low-then-high weight search.

    Stage 1 sweeps w_l with w_h pinned at its neutral value; stage 2 sweeps
    w_h with w_l pinned at the stage-1 optimum.  Both neutral weights sit on
    their stage's coarse grid for the default bounds, so the final objective
    never exceeds the neutral one.

    Args:
        ctx: evaluation bundle; see SearchContext.

    Returns:
        SequentialSearchResult with both optima and full traces.

    Raises:
        EvaluationError: propagated from either sweep.
    """
    neutral = ctx.objective_for(ctx.neutral_w_l, ctx.neutral_w_h)
    stage1 = two_stage_search(
        lambda w: ctx.objective_for(w, ctx.neutral_w_h),
        ctx.wl_lo,
        ctx.wl_hi,
        ctx.coarse,
        ctx.fine,
    )
    stage2 = two_stage_search(
        lambda w: ctx.objective_for(stage1.best_w, w),
        ctx.wh_lo,
        ctx.wh_hi,
        ctx.coarse,
        ctx.fine,
    )
    return SequentialSearchResult(
        w_l=stage1.best_w,
        w_h=stage2.best_w,
        stage1=stage1,
        stage2=stage2,
        neutral_objective=neutral,
        objective=stage2.best_objective,
    )
