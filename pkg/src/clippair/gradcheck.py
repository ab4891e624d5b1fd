"""Finite-difference certification of every analytic gradient.

``finite_diff`` is the independent oracle (central differences); ``check``
compares an analytic gradient against it coordinate by coordinate.  The
``certify_*`` helpers draw random loss instances, resample any instance
that lands near a non-differentiable kink (hinge boundary, SmoothL1 knee,
top-k selection tie), and report the worst error observed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import losses
from .pairs import CrossSegmentPolicy, build_pair_sets, mine_hard_negatives
from .types import LossWeights, MarginParams, Segment, SegmentIndices

__all__ = [
    "DEFAULT_STEP",
    "DEFAULT_TOL_REL",
    "DEFAULT_TOL_ABS",
    "GradReport",
    "finite_diff",
    "check",
    "certify_clip_loss",
    "certify_boundary_loss",
    "certify_aux_loss",
    "run_certification",
]

DEFAULT_STEP = 1e-5
DEFAULT_TOL_REL = 1e-4
DEFAULT_TOL_ABS = 1e-7
KINK_MARGIN = 1e-3


@dataclass(frozen=True)
class GradReport:
    max_rel_error: float
    max_abs_error: float
    worst_coordinate: int
    passed: bool


def finite_diff(f: Callable[[np.ndarray], float], x: np.ndarray,
                h: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate."""
    if h <= 0:
        raise ValueError(f"step h must be > 0, got {h}")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    probe = x.copy()
    pflat = probe.reshape(-1)
    for i in range(pflat.size):
        orig = pflat[i]
        pflat[i] = orig + h
        hi = f(probe)
        pflat[i] = orig - h
        lo = f(probe)
        pflat[i] = orig
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise ValueError(f"non-finite function value while probing coordinate {i}")
        flat[i] = (hi - lo) / (2.0 * h)
    return grad


def check(analytic: np.ndarray, numeric: np.ndarray,
          tol_rel: float = DEFAULT_TOL_REL,
          tol_abs: float = DEFAULT_TOL_ABS) -> GradReport:
    """Worst-coordinate comparison of two gradients.

    Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-12); the
    report passes when the worst relative error is under tol_rel or the
    worst absolute error is under tol_abs.
    """
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.size != n.size:
        raise ValueError(f"gradient length mismatch: {a.size} vs {n.size}")
    abs_err = np.abs(a - n)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-12)
    rel_err = abs_err / denom
    worst = int(np.argmax(rel_err))
    max_rel = float(rel_err[worst])
    max_abs = float(abs_err.max())
    return GradReport(max_rel, max_abs, worst, max_rel < tol_rel or max_abs < tol_abs)


def _random_layout(rng, num_clips):
    """One or two valid normalized segments on a 0.1 grid with clips inside."""
    for _ in range(64):
        n_seg = int(rng.integers(1, 3))
        points = np.sort(rng.choice(np.arange(11), size=2 * n_seg, replace=False)) / 10.0
        segs = [Segment(points[2 * i], points[2 * i + 1]) for i in range(n_seg)]
        pairs = build_pair_sets(num_clips, segs, CrossSegmentPolicy.EXCLUDED)
        if pairs.positives and pairs.negatives:
            return segs, pairs
    raise RuntimeError("failed to draw a usable segment layout")


def certify_clip_loss(seed: int, h: float = DEFAULT_STEP) -> GradReport:
    """One random clip-loss instance; resamples top-k selection near-ties."""
    rng = np.random.default_rng(seed)
    for _ in range(64):
        num_clips = int(rng.integers(4, 17))
        dim = int(rng.integers(3, 9))
        emb = rng.standard_normal((num_clips, dim))
        _, pairs = _random_layout(rng, num_clips)
        sims = losses.similarity_matrix(emb)
        k = int(rng.integers(1, 11))
        mined = mine_hard_negatives(sims, pairs, k)
        neg_sims = np.sort([sims[i, j] for (i, j) in pairs.negatives])[::-1]
        # A perturbation must not flip the top-k set.
        if k < neg_sims.size and neg_sims[k - 1] - neg_sims[k] < KINK_MARGIN:
            continue
        tau = float(rng.uniform(0.07, 0.5))
        result = losses.clip_similarity_loss(emb, mined, tau)
        numeric = finite_diff(
            lambda m: losses.clip_similarity_loss(m, mined, tau).value, emb, h
        )
        return check(result.grad, numeric)
    raise RuntimeError("could not draw a kink-free clip-loss instance")


def certify_boundary_loss(seed: int, h: float = DEFAULT_STEP) -> GradReport:
    """One random boundary-loss instance away from the hinge kink."""
    rng = np.random.default_rng(seed)
    params = MarginParams()
    for _ in range(64):
        num_clips = int(rng.integers(4, 17))
        dim = int(rng.integers(3, 9))
        start = int(rng.integers(0, num_clips))
        end = int(rng.integers(start, num_clips))
        seg = SegmentIndices(start, end, num_clips)
        window = int(rng.integers(0, 2))
        try:
            labeling = losses.label_boundary_clips(seg, window)
        except ValueError:
            continue
        emb = rng.standard_normal((num_clips, dim))
        sims = losses.similarity_matrix(emb)
        pos = sorted(labeling.positive_indices)
        neg = sorted(labeling.negative_indices)
        center = labeling.center_index
        gap = (sims[center, neg].mean() - sims[center, pos].mean()
               + losses.dynamic_margin(seg, params))
        if abs(gap) < KINK_MARGIN:
            continue
        result = losses.boundary_loss(emb, seg, labeling, params)
        numeric = finite_diff(
            lambda m: losses.boundary_loss(m, seg, labeling, params).value, emb, h
        )
        return check(result.grad, numeric)
    raise RuntimeError("could not draw a kink-free boundary-loss instance")


def certify_aux_loss(seed: int, h: float = DEFAULT_STEP) -> GradReport:
    """One random auxiliary-loss instance away from the SmoothL1 knees."""
    rng = np.random.default_rng(seed)
    beta = 1.0
    weights = LossWeights(
        lambda_s=float(rng.uniform(0.2, 2.0)),
        lambda_e=float(rng.uniform(0.2, 2.0)),
        lambda_c=float(rng.uniform(0.2, 2.0)),
        lambda_l=float(rng.uniform(0.2, 2.0)),
    )
    for _ in range(64):
        a, b = np.sort(rng.uniform(0.0, 1.0, size=2))
        c, d = np.sort(rng.uniform(0.0, 1.0, size=2))
        if b - a < 1e-3 or d - c < 1e-3:
            continue
        pred = Segment(a, b)
        gt = Segment(c, d)
        residuals = (a - c, b - d, 0.5 * (a + b) - 0.5 * (c + d), (b - a) - (d - c))
        if any(abs(abs(r) - beta) < KINK_MARGIN for r in residuals):
            continue
        result = losses.aux_boundary_loss(pred, gt, weights, beta)

        def f(x: np.ndarray) -> float:
            value, _, _ = losses.aux_boundary_terms(
                float(x[0]), float(x[1]), gt.start, gt.end, weights, beta
            )
            return value

        numeric = finite_diff(f, np.array([a, b]), h)
        return check(result.grad, numeric)
    raise RuntimeError("could not draw a kink-free aux-loss instance")


def run_certification(seeds: Sequence[int] = range(100),
                      h: float = DEFAULT_STEP) -> dict[str, list[GradReport]]:
    """Run all three loss certifications over the given seeds."""
    return {
        "clip_similarity_loss": [certify_clip_loss(s, h) for s in seeds],
        "boundary_loss": [certify_boundary_loss(s, h) for s in seeds],
        "aux_boundary_loss": [certify_aux_loss(s, h) for s in seeds],
    }
