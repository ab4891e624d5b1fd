"""Forward computations and analytic gradients for the three loss terms.

The clip-level similarity loss is an InfoNCE-style ratio over positive
pairs versus mined hard-negative pairs; the main boundary loss is a hinge
on mean center-to-positive vs center-to-negative similarity with a margin
that grows with segment length; the auxiliary boundary loss applies
SmoothL1 to start, end, center, and length residuals of a predicted
window.  Every gradient is derived by hand (no autodiff) so that it can be
certified against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .metrics import iou
from .pairs import PairSets, segment_to_indices
from .types import (
    LossResult,
    LossWeights,
    MarginParams,
    Segment,
    SegmentIndices,
    as_matrix,
)

__all__ = [
    "BoundaryLabeling",
    "cosine_similarity",
    "similarity_matrix",
    "clip_loss_value",
    "clip_similarity_loss",
    "margin_from_length",
    "dynamic_margin",
    "label_boundary_clips",
    "boundary_loss",
    "average_boundary_loss",
    "smooth_l1",
    "aux_boundary_terms",
    "aux_boundary_loss",
    "total_loss",
]


@dataclass(frozen=True)
class BoundaryLabeling:
    """Clip indices treated as positive / negative around one GT segment."""

    positive_indices: frozenset[int]
    negative_indices: frozenset[int]
    center_index: int

    def __post_init__(self) -> None:
        if self.positive_indices & self.negative_indices:
            raise ValueError("boundary positives and negatives must be disjoint")
        if self.center_index not in self.positive_indices:
            raise ValueError("center clip must be among the positives")


def _row_norms(mat: np.ndarray, rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1)
    for r in np.unique(rows):
        if norms[r] == 0.0:
            raise ValueError(f"zero-norm embedding row {int(r)}")
    return norms


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0:
        raise ValueError("zero-norm vector u in cosine similarity")
    if nv == 0.0:
        raise ValueError("zero-norm vector v in cosine similarity")
    return float(np.clip(float(u @ v) / (nu * nv), -1.0, 1.0))


def similarity_matrix(emb) -> np.ndarray:
    """All pairwise cosine similarities; symmetric with unit diagonal."""
    mat = as_matrix(emb)
    norms = np.linalg.norm(mat, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"zero-norm embedding row {int(zero[0])}")
    unit = mat / norms[:, None]
    sims = unit @ unit.T
    sims = 0.5 * (sims + sims.T)
    np.clip(sims, -1.0, 1.0, out=sims)
    np.fill_diagonal(sims, 1.0)
    return sims


def _pair_cosines(mat, norms, idx_a, idx_b):
    s = np.einsum("ij,ij->i", mat[idx_a], mat[idx_b]) / (norms[idx_a] * norms[idx_b])
    return np.clip(s, -1.0, 1.0)


def _add_cosine_grads(grad, mat, norms, idx_a, idx_b, sims, weights):
    """grad += sum_p weights[p] * d cos(row a_p, row b_p) / d mat."""
    inv = 1.0 / (norms[idx_a] * norms[idx_b])
    da = mat[idx_b] * inv[:, None] - (sims / norms[idx_a] ** 2)[:, None] * mat[idx_a]
    db = mat[idx_a] * inv[:, None] - (sims / norms[idx_b] ** 2)[:, None] * mat[idx_b]
    np.add.at(grad, idx_a, weights[:, None] * da)
    np.add.at(grad, idx_b, weights[:, None] * db)


def _clip_loss_terms(pos_sims, neg_sims, tau):
    """Stable value of -log(sum_P e^{s/tau} / (sum_P e^{s/tau} + sum_N e^{s/tau}))
    plus d value / d s for each positive and each mined negative."""
    zp = np.asarray(pos_sims, dtype=np.float64) / tau
    zn = np.asarray(neg_sims, dtype=np.float64) / tau
    shift = max(zp.max(), zn.max()) if zn.size else zp.max()
    ep = np.exp(zp - shift)
    en = np.exp(zn - shift)
    pos_total = ep.sum()
    neg_total = en.sum()
    value = float(np.log1p(neg_total / pos_total))
    inv_all = 1.0 / (pos_total + neg_total)
    pos_coeff = ep * (inv_all - 1.0 / pos_total) / tau
    neg_coeff = en * inv_all / tau
    return value, pos_coeff, neg_coeff


def clip_loss_value(pos_sims, neg_sims, tau: float) -> float:
    """Clip similarity loss at the similarity level (no embeddings involved)."""
    if tau <= 0:
        raise ValueError(f"temperature tau must be > 0, got {tau}")
    if len(np.atleast_1d(pos_sims)) == 0:
        raise ValueError("no positive pairs")
    if len(np.atleast_1d(neg_sims)) == 0:
        return 0.0
    value, _, _ = _clip_loss_terms(np.atleast_1d(pos_sims), np.atleast_1d(neg_sims), tau)
    return value


def clip_similarity_loss(emb, pairs: PairSets, tau: float) -> LossResult:
    """Contrastive loss over positive pairs vs mined hard negatives.

    The gradient is the exact derivative with respect to every embedding
    entry, chained through the cosine similarity of each participating
    pair.  An empty hard-negative set gives value 0 and a zero gradient.
    """
    if tau <= 0:
        raise ValueError(f"temperature tau must be > 0, got {tau}")
    if pairs.hard_negatives is None:
        raise ValueError("hard negatives not mined; call mine_hard_negatives first")
    mat = as_matrix(emb)
    positives = sorted(pairs.positives)
    if not positives:
        raise ValueError("no positive pairs")
    negatives = list(pairs.hard_negatives)
    if not negatives:
        return LossResult(0.0, np.zeros_like(mat))

    pi = np.array([p[0] for p in positives])
    pj = np.array([p[1] for p in positives])
    ni = np.array([p[0] for p in negatives])
    nj = np.array([p[1] for p in negatives])
    norms = _row_norms(mat, np.concatenate([pi, pj, ni, nj]))

    pos_sims = _pair_cosines(mat, norms, pi, pj)
    neg_sims = _pair_cosines(mat, norms, ni, nj)
    value, pos_coeff, neg_coeff = _clip_loss_terms(pos_sims, neg_sims, tau)

    grad = np.zeros_like(mat)
    _add_cosine_grads(grad, mat, norms, pi, pj, pos_sims, pos_coeff)
    _add_cosine_grads(grad, mat, norms, ni, nj, neg_sims, neg_coeff)
    return LossResult(value, grad)


def margin_from_length(normalized_length: float, params: MarginParams) -> float:
    """min(threshold, base + length_scaling * normalized_length)."""
    if not 0 <= normalized_length:
        raise ValueError(f"normalized length must be >= 0, got {normalized_length}")
    return min(params.threshold, params.base + params.length_scaling * normalized_length)


def dynamic_margin(seg: SegmentIndices, params: MarginParams) -> float:
    """Hinge margin for one GT segment, grown with its normalized clip span."""
    return margin_from_length(seg.normalized_length, params)


def label_boundary_clips(seg: SegmentIndices, window: int = 1) -> BoundaryLabeling:
    """Mark clips around the segment start, center, and end as positive.

    Positives are the clips within ``window`` of the start, center, or end
    index, restricted to the segment itself plus the window collars around
    its two ends.  Negatives are every clip strictly outside the segment
    extended by ``window`` on both sides, so the two sets are disjoint by
    construction.
    """
    if window < 0:
        raise ValueError(f"window must be >= 0, got {window}")
    total = seg.num_clips
    start, end = seg.start_index, seg.end_index
    center = (start + end) // 2

    def around(idx: int) -> set[int]:
        return set(range(max(0, idx - window), min(total - 1, idx + window) + 1))

    near = around(start) | around(center) | around(end)
    allowed = set(range(start, end + 1)) | around(start) | around(end)
    positives = near & allowed
    negatives = {i for i in range(total) if i < start - window or i > end + window}
    if not negatives:
        raise ValueError(
            f"no negative clips: segment [{start}, {end}] with window {window} "
            f"covers all {total} clips"
        )
    return BoundaryLabeling(frozenset(positives), frozenset(negatives), center)


def boundary_loss(
    emb,
    seg: SegmentIndices,
    labeling: BoundaryLabeling,
    params: MarginParams,
) -> LossResult:
    """Hinge on (mean negative sim) - (mean positive sim) + dynamic margin.

    Similarities are taken against the segment's center clip.  When the
    hinge is inactive (including exactly at the kink) the gradient is the
    zero tensor; otherwise it is the exact subgradient.
    """
    mat = as_matrix(emb)
    pos = np.array(sorted(labeling.positive_indices))
    neg = np.array(sorted(labeling.negative_indices))
    if pos.max(initial=-1) >= mat.shape[0] or neg.max(initial=-1) >= mat.shape[0]:
        raise ValueError("labeling refers to clip indices beyond the embedding matrix")
    if neg.size == 0:
        raise ValueError("no negative clips in labeling")
    center = np.full(pos.size, labeling.center_index)
    norms = _row_norms(mat, np.concatenate([pos, neg, [labeling.center_index]]))

    pos_sims = _pair_cosines(mat, norms, center, pos)
    neg_center = np.full(neg.size, labeling.center_index)
    neg_sims = _pair_cosines(mat, norms, neg_center, neg)
    hinge = float(neg_sims.mean() - pos_sims.mean() + dynamic_margin(seg, params))
    if hinge <= 0.0:
        return LossResult(0.0, np.zeros_like(mat))

    grad = np.zeros_like(mat)
    _add_cosine_grads(grad, mat, norms, neg_center, neg, neg_sims,
                      np.full(neg.size, 1.0 / neg.size))
    _add_cosine_grads(grad, mat, norms, center, pos, pos_sims,
                      np.full(pos.size, -1.0 / pos.size))
    return LossResult(hinge, grad)


def average_boundary_loss(
    emb,
    segments: Sequence[Segment],
    params: MarginParams,
    window: int = 1,
) -> LossResult:
    """Mean of the per-segment boundary losses for multi-segment ground truth.

    Segments are given normalized to [0, 1] and mapped to clip index spans
    with the same membership rule used for pair construction.
    """
    mat = as_matrix(emb)
    if len(segments) == 0:
        raise ValueError("segment list is empty")
    total_value = 0.0
    total_grad = np.zeros_like(mat)
    for seg in segments:
        idx = segment_to_indices(seg, mat.shape[0])
        labeling = label_boundary_clips(idx, window)
        part = boundary_loss(mat, idx, labeling, params)
        total_value += part.value
        total_grad += part.grad
    n = len(segments)
    return LossResult(total_value / n, total_grad / n)


def smooth_l1(x: float, y: float, beta: float = 1.0) -> tuple[float, float]:
    """SmoothL1(x, y) and its derivative with respect to x.

    Quadratic d^2 / (2 beta) for |d| < beta, linear |d| - beta/2 beyond,
    with d = x - y.
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    d = x - y
    if abs(d) < beta:
        return d * d / (2.0 * beta), d / beta
    return abs(d) - beta / 2.0, math.copysign(1.0, d)


def aux_boundary_terms(
    pred_start: float,
    pred_end: float,
    gt_start: float,
    gt_end: float,
    weights: LossWeights,
    beta: float = 1.0,
) -> tuple[float, float, float]:
    """Weighted SmoothL1 over start/end/center/length residuals.

    Returns (value, d value / d pred_start, d value / d pred_end).  Works
    on raw coordinates so callers may feed unordered (even inverted)
    predictions, e.g. an untrained regressor.
    """
    pred_center = 0.5 * (pred_start + pred_end)
    pred_len = pred_end - pred_start
    gt_center = 0.5 * (gt_start + gt_end)
    gt_len = gt_end - gt_start

    v_s, d_s = smooth_l1(pred_start, gt_start, beta)
    v_e, d_e = smooth_l1(pred_end, gt_end, beta)
    v_c, d_c = smooth_l1(pred_center, gt_center, beta)
    v_l, d_l = smooth_l1(pred_len, gt_len, beta)

    value = (weights.lambda_s * v_s + weights.lambda_e * v_e
             + weights.lambda_c * v_c + weights.lambda_l * v_l)
    g_start = (weights.lambda_s * d_s + 0.5 * weights.lambda_c * d_c
               - weights.lambda_l * d_l)
    g_end = (weights.lambda_e * d_e + 0.5 * weights.lambda_c * d_c
             + weights.lambda_l * d_l)
    return value, g_start, g_end


def aux_boundary_loss(
    pred: Segment,
    gt: Segment | Sequence[Segment],
    weights: LossWeights,
    beta: float = 1.0,
) -> LossResult:
    """Auxiliary regression loss of a predicted window against ground truth.

    With several GT segments the prediction is scored against the one with
    maximum IoU (ties broken by earliest list position).  The gradient is
    the 2-vector over (predicted start, predicted end).
    """
    if isinstance(gt, Segment):
        target = gt
    else:
        candidates = list(gt)
        if not candidates:
            raise ValueError("ground-truth segment list is empty")
        best = 0
        best_iou = -1.0
        for i, seg in enumerate(candidates):
            overlap = iou(pred, seg)
            if overlap > best_iou:
                best, best_iou = i, overlap
        target = candidates[best]
    value, g_start, g_end = aux_boundary_terms(
        pred.start, pred.end, target.start, target.end, weights, beta
    )
    return LossResult(value, np.array([g_start, g_end]))


def total_loss(basic: float, clip: float, boun: float, b_aux: float,
               weights: LossWeights) -> float:
    """Weighted sum of the basic loss and the three extra loss terms."""
    for name, v in (("basic", basic), ("clip", clip), ("boun", boun), ("b_aux", b_aux)):
        if not math.isfinite(v):
            raise ValueError(f"non-finite {name} loss component: {v}")
    return (weights.lambda_basic * basic + weights.lambda_clip * clip
            + weights.lambda_boun * boun + weights.lambda_b_aux * b_aux)
