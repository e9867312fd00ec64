"""Platt scaling of classifier confidences into stance probabilities, and the
three-band discretization (opposition / undisclosed / defense)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

BAND_OPPOSITION = "opposition"
BAND_UNDISCLOSED = "undisclosed"
BAND_DEFENSE = "defense"

# band boundaries; 0.4 belongs to undisclosed, 0.6 to defense
LOWER_BOUND = 0.4
UPPER_BOUND = 0.6


class CalibrationError(Exception):
    pass


@dataclass(frozen=True)
class PlattModel:
    slope: float
    offset: float

    def __post_init__(self):
        if not np.isfinite(self.slope) or not np.isfinite(self.offset):
            raise CalibrationError("non-finite Platt parameters")


@dataclass(frozen=True)
class StanceScore:
    user_id: str
    raw_confidence: float
    probability: float
    band: str


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def fit_platt(confidences: Sequence[float], labels: Sequence[int],
              user_ids: Optional[Sequence[str]] = None,
              training_user_ids: Optional[set[str]] = None,
              tol: float = 1e-8, max_iter: int = 100) -> PlattModel:
    """Fit sigmoid(A*s + B) to labels by Newton iteration on cross-entropy.

    Targets are smoothed to (N+ + 1)/(N+ + 2) and 1/(N- + 2), which keeps the
    optimum finite even on perfectly separated scores. When both ``user_ids``
    and ``training_user_ids`` are given, any overlap with the classifier's
    training set is a fatal error (the calibration set must be disjoint).
    """
    s = np.asarray(confidences, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if len(s) != len(y) or len(s) < 10:
        raise CalibrationError("need >= 10 (confidence, label) pairs")
    if set(np.unique(y)) != {0.0, 1.0}:
        raise CalibrationError("both classes must be present")
    if user_ids is not None and training_user_ids is not None:
        overlap = set(user_ids) & set(training_user_ids)
        if overlap:
            raise CalibrationError(
                f"calibration set overlaps classifier training set: "
                f"{sorted(overlap)[:5]} ...")

    n_pos = float(y.sum())
    n_neg = float(len(y) - n_pos)
    t_pos = (n_pos + 1.0) / (n_pos + 2.0)
    t_neg = 1.0 / (n_neg + 2.0)
    t = np.where(y == 1.0, t_pos, t_neg)

    a, b = 0.0, 0.0
    for _ in range(max_iter):
        p = _sigmoid(a * s + b)
        grad_a = float(np.sum((p - t) * s))
        grad_b = float(np.sum(p - t))
        if max(abs(grad_a), abs(grad_b)) < tol:
            return PlattModel(slope=a, offset=b)
        w = p * (1.0 - p)
        haa = float(np.sum(w * s * s)) + 1e-12
        hab = float(np.sum(w * s))
        hbb = float(np.sum(w)) + 1e-12
        det = haa * hbb - hab * hab
        if det <= 0:
            raise CalibrationError("singular Hessian in Platt fit")
        da = -(hbb * grad_a - hab * grad_b) / det
        db = -(-hab * grad_a + haa * grad_b) / det
        # halve the step until the objective stops increasing
        obj = float(-np.sum(t * np.log(np.clip(p, 1e-300, 1))
                            + (1 - t) * np.log(np.clip(1 - p, 1e-300, 1))))
        step = 1.0
        for _half in range(30):
            a_new, b_new = a + step * da, b + step * db
            p_new = _sigmoid(a_new * s + b_new)
            obj_new = float(-np.sum(
                t * np.log(np.clip(p_new, 1e-300, 1))
                + (1 - t) * np.log(np.clip(1 - p_new, 1e-300, 1))))
            if obj_new <= obj + 1e-12:
                a, b = a_new, b_new
                break
            step *= 0.5
        else:
            raise CalibrationError("Platt fit line search failed")
    p = _sigmoid(a * s + b)
    grad = max(abs(float(np.sum((p - t) * s))), abs(float(np.sum(p - t))))
    if grad < 1e-6:
        # numerically flat region; close enough for downstream use
        return PlattModel(slope=a, offset=b)
    raise CalibrationError(
        f"Platt fit did not converge in {max_iter} iterations "
        f"(gradient norm {grad:.3g})")


def calibrate(model: PlattModel, confidence: float) -> float:
    """Calibrated probability sigmoid(A*confidence + B), strictly in (0,1)."""
    p = float(_sigmoid(model.slope * np.asarray(confidence, dtype=np.float64)
                       + model.offset))
    return min(max(p, np.nextafter(0.0, 1.0)), np.nextafter(1.0, 0.0))


def calibrate_many(model: PlattModel, confidences: Sequence[float]) -> np.ndarray:
    return np.asarray([calibrate(model, c) for c in confidences])


def stance_band(probability: float) -> str:
    """opposition for p < 0.4, undisclosed for 0.4 <= p < 0.6, defense for
    p >= 0.6."""
    if not (0.0 <= probability <= 1.0):
        raise ValueError("probability must be in [0, 1]")
    if probability < LOWER_BOUND:
        return BAND_OPPOSITION
    if probability < UPPER_BOUND:
        return BAND_UNDISCLOSED
    return BAND_DEFENSE


def score_users(model: PlattModel, user_ids: Sequence[str],
                confidences: Sequence[float]) -> list[StanceScore]:
    out = []
    for uid, conf in zip(user_ids, confidences):
        p = calibrate(model, conf)
        out.append(StanceScore(user_id=uid, raw_confidence=float(conf),
                               probability=p, band=stance_band(p)))
    return out


def expected_calibration_error(probabilities: Sequence[float],
                               labels: Sequence[int], n_bins: int = 10) -> float:
    """Binned ECE: mean |empirical rate - mean predicted| weighted by bin
    occupancy."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    bins = np.clip((p * n_bins).astype(int), 0, n_bins - 1)
    ece = 0.0
    for b in range(n_bins):
        mask = bins == b
        if not mask.any():
            continue
        ece += mask.mean() * abs(float(y[mask].mean() - p[mask].mean()))
    return float(ece)


def calibration_table(probabilities: Sequence[float], labels: Sequence[int],
                      n_bins: int = 10) -> list[tuple[float, float, int]]:
    """Per-bin (mean confidence, empirical rate, count) rows for the
    calibration report."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    bins = np.clip((p * n_bins).astype(int), 0, n_bins - 1)
    rows = []
    for b in range(n_bins):
        mask = bins == b
        if mask.any():
            rows.append((float(p[mask].mean()), float(y[mask].mean()),
                         int(mask.sum())))
        else:
            rows.append(((b + 0.5) / n_bins, float("nan"), 0))
    return rows
