"""Truth-oracle scoring: losses, fitness, pairwise margins, aggregate utility.

Sign conventions, fixed once for the whole system: ``oracle_loss`` and
``log_score`` are losses (lower is better); ``fitness`` and the aggregate
margin utility are rewards (higher is better). The rating gradient consumes
the aggregate utility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeMismatch, ZeroMassOnTruth


def zero_one_table(n_outcomes: int) -> np.ndarray:
    """Default oracle: loss 0 on the truth, 1 elsewhere."""
    t = 1.0 - np.eye(n_outcomes)
    t.setflags(write=False)
    return t


@dataclass(frozen=True)
class MarginMatrix:
    """Skew-symmetric matrix of pairwise log-ratio advantages on the truth outcome."""

    n: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.shape != (self.n, self.n):
            raise ShapeMismatch(f"margin matrix shape {e.shape} != ({self.n}, {self.n})")
        if np.any(np.diagonal(e) != 0.0):
            raise ShapeMismatch("margin matrix must have a zero diagonal")
        if not np.array_equal(e, -e.T):
            raise ShapeMismatch("margin matrix must be exactly skew-symmetric")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True)
class ScoreReport:
    """Per-step competition scores for the agents evaluated at that step."""

    step: int
    agent_ids: np.ndarray
    losses: np.ndarray
    fitness: np.ndarray
    log_scores: np.ndarray
    margins: MarginMatrix
    aggregate: np.ndarray


def oracle_loss(pred: np.ndarray, truth_label: int, oracle: np.ndarray) -> float:
    """Expected loss sum_y pred(y) * oracle(y, truth) under the loss table."""
    pred = np.asarray(pred, dtype=np.float64)
    oracle = np.asarray(oracle, dtype=np.float64)
    n = len(pred)
    if oracle.shape != (n, n):
        raise ShapeMismatch(f"oracle table {oracle.shape} does not match {n} outcomes")
    if not 0 <= truth_label < n:
        raise ShapeMismatch(f"truth label {truth_label} outside [0, {n})")
    return float(pred @ oracle[:, truth_label])


def log_score(pred: np.ndarray, truth_label: int) -> float:
    """Negative log mass on the realized truth: -ln pred(truth)."""
    pred = np.asarray(pred, dtype=np.float64)
    if not 0 <= truth_label < len(pred):
        raise ShapeMismatch(f"truth label {truth_label} outside [0, {len(pred)})")
    mass = float(pred[truth_label])
    if mass <= 0.0:
        raise ZeroMassOnTruth("prediction assigns zero mass to the true outcome")
    return -math.log(mass)


def fitness(loss: float) -> float:
    """Map a nonnegative loss into (0, 1] via 1 / (1 + loss)."""
    if loss < 0 or not math.isfinite(loss):
        raise ShapeMismatch(f"loss must be finite and >= 0, got {loss!r}")
    return 1.0 / (1.0 + loss)


def margin_matrix(preds: Sequence[np.ndarray], truth_label: int) -> MarginMatrix:
    """Pairwise margins M(i, j) = ln(pred_i(truth) / pred_j(truth)).

    Built as an outer difference of log scores, which is exactly
    skew-symmetric in floating point.
    """
    n = len(preds)
    s = np.empty(n)
    for i, p in enumerate(preds):
        mass = float(np.asarray(p)[truth_label])
        if mass <= 0.0:
            raise ZeroMassOnTruth(f"agent {i} assigns zero mass to the true outcome")
        s[i] = math.log(mass)
    entries = s[:, None] - s[None, :]
    np.fill_diagonal(entries, 0.0)
    return MarginMatrix(n=n, entries=entries)


def aggregate_utility(m: MarginMatrix) -> np.ndarray:
    """Row sums U_i = sum_{j != i} M(i, j); sums to zero by skew-symmetry."""
    return m.entries.sum(axis=1)
