"""Greedy capped row selection.

Two families of data-dependent thresholds over the current residual
``f(x_k)`` and row gradients:

* distance rule: rank rows by ``|f_i|^2 / ||grad_i||^2`` (the squared
  distance a single-row projection would move) and keep rows at or above a
  capped threshold ``eps_k``;
* residual rule: rank rows by ``|f_i|^2`` and keep rows at or above a
  capped threshold ``delta_k``.

A sampled index is then drawn from the kept set with probability
proportional to the rule-specific weights.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import Convex, Scaled, ThresholdMode
from .errors import AllWeightsZero, DegenerateState, EmptySet
from .numerics import draw_weighted_index

# A row counts as numerically zero-gradient when its squared gradient norm
# falls below machine epsilon relative to the median row, or below the
# absolute underflow floor.  Distance ratios of such rows are dominated by
# rounding noise at the typical row scale, so they are ineligible for the
# distance rule (and carry zero weight in the residual rule's sampling).
# The median is the reference because a minority of rows with collapsed or
# exploded gradients must not shift the cutoff for the healthy majority.
ACTIVE_REL_EPS = float(np.finfo(np.float64).eps)
ACTIVE_ABS_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class RowGeometry:
    """Per-row quantities of the system at one iterate.

    ``active`` masks the rows eligible for distance ratios;
    ``active_residual_sq`` / ``active_fro_sq`` are the same norms restricted
    to those rows (identical to the full norms whenever every row is
    active, which is the generic case).
    """

    residual: np.ndarray
    grad_sq_norms: np.ndarray
    residual_sq: float
    jac_fro_sq: float
    active: np.ndarray
    active_residual_sq: float
    active_fro_sq: float

    @classmethod
    def from_state(cls, residual: np.ndarray, grad_sq_norms: np.ndarray) -> "RowGeometry":
        residual = np.asarray(residual, dtype=float)
        grad_sq_norms = np.asarray(grad_sq_norms, dtype=float)
        if residual.shape != grad_sq_norms.shape:
            raise ValueError("residual and gradient norms must have equal length")
        scale = float(np.median(grad_sq_norms)) if grad_sq_norms.size else 0.0
        if not np.isfinite(scale):
            scale = float(np.max(grad_sq_norms[np.isfinite(grad_sq_norms)], initial=0.0))
        cutoff = max(ACTIVE_ABS_FLOOR, ACTIVE_REL_EPS * scale)
        active = grad_sq_norms > cutoff
        res_sq = residual * residual
        return cls(
            residual=residual,
            grad_sq_norms=grad_sq_norms,
            residual_sq=float(res_sq.sum()),
            jac_fro_sq=float(grad_sq_norms.sum()),
            active=active,
            active_residual_sq=float(res_sq[active].sum()),
            active_fro_sq=float(grad_sq_norms[active].sum()),
        )

    @property
    def m(self) -> int:
        return len(self.residual)


class SelectionKind(enum.Enum):
    DISTANCE = "distance"
    RESIDUAL = "residual"


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """A nonempty greedy index subset with its threshold and sampling weights."""

    indices: np.ndarray
    threshold: float
    weights: np.ndarray
    kind: SelectionKind

    def __len__(self) -> int:
        return len(self.indices)


def compute_epsilon(g: RowGeometry, mode: ThresholdMode) -> float:
    """Capped threshold for the distance rule.

    Convex(theta):  eps = theta * max_i(|f_i|^2 / ||grad_i||^2) / ||f||^2
                          + (1 - theta) / ||J||_F^2
    Scaled(xi):     eps = xi * max_i(|f_i|^2 / ||grad_i||^2) / ||f||^2

    The maximum, ``||f||^2`` and ``||J||_F^2`` all run over the active rows,
    which keeps the argmax row inside the selected set by construction.
    """
    if g.residual_sq <= 0.0:
        raise DegenerateState("distance threshold undefined at zero residual")
    if not g.active.any():
        raise DegenerateState("every row gradient vanished")
    if g.active_residual_sq <= 0.0:
        raise DegenerateState("all residual mass sits on zero-gradient rows")
    ratios = g.residual[g.active] ** 2 / g.grad_sq_norms[g.active]
    max_ratio = float(ratios.max())
    if isinstance(mode, Convex):
        return mode.theta * max_ratio / g.active_residual_sq + (1.0 - mode.theta) / g.active_fro_sq
    if isinstance(mode, Scaled):
        return mode.xi * max_ratio / g.active_residual_sq
    raise TypeError(f"unknown threshold mode: {mode!r}")


def build_distance_set(g: RowGeometry, eps: float) -> SelectionResult:
    """Rows whose squared residual meets ``eps * ||f||^2 * ||grad_i||^2``.

    ``eps`` must come from :func:`compute_epsilon` on the same geometry.
    Weights are the squared residual entries of the kept rows.  Ties at the
    threshold are included.  The argmax-ratio row satisfies the inequality
    in exact arithmetic, so it is kept unconditionally; this pins the set
    nonempty when rounding perturbs an exact tie.
    """
    res_sq = g.residual * g.residual
    mask = g.active & (res_sq >= eps * g.active_residual_sq * g.grad_sq_norms)
    ratios = np.where(g.active, res_sq / np.where(g.active, g.grad_sq_norms, 1.0), -np.inf)
    mask[int(np.argmax(ratios))] = True
    indices = np.flatnonzero(mask)
    if indices.size == 0:
        raise EmptySet("distance set came out empty; threshold inconsistent with geometry")
    return SelectionResult(
        indices=indices,
        threshold=eps,
        weights=res_sq[indices],
        kind=SelectionKind.DISTANCE,
    )


def compute_delta(g: RowGeometry, mode: ThresholdMode) -> float:
    """Capped threshold for the residual rule.

    Convex(theta):  delta = theta * max_i |f_i|^2 / ||f||^2 + (1 - theta) / m
    Scaled(xi):     delta = xi * max_i |f_i|^2 / ||f||^2

    In Convex mode ``1/m <= delta <= 1`` always holds.
    """
    if g.residual_sq <= 0.0:
        raise DegenerateState("residual threshold undefined at zero residual")
    max_res_sq = float((g.residual * g.residual).max())
    if isinstance(mode, Convex):
        return mode.theta * max_res_sq / g.residual_sq + (1.0 - mode.theta) / g.m
    if isinstance(mode, Scaled):
        return mode.xi * max_res_sq / g.residual_sq
    raise TypeError(f"unknown threshold mode: {mode!r}")


def build_residual_set(g: RowGeometry, delta: float) -> SelectionResult:
    """Rows whose squared residual meets ``delta * ||f||^2``.

    ``delta`` must come from :func:`compute_delta` on the same geometry.
    Weights are ``|f_i|^2 / ||grad_i||^2`` for active member rows and zero
    for zero-gradient members (they stay in the set but are never sampled).
    The largest-residual row is kept unconditionally (it meets the
    threshold in exact arithmetic), pinning the set nonempty under
    rounding.
    """
    res_sq = g.residual * g.residual
    mask = res_sq >= delta * g.residual_sq
    mask[int(np.argmax(res_sq))] = True
    indices = np.flatnonzero(mask)
    if indices.size == 0:
        raise EmptySet("residual set came out empty; threshold inconsistent with geometry")
    weights = np.where(
        g.active[indices], res_sq[indices] / np.where(g.active[indices], g.grad_sq_norms[indices], 1.0), 0.0
    )
    if not weights.any():
        raise AllWeightsZero("every selected row has a vanishing gradient")
    return SelectionResult(
        indices=indices,
        threshold=delta,
        weights=weights,
        kind=SelectionKind.RESIDUAL,
    )


def sample_index(sel: SelectionResult, rng: np.random.Generator) -> int:
    """Draw one member of ``sel`` with probability ``weights / sum(weights)``.

    Consumes exactly one uniform variate from ``rng`` (cumulative-sum
    inversion), so the draw sequence is reproducible for a fixed seed.
    """
    return int(sel.indices[draw_weighted_index(rng, sel.weights)])
