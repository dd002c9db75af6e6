"""Fuzzy analysis clustering (FANNY) on a dissimilarity matrix.

Minimises

    F(U) = sum_v  sum_{i,j} u_iv^r u_jv^r d_ij / (2 sum_j u_jv^r)

over row-stochastic membership matrices U with r > 1.

Update rule. With w = u^r, W_v = sum_j w_jv, D_iv = sum_j w_jv d_ij and
Q_v = sum_j w_jv D_jv, the partial derivative is

    dF/du_iv = r u_iv^(r-1) a_iv,   a_iv = D_iv / W_v - Q_v / (2 W_v^2).

Setting it equal to a per-row Lagrange multiplier gives the fixed point
u_iv proportional to a_iv^(-1/(r-1)). For a metric, a_iv >= 0 by the
triangle inequality; it is floored at a tiny positive value otherwise.
Each sweep moves every row toward its fixed-point target and halves the
step until F does not increase, so F is monotone by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certainty import CertaintyMatrix
from .dissimilarity import as_array
from .errors import ValidationError
from .partition import Partition, canonical

A_FLOOR = 1e-300
MAX_HALVINGS = 40


@dataclass(frozen=True)
class FannyResult:
    u: np.ndarray
    objective: float
    iterations: int
    converged: bool
    r: float
    history: list[float] = field(default_factory=list, repr=False)

    def hard_labels(self) -> np.ndarray:
        """1-based label of the largest membership per individual (may skip clusters)."""
        return np.argmax(self.u, axis=1) + 1

    def partition(self) -> Partition:
        return Partition(canonical(self.hard_labels()))

    def certainty(self) -> CertaintyMatrix:
        return CertaintyMatrix(self.u, "fanny", self.r)


def fanny_objective(d: np.ndarray, u: np.ndarray, r: float) -> float:
    w = u ** r
    big_w = w.sum(axis=0)
    q = np.einsum("iv,ij,jv->v", w, d, w)
    return float(np.sum(q / (2.0 * big_w)))


def _target(d, u, r):
    w = u ** r
    big_w = w.sum(axis=0)
    dw = d @ w
    q = (w * dw).sum(axis=0)
    a = dw / big_w - q / (2.0 * big_w ** 2)
    a = np.maximum(a, A_FLOOR)
    # scale rows before the power to stay finite
    t = (a / a.min(axis=1, keepdims=True)) ** (-1.0 / (r - 1.0))
    return t / t.sum(axis=1, keepdims=True)


def fanny(m, c: int, r: float = 2.0, seed=0, tol: float = 1e-9, max_iter: int = 500) -> FannyResult:
    """Fuzzy memberships from a seeded symmetric-Dirichlet start.

    Stops when the relative objective change falls below ``tol``; hitting
    ``max_iter`` first returns ``converged=False`` rather than raising.
    """
    d = as_array(m)
    n = d.shape[0]
    if c < 2:
        raise ValidationError("fanny needs at least two clusters")
    if c > n:
        raise ValidationError(f"cluster count {c} exceeds N={n}")
    if not r > 1:
        raise ValidationError(f"membership exponent r must exceed 1, got {r}")
    rng = np.random.default_rng(seed)
    u = rng.dirichlet(np.ones(c), size=n)
    f = fanny_objective(d, u, r)
    history = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        step = _target(d, u, r) - u
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = u + t * step
            f_new = fanny_objective(d, cand, r)
            if f_new <= f:
                break
            t *= 0.5
        else:
            converged = True
            break
        change = f - f_new
        u, f = cand, f_new
        history.append(f)
        if change <= tol * max(abs(f), np.finfo(float).tiny):
            converged = True
            break
    u = np.clip(u, 0.0, 1.0)
    u = u / u.sum(axis=1, keepdims=True)
    return FannyResult(u, f, it, converged, float(r), history)
