"""Hyperplane families with prescribed joint properties.

Each family starts from a base hyperplane and perturbs its coefficients by
powers of small distinct epsilons, which makes the stacked parameter matrix
full rank while keeping every member's classification identical to the
base.  Epsilons are halved geometrically until classification survives
with margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MARGIN, Hyperplane, affine_fit, numeric_rank
from .ordering import InseparableError, separate


class MarginError(ValueError):
    """A conditioning point violates the required margin; carries the point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class BundleConfig:
    margin: float = MARGIN
    max_halvings: int = 60
    epsilons: tuple | None = None

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.epsilons is not None:
            eps = tuple(float(e) for e in self.epsilons)
            if any(not 0.0 < e < 1.0 for e in eps):
                raise ValueError("epsilons must lie in (0, 1)")
            if len(set(eps)) != len(eps):
                raise ValueError("epsilons must be pairwise distinct")
            object.__setattr__(self, "epsilons", eps)

    def seed_epsilons(self, count):
        if self.epsilons is not None:
            if len(self.epsilons) < count:
                raise ValueError(f"need {count} epsilons, got {len(self.epsilons)}")
            return np.array(self.epsilons[:count])
        return 0.5 * (np.arange(1, count + 1) / (count + 1)) + 0.01


def _pivot_permutation(w):
    """Order coordinates so the largest-magnitude weight entry leads."""
    pivot = int(np.argmax(np.abs(w)))
    perm = np.concatenate([[pivot], np.delete(np.arange(w.shape[0]), pivot)])
    return perm


def _classification_margins(hyperplanes, D_plus, D_zero):
    worst = np.inf
    offender = None
    for h in hyperplanes:
        if D_plus is not None and len(D_plus):
            vals = h.value(D_plus)
            i = int(np.argmin(vals))
            if vals[i] < worst:
                worst, offender = float(vals[i]), D_plus[i]
        if D_zero is not None and len(D_zero):
            vals = -h.value(D_zero)
            i = int(np.argmin(vals))
            if vals[i] < worst:
                worst, offender = float(vals[i]), D_zero[i]
    return worst, offender


def _bounded_prescale(base, eps, count, bound, worst):
    """Scale factor letting the seed epsilons survive the margin check.

    Scaling the base grows every conditioning margin while the family's
    independent directions stay at seed size, so classification holds
    without shrinking the epsilons.  The factor is capped where further
    scaling would push the parameter matrix below the rank tolerance;
    beyond the cap the halving loop takes over.
    """
    powers = np.arange(1, max(count, 2))
    P = np.array([[e ** p for p in powers] for e in eps])
    prof = float(np.linalg.svd(P, compute_uv=False)[-1]) if P.size else 1.0
    p_norm = float(np.sqrt(base.w @ base.w + base.b ** 2))
    s_max = prof / (100.0 * 1e-9 * max(p_norm, 1e-12) * np.sqrt(count))
    return float(np.clip(2.0 * bound / worst, 1.0, max(s_max, 1.0)))


def _family_members(base, eps, powers, perm, with_bias, anchor=None):
    """Perturbed copies of the base hyperplane, one per entry of ``powers``.

    In pivot order the lead weight stays fixed and coordinate i picks up
    eps[i-1]**power; with_bias also perturbs the bias by eps[-1]**power.
    When an anchor is given, every member's bias is recomputed so the
    member passes through it exactly.
    """
    w_p = base.w[perm]
    members = []
    for power in powers:
        w_new = w_p.copy()
        w_new[1:] += eps[: w_p.shape[0] - 1] ** power
        b_new = base.b + (eps[-1] ** power if with_bias else 0.0)
        w_out = np.empty_like(w_new)
        w_out[perm] = w_new
        if anchor is not None:
            b_new = -float(w_out @ anchor)
        members.append(Hyperplane(w_out, b_new))
    return members


def same_classification_bundle(base, D_plus, D_zero, count, cfg=BundleConfig(),
                               trace=None):
    """``count`` hyperplanes (including the base) classifying like the base.

    The base must put D_plus on its plus side and D_zero on its zero side,
    both with margin at least cfg.margin.  Members perturb the non-pivot
    weights and the bias by powers of distinct epsilons, halved until every
    member preserves the classification with margin >= cfg.margin / 2; the
    stacked (dim+1)-row parameter matrix then has full rank.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    n = base.dim
    D_plus = np.atleast_2d(np.asarray(D_plus, dtype=float)) if D_plus is not None and len(D_plus) else np.zeros((0, n))
    D_zero = np.atleast_2d(np.asarray(D_zero, dtype=float)) if D_zero is not None and len(D_zero) else np.zeros((0, n))
    delta = cfg.margin

    worst, offender = _classification_margins([base], D_plus, D_zero)
    if worst < delta:
        raise MarginError(
            f"base hyperplane margin {worst:.3g} is below the required {delta:.3g}",
            point=offender,
        )
    if count == 1:
        return [base]

    perm = _pivot_permutation(base.w)
    eps = cfg.seed_epsilons(n)
    # scale the base up until the seed epsilons cannot flip any
    # conditioning point: margins grow with the scale while the family's
    # independent directions stay at seed size, so both classification and
    # the full-rank property hold without shrinking the epsilons
    stacks = [p for p in (D_plus, D_zero) if len(p)]
    if stacks:
        pts = np.vstack(stacks)
        bound = float(np.max(np.abs(pts[:, perm[1:]]) @ eps[: n - 1] + eps[-1]))
        base = base.scaled(_bounded_prescale(base, eps, count, bound, worst))
    powers = np.arange(1, count)
    for halving in range(cfg.max_halvings + 1):
        members = _family_members(base, eps, powers, perm, with_bias=True)
        worst, offender = _classification_margins(members, D_plus, D_zero)
        if worst >= delta / 2.0:
            if trace is not None:
                trace.append({"event": "bundle_halvings", "count": halving})
            break
        eps = eps / 2.0
    else:
        raise MarginError(
            f"epsilon halving exhausted; worst member margin {worst:.3g}",
            point=offender,
        )

    bundle = [base] + members
    stacked = np.vstack([
        np.column_stack([h.w for h in bundle]),
        np.array([[h.b for h in bundle]]),
    ])
    expected = min(count, n + 1)
    rank = numeric_rank(stacked)
    if rank < expected:
        raise RuntimeError(
            f"bundle parameter matrix rank {rank} < {expected}; epsilons degenerated"
        )
    return bundle


def reversed_pair_bundles(D1, D2, k1, k2, cfg=BundleConfig(), trace=None):
    """Two families with opposite sides: D1 in every plus of the first and
    every zero of the second, D2 reversed.

    When k1 == k2 == dim, the first family's weight rows form a
    nonsingular frame, so D1's image under its preactivations is an affine
    transform of D1 (checked by fit).
    """
    D1 = np.atleast_2d(np.asarray(D1, dtype=float))
    D2 = np.atleast_2d(np.asarray(D2, dtype=float))
    res = separate(D1, D2)
    if not res.separable:
        raise InseparableError(
            f"point sets are not strictly separable (LP margin {res.lp_margin:.3g})",
            res,
        )
    base = res.hyperplane
    bundle_a = same_classification_bundle(base, D1, D2, k1, cfg, trace)
    bundle_b = same_classification_bundle(base.negated(), D2, D1, k2, cfg, trace)

    n = D1.shape[1]
    if k1 == k2 == n:
        for bundle, pts in ((bundle_a, D1), (bundle_b, D2)):
            W = np.array([h.w for h in bundle])
            if numeric_rank(W) < n:
                raise RuntimeError("bundle weight frame lost full rank")
            image = pts @ W.T + np.array([h.b for h in bundle])
            _, resid = affine_fit(pts, image)
            if resid > 1e-8:
                raise RuntimeError(f"affine image check failed (residual {resid:.3g})")
    return bundle_a, bundle_b


def common_point_bundle(base, anchor, D_plus, cfg=BundleConfig(), trace=None,
                        count=None):
    """dim hyperplanes through one common point, all classifying like the base.

    The base must contain the anchor; members recompute their bias from the
    anchor so the whole family meets exactly there, and the dim-by-dim
    weight matrix of the first dim members is nonsingular, so their
    intersection is the anchor alone.  ``count`` beyond dim appends
    redundant members from the same power family.
    """
    n = base.dim
    count = n if count is None else count
    if count < n:
        raise ValueError("count below the dimension breaks the frame property")
    anchor = np.asarray(anchor, dtype=float)
    if abs(float(base.value(anchor))) > 1e-9:
        raise ValueError("anchor does not lie on the base hyperplane")
    D_plus = np.atleast_2d(np.asarray(D_plus, dtype=float))
    delta = cfg.margin
    worst, offender = _classification_margins([base], D_plus, None)
    if worst < delta:
        raise MarginError(
            f"base hyperplane margin {worst:.3g} is below the required {delta:.3g}",
            point=offender,
        )
    if count == 1:
        return [base]

    perm = _pivot_permutation(base.w)
    eps = cfg.seed_epsilons(max(n - 1, 1))
    # pre-scale as in the classification family: member preactivations
    # differ from the (scaled) base by the epsilon terms applied to the
    # anchor-relative coordinates
    rel = np.abs(D_plus[:, perm[1:]] - anchor[perm[1:]])
    if rel.size:
        bound = float(np.max(rel @ eps[: n - 1]))
        if bound > 0:
            base = base.scaled(_bounded_prescale(base, eps, count, bound, worst))
    powers = np.arange(1, count)
    for halving in range(cfg.max_halvings + 1):
        members = _family_members(base, eps, powers, perm, with_bias=False,
                                  anchor=anchor)
        worst, offender = _classification_margins(members, D_plus, None)
        if worst >= delta / 2.0:
            if trace is not None:
                trace.append({"event": "bundle_halvings", "count": halving})
            break
        eps = eps / 2.0
    else:
        raise MarginError(
            f"epsilon halving exhausted; worst member margin {worst:.3g}",
            point=offender,
        )

    bundle = [base] + members
    W = np.array([h.w for h in bundle[:n]])
    if n > 1 and numeric_rank(W) < n:
        raise RuntimeError("common-point weight matrix is singular")
    b = np.array([h.b for h in bundle[:n]])
    recovered = np.linalg.solve(W, -b) if n > 1 else -b / W[0]
    if np.max(np.abs(recovered - anchor)) > 1e-9 * (1.0 + np.max(np.abs(anchor))):
        raise RuntimeError("family does not meet at the anchor")
    return bundle
