"""Linear separability and the ordered-subdomain machinery.

``separate`` is the max-margin LP every other construction leans on.
``distinguishable_order`` arranges singleton subdomains so each has a
hyperplane with itself strictly on the plus side and every earlier
subdomain strictly on the zero side; that staircase structure is what
lets the shallow synthesizer solve output weights stage by stage.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import MARGIN, Hyperplane
from .simplex import OPTIMAL, solve_lp

SEPARABLE_THRESHOLD = 1e-7


class InseparableError(ValueError):
    """Raised when a construction requires separability; carries the LP result."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SeparationResult:
    separable: bool
    hyperplane: Hyperplane | None
    margin: float
    lp_margin: float          # raw LP optimum under the |w|_inf <= 1 normalization
    certificate: Hyperplane   # the LP's best direction, even when inseparable


@dataclass(frozen=True)
class DistinguishableOrder:
    """Permutation of subdomain indices with one hyperplane per position."""

    order: tuple
    hyperplanes: tuple


def _separation_lp(D1, D2):
    """maximize t s.t. w.x+b >= t on D1, w.x+b <= -t on D2, |w|_inf <= 1."""
    n = D1.shape[1]
    rows = np.zeros((D1.shape[0] + D2.shape[0] + 2 * n, n + 2))
    rhs = np.zeros(rows.shape[0])
    rows[: D1.shape[0], :n] = -D1
    rows[: D1.shape[0], n] = -1.0
    rows[: D1.shape[0], n + 1] = 1.0
    rows[D1.shape[0]: D1.shape[0] + D2.shape[0], :n] = D2
    rows[D1.shape[0]: D1.shape[0] + D2.shape[0], n] = 1.0
    rows[D1.shape[0]: D1.shape[0] + D2.shape[0], n + 1] = 1.0
    box = D1.shape[0] + D2.shape[0]
    rows[box: box + n, :n] = np.eye(n)
    rows[box + n:, :n] = -np.eye(n)
    rhs[box:] = 1.0
    c = np.zeros(n + 2)
    c[-1] = 1.0
    res = solve_lp(c, rows, rhs)
    if res.status != OPTIMAL:
        raise RuntimeError(f"separation LP ended with status {res.status}")
    return res.z[:n], float(res.z[n]), float(res.value)


def separate(D1, D2, rescale_margin=None, threshold=SEPARABLE_THRESHOLD):
    """Max-margin strict separation: D1 on the plus side, D2 on the zero side.

    Separable iff the LP optimum exceeds the threshold.  By default the
    hyperplane keeps the LP's unit weight normalization and is only scaled
    up when its margin falls below twice the global margin floor; that
    keeps margins contractual without inflating weight norms on close
    point sets (which would poison downstream perturbation families).
    Passing ``rescale_margin`` forces the smallest margin to that value.
    The raw LP direction is always returned as a certificate.
    """
    D1 = np.atleast_2d(np.asarray(D1, dtype=float))
    D2 = np.atleast_2d(np.asarray(D2, dtype=float))
    if D1.shape[0] == 0 or D2.shape[0] == 0:
        raise ValueError("both point sets must be nonempty")
    if D2.shape[1] != D1.shape[1]:
        raise ValueError("point sets must share a dimension")
    w, b, t_opt = _separation_lp(D1, D2)
    if not np.any(w != 0.0):
        cert = Hyperplane(np.eye(D1.shape[1])[0], b)
    else:
        cert = Hyperplane(w, b)
    if t_opt <= threshold:
        return SeparationResult(False, None, 0.0, t_opt, cert)
    margins = np.concatenate([D1 @ cert.w + cert.b, -(D2 @ cert.w + cert.b)])
    worst = float(margins.min())
    if worst <= 0:
        return SeparationResult(False, None, 0.0, t_opt, cert)
    if rescale_margin is not None:
        scale = rescale_margin / worst
    else:
        scale = max(1.0, 2.0 * MARGIN / worst)
    h = cert.scaled(scale)
    return SeparationResult(True, h, worst * scale, t_opt, cert)


def check_distinguishable(sets_in_order, hyperplanes, margin=MARGIN):
    """Verify the staircase conditions on already-ordered point sets.

    Position nu must have its own set at preactivation >= margin and the
    union of all earlier sets at <= -margin.  Returns (ok, failures) where
    failures lists (position, kind, worst_value).
    """
    failures = []
    for nu, (pts, h) in enumerate(zip(sets_in_order, hyperplanes)):
        vals = h.value(np.atleast_2d(pts))
        if vals.min() < margin:
            failures.append((nu, "own-side", float(vals.min())))
        for mu in range(nu):
            prev = h.value(np.atleast_2d(sets_in_order[mu]))
            if prev.max() > -margin:
                failures.append((nu, f"earlier-set-{mu}", float(prev.max())))
    return len(failures) == 0, failures


def _suspicion_order(delta, star):
    """Rank sample indices by how hard they make the full zero-side cover.

    Greedy largest-violation removal: repeatedly drop the zero-side point
    that sticks out worst (under the failed LP's best direction) until the
    remaining cover separates.  Returns (ranked indices, greedy deficit).
    """
    k = delta.shape[0]
    remaining = list(range(k))
    removed = []
    while remaining:
        plus = np.vstack([star[None, :], delta[removed]]) if removed else star[None, :]
        res = separate(plus, delta[remaining])
        if res.separable:
            break
        vals = res.certificate.value(delta[remaining])
        worst = remaining[int(np.argmax(vals))]
        removed.append(worst)
        remaining.remove(worst)
    return removed + remaining, len(removed)


def _vertex_candidate_covers(delta, star):
    """Best zero-side cover over all hyperplanes touching n points.

    The maximizing hyperplane can always be perturbed until it touches n
    of the samples (or the star), so enumerating those touch sets and
    counting the samples strictly below the star's projection finds the
    optimum for points in generic position.  Returns covers in decreasing
    size, deduplicated.
    """
    pts = np.vstack([delta, star[None, :]])
    n = pts.shape[1]
    if n == 1:
        normals = np.array([[1.0], [-1.0]])
    else:
        subsets = np.array(list(itertools.combinations(range(pts.shape[0]), n)))
        A = pts[subsets[:, 1:]] - pts[subsets[:, :1]]
        _, s, vt = np.linalg.svd(A)
        unique_normal = s[:, -1] <= 1e-9 * np.maximum(s[:, 0], 1.0)
        cands = vt[unique_normal, -1, :]
        if cands.shape[0] == 0:
            return []
        normals = np.vstack([cands, -cands])
    proj = delta @ normals.T
    star_proj = star @ normals.T
    scale = 1.0 + float(np.max(np.abs(pts)))
    below = proj < star_proj[None, :] - 1e-9 * scale
    counts = below.sum(axis=0)
    order = np.argsort(-counts)
    covers = []
    seen = set()
    for idx in order:
        cover = tuple(np.flatnonzero(below[:, idx]))
        if cover and cover not in seen:
            seen.add(cover)
            covers.append(cover)
    return covers


def maximum_hyperplane(delta_samples, star, exhaustive_limit=20, trace=None):
    """Hyperplane with star strictly plus and a maximum zero-side cover.

    The full cover is tried first; otherwise candidate covers come from the
    touching-hyperplane enumeration, each verified by the separation LP
    (exact for samples in generic position).  If the verification fails on
    degenerate inputs, small sample sets fall back to exhaustive exclusion
    subsets in increasing size, larger ones to greedy largest-violation
    removal with a translation-improvement fixpoint.  Returns
    (hyperplane, covered) with covered a tuple of sample indices placed on
    the zero side.
    """
    delta = np.atleast_2d(np.asarray(delta_samples, dtype=float))
    star = np.asarray(star, dtype=float)
    k = delta.shape[0]
    if k == 0:
        raise ValueError("need at least one zero-side sample")
    if any(np.allclose(star, d) for d in delta):
        raise ValueError("star must not be one of the zero-side samples")

    full = separate(star[None, :], delta)
    if full.separable:
        _check_translation_property(full, delta, list(range(k)), star)
        return full.hyperplane, tuple(range(k))

    best_size = None
    for cover in _vertex_candidate_covers(delta, star):
        if best_size is not None and len(cover) < best_size:
            break
        excl = [i for i in range(k) if i not in cover]
        res = separate(np.vstack([star[None, :], delta[excl]]), delta[list(cover)])
        if res.separable:
            _check_translation_property(res, delta, list(cover), star)
            return res.hyperplane, cover
        best_size = len(cover)  # keep trying equal-size candidates only

    if trace is not None:
        trace.append({"event": "maximum_hyperplane_fallback", "samples": k})
    suspicion, greedy_deficit = _suspicion_order(delta, star)

    if k <= exhaustive_limit:
        # the greedy deficit upper-bounds the optimum, so stop there
        for deficit in range(1, min(greedy_deficit, k - 1) + 1):
            for excl in itertools.combinations(suspicion, deficit):
                covered = [i for i in range(k) if i not in excl]
                res = separate(np.vstack([star[None, :], delta[list(excl)]]),
                               delta[covered])
                if res.separable:
                    _check_translation_property(res, delta, covered, star)
                    return res.hyperplane, tuple(covered)
        h = _cover_nothing(delta, star, trace)
        return h, ()

    # greedy path with translation-improvement fixpoint
    covered = set(suspicion[greedy_deficit:])
    while True:
        if not covered:
            return _cover_nothing(delta, star, trace), ()
        excl = [i for i in range(k) if i not in covered]
        plus = np.vstack([star[None, :], delta[excl]]) if excl else star[None, :]
        res = separate(plus, delta[sorted(covered)])
        if not res.separable:
            raise RuntimeError("greedy cover lost separability")
        h = res.hyperplane
        star_val = float(h.value(star))
        vals = h.value(delta)
        improvable = [
            i for i in excl if vals[i] < star_val - 1e-6 * max(1.0, abs(star_val))
        ]
        if not improvable:
            _check_translation_property(res, delta, sorted(covered), star)
            if trace is not None:
                trace.append({"event": "greedy_cover", "size": len(covered)})
            return h, tuple(sorted(covered))
        covered.update(improvable)


def _check_translation_property(res, delta, covered, star):
    """No uncovered sample may sit strictly between the boundary and star.

    Slack accounts for partitions the LP threshold was allowed to reject:
    an uncovered sample within threshold/lp_margin of the star projection
    is a tie, not a violation.
    """
    h = res.hyperplane
    star_val = float(h.value(star))
    uncovered = [i for i in range(delta.shape[0]) if i not in covered]
    if not uncovered:
        return
    vals = h.value(delta[uncovered])
    slack = max(
        1e-6 * max(1.0, abs(star_val)),
        4.0 * SEPARABLE_THRESHOLD / max(res.lp_margin, SEPARABLE_THRESHOLD) * abs(star_val),
    )
    if vals.min() < star_val - slack:
        raise RuntimeError(
            "translation property violated: an uncovered sample sits between "
            "the hyperplane and the star sample"
        )


def _cover_nothing(delta, star, trace):
    """Terminal fallback: no sample can be covered; put the boundary at star."""
    n = star.shape[0]
    rows = np.zeros((delta.shape[0] + 2 * n, n + 1))
    rhs = np.zeros(rows.shape[0])
    rows[: delta.shape[0], :n] = star[None, :] - delta
    rows[: delta.shape[0], n] = 1.0
    rows[delta.shape[0]: delta.shape[0] + n, :n] = np.eye(n)
    rows[delta.shape[0] + n:, :n] = -np.eye(n)
    rhs[delta.shape[0]:] = 1.0
    c = np.zeros(n + 1)
    c[-1] = 1.0
    res = solve_lp(c, rows, rhs)
    if res.status == OPTIMAL and res.value > SEPARABLE_THRESHOLD:
        w = res.z[:n]
        b = -float(w @ star) + res.value / 2.0
        return Hyperplane(w, b).scaled(2.0 / res.value)
    if trace is not None:
        trace.append({"event": "empty_cover_degenerate"})
    w = np.zeros(n)
    w[0] = 1.0
    return Hyperplane(w, 1.0 - star[0])


def _rescale_for(h, constrained_points):
    """Scale up only as needed to clear twice the margin floor."""
    vals = np.abs(h.value(np.atleast_2d(np.vstack(constrained_points))))
    worst = float(vals.min())
    if worst <= 0:
        raise RuntimeError("degenerate hyperplane: a constrained point lies on it")
    return h.scaled(max(1.0, 2.0 * MARGIN / worst))


def distinguishable_order(
    subdomains,
    seed=0,
    margin=MARGIN,
    exhaustive_limit=20,
    hyperplanes=None,
    order=None,
    max_perturb_rounds=30,
    max_halvings=60,
    trace=None,
):
    """Order subdomains into the staircase structure with one hyperplane each.

    Construction route: every subdomain must be a singleton; points are
    processed in index order, each via its maximum hyperplane over the
    already-placed points.  Points left stranded on the new plus side are
    reprocessed by translating the new hyperplane past them one at a time
    (boundary at the midpoint between consecutive points along the normal),
    with a seeded random weight perturbation whenever several of them tie
    along the normal direction.

    Validation route: pass ``hyperplanes`` (and optionally ``order``) to
    check an existing staircase instead of building one.
    """
    sets = [np.atleast_2d(np.asarray(s, dtype=float)) for s in subdomains]
    k = len(sets)
    if k == 0:
        raise ValueError("need at least one subdomain")

    if hyperplanes is not None:
        order = tuple(order) if order is not None else tuple(range(k))
        ordered_sets = [sets[j] for j in order]
        ok, failures = check_distinguishable(ordered_sets, hyperplanes, margin)
        if not ok:
            raise ValueError(f"supplied hyperplanes fail the staircase check: {failures}")
        return DistinguishableOrder(order, tuple(hyperplanes))

    if any(s.shape[0] != 1 for s in sets):
        raise ValueError(
            "construction route requires singleton subdomains; "
            "supply hyperplanes to validate an existing order instead"
        )
    points = np.vstack(sets)
    if len(np.unique(points.round(decimals=12), axis=0)) != k:
        raise ValueError("duplicate points across subdomains")

    rng = np.random.default_rng(seed)
    n = points.shape[1]

    order_list = []      # subdomain indices in staircase order
    lines = {}           # subdomain index -> Hyperplane

    for i in range(k):
        p = points[i]
        if not order_list:
            w = np.zeros(n)
            w[0] = 1.0
            order_list.append(i)
            lines[i] = Hyperplane(w, 1.0 - p[0])
            continue
        delta_idx = list(order_list)
        delta = points[delta_idx]
        h, covered = maximum_hyperplane(
            delta, p, exhaustive_limit=exhaustive_limit, trace=trace
        )
        covered_global = {delta_idx[c] for c in covered}
        uncovered_global = [j for j in order_list if j not in covered_global]

        order_list = [j for j in order_list if j in covered_global]
        order_list.append(i)
        lines[i] = h

        if uncovered_global:
            _reprocess_uncovered(
                points, order_list, lines, i, uncovered_global, h, rng,
                max_perturb_rounds, max_halvings, trace,
            )

    # polish: the induction fixes the order; each line can then be replaced
    # by the max-margin separator for its own staircase constraints, which
    # keeps every condition while giving downstream perturbation families
    # the best possible margins
    ordered_sets = [points[j][None, :] for j in order_list]
    hps = []
    for pos, j in enumerate(order_list):
        if pos == 0:
            hps.append(_rescale_for(lines[j], [points[j][None, :]]))
            continue
        earlier = points[[order_list[m] for m in range(pos)]]
        res = separate(points[j][None, :], earlier)
        if res.separable:
            hps.append(res.hyperplane)
        else:
            constrained = points[[order_list[m] for m in range(pos + 1)]]
            hps.append(_rescale_for(lines[j], [constrained]))
    ok, failures = check_distinguishable(ordered_sets, hps, margin)
    if not ok:
        raise RuntimeError(f"constructed order fails its own staircase check: {failures}")
    return DistinguishableOrder(tuple(order_list), tuple(hps))


def _reprocess_uncovered(points, order_list, lines, star_idx, uncovered, h, rng,
                         max_perturb_rounds, max_halvings, trace):
    """Give translated lines to the points left on the new plus side."""
    star_and_up = [star_idx] + list(uncovered)
    zero_side = [j for j in order_list if j not in star_and_up]

    w, b = h.w, h.b
    scale = 1.0 + float(np.max(np.abs(points[star_and_up])))

    def projections(wv):
        return {j: float(wv @ points[j]) for j in star_and_up}

    def tie_free(proj, wv):
        tol = 1e-9 * (1.0 + np.linalg.norm(wv)) * scale
        star_first = all(proj[star_idx] < proj[j] - tol for j in uncovered)
        svals = sorted(proj.values())
        gaps_ok = all(hi - lo > tol for lo, hi in zip(svals, svals[1:]))
        return star_first and gaps_ok

    def classification_ok(w_try):
        plus_vals = points[star_and_up] @ w_try + b
        if not (plus_vals >= 0.5 * plus_ref).all():
            return False
        if zero_side:
            zero_vals = points[zero_side] @ w_try + b
            return (zero_vals <= 0.5 * zero_ref).all()
        return True

    def tie_score(proj_try):
        """Smallest of the star gap and the internal ordering gaps."""
        star_gap = min(proj_try[j] - proj_try[star_idx] for j in uncovered)
        svals = sorted(proj_try.values())
        internal = min((hi - lo for lo, hi in zip(svals, svals[1:])),
                       default=np.inf)
        return min(star_gap, internal)

    proj = projections(w)
    rounds = 0
    while not tie_free(proj, w):
        rounds += 1
        if rounds > max_perturb_rounds:
            raise RuntimeError("perturbation budget exhausted while breaking ties")
        eps = rng.normal(size=points.shape[1])
        eps /= np.linalg.norm(eps)
        plus_ref = points[star_and_up] @ w + b
        zero_ref = (points[zero_side] @ w + b) if zero_side else None
        # the perturbation magnitude can be arbitrarily small and its sign
        # is free: among the classification-preserving candidates take the
        # one that widens the binding gap, so ties break monotonically
        # instead of by a random walk
        best = None
        alpha = 1e-3 * np.linalg.norm(w)
        for _ in range(max_halvings):
            for sign in (1.0, -1.0):
                w_try = w + sign * alpha * eps
                if not classification_ok(w_try):
                    continue
                proj_try = projections(w_try)
                score = tie_score(proj_try)
                if best is None or score > best[0]:
                    best = (score, w_try, proj_try)
            if best is not None:
                break
            alpha *= 0.5
        if best is None:
            raise RuntimeError("perturbation halving budget exhausted")
        if best[0] > tie_score(proj):
            w, proj = best[1], best[2]
        if trace is not None:
            trace.append({"event": "tie_perturbation", "round": rounds,
                          "alpha": alpha, "score": best[0]})

    uncovered_sorted = sorted(uncovered, key=lambda j: proj[j])
    prev = proj[star_idx]
    for j in uncovered_sorted:
        cut = 0.5 * (prev + proj[j])
        lines[j] = Hyperplane(w, -cut)
        order_list.append(j)
        prev = proj[j]
