"""Deep synthesis by recursive region dividing.

Each tree level becomes one hidden layer: groups being split get a pair of
reversed-side bundles, groups already isolated get pass-through blocks,
and every new unit receives interference weights on the other groups'
exclusive dimensions so it stays dark for them.  The last hidden layer
gives each leaf a full-rank bundle of dim+1 units and the linear output
layer solves each leaf's affine target independently.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    ACTIVATION_TOL,
    RANK_TOL,
    AffineMap,
    DiscretePWL,
    Hyperplane,
    Layer,
    Network,
    affine_fit,
    forward_batch,
    numeric_rank,
    solve_constrained,
    supporting_hyperplane,
)
from .bundles import BundleConfig, common_point_bundle, same_classification_bundle
from .ordering import separate
from .affine import (
    interference_avoiding_weights,
    rank_condition_check,
    transform_hyperplane,
)
from .report import ConstructionReport

__all__ = [
    "PartitionTree",
    "TreeNode",
    "DeepBuild",
    "build_partition_tree",
    "synth_deep",
    "synth_deep_multi",
    "synth_decoder",
    "deep_build",
    "decoder_build",
    "rebuild_deep_with_widths",
    "interference_avoiding_weights",
]


class PartitionError(ValueError):
    """No separable bipartition exists and nothing is left to refine."""


@dataclass
class TreeNode:
    leaf: int | None = None
    a: "TreeNode | None" = None
    b: "TreeNode | None" = None
    separator: Hyperplane | None = None

    def is_leaf(self):
        return self.leaf is not None

    def leaves(self):
        if self.is_leaf():
            return [self.leaf]
        return self.a.leaves() + self.b.leaves()

    def to_json_dict(self):
        if self.is_leaf():
            return {"leaf": self.leaf}
        return {
            "a": self.a.to_json_dict(),
            "b": self.b.to_json_dict(),
            "separator": {"w": self.separator.w.tolist(), "b": self.separator.b},
        }

    @staticmethod
    def from_json_dict(d):
        if "leaf" in d:
            return TreeNode(leaf=int(d["leaf"]))
        sep = Hyperplane(np.array(d["separator"]["w"]), d["separator"]["b"])
        return TreeNode(a=TreeNode.from_json_dict(d["a"]),
                        b=TreeNode.from_json_dict(d["b"]), separator=sep)


@dataclass
class PartitionTree:
    root: TreeNode
    subdomains: list          # final point sets (refinement may split inputs)
    origin: list              # final index -> original subdomain index


class _NeedRefine(Exception):
    def __init__(self, indices):
        self.indices = indices


def _candidate_direction_cuts(sets, group, rng, tries=40):
    """Direction-projection splits for large groups, best gaps first."""
    pts = np.vstack([sets[i] for i in group])
    n = pts.shape[1]
    dirs = [np.eye(n)[i] for i in range(n)]
    centered = pts - pts.mean(axis=0)
    if pts.shape[0] > 1:
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        dirs.extend(vt)
    dirs.extend(rng.normal(size=(tries, n)))
    cuts = []
    for d in dirs:
        norm = np.linalg.norm(d)
        if norm == 0.0:
            continue
        d = d / norm
        lo = np.array([np.min(sets[i] @ d) for i in group])
        hi = np.array([np.max(sets[i] @ d) for i in group])
        order = np.argsort(lo)
        for cut in range(1, len(group)):
            left = order[:cut]
            right = order[cut:]
            gap = np.min(lo[right]) - np.max(hi[left])
            if gap > 0:
                cuts.append((float(gap),
                             tuple(sorted(group[i] for i in left)),
                             tuple(sorted(group[i] for i in right))))
    cuts.sort(key=lambda t: -t[0])
    seen = set()
    out = []
    for gap, left, right in cuts:
        if left in seen:
            continue
        seen.add(left)
        out.append((left, right))
    return out


def _best_bipartition(sets, group, exhaustive_groups, rng):
    """Max-margin separable bipartition; lexicographic encoding breaks ties."""
    g = len(group)
    if g <= exhaustive_groups:
        # fix the last element's side to skip mirror duplicates; the scan
        # order makes the lowest encoding win margin ties
        best = None
        for code in range(1, 2 ** (g - 1)):
            left = [group[i] for i in range(g - 1) if (code >> i) & 1]
            right = [i for i in group if i not in left]
            res = separate(np.vstack([sets[i] for i in left]),
                           np.vstack([sets[i] for i in right]))
            if res.separable and (best is None or res.lp_margin > best[0]):
                best = (res.lp_margin, tuple(left), tuple(right), res.hyperplane)
        if best is None:
            raise _NeedRefine(group)
        return best[1], best[2], best[3]
    for left, right in _candidate_direction_cuts(sets, list(group), rng):
        res = separate(np.vstack([sets[i] for i in left]),
                       np.vstack([sets[i] for i in right]))
        if res.separable:
            return left, right, res.hyperplane
    raise _NeedRefine(group)


def build_partition_tree(subdomains, exhaustive_groups=8, seed=0):
    """Recursively bipartition subdomains into linearly separable groups.

    When a group of two or more subdomains admits no separable bipartition,
    its multi-point subdomains are split into singletons and the whole tree
    is rebuilt; distinct points always separate eventually.
    """
    sets = [np.atleast_2d(np.asarray(s, dtype=float)) for s in subdomains]
    origin = list(range(len(sets)))
    pts_all = np.vstack(sets)
    if len(np.unique(pts_all.round(decimals=12), axis=0)) != pts_all.shape[0]:
        raise ValueError("duplicate points across subdomains")
    rng = np.random.default_rng(seed)

    def grow(group):
        if len(group) == 1:
            return TreeNode(leaf=group[0])
        left, right, sep = _best_bipartition(sets, tuple(group), exhaustive_groups, rng)
        return TreeNode(a=grow(list(left)), b=grow(list(right)), separator=sep)

    while True:
        try:
            root = grow(list(range(len(sets))))
            return PartitionTree(root, sets, origin)
        except _NeedRefine as need:
            refinable = [i for i in need.indices if sets[i].shape[0] > 1]
            if not refinable:
                raise PartitionError(
                    "no separable bipartition exists even for singletons"
                ) from None
            new_sets, new_origin = [], []
            for i, s in enumerate(sets):
                if i in refinable:
                    for p in s:
                        new_sets.append(p[None, :])
                        new_origin.append(origin[i])
                else:
                    new_sets.append(s)
                    new_origin.append(origin[i])
            sets, origin = new_sets, new_origin


@dataclass
class _Group:
    node: TreeNode
    leaf_ids: list
    points: np.ndarray      # original-coordinate points of the group
    M: np.ndarray           # frame: x -> block preactivations
    c: np.ndarray
    dims: list              # unit indices of the block in the current layer
    is_input: bool = False  # frame refers to the raw input, not relu outputs


@dataclass
class DeepBuild:
    """Synthesized deep network plus the metadata to rebuild it."""

    network: Network
    pwl: DiscretePWL        # final (possibly refined) subdomains with targets
    tree: PartitionTree
    stage_plan: list
    cfg: BundleConfig
    seed: int
    report: ConstructionReport


def _scatter_images(width, dims, values):
    out = np.zeros((values.shape[0], width))
    out[:, dims] = values
    return out


def _lift_unit(t_x, group, prev_width, foreign):
    """Full-width unit row realizing the original-coordinate hyperplane t_x
    on the group's image, dark on every foreign group's points."""
    n = group.M.shape[1]
    pivot = AffineMap(group.M[:n], group.c[:n])
    t_blk = transform_hyperplane(t_x, pivot)
    w = np.zeros(prev_width)
    w[group.dims[:n]] = t_blk.w
    b = t_blk.b
    for dims, images in foreign:
        w[np.asarray(dims, dtype=int)] = interference_avoiding_weights(
            w, b, dims, images
        )
    return w, b


def _group_images(group, prev_width):
    vals = group.points @ group.M.T + group.c
    if not group.is_input:
        vals = np.maximum(vals, 0.0)
    return _scatter_images(prev_width, group.dims, vals)


def _build_group_units(g, foreign, extra, n, cfg, trace, rows, biases, tags,
                       new_groups, prev_width, sets):
    """Append one group's units for the current layer and queue its successors."""
    if g.node.is_leaf():
        # common-point family anchored in original coordinates, so frame
        # conditioning does not accumulate with depth; its restriction to
        # the group's embedded subspace still meets in the anchor's image
        base = supporting_hyperplane(g.points)
        p0 = g.points[0]
        anchor = p0 - float(base.value(p0)) * base.w / float(base.w @ base.w)
        bundle = common_point_bundle(base, anchor, g.points, cfg, trace,
                                     count=n + extra)
        start = len(rows)
        for t_x in bundle:
            w, b = _lift_unit(t_x, g, prev_width, foreign)
            rows.append(w)
            biases.append(b)
        tags.append({"kind": "passthrough", "leaf": g.node.leaf,
                     "units": [start, len(bundle)]})
        M_next = np.array([t.w for t in bundle])
        c_next = np.array([t.b for t in bundle])
        new_groups.append(_Group(g.node, g.leaf_ids, g.points,
                                 M_next, c_next,
                                 list(range(start, start + len(bundle)))))
        return
    pts_a = np.vstack([sets[i] for i in sorted(g.node.a.leaves())])
    pts_b = np.vstack([sets[i] for i in sorted(g.node.b.leaves())])
    sep = g.node.separator
    bundle_a = same_classification_bundle(sep, pts_a, pts_b, n + extra, cfg, trace)
    bundle_b = same_classification_bundle(sep.negated(), pts_b, pts_a, n, cfg, trace)
    for child, bundle, pts_child in (
        (g.node.a, bundle_a, pts_a),
        (g.node.b, bundle_b, pts_b),
    ):
        start = len(rows)
        for t_x in bundle:
            w, b = _lift_unit(t_x, g, prev_width, foreign)
            rows.append(w)
            biases.append(b)
        tags.append({"kind": "split", "leaves": sorted(child.leaves()),
                     "units": [start, len(bundle)]})
        M_next = np.array([t.w for t in bundle])
        c_next = np.array([t.b for t in bundle])
        new_groups.append(_Group(child, sorted(child.leaves()), pts_child,
                                 M_next, c_next,
                                 list(range(start, start + len(bundle)))))


def _synth_deep_impl(pwl, tree, cfg=None, seed=0, extras=None, trace=None):
    t_start = time.monotonic()
    cfg = cfg or BundleConfig()
    trace = trace if trace is not None else []
    n = pwl.dim
    mu = pwl.output_dim
    sets = [pts for pts, _ in pwl.subdomains]
    maps = [amap for _, amap in pwl.subdomains]

    # group point rows are always stacked in ascending leaf order so that
    # parent and child rows stay aligned for the audits
    root_points = np.vstack(sets)
    groups = [_Group(tree.root, sorted(tree.root.leaves()), root_points,
                     np.eye(n), np.zeros(n), list(range(n)), is_input=True)]
    prev_width = n

    layers = []
    stage_plan = []
    activation_audits = []
    affine_fit_residuals = []
    rank_audits = []
    layer_no = 0

    def extra_for(layer_idx):
        if extras is None or layer_idx >= len(extras):
            return 0
        return int(extras[layer_idx])

    while any(not g.node.is_leaf() for g in groups):
        extra_budget = extra_for(layer_no)
        layer_no += 1
        rows, biases = [], []
        tags = []
        new_groups = []
        foreign_cache = [
            (g.dims, _group_images(g, prev_width)) for g in groups
        ]
        for gi, g in enumerate(groups):
            foreign = [foreign_cache[fj] for fj in range(len(groups)) if fj != gi]
            extra = extra_budget if gi == 0 else 0
            try:
                _build_group_units(g, foreign, extra, n, cfg, trace, rows,
                                   biases, tags, new_groups, prev_width, sets)
            except (ValueError, RuntimeError) as exc:
                raise type(exc)(
                    f"layer {layer_no}, group {sorted(g.leaf_ids)}: {exc}"
                ) from exc
        layer = Layer(np.array(rows), np.array(biases), "relu")
        layers.append(layer)
        stage_plan.append(tags)
        _audit_layer(layer, layer_no, groups, new_groups, prev_width,
                     activation_audits, affine_fit_residuals, rank_audits, cfg)
        groups = new_groups
        prev_width = layer.units

    # last hidden layer: one full-rank bundle per leaf
    extra_budget = extra_for(layer_no)
    layer_no += 1
    rows, biases = [], []
    tags = []
    leaf_bundles = {}
    foreign_cache = [(g.dims, _group_images(g, prev_width)) for g in groups]
    for gi, g in enumerate(groups):
        foreign = [foreign_cache[fj] for fj in range(len(groups)) if fj != gi]
        extra = extra_budget if gi == 0 else 0
        try:
            base = supporting_hyperplane(g.points)
            bundle = same_classification_bundle(
                base, g.points, None, n + 1 + extra, cfg, trace)
            start = len(rows)
            for t_x in bundle:
                w, b = _lift_unit(t_x, g, prev_width, foreign)
                rows.append(w)
                biases.append(b)
        except (ValueError, RuntimeError) as exc:
            raise type(exc)(
                f"output bundle for leaf {g.node.leaf}: {exc}") from exc
        tags.append({"kind": "output-bundle", "leaf": g.node.leaf,
                     "units": [start, len(bundle)]})
        leaf_bundles[g.node.leaf] = (start, bundle)
    last_hidden = Layer(np.array(rows), np.array(biases), "relu")
    layers.append(last_hidden)
    stage_plan.append(tags)
    final_groups = [
        _Group(g.node, g.leaf_ids, g.points,
               np.array([t.w for t in leaf_bundles[g.node.leaf][1]]),
               np.array([t.b for t in leaf_bundles[g.node.leaf][1]]),
               list(range(leaf_bundles[g.node.leaf][0],
                          leaf_bundles[g.node.leaf][0]
                          + len(leaf_bundles[g.node.leaf][1]))))
        for g in groups
    ]
    _audit_layer(last_hidden, layer_no, groups, final_groups, prev_width,
                 activation_audits, affine_fit_residuals, rank_audits, cfg)
    width = last_hidden.units

    # output layer: per-leaf coefficient match, independent per coordinate;
    # solved with the bias row re-expressed at the leaf centroid, which
    # drops the condition number for leaves far from the origin without
    # changing the solution
    out_W = np.zeros((mu, width))
    for leaf, (start, bundle) in leaf_bundles.items():
        M = np.vstack([
            np.column_stack([t.w for t in bundle]),
            np.array([[t.b for t in bundle]]),
        ])
        rank = numeric_rank(M)
        rank_audits.append({"layer": "output", "leaf": int(leaf),
                            "columns": M.shape[1], "rank": int(rank)})
        if rank < n + 1:
            raise RuntimeError(f"leaf {leaf} bundle lost rank ({rank} < {n + 1})")
        centroid = sets[leaf].mean(axis=0)
        M_c = M.copy()
        M_c[n] += centroid @ M[:n]
        amap = maps[leaf]
        for rho in range(mu):
            rhs = np.concatenate([amap.W[rho], [float(amap.b[rho])]])
            rhs_c = rhs.copy()
            rhs_c[n] += float(centroid @ rhs[:n])
            mode = ("exact_square" if M.shape[1] == n + 1
                    else "least_norm_underdetermined")
            alpha = solve_constrained(M_c, rhs_c, mode)
            out_W[rho, start: start + len(bundle)] = alpha
    out_layer = Layer(out_W, np.zeros(mu), "linear")
    layers.append(out_layer)

    net = Network(n, tuple(layers))
    widths = [l.units for l in layers[:-1]]
    for a, b in zip(widths, widths[1:]):
        if b < a:
            raise RuntimeError(f"hidden widths decreased: {widths}")

    X = pwl.all_points()
    Y = pwl.all_targets()
    out = forward_batch(net, X)
    max_residual = float(np.max(np.abs(out - Y)))
    report = ConstructionReport(
        architecture=net.architecture(),
        max_residual=max_residual,
        activation_audits=activation_audits,
        rank_audits=rank_audits,
        affine_fit_residuals=affine_fit_residuals,
        traces=list(trace),
        seed=seed,
        wall_clock=time.monotonic() - t_start,
        tolerances={
            "activation_tol": ACTIVATION_TOL,
            "margin": cfg.margin,
            "rank_tol": RANK_TOL,
            "note": "preactivations in (0, activation_tol] count as zero output",
        },
        plan={
            "kind": "deep",
            "pwl": pwl.to_json_dict(),
            "tree": tree.root.to_json_dict(),
            "origin": [int(i) for i in tree.origin],
            "seed": seed,
            "extras": list(extras) if extras is not None else None,
        },
    )
    build = DeepBuild(net, pwl, tree, stage_plan, cfg, seed, report)
    if max_residual > 1e-8:
        raise RuntimeError(f"synthesis residual {max_residual:.3g} above 1e-8")
    return build


def _scatter_rows(width, dims, M):
    out = np.zeros((width, M.shape[1]))
    out[dims, :] = M
    return out


def _scatter_vec(width, dims, c):
    out = np.zeros(width)
    out[dims] = c
    return out


def _audit_layer(layer, layer_no, prev_groups, new_groups, prev_width,
                 activation_audits, affine_fit_residuals, rank_audits, cfg):
    """Group isolation and affine-transmission checks for one hidden layer."""
    for g in new_groups:
        own_prev = next(pg for pg in prev_groups if set(g.leaf_ids) <= set(pg.leaf_ids))
        own_images = _group_images(own_prev, prev_width)
        sel = np.array([
            np.any(np.all(np.isclose(g.points, p, atol=1e-12), axis=1))
            for p in own_prev.points
        ])
        own_pre = own_images[sel] @ layer.weights[g.dims].T + layer.biases[g.dims]
        foreign_pre = []
        for pg in prev_groups:
            if set(pg.leaf_ids) & set(g.leaf_ids):
                extra_pts = ~np.array([
                    np.any(np.all(np.isclose(g.points, p, atol=1e-12), axis=1))
                    for p in pg.points
                ])
                if extra_pts.any():
                    imgs = _group_images(pg, prev_width)[extra_pts]
                    foreign_pre.append(imgs @ layer.weights[g.dims].T
                                       + layer.biases[g.dims])
            else:
                imgs = _group_images(pg, prev_width)
                foreign_pre.append(imgs @ layer.weights[g.dims].T
                                   + layer.biases[g.dims])
        worst_foreign = (max(float(fp.max()) for fp in foreign_pre)
                         if foreign_pre else -np.inf)
        audit = {
            "layer": layer_no,
            "leaves": [int(i) for i in g.leaf_ids],
            "own_min_preactivation": float(own_pre.min()),
            "foreign_max_preactivation": worst_foreign,
        }
        activation_audits.append(audit)
        if own_pre.min() <= cfg.margin / 2.0 - 1e-12:
            raise RuntimeError(
                f"layer {layer_no}: a group's own preactivation fell to "
                f"{own_pre.min():.3g}"
            )
        if worst_foreign > -cfg.margin / 2.0:
            raise RuntimeError(
                f"layer {layer_no}: foreign preactivation {worst_foreign:.3g} "
                f"not below -margin/2"
            )
        n = g.points.shape[1]
        witness = AffineMap(g.M[:n], g.c[:n])
        resid = float(np.max(np.abs(witness.apply(g.points) - own_pre[:, :n])))
        nonsingular = witness.is_nonsingular()
        centered = g.points - g.points.mean(axis=0)
        if g.points.shape[0] > n and numeric_rank(np.atleast_2d(centered)) == n:
            # enough affine span for an independent fit
            fit, fit_resid = affine_fit(g.points, own_pre[:, :n])
            resid = max(resid, fit_resid)
            nonsingular = nonsingular and fit.is_nonsingular()
        affine_fit_residuals.append({
            "layer": layer_no,
            "leaves": [int(i) for i in g.leaf_ids],
            "residual": resid,
            "witness_nonsingular": bool(nonsingular),
        })
        if resid > 1e-8 or not nonsingular:
            raise RuntimeError(f"layer {layer_no}: affine transmission broke")
        W_blk = layer.weights[g.dims]
        need = min(n, len(g.dims))
        if W_blk.shape[1] > need:
            ok, rank = rank_condition_check(W_blk, n=need)
        else:
            rank = numeric_rank(W_blk)
            ok = rank >= need
        rank_audits.append({"layer": layer_no, "leaves": [int(i) for i in g.leaf_ids],
                            "rank_ok": bool(ok), "rank": int(rank)})
        if not ok:
            raise RuntimeError(f"layer {layer_no}: block weight rank {rank} too low")


def _final_pwl(pwl, tree):
    """Final subdomain list with targets inherited from the originals."""
    subs = tuple(
        (tree.subdomains[i], pwl.subdomains[tree.origin[i]][1])
        for i in range(len(tree.subdomains))
    )
    return DiscretePWL(pwl.dim, pwl.output_dim, subs)


def deep_build(pwl, cfg=None, seed=0, exhaustive_groups=8):
    tree = build_partition_tree([pts for pts, _ in pwl.subdomains],
                                exhaustive_groups, seed)
    return _synth_deep_impl(_final_pwl(pwl, tree), tree, cfg, seed)


def synth_deep(pwl, cfg=None, seed=0):
    """Region-dividing deep synthesis; exact on every training point."""
    return deep_build(pwl, cfg, seed).network


def synth_deep_multi(pwl, mu=None, cfg=None, seed=0):
    """Multi-output deep synthesis: shared hidden stack, independent output
    units, one per coordinate."""
    if mu is not None and mu != pwl.output_dim:
        raise ValueError(f"mu={mu} disagrees with output_dim={pwl.output_dim}")
    return deep_build(pwl, cfg, seed).network


def decoder_build(codes, targets, cfg=None, seed=0):
    codes = np.atleast_2d(np.asarray(codes, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if codes.shape[0] != targets.shape[0]:
        raise ValueError("need one target per code")
    seen = {}
    keep = []
    for i, c in enumerate(codes):
        key = tuple(c.round(decimals=12))
        if key in seen:
            if not np.allclose(targets[seen[key]], targets[i]):
                raise ValueError(
                    f"duplicate code at row {i} with a different target; "
                    "the code map is not bijective"
                )
            continue
        seen[key] = i
        keep.append(i)
    codes, targets = codes[keep], targets[keep]
    subs = tuple(
        (c[None, :], AffineMap.constant(t, codes.shape[1]))
        for c, t in zip(codes, targets)
    )
    pwl = DiscretePWL(codes.shape[1], targets.shape[1], subs)
    return deep_build(pwl, cfg, seed)


def synth_decoder(codes, targets, cfg=None, seed=0):
    """Map low-dimensional codes back to their high-dimensional points.

    Each code becomes a singleton subdomain with a constant vector target;
    the resulting architecture has non-decreasing hidden widths from the
    code dimension up to the target dimension's output layer.
    """
    return decoder_build(codes, targets, cfg, seed).network


def rebuild_deep_from_plan(plan, cfg=None, extras=None):
    """Re-run a deep synthesis recorded in a report's plan."""
    if plan is None or plan.get("kind") != "deep":
        raise ValueError("not a deep synthesis plan")
    pwl = DiscretePWL.from_json_dict(plan["pwl"])
    root = TreeNode.from_json_dict(plan["tree"])
    tree = PartitionTree(root, [pts for pts, _ in pwl.subdomains],
                         [int(i) for i in plan["origin"]])
    if extras is None:
        extras = plan.get("extras")
    return _synth_deep_impl(pwl, tree, cfg, plan.get("seed", 0), extras=extras)


def rebuild_deep_with_widths(build, target_widths):
    """Re-run a deep synthesis allocating extra redundant units per layer."""
    plan = build.report.plan
    if plan is None or plan.get("kind") != "deep":
        raise ValueError("build carries no deep synthesis plan")
    pwl = DiscretePWL.from_json_dict(plan["pwl"])
    root = TreeNode.from_json_dict(plan["tree"])
    tree = PartitionTree(root, [pts for pts, _ in pwl.subdomains],
                         [int(i) for i in plan["origin"]])
    base = _base_widths(tree, pwl.dim)
    if len(target_widths) != len(base):
        raise ValueError(f"expected {len(base)} hidden widths, got {len(target_widths)}")
    extras = []
    for have, want in zip(base, target_widths):
        if want < have:
            raise ValueError(f"target width {want} below base width {have}")
        extras.append(want - have)
    return _synth_deep_impl(pwl, tree, build.cfg, build.seed, extras=extras)


def _base_widths(tree, n):
    """Hidden widths the tree produces with no extra units."""
    groups = [tree.root]
    widths = []
    while any(not g.is_leaf() for g in groups):
        nxt = []
        w = 0
        for g in groups:
            if g.is_leaf():
                w += n
                nxt.append(g)
            else:
                w += 2 * n
                nxt.extend([g.a, g.b])
        widths.append(w)
        groups = nxt
    widths.append(len(groups) * (n + 1))
    return widths
