"""Core domain types and the small dense numeric kernel.

Everything here is an immutable value type plus pure functions: safe to
share between threads, no interior mutation after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal

import numpy as np

# Default tolerances.  A ReLU preactivation in (0, ACTIVATION_TOL] is treated
# as zero; constructions place preactivations outside +-MARGIN so the band is
# never load-bearing.
ACTIVATION_TOL = 1e-9
RANK_TOL = 1e-9
MARGIN = 1e-6

Activation = Literal["relu", "linear"]

PLUS = "+"
ZERO = "0"


class DimensionMismatch(ValueError):
    """Shapes do not chain; carries the index of the offending layer."""

    def __init__(self, message, layer_index=None):
        super().__init__(message)
        self.layer_index = layer_index


class RankDeficientError(ValueError):
    """A solve required full rank; carries the computed numeric rank."""

    def __init__(self, message, rank):
        super().__init__(message)
        self.rank = rank


def _as_vector(x, name="vector"):
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-d, got shape {a.shape}")
    return a


def _as_matrix(x, name="matrix"):
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """Oriented affine hyperplane w.x + b = 0; the plus side is w.x + b > 0."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "w", _as_vector(self.w, "w"))
        object.__setattr__(self, "b", float(self.b))
        if not np.any(self.w != 0.0):
            raise ValueError("hyperplane weight vector must be nonzero")

    @property
    def dim(self):
        return self.w.shape[0]

    def value(self, x):
        """Signed preactivation at one point or a stack of points."""
        x = np.asarray(x, dtype=float)
        return x @ self.w + self.b

    def scaled(self, factor):
        return Hyperplane(self.w * factor, self.b * factor)

    def negated(self):
        return Hyperplane(-self.w, -self.b)


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> W x + b.  W may be rectangular; constant maps use W = 0."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", _as_matrix(self.W, "W"))
        object.__setattr__(self, "b", _as_vector(self.b, "b"))
        if self.W.shape[0] != self.b.shape[0]:
            raise ValueError("W row count must match b length")

    @property
    def in_dim(self):
        return self.W.shape[1]

    @property
    def out_dim(self):
        return self.W.shape[0]

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.W.T + self.b

    def is_nonsingular(self, tol=RANK_TOL):
        """Usable as an equivalence witness: square with |det| above tolerance."""
        if self.W.shape[0] != self.W.shape[1]:
            return False
        return numeric_rank(self.W, tol) == self.W.shape[0]

    @staticmethod
    def constant(values, in_dim):
        values = _as_vector(values, "values")
        return AffineMap(np.zeros((values.shape[0], in_dim)), values)


@dataclass(frozen=True, eq=False)
class Layer:
    """Dense layer: units x fan-in weights, per-unit biases, relu or linear."""

    weights: np.ndarray
    biases: np.ndarray
    activation: Activation = "relu"

    def __post_init__(self):
        object.__setattr__(self, "weights", _as_matrix(self.weights, "weights"))
        object.__setattr__(self, "biases", _as_vector(self.biases, "biases"))
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ValueError("bias length must equal weight row count")
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def units(self):
        return self.weights.shape[0]

    @property
    def fan_in(self):
        return self.weights.shape[1]

    def preactivation(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.weights.T + self.biases

    def hyperplane(self, unit):
        return Hyperplane(self.weights[unit], self.biases[unit])


@dataclass(frozen=True, eq=False)
class Network:
    """Feedforward stack of dense layers."""

    input_dim: int
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        fan = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.fan_in != fan:
                raise DimensionMismatch(
                    f"layer {i} expects fan-in {layer.fan_in}, got {fan}",
                    layer_index=i,
                )
            fan = layer.units

    @property
    def output_dim(self):
        return self.layers[-1].units if self.layers else self.input_dim

    def architecture(self):
        """Render widths as e.g. '2(1)4(1)6(1)9(1)1'(1)'.

        Consecutive layers with equal width and activation collapse into
        width(count); linear layers carry a prime.
        """
        parts = [f"{self.input_dim}(1)"]
        groups = []
        for layer in self.layers:
            key = (layer.units, layer.activation)
            if groups and groups[-1][0] == key:
                groups[-1][1] += 1
            else:
                groups.append([key, 1])
        for (units, activation), count in groups:
            prime = "'" if activation == "linear" else ""
            parts.append(f"{units}{prime}({count})")
        return "".join(parts)

    def to_json_dict(self):
        return {
            "input_dim": self.input_dim,
            "layers": [
                {
                    "weights": layer.weights.tolist(),
                    "biases": layer.biases.tolist(),
                    "activation": layer.activation,
                }
                for layer in self.layers
            ],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json_dict(d):
        try:
            layers = tuple(
                Layer(np.array(l["weights"], dtype=float),
                      np.array(l["biases"], dtype=float),
                      l["activation"])
                for l in d["layers"]
            )
            return Network(int(d["input_dim"]), layers)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed network JSON: {exc}") from exc

    @staticmethod
    def from_json(text):
        return Network.from_json_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class DiscretePWL:
    """Finite disjoint point sets, each carrying a target affine map.

    ``subdomains`` is a sequence of (points, AffineMap) pairs; points is an
    array of shape (count, dim) and every map sends dim -> output_dim.
    """

    dim: int
    output_dim: int
    subdomains: tuple

    def __post_init__(self):
        subs = []
        for points, amap in self.subdomains:
            pts = np.asarray(points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != self.dim:
                raise ValueError(f"points must have shape (k, {self.dim})")
            if pts.shape[0] == 0:
                raise ValueError("subdomains must be nonempty")
            if amap.in_dim != self.dim or amap.out_dim != self.output_dim:
                raise ValueError(
                    f"map must send {self.dim} -> {self.output_dim}, "
                    f"got {amap.in_dim} -> {amap.out_dim}"
                )
            subs.append((pts, amap))
        object.__setattr__(self, "subdomains", tuple(subs))
        all_pts = self.all_points()
        if len(np.unique(all_pts.round(decimals=12), axis=0)) != len(all_pts):
            raise ValueError("subdomain point sets must be pairwise disjoint")

    def all_points(self):
        return np.vstack([pts for pts, _ in self.subdomains])

    def all_targets(self):
        return np.vstack([amap.apply(pts) for pts, amap in self.subdomains])

    def to_json_dict(self):
        return {
            "dim": self.dim,
            "output_dim": self.output_dim,
            "subdomains": [
                {"points": pts.tolist(), "W": amap.W.tolist(), "b": amap.b.tolist()}
                for pts, amap in self.subdomains
            ],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json_dict(d):
        try:
            subs = tuple(
                (np.array(s["points"], dtype=float),
                 AffineMap(np.array(s["W"], dtype=float), np.array(s["b"], dtype=float)))
                for s in d["subdomains"]
            )
            return DiscretePWL(int(d["dim"]), int(d["output_dim"]), subs)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed piecewise-linear JSON: {exc}") from exc

    @staticmethod
    def from_json(text):
        return DiscretePWL.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class ActivationPattern:
    """Per-unit sign vector: '+' for strictly active, '0' otherwise."""

    signs: tuple

    @staticmethod
    def from_preactivation(z, tol=ACTIVATION_TOL):
        z = np.asarray(z, dtype=float)
        return ActivationPattern(tuple(PLUS if v > tol else ZERO for v in z))

    def active_units(self):
        return tuple(i for i, s in enumerate(self.signs) if s == PLUS)

    def __str__(self):
        return "".join(self.signs)


# ---------------------------------------------------------------------------
# Evaluation


def _apply_layer(layer, x, tol):
    z = layer.preactivation(x)
    if layer.activation == "relu":
        return np.where(z > tol, z, 0.0), z
    return z, z


def forward(net, x, tol=ACTIVATION_TOL):
    """Evaluate the network at a single point.

    ReLU outputs are clamped to zero for preactivations at or below the
    activation tolerance, so output > 0 iff preactivation > tol.
    """
    out, _ = _forward_impl(net, x, tol)
    return out


def forward_traced(net, x, tol=ACTIVATION_TOL):
    """Evaluate and return (output, per-layer ActivationPattern list)."""
    return _forward_impl(net, x, tol)


def _forward_impl(net, x, tol):
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise DimensionMismatch(
            f"input has shape {x.shape}, network expects ({net.input_dim},)",
            layer_index=None,
        )
    patterns = []
    out = x
    for i, layer in enumerate(net.layers):
        if out.shape[0] != layer.fan_in:
            raise DimensionMismatch(
                f"layer {i} expects fan-in {layer.fan_in}, got {out.shape[0]}",
                layer_index=i,
            )
        out, z = _apply_layer(layer, out, tol)
        patterns.append(ActivationPattern.from_preactivation(z, tol))
    return out, patterns


def forward_batch(net, X, tol=ACTIVATION_TOL):
    """Vectorized forward pass over an array of points, shape (k, input_dim)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise DimensionMismatch(
            f"points have shape {X.shape}, network expects (k, {net.input_dim})")
    out = X
    for layer in net.layers:
        out, _ = _apply_layer(layer, out, tol)
    return out


def activation_pattern(layer, points, tol=ACTIVATION_TOL):
    """Sign vectors of a point set under one ReLU layer, plus the aggregate.

    The aggregate maps each unit to 'simultaneous' (activated by every
    point), 'never' (by no point) or 'partial'.
    """
    if layer.activation != "relu":
        raise ValueError("activation_pattern requires a relu layer")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a nonempty (k, fan_in) array")
    Z = pts @ layer.weights.T + layer.biases
    per_point = [ActivationPattern.from_preactivation(z, tol) for z in Z]
    active = Z > tol
    aggregate = {}
    for unit in range(layer.units):
        col = active[:, unit]
        if col.all():
            aggregate[unit] = "simultaneous"
        elif not col.any():
            aggregate[unit] = "never"
        else:
            aggregate[unit] = "partial"
    return per_point, aggregate


# ---------------------------------------------------------------------------
# Dense numeric kernel


def numeric_rank(M, tol=RANK_TOL):
    """Number of singular values above tol times the largest one.

    SVD-based; tol is relative to the largest singular value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = _as_matrix(M, "M")
    if M.size == 0:
        raise ValueError("rank of an empty matrix is undefined")
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def solve_constrained(A, y, mode, rank_tol=RANK_TOL):
    """Solve A x = y under one of three contracts.

    'exact_square' requires a square system of full numeric rank;
    'least_norm_underdetermined' returns the minimum-norm solution of the
    infinite family; 'least_squares' returns the residual minimizer.
    """
    A = _as_matrix(A, "A")
    y = _as_vector(y, "y")
    if A.shape[0] != y.shape[0]:
        raise ValueError(f"A has {A.shape[0]} rows but y has length {y.shape[0]}")
    if mode == "exact_square":
        if A.shape[0] != A.shape[1]:
            raise ValueError("exact_square requires a square matrix")
        rank = numeric_rank(A, rank_tol)
        if rank < A.shape[0]:
            raise RankDeficientError(
                f"square system is singular (numeric rank {rank} < {A.shape[0]})",
                rank=rank,
            )
        x = np.linalg.solve(A, y)
        # one step of iterative refinement rescues marginally conditioned
        # systems without changing the well-conditioned ones
        x += np.linalg.solve(A, y - A @ x)
        return x
    if mode in ("least_norm_underdetermined", "least_squares"):
        x, *_ = np.linalg.lstsq(A, y, rcond=None)
        dx, *_ = np.linalg.lstsq(A, y - A @ x, rcond=None)
        return x + dx
    raise ValueError(f"unknown mode {mode!r}")


def supporting_hyperplane(points, direction=None):
    """A hyperplane with every point strictly on the plus side, margin 1."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if direction is None:
        direction = np.zeros(points.shape[1])
        direction[0] = 1.0
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    b = 1.0 - float(np.min(points @ direction))
    return Hyperplane(direction, b)


def affine_fit(X, Y):
    """Least-squares affine map X -> Y; returns (AffineMap, max residual).

    Used as the constructive certificate that one point set is an affine
    transform of another.
    """
    X = _as_matrix(X, "X")
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    design = np.hstack([X, np.ones((X.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(design, Y, rcond=None)
    W = coef[:-1].T
    b = coef[-1]
    amap = AffineMap(W, b)
    residual = float(np.max(np.abs(amap.apply(X) - Y))) if X.size else 0.0
    return amap, residual
