"""Exact greedy CART machinery shared by the forest and boosted ensembles.

Trees are grown breadth-first with second-order (Newton) split gains:

    gain = 0.5 * (GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam))

where G/H are sums of first/second derivatives of the loss over the node.
With g = -y, h = 1, lam = 0 this reduces to the classic variance-reduction
criterion with mean-value leaves, which is what the random forest uses
(on 0/1 targets it is exactly the Gini criterion).

Split thresholds are realized training values and the routing rule is
`x <= threshold -> left`, so ensembles are exactly invariant under any
strictly monotone per-feature rescaling applied to both training and
evaluation data.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..rng import Rng

MIN_GAIN = 1e-12


@dataclass
class TreeNode:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    value: float = 0.0  # leaf output (Newton weight or mean)
    n: int = 0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value, "n": self.n}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "n": self.n,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "TreeNode":
        if "feature" not in d:
            return TreeNode(value=d["value"], n=d["n"])
        return TreeNode(
            feature=d["feature"],
            threshold=d["threshold"],
            n=d["n"],
            left=TreeNode.from_dict(d["left"]),
            right=TreeNode.from_dict(d["right"]),
        )


def _best_split_for_feature(
    x: np.ndarray, g: np.ndarray, h: np.ndarray, reg_lambda: float, leaf_min: int
) -> tuple[float, float]:
    """(gain, threshold) of the best split on one feature, or (-inf, 0)."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if xs[0] == xs[-1]:
        return -np.inf, 0.0
    gl = np.cumsum(g[order])[:-1]
    hl = np.cumsum(h[order])[:-1]
    g_total, h_total = gl[-1] + g[order[-1]], hl[-1] + h[order[-1]]

    n = len(x)
    left_count = np.arange(1, n)
    valid = xs[1:] != xs[:-1]
    valid &= (left_count >= leaf_min) & (n - left_count >= leaf_min)
    if not valid.any():
        return -np.inf, 0.0

    gr = g_total - gl
    hr = h_total - hl
    parent = g_total**2 / (h_total + reg_lambda)
    gain = 0.5 * (gl**2 / (hl + reg_lambda) + gr**2 / (hr + reg_lambda) - parent)
    gain[~valid] = -np.inf
    best = int(np.argmax(gain))
    return float(gain[best]), float(xs[best])


def build_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    reg_lambda: float,
    max_depth: int | None,
    leaf_min: int,
    n_split_features: int,
    rng: Rng,
) -> TreeNode:
    """Grow one tree on (X, g, h).

    `n_split_features` features are drawn (without replacement) per node;
    the draw order is the breadth-first build order, so identical inputs
    and stream state give an identical tree.
    """
    n, p = X.shape

    def leaf_value(idx: np.ndarray) -> float:
        return float(-g[idx].sum() / (h[idx].sum() + reg_lambda))

    root = TreeNode(n=n)
    queue: deque[tuple[TreeNode, np.ndarray, int]] = deque([(root, np.arange(n), 0)])
    while queue:
        node, idx, depth = queue.popleft()
        node.n = len(idx)
        node.value = leaf_value(idx)
        if (max_depth is not None and depth >= max_depth) or len(idx) < 2 * leaf_min:
            continue
        if n_split_features < p:
            features = np.sort(rng.choice_without_replacement(p, n_split_features))
        else:
            features = np.arange(p)
        best_gain, best_feature, best_threshold = -np.inf, -1, 0.0
        for j in features:
            gain, threshold = _best_split_for_feature(
                X[idx, j], g[idx], h[idx], reg_lambda, leaf_min
            )
            if gain > best_gain:
                best_gain, best_feature, best_threshold = gain, int(j), threshold
        if best_gain <= MIN_GAIN:
            continue
        go_left = X[idx, best_feature] <= best_threshold
        node.feature = best_feature
        node.threshold = best_threshold
        node.left = TreeNode()
        node.right = TreeNode()
        queue.append((node.left, idx[go_left], depth + 1))
        queue.append((node.right, idx[~go_left], depth + 1))
    return root


def predict_tree(root: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    stack = [(root, np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if len(idx) == 0:
            continue
        if node.is_leaf:
            out[idx] = node.value
            continue
        go_left = X[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return out


def tree_features(root: TreeNode) -> set[int]:
    """Indices of features used by any split in the tree."""
    used: set[int] = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if not node.is_leaf:
            used.add(node.feature)
            stack.extend([node.left, node.right])
    return used
