"""Random-forest regressor for operational cost prediction.

Trees are grown by CART variance-reduction splitting on bootstrap samples
with an optional per-split random feature subset. The routing rule is
"left if value <= threshold" everywhere (training, prediction, and the MIP
encoding agree on it), and thresholds are snapped to midpoints -- exact
half-integers for integral features -- so the encoding never has to break
a tie at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

FORMAT_HEADER = "ebsopt-forest v1"


class ForestError(ValueError):
    pass


class ForestFormatError(ForestError):
    """Malformed forest file; message carries the line number."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str            # "decision" | "context"
    lower: float
    upper: float
    integral: bool = False

    def __post_init__(self):
        if self.kind not in ("decision", "context"):
            raise ForestError(f"feature {self.name}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class FeatureSpace:
    features: tuple

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ForestError("feature names must be unique")

    @property
    def n_features(self):
        return len(self.features)

    def decision_indices(self):
        return [i for i, f in enumerate(self.features) if f.kind == "decision"]

    def context_indices(self):
        return [i for i, f in enumerate(self.features) if f.kind == "context"]

    def index_of(self, name):
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise ForestError(f"unknown feature {name!r}")

    def assemble(self, decision_values, context_values) -> np.ndarray:
        """Merge decision and context vectors into full feature order."""
        dec = self.decision_indices()
        ctx = self.context_indices()
        if len(decision_values) != len(dec):
            raise ForestError(f"expected {len(dec)} decision values, got {len(decision_values)}")
        if len(context_values) != len(ctx):
            raise ForestError(f"expected {len(ctx)} context values, got {len(context_values)}")
        x = np.empty(self.n_features)
        x[dec] = decision_values
        x[ctx] = context_values
        return x


@dataclass
class TreeNode:
    feature: int = -1        # -1 marks a leaf
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    score: float = 0.0

    @property
    def is_leaf(self):
        return self.feature < 0


@dataclass
class Tree:
    nodes: list

    def route(self, x) -> int:
        """Leaf index reached by x (left when value <= threshold)."""
        i = 0
        node = self.nodes[0]
        while not node.is_leaf:
            i = node.left if x[node.feature] <= node.threshold else node.right
            node = self.nodes[i]
        return i

    def predict(self, x) -> float:
        return self.nodes[self.route(x)].score

    def leaf_indices(self):
        return [i for i, n in enumerate(self.nodes) if n.is_leaf]

    def depth(self) -> int:
        depths = {0: 0}
        best = 0
        for i, n in enumerate(self.nodes):
            if not n.is_leaf:
                depths[n.left] = depths[i] + 1
                depths[n.right] = depths[i] + 1
                best = max(best, depths[i] + 1)
        return best


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    max_depth: int = 400
    min_samples_leaf: int = 1
    feature_subset_fraction: float = 1.0
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1:
            raise ForestError("n_trees and max_depth must be at least 1")
        if not 0 < self.feature_subset_fraction <= 1:
            raise ForestError("feature_subset_fraction must be in (0, 1]")


@dataclass
class Forest:
    trees: list
    feature_space: FeatureSpace
    metadata: dict = field(default_factory=dict)

    @property
    def n_trees(self):
        return len(self.trees)


# ---------------------------------------------------------------------------
# training


def tree_rngs(config: TrainConfig, n_trees=None):
    """Per-tree generators derived deterministically from the master seed."""
    seqs = np.random.SeedSequence(config.seed).spawn(n_trees or config.n_trees)
    return [np.random.default_rng(s) for s in seqs]


def bootstrap_indices(config: TrainConfig, n_rows: int, tree_index: int) -> np.ndarray:
    """Row multiset tree ``tree_index`` was trained on (reproducible)."""
    rng = tree_rngs(config)[tree_index]
    if config.bootstrap:
        return rng.integers(0, n_rows, n_rows)
    return np.arange(n_rows)


def _snap_threshold(a: float, b: float, integral: bool) -> float:
    mid = 0.5 * (a + b)
    if integral:
        return math.floor(mid) + 0.5
    return mid


def _best_split(X, y, idx, feat_ids, space, min_leaf):
    """(gain, feature, threshold) minimizing child SSE, else None."""
    best = None
    y_node = y[idx]
    base = float(((y_node - y_node.mean()) ** 2).sum())
    for f in feat_ids:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        ys = y_node[order]
        # split after position p keeps v[:p+1] on the left
        cuts = np.nonzero(v[1:] > v[:-1])[0]
        if cuts.size == 0:
            continue
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total, total_sq, n = csum[-1], csq[-1], len(ys)
        nl = cuts + 1
        nr = n - nl
        ok = (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        nl, nr, cuts = nl[ok], nr[ok], cuts[ok]
        sl, sql = csum[cuts], csq[cuts]
        sse = (sql - sl * sl / nl) + ((total_sq - sql) - (total - sl) ** 2 / nr)
        pos = int(np.argmin(sse))
        gain = base - float(sse[pos])
        if gain <= 1e-12:
            continue
        thr = _snap_threshold(float(v[cuts[pos]]), float(v[cuts[pos] + 1]),
                              space.features[f].integral)
        if best is None or gain > best[0] + 1e-12:
            best = (gain, f, thr)
    return best


def _grow_tree(X, y, rng, config, space):
    n_rows, n_feat = X.shape
    if config.bootstrap:
        idx = rng.integers(0, n_rows, n_rows)
    else:
        idx = np.arange(n_rows)
    k = max(1, round(config.feature_subset_fraction * n_feat))
    nodes = [TreeNode()]
    stack = [(0, idx, 0)]
    while stack:
        node_id, rows, depth = stack.pop()
        y_rows = y[rows]
        if depth >= config.max_depth or len(rows) < 2 * config.min_samples_leaf \
                or float(y_rows.max() - y_rows.min()) == 0.0:
            nodes[node_id] = TreeNode(score=float(y_rows.mean()))
            continue
        if k < n_feat:
            feat_ids = np.sort(rng.choice(n_feat, size=k, replace=False))
        else:
            feat_ids = np.arange(n_feat)
        split = _best_split(X, y, rows, feat_ids, space, config.min_samples_leaf)
        if split is None:
            nodes[node_id] = TreeNode(score=float(y_rows.mean()))
            continue
        _, f, thr = split
        mask = X[rows, f] <= thr
        left_id, right_id = len(nodes), len(nodes) + 1
        nodes.append(TreeNode())
        nodes.append(TreeNode())
        nodes[node_id] = TreeNode(feature=f, threshold=thr, left=left_id, right=right_id)
        # push right first so the left child is processed first (stable ids)
        stack.append((right_id, rows[~mask], depth + 1))
        stack.append((left_id, rows[mask], depth + 1))
    return Tree(nodes)


def train(X, y, feature_space: FeatureSpace, config: TrainConfig | None = None) -> Forest:
    """Fit a forest on rows of feature values ``X`` and cost labels ``y``."""
    config = config or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != feature_space.n_features:
        raise ForestError(f"X must be rows x {feature_space.n_features} features")
    if len(X) != len(y):
        raise ForestError("X and y row counts differ")
    if len(X) < 2:
        raise ForestError("training needs at least 2 rows")
    if not np.isfinite(y).all():
        raise ForestError("labels must be finite")

    rngs = tree_rngs(config)
    trees = [_grow_tree(X, y, rngs[h], config, feature_space) for h in range(config.n_trees)]
    forest = Forest(trees, feature_space, metadata={
        "n_trees": str(config.n_trees),
        "max_depth": str(config.max_depth),
        "min_samples_leaf": str(config.min_samples_leaf),
        "feature_subset_fraction": repr(config.feature_subset_fraction),
        "bootstrap": str(config.bootstrap),
        "seed": str(config.seed),
        "n_rows": str(len(X)),
    })
    forest.metadata["train_r2"] = repr(_r_squared(forest, X, y))
    oob = _oob_r_squared(forest, X, y, config)
    if oob is not None:
        forest.metadata["oob_r2"] = repr(oob)
    return forest


def _r_squared(forest, X, y):
    pred = np.array([predict_row(forest, x) for x in X])
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        return 1.0
    return 1.0 - float(((y - pred) ** 2).sum()) / sst


def _oob_r_squared(forest, X, y, config):
    if not config.bootstrap:
        return None
    n = len(X)
    sums = np.zeros(n)
    counts = np.zeros(n)
    for h, tree in enumerate(forest.trees):
        used = set(bootstrap_indices(config, n, h).tolist())
        for i in range(n):
            if i not in used:
                sums[i] += tree.predict(X[i])
                counts[i] += 1
    mask = counts > 0
    if not mask.any():
        return None
    pred = sums[mask] / counts[mask]
    resid = y[mask] - pred
    sst = float(((y[mask] - y[mask].mean()) ** 2).sum())
    if sst == 0.0:
        return 1.0
    return 1.0 - float((resid ** 2).sum()) / sst


# ---------------------------------------------------------------------------
# prediction and partial evaluation


def predict_row(forest: Forest, x) -> float:
    return float(np.mean([t.predict(x) for t in forest.trees]))


def predict(forest: Forest, decision_values, context_values) -> float:
    """Mean of per-tree leaf scores for the assembled feature vector."""
    x = forest.feature_space.assemble(decision_values, context_values)
    return predict_row(forest, x)


def partial_evaluate(forest: Forest, context_values) -> Forest:
    """Resolve every context split against fixed context values.

    The returned forest splits on decision features only and predicts
    identically to the original at the given context.
    """
    space = forest.feature_space
    ctx = space.context_indices()
    if len(context_values) != len(ctx):
        raise ForestError(f"expected {len(ctx)} context values, got {len(context_values)}")
    w = np.full(space.n_features, np.nan)
    w[ctx] = context_values
    context_set = set(ctx)

    def reduce_tree(tree):
        nodes = []

        def copy(i):
            node = tree.nodes[i]
            while not node.is_leaf and node.feature in context_set:
                i = node.left if w[node.feature] <= node.threshold else node.right
                node = tree.nodes[i]
            my_id = len(nodes)
            nodes.append(TreeNode())
            if node.is_leaf:
                nodes[my_id] = TreeNode(score=node.score)
            else:
                left = copy(node.left)
                right = copy(node.right)
                nodes[my_id] = TreeNode(node.feature, node.threshold, left, right)
            return my_id

        copy(0)
        return Tree(nodes)

    reduced = [reduce_tree(t) for t in forest.trees]
    meta = dict(forest.metadata)
    meta["partially_evaluated"] = "true"
    return Forest(reduced, space, meta)


# ---------------------------------------------------------------------------
# serialization (versioned text format)


def save(forest: Forest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(FORMAT_HEADER + "\n")
        fh.write(f"features {forest.feature_space.n_features}\n")
        for f in forest.feature_space.features:
            fh.write(f"feature {f.name} {f.kind} {int(f.integral)} {f.lower!r} {f.upper!r}\n")
        for key in sorted(forest.metadata):
            fh.write(f"meta {key} {forest.metadata[key]}\n")
        fh.write(f"trees {forest.n_trees}\n")
        for h, tree in enumerate(forest.trees):
            fh.write(f"tree {h} nodes {len(tree.nodes)}\n")
            for i, n in enumerate(tree.nodes):
                if n.is_leaf:
                    fh.write(f"node {i} leaf {n.score!r}\n")
                else:
                    fh.write(f"node {i} split {n.feature} {n.threshold!r} {n.left} {n.right}\n")
        fh.write("end\n")


def load(path) -> Forest:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    pos = 0

    def take(expect=None):
        nonlocal pos
        if pos >= len(lines):
            raise ForestFormatError(f"{path}: truncated at line {pos + 1} (expected {expect})")
        line = lines[pos]
        pos += 1
        return line

    header = take("header")
    if header != FORMAT_HEADER:
        raise ForestFormatError(f"{path}:1: bad header {header!r}; expected {FORMAT_HEADER!r}")

    def fields(line, lineno, kind, count):
        parts = line.split()
        if not parts or parts[0] != kind or len(parts) != count:
            raise ForestFormatError(f"{path}:{lineno}: expected '{kind}' record, got {line!r}")
        return parts

    parts = fields(take("features count"), pos, "features", 2)
    n_features = int(parts[1])
    feats = []
    for _ in range(n_features):
        parts = fields(take("feature"), pos, "feature", 6)
        feats.append(Feature(parts[1], parts[2], float(parts[4]), float(parts[5]),
                             bool(int(parts[3]))))
    space = FeatureSpace(tuple(feats))

    metadata = {}
    line = take("meta or trees")
    while line.startswith("meta "):
        _, key, value = line.split(" ", 2)
        metadata[key] = value
        line = take("trees count")
    parts = fields(line, pos, "trees", 2)
    n_trees = int(parts[1])
    if n_trees < 1:
        raise ForestFormatError(f"{path}:{pos}: forest must contain at least one tree")

    trees = []
    for _ in range(n_trees):
        parts = fields(take("tree header"), pos, "tree", 4)
        n_nodes = int(parts[3])
        nodes = []
        for _ in range(n_nodes):
            lineno = pos + 1
            parts = take("node").split()
            if len(parts) >= 3 and parts[0] == "node" and parts[2] == "leaf" and len(parts) == 4:
                nodes.append(TreeNode(score=float(parts[3])))
            elif len(parts) == 7 and parts[0] == "node" and parts[2] == "split":
                nodes.append(TreeNode(int(parts[3]), float(parts[4]),
                                      int(parts[5]), int(parts[6])))
            else:
                raise ForestFormatError(f"{path}:{lineno}: bad node record {' '.join(parts)!r}")
        trees.append(Tree(nodes))
    if take("end") != "end":
        raise ForestFormatError(f"{path}:{pos}: missing end marker")
    return Forest(trees, space, metadata)
