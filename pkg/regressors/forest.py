# regressors/forest.py
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from joblib import Parallel, delayed

from regressors.base import EstimatorConfig, EstimatorKind, ForestConfig, RegressionModel, as_points
from samples.dataset import LabeledDataset
from utils.rng import make_rng

# Smallest decrease in the node sum of squares that counts as a split.
MIN_IMPROVEMENT = 1e-12


@dataclass(frozen=True)
class RegressionTree:
    """
    Flat array representation of a CART regression tree. Node 0 is the root;
    feature == -1 marks a leaf. `gain` is the decrease in the node sum of
    squares achieved by the split at each node (0 at leaves).
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def predict(self, points: np.ndarray) -> np.ndarray:
        node = np.zeros(points.shape[0], dtype=np.int64)
        rows = np.arange(points.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            current = node[active]
            go_left = points[rows[active], self.feature[current]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] >= 0
        return self.value[node]


def _best_split(x: np.ndarray, y: np.ndarray) -> Tuple[int, float, float]:
    """
    Best variance-reduction split over the columns of x. Candidate thresholds are
    midpoints between consecutive distinct sorted values.
    Returns (column, threshold, improvement); column -1 if nothing improves.
    """
    m = y.size
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ys = y[order]
    left_sum = np.cumsum(ys, axis=0)[:-1]
    total = y.sum()
    n_left = np.arange(1, m)[:, None].astype(np.float64)
    n_right = m - n_left
    right_sum = total - left_sum
    # Maximising sum_l^2/n_l + sum_r^2/n_r minimises the within-node sum of squares.
    score = left_sum ** 2 / n_left + right_sum ** 2 / n_right
    score[xs[1:] <= xs[:-1]] = -np.inf
    flat = int(np.argmax(score))
    row, col = divmod(flat, score.shape[1])
    improvement = score[row, col] - total ** 2 / m
    if not np.isfinite(improvement) or improvement <= MIN_IMPROVEMENT:
        return -1, 0.0, 0.0
    threshold = 0.5 * (xs[row, col] + xs[row + 1, col])
    return col, threshold, improvement


def grow_tree(
    features: np.ndarray,
    labels: np.ndarray,
    mtry: int,
    min_node: int,
    rng: np.random.Generator,
) -> RegressionTree:
    """
    Grows one unpruned CART tree on the rows given. Nodes with at most `min_node`
    rows, or a constant response, are leaves.
    """
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []
    gain: List[float] = []

    def new_node(y: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y.mean()))
        gain.append(0.0)
        return len(value) - 1

    dim = features.shape[1]
    stack = [(new_node(labels), np.arange(labels.size))]
    while stack:
        node, rows = stack.pop()
        y = labels[rows]
        if rows.size <= min_node or y.min() == y.max():
            continue
        tried = rng.choice(dim, size=mtry, replace=False)
        col, cut, improvement = _best_split(features[np.ix_(rows, tried)], y)
        if col < 0:
            continue
        goes_left = features[rows, tried[col]] <= cut
        left_rows, right_rows = rows[goes_left], rows[~goes_left]
        feature[node] = int(tried[col])
        threshold[node] = cut
        gain[node] = float(improvement)
        left[node] = new_node(labels[left_rows])
        right[node] = new_node(labels[right_rows])
        stack.append((left[node], left_rows))
        stack.append((right[node], right_rows))

    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
        gain=np.array(gain, dtype=np.float64),
    )


def _grow_member(features, labels, cfg: ForestConfig, mtry: int, index: int):
    rng = make_rng(cfg.seed, "tree", index)
    n = labels.size
    if cfg.bootstrap:
        in_bag = rng.integers(0, n, size=n)
    else:
        in_bag = np.arange(n)
    tree = grow_tree(features[in_bag], labels[in_bag], mtry, cfg.min_node, rng)
    counts = np.bincount(in_bag, minlength=n)
    return tree, counts > 0


class ForestModel(RegressionModel):
    """
    Random forest regression on the 0/1 labels. Stores out-of-bag predictions and
    the out-of-bag classification accuracy.
    """
    kind = EstimatorKind.RANDOM_FOREST

    def __init__(self, config: EstimatorConfig, data: LabeledDataset):
        super().__init__(config, data.features, data.labels)
        cfg = config.forest_config
        self.mtry = cfg.resolve_mtry(data.dim)
        labels = data.labels.astype(np.float64)
        members = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_grow_member)(data.features, labels, cfg, self.mtry, t) for t in range(cfg.n_trees)
        )
        self.trees = [tree for tree, _ in members]
        self.in_bag = np.column_stack([mask for _, mask in members])

        oob_sum = np.zeros(data.n)
        oob_count = np.zeros(data.n)
        for t, tree in enumerate(self.trees):
            out = ~self.in_bag[:, t]
            if out.any():
                oob_sum[out] += tree.predict(data.features[out])
                oob_count[out] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            self.oob_prediction = np.where(oob_count > 0, oob_sum / np.maximum(oob_count, 1), np.nan)
        covered = np.isfinite(self.oob_prediction)
        if covered.any():
            predicted = (self.oob_prediction[covered] > 0.5).astype(np.int8)
            self.oob_accuracy = float(np.mean(predicted == data.labels[covered]))
        else:
            self.oob_accuracy = float("nan")

    def impurity_importance(self) -> np.ndarray:
        """
        Mean decrease in impurity per feature, averaged over trees. On 0/1 labels
        a node's sum of squares is its size times half its Gini index, so this
        ranks features as the mean decrease in Gini does.
        """
        totals = np.zeros(self.dim)
        for tree in self.trees:
            split = tree.feature >= 0
            totals += np.bincount(tree.feature[split], weights=tree.gain[split], minlength=self.dim)
        return totals / len(self.trees)

    def predict(self, x) -> np.ndarray:
        points = as_points(x, self.dim)
        total = np.zeros(points.shape[0])
        for tree in self.trees:
            total += tree.predict(points)
        return np.clip(total / len(self.trees), 0.0, 1.0)


def fit_forest(data: LabeledDataset, cfg: ForestConfig) -> ForestModel:
    cfg.resolve_mtry(data.dim)
    return ForestModel(EstimatorConfig(kind=EstimatorKind.RANDOM_FOREST, forest=cfg), data)
