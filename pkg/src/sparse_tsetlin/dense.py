"""Dense reference machine over the full 2o-literal space.

This is the ground-truth oracle for the sparse engine: every feature and its
negation gets an automaton state, nothing is ever discarded, and evaluation
walks the whole literal vector.  It exists to be obviously correct, not
fast, and refuses more than 64 features.  The scalar entry points are
written as plain loops; the batch helpers restate the same formula with
matrix algebra and are cross-checked against the loops in tests.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

MAX_ORACLE_FEATURES = 64


def dense_evaluate(states_row: np.ndarray, x: np.ndarray, state_count: int, training: bool = False) -> int:
    """Conjunction over all included literals (positives and negations).

    x is the expanded bit vector [x_1..x_o, not-x_1..not-x_o].
    """
    included_any = False
    for k in range(len(states_row)):
        if states_row[k] > state_count:
            included_any = True
            if x[k] == 0:
                return 0
    if not included_any:
        return 1 if training else 0
    return 1


def dense_votes(weights: np.ndarray, clause_outputs: np.ndarray) -> np.ndarray:
    return weights.astype(np.int64) @ np.asarray(clause_outputs, dtype=np.int64)


def unit_step(v: int) -> int:
    return 1 if v >= 0 else 0


def dense_predict_binary(states: np.ndarray, x: np.ndarray, state_count: int) -> int:
    """Two-class vote with polarity halves: the first half of the clauses
    votes for output 1, the second half against, thresholded at v >= 0."""
    n = states.shape[0]
    half = n // 2
    v = 0
    for j in range(half):
        v += dense_evaluate(states[j], x, state_count)
    for j in range(half, n):
        v -= dense_evaluate(states[j], x, state_count)
    return unit_step(v)


class DenseCoalescedOracle:
    """Weighted multi-class machine on the dense literal space."""

    def __init__(self, feature_count: int, clause_count: int, class_count: int, state_count: int):
        if feature_count > MAX_ORACLE_FEATURES:
            raise ConfigError(
                f"dense oracle supports at most {MAX_ORACLE_FEATURES} features, "
                f"got {feature_count}"
            )
        self.feature_count = feature_count
        self.clause_count = clause_count
        self.class_count = class_count
        self.state_count = state_count
        # State 1 is the deepest exclude; nothing is included until trained
        # or imported.
        self.states = np.ones((clause_count, 2 * feature_count), dtype=np.int32)
        self.weights = np.zeros((class_count, clause_count), dtype=np.int32)

    def clause_outputs(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        return np.array(
            [dense_evaluate(self.states[j], x, self.state_count, training) for j in range(self.clause_count)],
            dtype=np.int64,
        )

    def predict(self, x: np.ndarray) -> int:
        v = dense_votes(self.weights, self.clause_outputs(x))
        return int(np.argmax(v))

    def predict_batch(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized restatement of predict for large test sweeps.

        xs has shape (rows, 2o).  A clause fails on a row iff some included
        literal is 0 there, so counting included-and-absent literals per
        (clause, row) pair and testing for zero reproduces the conjunction.
        """
        included = self.states > self.state_count
        violations = included.astype(np.int64) @ (1 - xs.astype(np.int64)).T
        outputs = (violations == 0) & included.any(axis=1)[:, None]
        v = self.weights.astype(np.int64) @ outputs
        return np.argmax(v, axis=0)

    # -- minimal training, enough for planted-rule cross-checks --------------

    def train_sample(
        self,
        x: np.ndarray,
        label: int,
        margin: int,
        specificity: float,
        rng: np.random.Generator,
    ) -> None:
        outputs = self.clause_outputs(x, training=True)
        v = np.clip(dense_votes(self.weights, outputs), -margin, margin)
        self._update_class(x, outputs, label, 1, (margin - v[label]) / (2 * margin), specificity, rng)
        negative = int(rng.integers(self.class_count - 1))
        negative += negative >= label
        self._update_class(
            x, outputs, negative, 0, (margin + v[negative]) / (2 * margin), specificity, rng
        )

    def _update_class(
        self,
        x: np.ndarray,
        outputs: np.ndarray,
        cls: int,
        desired: int,
        probability: float,
        specificity: float,
        rng: np.random.Generator,
    ) -> None:
        ceiling = 2 * self.state_count
        direction = 1 if desired == 1 else -1
        for j in range(self.clause_count):
            if rng.random() >= probability:
                continue
            weight_agrees = (self.weights[cls, j] >= 0) == (desired == 1)
            if weight_agrees:
                if outputs[j] == 1:
                    # Type I on a firing clause: true literals rewarded
                    # outright, false literals eroded at rate 1/s.
                    for k in range(2 * self.feature_count):
                        if x[k] == 1:
                            if self.states[j, k] < ceiling:
                                self.states[j, k] += 1
                        elif rng.random() < 1.0 / specificity and self.states[j, k] > 1:
                            self.states[j, k] -= 1
                    self.weights[cls, j] += direction
                else:
                    # Type I on a silent clause: uniform erosion.
                    for k in range(2 * self.feature_count):
                        if rng.random() < 1.0 / specificity and self.states[j, k] > 1:
                            self.states[j, k] -= 1
            elif outputs[j] == 1:
                # Type II: push excluded false literals toward inclusion.
                for k in range(2 * self.feature_count):
                    if x[k] == 0 and self.states[j, k] <= self.state_count:
                        self.states[j, k] += 1
                self.weights[cls, j] += direction


def import_sparse(model) -> DenseCoalescedOracle:
    """Expand a sparse model onto the dense literal space.

    Stored states are copied; every absent literal (and every negation,
    which the sparse machine never stores) lands at state 1, the deepest
    exclude.  Predictions of the two machines must then agree on every row.
    """
    oracle = DenseCoalescedOracle(
        model.feature_count,
        model.config.clause_count,
        model.class_count,
        model.config.state_count,
    )
    for j in range(model.bank.clause_count):
        lits = model.bank.stored_literals(j)
        sts = model.bank.stored_states(j)
        oracle.states[j, lits] = sts
    oracle.weights = model.weights.copy()
    return oracle
