"""Coalesced training engine and predictor.

One clause bank serves all classes through a signed weight matrix: the class
vote vector is the integer product of the weights with the clause output
bits, and per-class update probabilities come from comparing the clipped
vote sum against the voting margin.  Feedback routing follows the coalesced
convention: for the class under update, the sign of a clause's weight
relative to the desired output decides Type I versus Type II feedback, and
the clause output decides the Ia/Ib split.

Three feedback kinds:

* Type Ia (clause fired, weight agrees with the desired output): stored
  literals present in the row are rewarded outright (boosted true
  positives), stored literals absent from it erode at rate 1/specificity,
  features of the row that the clause lacks are offered to the true class's
  active literal record, and the weight grows by one in the desired
  direction.
* Type Ib (clause silent, weight agrees): each stored literal is penalized
  independently with probability 1/specificity, eroding stale patterns;
  literals pushed below the lower threshold drop out of the clause.
* Type II (clause fired, weight disagrees): stored-but-excluded literals
  absent from the row are pushed toward inclusion, a fresh literal absent
  from the row is drawn from the update class's record and inserted, and the
  weight moves one step toward (and past) zero.

Training visits each sample twice per step: once for its true class (desired
output 1) and once for a sampled negative class (desired output 0, inverted
routing).  The negative class is either uniform or "focused": the most
confusable class, i.e. the one with the highest clipped vote.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .active_literals import MODES, ActiveLiteralRecord
from .clauses import ClauseBank
from .data import SparseDataset, Vocabulary
from .errors import ConfigError, DataFormatError, InvariantError

NEGATIVE_SAMPLERS = ("uniform", "focused")

DEFAULT_STATE_COUNT = 128


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    margin defaults to round(4 * sqrt(clause_count)) and insert_state to
    state_count (one reward short of inclusion, so a newly introduced
    literal must be confirmed once more before it can invalidate a match).
    """

    clause_count: int
    al_capacity: int
    lower_threshold: int
    max_clause_size: int
    state_count: int = DEFAULT_STATE_COUNT
    margin: int | None = None
    specificity: float = 2.0
    al_mode: str = "dynamic"
    negative_sampler: str = "focused"
    insert_state: int | None = None
    k_intro: int = 1
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.margin is None:
            self.margin = max(1, round(4 * math.sqrt(self.clause_count)))
        if self.insert_state is None:
            self.insert_state = self.state_count
        self.validate()

    def validate(self) -> None:
        if self.margin < 1:
            raise ConfigError(f"margin must be >= 1, got {self.margin}")
        if not self.specificity > 1:
            raise ConfigError(f"specificity must be > 1, got {self.specificity}")
        if self.al_mode not in MODES:
            raise ConfigError(f"al_mode must be one of {MODES}, got {self.al_mode!r}")
        if self.negative_sampler not in NEGATIVE_SAMPLERS:
            raise ConfigError(
                f"negative_sampler must be one of {NEGATIVE_SAMPLERS}, "
                f"got {self.negative_sampler!r}"
            )
        if self.al_capacity < 1:
            raise ConfigError(f"al_capacity must be >= 1, got {self.al_capacity}")
        if not 1 <= self.lower_threshold <= self.state_count:
            raise ConfigError(
                f"lower_threshold must be in [1, state_count={self.state_count}], "
                f"got {self.lower_threshold}"
            )
        if not self.lower_threshold <= self.insert_state <= 2 * self.state_count:
            raise ConfigError(
                f"insert_state must be in [{self.lower_threshold}, {2 * self.state_count}], "
                f"got {self.insert_state}"
            )
        if self.k_intro < 1:
            raise ConfigError(f"k_intro must be >= 1, got {self.k_intro}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")

    def copy(self) -> "TrainConfig":
        return replace(self)


class VoteVector(NamedTuple):
    raw: np.ndarray
    clipped: np.ndarray


def votes(weights: np.ndarray, clause_outputs: np.ndarray, margin: int) -> VoteVector:
    """Per-class vote sums v = W c, plus the copy clipped to [-margin, margin]."""
    weights = np.asarray(weights)
    c = np.asarray(clause_outputs).astype(np.int64)
    if weights.ndim != 2 or c.ndim != 1 or weights.shape[1] != c.shape[0]:
        raise ConfigError(
            f"dimension mismatch: weights {weights.shape} vs clause outputs {c.shape}"
        )
    raw = weights.astype(np.int64) @ c
    return VoteVector(raw, np.clip(raw, -margin, margin))


def update_probability(vote: int, target: int, margin: int) -> float:
    """|target - clip(vote)| / (2 margin): zero exactly when the clipped vote
    meets the summation target (+margin for the true class, -margin otherwise)."""
    clipped = min(margin, max(-margin, vote))
    return abs(target - clipped) / (2 * margin)


def sample_negative_class(
    vote_vector: VoteVector, true_class: int, sampler: str, rng: np.random.Generator
) -> int:
    """Pick the class to receive the desired-output-0 update.

    uniform: any class other than the true one, equiprobably.
    focused: the most confusable class, i.e. the highest clipped vote among
    the others (ties broken uniformly).
    """
    m = len(vote_vector.clipped)
    if m < 2:
        raise ConfigError("binary problems require m=2 encoding")
    if sampler == "uniform":
        pick = int(rng.integers(m - 1))
        return pick + (pick >= true_class)
    if sampler == "focused":
        clipped = vote_vector.clipped
        others = np.flatnonzero(np.arange(m) != true_class)
        best = clipped[others].max()
        top = others[clipped[others] == best]
        if top.size == 1:
            return int(top[0])
        return int(top[rng.integers(top.size)])
    raise ConfigError(f"unknown negative sampler {sampler!r}")


def route_feedback(
    selected: np.ndarray, weight_row: np.ndarray, clause_outputs: np.ndarray, desired: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split the selected clauses into (Ia, Ib, II) sets for one class update.

    A clause's weight sign "agrees" when it votes the way the desired output
    points (non-negative for desired 1, negative for desired 0).  Agreeing
    clauses get Type I treatment, split by clause output into Ia (fired) and
    Ib (silent); opposing clauses that fired get Type II.  The three sets are
    disjoint by construction, so no clause ever receives both pattern
    reinforcement and discrimination for the same class in one update.
    """
    agrees = (weight_row >= 0) if desired == 1 else (weight_row < 0)
    fired_agreeing = selected & agrees & clause_outputs
    silent_agreeing = selected & agrees & ~clause_outputs
    fired_opposing = selected & ~agrees & clause_outputs
    return fired_agreeing, silent_agreeing, fired_opposing


# -- per-clause feedback (reference semantics; the trainer applies the same
#    rules batched across the bank) ------------------------------------------


def type_ia_feedback(
    bank: ClauseBank,
    j: int,
    weights: np.ndarray,
    cls: int,
    row: np.ndarray,
    al_record: ActiveLiteralRecord | None,
    specificity: float,
    rng: np.random.Generator,
    weight_direction: int = 1,
) -> None:
    """Reinforce a clause that fired with a weight agreeing with the desired
    output.  Stored literals present in the row are rewarded outright
    (boosted true positives); stored literals absent from it erode at rate
    1/specificity and drop out below the lower threshold.  The row's
    features the clause lacks are offered to the class record, and the
    weight grows by one."""
    stored = bank.stored_literals(j)
    present = np.isin(stored, row, assume_unique=True)
    for feature in stored[present]:
        bank.reward_literal(j, int(feature))
    absent = stored[~present]
    if absent.size:
        hit = rng.random(absent.size) < 1.0 / specificity
        for feature in absent[hit]:
            bank.penalize_literal(j, int(feature))
    if al_record is not None:
        for feature in row:
            if feature not in stored:
                al_record.submit(cls, int(feature), rng)
    weights[cls, j] += weight_direction


def type_ib_feedback(
    bank: ClauseBank, j: int, specificity: float, rng: np.random.Generator
) -> None:
    """Erode a clause that stayed silent: each stored literal is penalized
    independently with probability 1/specificity.  The weight is untouched."""
    stored = bank.stored_literals(j)
    if stored.size == 0:
        return
    hit = rng.random(stored.size) < 1.0 / specificity
    for feature in stored[hit]:
        bank.penalize_literal(j, int(feature))


def type_ii_feedback(
    bank: ClauseBank,
    j: int,
    weights: np.ndarray,
    cls: int,
    row: np.ndarray,
    al_record: ActiveLiteralRecord,
    insert_state: int,
    rng: np.random.Generator,
    *,
    weight_direction: int,
    k_intro: int = 1,
) -> None:
    """Discriminate against a wrong match: push stored-but-excluded literals
    absent from the row toward inclusion, introduce a fresh absent literal
    from the class record when there is room, and move the weight one step
    toward (and past) zero."""
    stored = bank.stored_literals(j)
    states = bank.stored_states(j)
    absent = stored[(states <= bank.state_count) & ~np.isin(stored, row)]
    for feature in absent:
        bank.reward_literal(j, int(feature))
    if bank.clause_size(j) < bank.max_clause_size:
        for feature in al_record.sample_absent(cls, row, k_intro, rng):
            bank.insert_literal(j, int(feature), insert_state)
    weights[cls, j] += weight_direction


@dataclass
class EpochMetrics:
    seconds: float
    mean_clause_size: float
    al_occupancy: list[int]


class StmModel:
    """Clause bank + weight matrix + active literal records, ready to train.

    The structural memory is bounded by (clause_count, max_clause_size,
    class_count, al_capacity) alone; the feature count only sets the index
    range, never the allocation.
    """

    def __init__(
        self,
        config: TrainConfig,
        feature_count: int,
        class_count: int,
        vocabulary: Vocabulary | None = None,
    ):
        config.validate()
        if class_count < 1:
            raise ConfigError(f"class_count must be >= 1, got {class_count}")
        self.config = config
        self.feature_count = feature_count
        self.class_count = class_count
        self.vocabulary = vocabulary
        self.bank = ClauseBank(
            config.clause_count,
            config.state_count,
            config.lower_threshold,
            config.max_clause_size,
            feature_count,
        )
        self.weights = np.zeros((class_count, config.clause_count), dtype=np.int32)
        self.al = ActiveLiteralRecord(
            class_count, config.al_capacity, feature_count, config.al_mode
        )
        self.meta: dict = {}
        self.debug = False
        self._ever_inserted: set[int] = set()
        self._x_mask = np.zeros(feature_count + 1, dtype=bool)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StmModel):
            return NotImplemented
        return (
            self.config == other.config
            and self.feature_count == other.feature_count
            and self.class_count == other.class_count
            and self.bank == other.bank
            and np.array_equal(self.weights, other.weights)
            and self.al == other.al
            and self.vocabulary == other.vocabulary
        )

    # -- inference ----------------------------------------------------------

    def vote_vector(self, row: np.ndarray, training: bool = False) -> VoteVector:
        c = self.bank.evaluate_rows(row, training=training)
        return votes(self.weights, c, self.config.margin)

    def predict(self, row: np.ndarray) -> int:
        """argmax of the raw votes under inference-mode clause outputs; ties
        resolve to the lowest class index."""
        return int(np.argmax(self.vote_vector(row).raw))

    def predict_batch(self, rows: list[np.ndarray]) -> np.ndarray:
        out = np.empty(len(rows), dtype=np.int64)
        weights = self.weights.astype(np.int64)
        # Chunked so the presence-mask block stays small even for huge o.
        chunk = max(1, (1 << 22) // (self.feature_count + 1))
        for start in range(0, len(rows), chunk):
            block = rows[start : start + chunk]
            masks = np.zeros((len(block), self.feature_count + 1), dtype=bool)
            for i, row in enumerate(block):
                masks[i, row] = True
            c = self.bank.evaluate_batch(masks, training=False)
            out[start : start + len(block)] = np.argmax(c @ weights.T, axis=1)
        return out

    # -- training -----------------------------------------------------------

    def train_sample(self, row: np.ndarray, label: int, rng: np.random.Generator) -> None:
        """One coalesced update: the true class pulls toward +margin, one
        sampled negative class pulls toward -margin.  Clause outputs and
        votes are computed once, before either side mutates anything."""
        cfg = self.config
        mask = self._x_mask
        mask[row] = True
        try:
            c = self.bank.evaluate_all(mask, training=True)
            vv = votes(self.weights, c, cfg.margin)
            d_target = update_probability(int(vv.raw[label]), cfg.margin, cfg.margin)
            self._apply_side(row, mask, c, label, desired=1, probability=d_target, rng=rng)
            negative = sample_negative_class(vv, label, cfg.negative_sampler, rng)
            d_negative = update_probability(int(vv.raw[negative]), -cfg.margin, cfg.margin)
            self._apply_side(row, mask, c, negative, desired=0, probability=d_negative, rng=rng)
        finally:
            mask[row] = False

    def _apply_side(
        self,
        row: np.ndarray,
        x_mask: np.ndarray,
        c: np.ndarray,
        cls: int,
        desired: int,
        probability: float,
        rng: np.random.Generator,
    ) -> None:
        if probability <= 0.0:
            return
        bank = self.bank
        cfg = self.config
        selected = rng.random(bank.clause_count) < probability
        if not selected.any():
            return
        weight_row = self.weights[cls]
        direction = 1 if desired == 1 else -1
        fired_agreeing, silent_agreeing, fired_opposing = route_feedback(
            selected, weight_row, c, desired
        )

        if fired_agreeing.any():
            bank.batch_match_reinforce(
                fired_agreeing, x_mask, 1.0 / cfg.specificity, rng
            )
            weight_row[fired_agreeing] += direction
            if desired == 1:
                # Population is evidence-driven: a row's features enter only
                # the record of the row's own class.
                self.al.submit_row(cls, row, rng)
                if self.debug:
                    self._ever_inserted.update(int(f) for f in row)
        if silent_agreeing.any():
            bank.batch_penalize_stored(silent_agreeing, 1.0 / cfg.specificity, rng)
        if fired_opposing.any():
            bank.batch_reward_excluded_absent(fired_opposing, x_mask)
            weight_row[fired_opposing] += direction
            eligible = self.al.eligible_absent(cls, x_mask)
            if eligible.size:
                cap = cfg.max_clause_size
                for j in np.flatnonzero(fired_opposing):
                    if bank.sizes[j] >= cap:
                        continue
                    if cfg.k_intro == 1:
                        picks = (eligible[int(rng.integers(eligible.size))],)
                    else:
                        take = min(cfg.k_intro, eligible.size)
                        picks = rng.choice(eligible, size=take, replace=False)
                    for feature in picks:
                        bank.insert_literal(int(j), int(feature), cfg.insert_state)

    def train_epoch(
        self, ds: SparseDataset, rng: np.random.Generator, threads: int = 1
    ) -> EpochMetrics:
        """One pass over a seeded shuffle of the dataset.

        threads > 1 shards the shuffled samples across worker threads that
        update the shared model without locks; that mode is not
        deterministic and skips debug invariant checking.
        """
        if len(ds) == 0:
            raise DataFormatError("cannot train on an empty dataset")
        if ds.class_count < 2:
            raise ConfigError("binary problems require m=2 encoding")
        if ds.feature_count != self.feature_count or ds.class_count != self.class_count:
            raise ConfigError(
                f"dataset shape (o={ds.feature_count}, m={ds.class_count}) does not match "
                f"model (o={self.feature_count}, m={self.class_count})"
            )
        start = time.perf_counter()
        order = rng.permutation(len(ds))
        if threads <= 1:
            for i in order:
                self.train_sample(ds.rows[i], int(ds.labels[i]), rng)
            if self.debug:
                self.check_invariants()
        else:
            self._train_epoch_parallel(ds, order, rng, threads)
        return EpochMetrics(
            seconds=time.perf_counter() - start,
            mean_clause_size=self.bank.mean_clause_size(),
            al_occupancy=[int(x) for x in self.al.occupancy()],
        )

    def _train_epoch_parallel(
        self, ds: SparseDataset, order: np.ndarray, rng: np.random.Generator, threads: int
    ) -> None:
        shards = np.array_split(order, threads)
        worker_rngs = [np.random.default_rng(rng.integers(2**63)) for _ in shards]

        def run(shard: np.ndarray, worker_rng: np.random.Generator) -> None:
            mask = np.zeros(self.feature_count + 1, dtype=bool)
            for i in shard:
                row = ds.rows[i]
                label = int(ds.labels[i])
                mask[row] = True
                c = self.bank.evaluate_all(mask, training=True)
                vv = votes(self.weights, c, self.config.margin)
                d_t = update_probability(int(vv.raw[label]), self.config.margin, self.config.margin)
                self._apply_side(row, mask, c, label, 1, d_t, worker_rng)
                neg = sample_negative_class(vv, label, self.config.negative_sampler, worker_rng)
                d_n = update_probability(int(vv.raw[neg]), -self.config.margin, self.config.margin)
                self._apply_side(row, mask, c, neg, 0, d_n, worker_rng)
                mask[row] = False

        pool = [
            threading.Thread(target=run, args=(shard, wrng))
            for shard, wrng in zip(shards, worker_rngs)
        ]
        for t in pool:
            t.start()
        for t in pool:
            t.join()

    # -- diagnostics ----------------------------------------------------------

    def check_invariants(self) -> None:
        self.bank.check_invariants()
        self.al.check_invariants()
        if self.weights.shape != (self.class_count, self.config.clause_count):
            raise InvariantError("weight matrix shape drifted")
        if self.debug:
            stored = {
                int(f)
                for j in range(self.bank.clause_count)
                for f in self.bank.stored_literals(j)
            }
            if not stored <= self._ever_inserted:
                raise InvariantError(
                    "clause holds a literal that never passed through an active literal record"
                )


def train_sample(model: StmModel, row: np.ndarray, label: int, rng: np.random.Generator) -> None:
    model.train_sample(row, label, rng)


def train_epoch(
    model: StmModel, ds: SparseDataset, rng: np.random.Generator, threads: int = 1
) -> EpochMetrics:
    return model.train_epoch(ds, rng, threads=threads)


def predict(model: StmModel, row: np.ndarray) -> int:
    return model.predict(row)


def evaluate_accuracy(model: StmModel, ds: SparseDataset) -> float:
    if len(ds) == 0:
        raise DataFormatError("cannot evaluate on an empty dataset")
    predicted = model.predict_batch(ds.rows)
    return float((predicted == ds.labels).mean())


def confusion_matrix(model: StmModel, ds: SparseDataset) -> np.ndarray:
    """counts[true, predicted] over the dataset."""
    if len(ds) == 0:
        raise DataFormatError("cannot evaluate on an empty dataset")
    predicted = model.predict_batch(ds.rows)
    counts = np.zeros((ds.class_count, ds.class_count), dtype=np.int64)
    np.add.at(counts, (ds.labels.astype(np.int64), predicted), 1)
    return counts
