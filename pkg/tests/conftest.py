import numpy as np
import pytest

from sparse_tsetlin import SparseDataset, StmModel, TrainConfig
from sparse_tsetlin.clauses import ClauseBank


def make_planted_dataset(o=20, n_samples=500, seed=7, background_rate=0.3):
    """Noiseless conjunctive concept: features {2, 5} both present <=> class 1.

    Half the samples have the rule features forced present, the other half
    have at least one of them knocked out; every other feature is background
    noise.  The planted rule itself is the oracle for any claimed accuracy.
    """
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for i in range(n_samples):
        present = rng.random(o) < background_rate
        if i % 2 == 0:
            present[2] = present[5] = True
        else:
            which = rng.integers(3)
            if which == 0:
                present[2] = False
            elif which == 1:
                present[5] = False
            else:
                present[2] = present[5] = False
        rows.append(np.flatnonzero(present).astype(np.int32))
        labels.append(int(present[2] and present[5]))
    return SparseDataset(rows, labels, o, 2)


def make_random_dataset(rng, n_samples=60, feature_count=30, class_count=3, max_row=10):
    rows = [
        np.unique(rng.integers(0, feature_count, size=rng.integers(0, max_row))).astype(np.int32)
        for _ in range(n_samples)
    ]
    labels = rng.integers(0, class_count, size=n_samples)
    return SparseDataset(rows, labels, feature_count, class_count)


def make_random_bank(rng, feature_count, clause_count, state_count, lower_threshold, max_clause_size):
    """Random clause bank covering empty, partial, and full clauses, with
    states across the whole spectrum including both boundaries."""
    bank = ClauseBank(clause_count, state_count, lower_threshold, max_clause_size, feature_count)
    for j in range(clause_count):
        size = int(rng.integers(0, max_clause_size + 1))
        feats = np.sort(rng.permutation(feature_count)[:size])
        for f in feats:
            state = int(rng.integers(lower_threshold, 2 * state_count + 1))
            bank.insert_literal(j, int(f), state)
    return bank


def make_random_model(rng, feature_count=None, clause_count=None):
    o = int(feature_count if feature_count is not None else rng.integers(2, 65))
    n = int(clause_count if clause_count is not None else rng.integers(1, 33))
    m = int(rng.integers(2, 6))
    state_count = int(rng.integers(2, 65))
    t = int(rng.integers(1, state_count + 1))
    p = int(rng.integers(1, min(o, 12) + 1))
    config = TrainConfig(
        clause_count=n,
        al_capacity=int(rng.integers(1, 33)),
        lower_threshold=t,
        max_clause_size=p,
        state_count=state_count,
        margin=int(rng.integers(1, 50)),
    )
    model = StmModel(config, o, m)
    model.bank = make_random_bank(rng, o, n, state_count, t, p)
    model.weights = rng.integers(-20, 21, size=(m, n)).astype(np.int32)
    return model


@pytest.fixture
def planted_dataset():
    return make_planted_dataset()
