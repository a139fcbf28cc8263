"""Bounded sparse clause memory.

Each clause is a pair of parallel lists: feature indices (strictly
increasing) and automaton states.  States live in the spectrum [t, 2N]:
values above N mean the literal is Included in the conjunction, values in
[t, N] mean Excluded-but-remembered.  A literal penalized below t is removed
from the clause immediately; a literal not stored has no state at all.

The bank holds all clauses in fixed-capacity (n, p) arrays so that memory is
bounded by clause count and clause capacity, never by the feature count.
Slots past a clause's size hold a sentinel feature index (feature_count) and
state 0.  The sentinel maps to a guaranteed-False slot of the presence mask,
which lets whole-bank operations run as flat array expressions.
"""

from __future__ import annotations

import numpy as np

from .data import INDEX_DTYPE
from .errors import ConfigError, InvariantError

STATE_DTYPE = np.int32


def presence_mask(row: np.ndarray, feature_count: int) -> np.ndarray:
    """Boolean lookup of length feature_count + 1; the extra slot stays False
    so sentinel-padded literal slots never read as present."""
    mask = np.zeros(feature_count + 1, dtype=bool)
    mask[np.asarray(row, dtype=np.int64)] = True
    return mask


class ClauseBank:
    """n sparse clauses over o features, each capped at p stored literals."""

    def __init__(
        self,
        clause_count: int,
        state_count: int,
        lower_threshold: int,
        max_clause_size: int,
        feature_count: int,
    ):
        if clause_count < 1:
            raise ConfigError(f"clause_count must be >= 1, got {clause_count}")
        if state_count < 1:
            raise ConfigError(f"state_count must be >= 1, got {state_count}")
        if not 1 <= lower_threshold <= state_count:
            raise ConfigError(
                f"lower_threshold must be in [1, state_count={state_count}], "
                f"got {lower_threshold} (a literal could never be included before removal)"
            )
        if max_clause_size < 1:
            raise ConfigError(f"max_clause_size must be >= 1, got {max_clause_size}")
        if feature_count < 1:
            raise ConfigError(f"feature_count must be >= 1, got {feature_count}")
        self.clause_count = clause_count
        self.state_count = state_count
        self.lower_threshold = lower_threshold
        self.max_clause_size = max_clause_size
        self.feature_count = feature_count

        self._pad = feature_count
        self.literals = np.full((clause_count, max_clause_size), self._pad, dtype=INDEX_DTYPE)
        self.states = np.zeros((clause_count, max_clause_size), dtype=STATE_DTYPE)
        self.sizes = np.zeros(clause_count, dtype=INDEX_DTYPE)
        self._pos = np.arange(max_clause_size)

    # -- single-clause operations ------------------------------------------

    def clause_size(self, j: int) -> int:
        return int(self.sizes[j])

    def stored_literals(self, j: int) -> np.ndarray:
        return self.literals[j, : self.sizes[j]].copy()

    def stored_states(self, j: int) -> np.ndarray:
        return self.states[j, : self.sizes[j]].copy()

    def included_literals(self, j: int) -> np.ndarray:
        """Feature indices whose automaton state is above N (Include side)."""
        size = int(self.sizes[j])
        lits = self.literals[j, :size]
        return lits[self.states[j, :size] > self.state_count].copy()

    def evaluate(self, j: int, row: np.ndarray, training: bool = False) -> int:
        """Conjunction over included literals: 1 iff all are present in the row.

        A clause with no included literals asserts nothing; it outputs 1 in
        training (so feedback can reach and populate it) and 0 in inference.
        """
        included = self.included_literals(j)
        if included.size == 0:
            return 1 if training else 0
        return int(bool(np.isin(included, row, assume_unique=True).all()))

    def _position_of(self, j: int, feature: int) -> int:
        size = int(self.sizes[j])
        pos = int(np.searchsorted(self.literals[j, :size], feature))
        if pos >= size or self.literals[j, pos] != feature:
            raise ConfigError(
                f"feature {feature} is not stored in clause {j}; use insert_literal"
            )
        return pos

    def reward_literal(self, j: int, feature: int) -> None:
        """Move the literal's state one step toward Include, saturating at 2N."""
        pos = self._position_of(j, feature)
        ceiling = 2 * self.state_count
        if self.states[j, pos] < ceiling:
            self.states[j, pos] += 1

    def penalize_literal(self, j: int, feature: int) -> None:
        """Move one step toward Exclude; dropping below t removes the literal."""
        pos = self._position_of(j, feature)
        self.states[j, pos] -= 1
        if self.states[j, pos] < self.lower_threshold:
            self._remove_at(j, pos)

    def _remove_at(self, j: int, pos: int) -> None:
        size = int(self.sizes[j])
        self.literals[j, pos : size - 1] = self.literals[j, pos + 1 : size].copy()
        self.states[j, pos : size - 1] = self.states[j, pos + 1 : size].copy()
        self.literals[j, size - 1] = self._pad
        self.states[j, size - 1] = 0
        self.sizes[j] = size - 1

    def insert_literal(self, j: int, feature: int, insert_state: int) -> bool:
        """Insert a new literal keeping the list sorted.

        Returns False without touching the clause when the feature is already
        stored or the clause is at capacity (a literal must first be discarded
        by dropping below t before new introductions).
        """
        if not 0 <= feature < self.feature_count:
            raise ConfigError(f"feature {feature} out of range [0, {self.feature_count})")
        if not self.lower_threshold <= insert_state <= 2 * self.state_count:
            raise ConfigError(
                f"insert_state {insert_state} outside spectrum "
                f"[{self.lower_threshold}, {2 * self.state_count}]"
            )
        size = int(self.sizes[j])
        pos = int(np.searchsorted(self.literals[j, :size], feature))
        if pos < size and self.literals[j, pos] == feature:
            return False
        if size == self.max_clause_size:
            return False
        self.literals[j, pos + 1 : size + 1] = self.literals[j, pos:size].copy()
        self.states[j, pos + 1 : size + 1] = self.states[j, pos:size].copy()
        self.literals[j, pos] = feature
        self.states[j, pos] = insert_state
        self.sizes[j] = size + 1
        return True

    # -- whole-bank operations ----------------------------------------------

    def valid_mask(self) -> np.ndarray:
        return self._pos[None, :] < self.sizes[:, None]

    def evaluate_all(self, x_mask: np.ndarray, training: bool = False) -> np.ndarray:
        """Clause output bit per clause, vectorized over the whole bank.

        x_mask is the presence_mask of the current row (length o + 1).
        """
        valid = self.valid_mask()
        included = valid & (self.states > self.state_count)
        present = x_mask[self.literals]
        out = ~(included & ~present).any(axis=1)
        if not training:
            out &= included.any(axis=1)
        return out

    def evaluate_rows(self, row: np.ndarray, training: bool = False) -> np.ndarray:
        """evaluate_all from a raw sorted row instead of a presence mask."""
        return self.evaluate_all(presence_mask(row, self.feature_count), training)

    def evaluate_batch(self, x_masks: np.ndarray, training: bool = False) -> np.ndarray:
        """Clause outputs for a whole block of rows at once.

        x_masks has shape (rows, feature_count + 1); the result is a boolean
        (rows, clause_count) matrix equal to stacking evaluate_all row by row.
        """
        valid = self.valid_mask()
        included = valid & (self.states > self.state_count)
        present = x_masks[:, self.literals]
        out = ~(included[None, :, :] & ~present).any(axis=2)
        if not training:
            out &= included.any(axis=1)[None, :]
        return out

    def batch_match_reinforce(
        self, clause_mask: np.ndarray, x_mask: np.ndarray, erosion_rate: float, rng
    ) -> None:
        """Type-I update for clauses that matched the row: stored literals
        present in the row are rewarded outright (boosting true positives),
        stored literals absent from it are penalized independently with the
        erosion rate, and literals dropping below t are removed."""
        rows = np.flatnonzero(clause_mask)
        if rows.size == 0:
            return
        valid = self._pos[None, :] < self.sizes[rows, None]
        present = x_mask[self.literals[rows]]
        up = valid & present
        down = (
            valid
            & ~present
            & (rng.random((rows.size, self.max_clause_size)) < erosion_rate)
        )
        sts = np.minimum(self.states[rows] + up, 2 * self.state_count) - down
        if down.any():
            keep = valid & (sts >= self.lower_threshold)
            self._compact(rows, keep, sts)
        else:
            self.states[rows] = sts

    def batch_reward_excluded_absent(self, clause_mask: np.ndarray, x_mask: np.ndarray) -> None:
        """Push stored-but-excluded literals absent from the row toward Include."""
        rows = np.flatnonzero(clause_mask)
        if rows.size == 0:
            return
        sts = self.states[rows]
        valid = self._pos[None, :] < self.sizes[rows, None]
        bump = valid & (sts <= self.state_count) & ~x_mask[self.literals[rows]]
        self.states[rows] = sts + bump

    def batch_penalize_stored(self, clause_mask: np.ndarray, rate: float, rng) -> None:
        """Penalize each stored literal of each selected clause independently
        with the given probability; literals falling below t are removed."""
        rows = np.flatnonzero(clause_mask)
        if rows.size == 0:
            return
        valid = self._pos[None, :] < self.sizes[rows, None]
        hit = valid & (rng.random((rows.size, self.max_clause_size)) < rate)
        if not hit.any():
            return
        sts = self.states[rows] - hit
        keep = valid & (sts >= self.lower_threshold)
        self._compact(rows, keep, sts)

    def _compact(self, rows: np.ndarray, keep: np.ndarray, new_states: np.ndarray) -> None:
        # Stable partition pushes removed slots to the tail while preserving
        # ascending order among survivors.
        order = np.argsort(~keep, axis=1, kind="stable")
        lits = np.take_along_axis(self.literals[rows], order, axis=1)
        sts = np.take_along_axis(new_states, order, axis=1)
        new_sizes = keep.sum(axis=1).astype(INDEX_DTYPE)
        tail = self._pos[None, :] >= new_sizes[:, None]
        lits[tail] = self._pad
        sts[tail] = 0
        self.literals[rows] = lits
        self.states[rows] = sts
        self.sizes[rows] = new_sizes

    # -- diagnostics ----------------------------------------------------------

    def stored_literal_count(self) -> int:
        return int(self.sizes.sum())

    def mean_clause_size(self) -> float:
        return float(self.sizes.mean())

    def copy(self) -> "ClauseBank":
        dup = ClauseBank(
            self.clause_count,
            self.state_count,
            self.lower_threshold,
            self.max_clause_size,
            self.feature_count,
        )
        dup.literals = self.literals.copy()
        dup.states = self.states.copy()
        dup.sizes = self.sizes.copy()
        return dup

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClauseBank):
            return NotImplemented
        return (
            self.clause_count == other.clause_count
            and self.state_count == other.state_count
            and self.lower_threshold == other.lower_threshold
            and self.max_clause_size == other.max_clause_size
            and self.feature_count == other.feature_count
            and np.array_equal(self.sizes, other.sizes)
            and np.array_equal(self.literals, other.literals)
            and np.array_equal(self.states, other.states)
        )

    def check_invariants(self) -> None:
        """Raise InvariantError unless every structural invariant holds."""
        if self.sizes.min() < 0 or self.sizes.max() > self.max_clause_size:
            raise InvariantError("clause size outside [0, p]")
        valid = self.valid_mask()
        sts = self.states
        if np.any(valid & ((sts < self.lower_threshold) | (sts > 2 * self.state_count))):
            raise InvariantError("stored state outside spectrum [t, 2N]")
        if np.any(~valid & (sts != 0)):
            raise InvariantError("padding slot carries a state")
        lits = self.literals
        if np.any(valid & ((lits < 0) | (lits >= self.feature_count))):
            raise InvariantError("stored literal index out of range")
        if np.any(~valid & (lits != self._pad)):
            raise InvariantError("padding slot carries a literal")
        diffs = np.diff(lits.astype(np.int64), axis=1)
        if np.any((valid[:, 1:]) & (diffs <= 0)):
            raise InvariantError("literal lists must be strictly increasing")


def new_bank(
    clause_count: int,
    state_count: int,
    lower_threshold: int,
    max_clause_size: int,
    feature_count: int,
) -> ClauseBank:
    """All-empty bank; clauses acquire literals only through feedback."""
    return ClauseBank(clause_count, state_count, lower_threshold, max_clause_size, feature_count)
