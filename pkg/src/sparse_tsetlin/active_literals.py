"""Per-class bounded records of candidate literals.

The record is the gatekeeper between data and clause memory: clause-matching
feedback submits the features it observes, and discrimination feedback draws
literals back out to insert into wrongly-matching clauses.  Each class owns
an independent list of at most `capacity` distinct non-negated feature
indices.  In static mode a full list never changes again; in dynamic mode a
new submission evicts a uniformly random slot, keeping a steady stream of
fresh literals flowing through the record.
"""

from __future__ import annotations

import numpy as np

from .data import INDEX_DTYPE
from .errors import ConfigError, InvariantError

MODES = ("static", "dynamic")


class ActiveLiteralRecord:
    def __init__(self, class_count: int, capacity: int, feature_count: int, mode: str = "dynamic"):
        if class_count < 1:
            raise ConfigError(f"class_count must be >= 1, got {class_count}")
        if capacity < 1:
            raise ConfigError(f"capacity must be >= 1, got {capacity}")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        self.class_count = class_count
        self.capacity = capacity
        self.feature_count = feature_count
        self.mode = mode
        self.entries = np.full((class_count, capacity), -1, dtype=INDEX_DTYPE)
        self.counts = np.zeros(class_count, dtype=INDEX_DTYPE)

    def class_list(self, cls: int) -> np.ndarray:
        return self.entries[cls, : self.counts[cls]].copy()

    def submit(self, cls: int, feature: int, rng: np.random.Generator) -> bool:
        """Offer a literal to the class record.

        Duplicates are rejected.  A non-full list appends.  A full list
        rejects in static mode and replaces a uniformly random slot in
        dynamic mode.
        """
        count = int(self.counts[cls])
        if (self.entries[cls, :count] == feature).any():
            return False
        if count < self.capacity:
            self.entries[cls, count] = feature
            self.counts[cls] = count + 1
            return True
        if self.mode == "static":
            return False
        self.entries[cls, int(rng.integers(self.capacity))] = feature
        return True

    def submit_row(self, cls: int, row: np.ndarray, rng: np.random.Generator) -> None:
        """Submit each feature of a row in ascending order."""
        for feature in row:
            self.submit(cls, int(feature), rng)

    def eligible_absent(self, cls: int, x_mask: np.ndarray) -> np.ndarray:
        """Recorded literals for the class that are absent from the row."""
        listed = self.entries[cls, : self.counts[cls]]
        return listed[~x_mask[listed]]

    def sample_absent(
        self, cls: int, row: np.ndarray, k: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Up to k distinct recorded literals absent from the row, uniformly
        without replacement.  Only absent literals can invalidate a match."""
        listed = self.entries[cls, : self.counts[cls]]
        if listed.size == 0 or k <= 0:
            return np.empty(0, dtype=INDEX_DTYPE)
        eligible = listed[~np.isin(listed, row)]
        if eligible.size == 0:
            return np.empty(0, dtype=INDEX_DTYPE)
        take = min(k, eligible.size)
        return rng.choice(eligible, size=take, replace=False).astype(INDEX_DTYPE)

    def occupancy(self) -> np.ndarray:
        return self.counts.copy()

    def copy(self) -> "ActiveLiteralRecord":
        dup = ActiveLiteralRecord(self.class_count, self.capacity, self.feature_count, self.mode)
        dup.entries = self.entries.copy()
        dup.counts = self.counts.copy()
        return dup

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActiveLiteralRecord):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and self.capacity == other.capacity
            and self.feature_count == other.feature_count
            and self.mode == other.mode
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.entries, other.entries)
        )

    def check_invariants(self) -> None:
        if self.counts.min() < 0 or self.counts.max() > self.capacity:
            raise InvariantError("record occupancy outside [0, capacity]")
        for cls in range(self.class_count):
            listed = self.entries[cls, : self.counts[cls]]
            if listed.size and (listed.min() < 0 or listed.max() >= self.feature_count):
                raise InvariantError(f"class {cls}: recorded feature out of range")
            if np.unique(listed).size != listed.size:
                raise InvariantError(f"class {cls}: duplicate feature recorded")
