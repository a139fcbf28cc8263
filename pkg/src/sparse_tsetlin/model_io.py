"""Model persistence, memory accounting, and rule export.

Container layout (version 1, all integers little-endian fixed width):

    magic            4 bytes  b"STMB"
    version          u32
    feature_count    u32      } structural header
    class_count      u32
    clause_count     u32
    state_count      u32
    lower_threshold  u32
    max_clause_size  u32
    al_capacity      u32
    al_mode          u8       0 = static, 1 = dynamic
    negative_sampler u8       0 = uniform, 1 = focused
    reserved         u16      must be 0
    margin           i32
    specificity      f64
    insert_state     i32
    k_intro          i32
    epochs           i32
    seed             i64
    clause sizes     clause_count x u32
    clause literals  sum(sizes) x u32   (concatenated, per clause ascending)
    clause states    sum(sizes) x u32
    weights          class_count*clause_count x i32 (row-major)
    al counts        class_count x u32
    al entries       sum(counts) x u32
    has_vocab        u8
    [vocab]          u32 max_size, u32 min_df, u64 len, UTF-8 JSON token list
    meta             u64 len, UTF-8 JSON object (run provenance; may be {})

Only occupied clause slots are serialized, so the file size tracks stored
literals, never the feature count.  Loading rebuilds the model and re-checks
every structural invariant; a short read or an unknown version is refused.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .active_literals import MODES
from .data import INDEX_DTYPE, Vocabulary
from .engine import NEGATIVE_SAMPLERS, StmModel, TrainConfig
from .errors import ModelFormatError, StmError

MAGIC = b"STMB"
MODEL_FORMAT_VERSION = 1

# Accounting constants for model_memory_bytes; see the formula below.
LITERAL_ENTRY_BYTES = 8  # feature index + automaton state, 4 bytes each
WEIGHT_BYTES = 4
AL_ENTRY_BYTES = 4
FIXED_OVERHEAD_BYTES = 256

_HEADER = struct.Struct("<7I2BHi d 3i q")


def model_memory_bytes(model: StmModel) -> int:
    """Structural memory of the model under the documented accounting:

        FIXED_OVERHEAD_BYTES
        + stored_literals * LITERAL_ENTRY_BYTES
        + class_count * clause_count * WEIGHT_BYTES
        + recorded_active_literals * AL_ENTRY_BYTES

    Every term is bounded by clause/record capacities, so the total never
    depends on the feature count.
    """
    return (
        FIXED_OVERHEAD_BYTES
        + model.bank.stored_literal_count() * LITERAL_ENTRY_BYTES
        + model.class_count * model.config.clause_count * WEIGHT_BYTES
        + int(model.al.occupancy().sum()) * AL_ENTRY_BYTES
    )


def model_memory_bound(
    clause_count: int, max_clause_size: int, class_count: int, al_capacity: int
) -> int:
    """Worst-case value of model_memory_bytes for the given capacities."""
    return (
        FIXED_OVERHEAD_BYTES
        + clause_count * max_clause_size * LITERAL_ENTRY_BYTES
        + class_count * clause_count * WEIGHT_BYTES
        + al_capacity * class_count * AL_ENTRY_BYTES
    )


def _write_array(fh, array: np.ndarray, dtype: str) -> None:
    fh.write(np.ascontiguousarray(array, dtype=dtype).tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ModelFormatError(f"corrupt model: truncated while reading {what}")
    return data


def _read_array(fh, count: int, dtype: str, what: str) -> np.ndarray:
    raw = _read_exact(fh, count * np.dtype(dtype).itemsize, what)
    return np.frombuffer(raw, dtype=dtype).copy()


def save_model(model: StmModel, path) -> None:
    cfg = model.config
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", MODEL_FORMAT_VERSION))
        fh.write(
            _HEADER.pack(
                model.feature_count,
                model.class_count,
                cfg.clause_count,
                cfg.state_count,
                cfg.lower_threshold,
                cfg.max_clause_size,
                cfg.al_capacity,
                MODES.index(cfg.al_mode),
                NEGATIVE_SAMPLERS.index(cfg.negative_sampler),
                0,
                cfg.margin,
                cfg.specificity,
                cfg.insert_state,
                cfg.k_intro,
                cfg.epochs,
                cfg.seed,
            )
        )
        bank = model.bank
        _write_array(fh, bank.sizes, "<u4")
        lits = np.concatenate(
            [bank.literals[j, : bank.sizes[j]] for j in range(bank.clause_count)]
        ) if bank.stored_literal_count() else np.empty(0, dtype=INDEX_DTYPE)
        sts = np.concatenate(
            [bank.states[j, : bank.sizes[j]] for j in range(bank.clause_count)]
        ) if bank.stored_literal_count() else np.empty(0, dtype=INDEX_DTYPE)
        _write_array(fh, lits, "<u4")
        _write_array(fh, sts, "<u4")
        _write_array(fh, model.weights, "<i4")
        _write_array(fh, model.al.counts, "<u4")
        al_entries = np.concatenate(
            [model.al.entries[c, : model.al.counts[c]] for c in range(model.class_count)]
        ) if model.al.occupancy().sum() else np.empty(0, dtype=INDEX_DTYPE)
        _write_array(fh, al_entries, "<u4")
        if model.vocabulary is not None:
            fh.write(struct.pack("<B", 1))
            blob = json.dumps(model.vocabulary.index_to_token, ensure_ascii=False).encode("utf-8")
            fh.write(
                struct.pack(
                    "<IIQ", model.vocabulary.max_size, model.vocabulary.min_df, len(blob)
                )
            )
            fh.write(blob)
        else:
            fh.write(struct.pack("<B", 0))
        meta_blob = json.dumps(model.meta, ensure_ascii=False, sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<Q", len(meta_blob)))
        fh.write(meta_blob)


def load_model(path) -> StmModel:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise ModelFormatError(f"corrupt model: bad magic {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != MODEL_FORMAT_VERSION:
            raise ModelFormatError(
                f"unsupported model version {version}; this build reads version "
                f"{MODEL_FORMAT_VERSION}"
            )
        fields = _HEADER.unpack(_read_exact(fh, _HEADER.size, "header"))
        (
            feature_count,
            class_count,
            clause_count,
            state_count,
            lower_threshold,
            max_clause_size,
            al_capacity,
            al_mode_code,
            sampler_code,
            reserved,
            margin,
            specificity,
            insert_state,
            k_intro,
            epochs,
            seed,
        ) = fields
        if reserved != 0:
            raise ModelFormatError("corrupt model: reserved header bits set")
        if al_mode_code >= len(MODES) or sampler_code >= len(NEGATIVE_SAMPLERS):
            raise ModelFormatError("corrupt model: unknown mode code")
        try:
            config = TrainConfig(
                clause_count=clause_count,
                al_capacity=al_capacity,
                lower_threshold=lower_threshold,
                max_clause_size=max_clause_size,
                state_count=state_count,
                margin=margin,
                specificity=specificity,
                al_mode=MODES[al_mode_code],
                negative_sampler=NEGATIVE_SAMPLERS[sampler_code],
                insert_state=insert_state,
                k_intro=k_intro,
                epochs=epochs,
                seed=seed,
            )
        except StmError as exc:
            raise ModelFormatError(f"corrupt model: invalid configuration ({exc})") from exc

        sizes = _read_array(fh, clause_count, "<u4", "clause sizes")
        if sizes.max(initial=0) > max_clause_size:
            raise ModelFormatError("corrupt model: clause size exceeds capacity")
        total = int(sizes.sum())
        lits = _read_array(fh, total, "<u4", "clause literals")
        sts = _read_array(fh, total, "<u4", "clause states")
        weights = _read_array(fh, class_count * clause_count, "<i4", "weights")
        al_counts = _read_array(fh, class_count, "<u4", "record counts")
        if al_counts.max(initial=0) > al_capacity:
            raise ModelFormatError("corrupt model: record occupancy exceeds capacity")
        al_entries = _read_array(fh, int(al_counts.sum()), "<u4", "record entries")
        (has_vocab,) = struct.unpack("<B", _read_exact(fh, 1, "vocabulary flag"))
        vocabulary = None
        if has_vocab:
            vmax, vmin_df, blob_len = struct.unpack(
                "<IIQ", _read_exact(fh, 16, "vocabulary header")
            )
            blob = _read_exact(fh, blob_len, "vocabulary tokens")
            try:
                tokens = json.loads(blob.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ModelFormatError("corrupt model: undecodable vocabulary") from exc
            vocabulary = Vocabulary(tokens, max_size=vmax, min_df=vmin_df)
        (meta_len,) = struct.unpack("<Q", _read_exact(fh, 8, "meta length"))
        try:
            meta = json.loads(_read_exact(fh, meta_len, "meta").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError("corrupt model: undecodable meta") from exc
        trailing = fh.read(1)
        if trailing:
            raise ModelFormatError("corrupt model: trailing bytes after meta")

    model = StmModel(config, int(feature_count), int(class_count), vocabulary)
    offset = 0
    for j in range(clause_count):
        size = int(sizes[j])
        model.bank.literals[j, :size] = lits[offset : offset + size]
        model.bank.states[j, :size] = sts[offset : offset + size]
        offset += size
    model.bank.sizes = sizes.astype(INDEX_DTYPE)
    model.weights = weights.astype(np.int32).reshape(class_count, clause_count)
    offset = 0
    for c in range(class_count):
        count = int(al_counts[c])
        model.al.entries[c, :count] = al_entries[offset : offset + count]
        offset += count
    model.al.counts = al_counts.astype(INDEX_DTYPE)
    model.meta = meta
    try:
        model.bank.check_invariants()
        model.al.check_invariants()
    except StmError as exc:
        raise ModelFormatError(f"corrupt model: {exc}") from exc
    return model


@dataclass
class Rule:
    """One clause rendered as a conjunctive rule with its per-class weights."""

    clause: int
    literals: list[str]
    weights: list[int]

    def format(self) -> str:
        best = int(np.argmax(np.abs(self.weights)))
        condition = " AND ".join(self.literals)
        return f"IF {condition} THEN class {best} (w={self.weights[best]:+d})"


def export_rules(model: StmModel, top_k: int) -> list[Rule]:
    """The top_k clauses by strongest absolute weight, as readable rules.

    Clauses with no included literals assert nothing and are skipped.
    Feature indices map through the vocabulary when one is attached.
    """
    vocab = model.vocabulary
    rules = []
    for j in range(model.bank.clause_count):
        included = model.bank.included_literals(j)
        if included.size == 0:
            continue
        names = [
            vocab.index_to_token[int(f)] if vocab is not None else f"f{int(f)}"
            for f in included
        ]
        rules.append(Rule(j, names, [int(w) for w in model.weights[:, j]]))
    rules.sort(key=lambda r: (-max(abs(w) for w in r.weights), r.clause))
    return rules[: max(0, top_k)]
