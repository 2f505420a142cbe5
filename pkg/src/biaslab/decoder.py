"""Greedy token-level decoding with optional trie-constrained biasing.

With biasing off the hypothesis is the base model's per-step argmax.  With
biasing on, each step forwards the copy module over the currently valid
bias set, interpolates scores in the requested mode, emits the argmax
token, and advances the trie cursor with it.  The per-step gate trace is
kept for acceptance-rate analysis.

The simulator provides teacher-forced model rows, so free-running decoding
consumes them by step index; hypotheses therefore stay position-aligned
with the reference (a documented desk-scale simplification).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .biastrie import PrefixTree, TrieCursor, advance_cursor, valid_set
from .pointer import PgParams, forward_step, interpolate
from .simulator import SimUtterance
from .tokenizer import Vocab, detokenize

DECODE_MODES = ("none", "scaled", "unscaled")


@dataclass(frozen=True)
class GateTraceEntry:
    step: int
    p_gen: float
    valid_nonempty: bool
    emitted: int


def greedy_decode(
    utt: SimUtterance,
    vocab: Vocab,
    params: PgParams | None = None,
    tree: PrefixTree | None = None,
    mode: str = "none",
) -> tuple[list[str], list[GateTraceEntry]]:
    """Decode one utterance; returns hypothesis words and the gate trace.

    Ties in the argmax break toward the lowest token id.
    """
    if mode not in DECODE_MODES:
        raise ValueError(f"unknown decode mode {mode!r}")
    if mode != "none" and (params is None or tree is None):
        raise ValueError("biased decoding needs module parameters and a bias trie")
    emitted_ids: list[int] = []
    trace: list[GateTraceEntry] = []
    cursor = TrieCursor()
    for i in range(utt.ref.size):
        row = utt.p_mdl_seq[i]
        if mode == "none":
            emitted = int(np.argmax(row))
            trace.append(GateTraceEntry(i, 0.0, False, emitted))
        else:
            members = valid_set(tree, cursor)
            step = forward_step(params, utt.h_dec_seq[i], members)
            scores = interpolate(row, step, mode)
            emitted = int(np.argmax(scores))
            trace.append(GateTraceEntry(i, step.p_gen, bool(members), emitted))
            cursor = advance_cursor(tree, cursor, emitted)
        if emitted == vocab.eos_id:
            break
        emitted_ids.append(emitted)
    return detokenize(vocab, emitted_ids), trace


def write_hypotheses(path: str, results: list[tuple[str, list[str], list[GateTraceEntry]]]) -> None:
    """JSON-lines decode output: id, hypothesis words, and gate trace."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id, hyp_words, trace in results:
            record = {
                "id": utt_id,
                "hyp_words": hyp_words,
                "trace": [[e.step, e.p_gen, e.valid_nonempty, e.emitted] for e in trace],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_hypotheses(path: str) -> dict[str, tuple[list[str], list[GateTraceEntry]]]:
    out: dict[str, tuple[list[str], list[GateTraceEntry]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            trace = [
                GateTraceEntry(int(s), float(p), bool(v), int(e))
                for s, p, v, e in record["trace"]
            ]
            out[record["id"]] = (list(record["hyp_words"]), trace)
    return out
