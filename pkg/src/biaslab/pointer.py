"""Trainable copy module: bias distribution, gate, and score interpolation.

From a decoder-state vector and the currently valid bias tokens it produces
a distribution over those tokens (scaled dot-product attention from the
projected state to token embeddings) and a gate probability (sigmoid over
the state and the attention context).  ``interpolate`` mixes the result
with the frozen base model's distribution, either over the whole
vocabulary or only over the valid set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Untrained biasing must be inert: at sigmoid(-9) ~ 1.2e-4 the gate passes
# essentially nothing through, and every gradient path of the recognizer's
# own cross-entropy (which scales with the gate) starts correspondingly dead.
GATE_BIAS_INIT = -9.0


def sigmoid(x: float) -> float:
    if x >= 0.0:
        return float(1.0 / (1.0 + np.exp(-x)))
    e = np.exp(x)
    return float(e / (1.0 + e))


@dataclass
class PgParams:
    """Copy-module parameters; float64 throughout.

    token_embed: (V, d) token embeddings, shared as attention keys/values.
    w_query:     (d, d_h) projection of the decoder state to query space.
    w_gate:      (d_h + d,) gate weights over [state ; context].
    b_gate:      gate bias scalar.
    """

    token_embed: np.ndarray
    w_query: np.ndarray
    w_gate: np.ndarray
    b_gate: float
    seed: int = 0

    @property
    def vocab_size(self) -> int:
        return self.token_embed.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.token_embed.shape[1]

    @property
    def state_dim(self) -> int:
        return self.w_query.shape[1]

    def copy(self) -> "PgParams":
        return PgParams(
            self.token_embed.copy(),
            self.w_query.copy(),
            self.w_gate.copy(),
            float(self.b_gate),
            self.seed,
        )


@dataclass(frozen=True)
class StepOutput:
    """Per-step module output.

    p_ptr is a full-vocabulary probability vector that is zero outside the
    valid set and sums to one when the set is nonempty; p_gen is the gate
    probability, forced to 0 when the valid set is empty.
    """

    p_ptr: np.ndarray
    p_gen: float
    valid: tuple[int, ...]
    context: np.ndarray


def init_params(seed: int, vocab_size: int, embed_dim: int, state_dim: int) -> PgParams:
    """Seeded uniform init on [-s, s] with s = 1/sqrt(fan-in); gate bias -2."""
    if min(vocab_size, embed_dim, state_dim) <= 0:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    s_embed = 1.0 / np.sqrt(embed_dim)
    s_query = 1.0 / np.sqrt(state_dim)
    s_gate = 1.0 / np.sqrt(state_dim + embed_dim)
    token_embed = rng.uniform(-s_embed, s_embed, size=(vocab_size, embed_dim))
    w_query = rng.uniform(-s_query, s_query, size=(embed_dim, state_dim))
    w_gate = rng.uniform(-s_gate, s_gate, size=state_dim + embed_dim)
    return PgParams(token_embed, w_query, w_gate, GATE_BIAS_INIT, seed)


def forward_step(params: PgParams, h_dec: np.ndarray, valid: list[int]) -> StepOutput:
    """One decoding step: bias distribution over ``valid`` plus the gate."""
    h_dec = np.asarray(h_dec, dtype=np.float64)
    if not np.all(np.isfinite(h_dec)):
        raise ValueError("non-finite decoder state")
    dim = params.embed_dim
    p_ptr = np.zeros(params.vocab_size)
    if not valid:
        return StepOutput(p_ptr, 0.0, (), np.zeros(dim))
    members = np.asarray(sorted(valid), dtype=np.intp)
    query = params.w_query @ h_dec
    logits = params.token_embed[members] @ query / np.sqrt(dim)
    logits -= logits.max()
    weights = np.exp(logits)
    weights /= weights.sum()
    p_ptr[members] = weights
    context = weights @ params.token_embed[members]
    pre = params.w_gate @ np.concatenate([h_dec, context]) + params.b_gate
    p_gen = sigmoid(float(pre))
    return StepOutput(p_ptr, p_gen, tuple(int(m) for m in members), context)


def interpolate(p_mdl: np.ndarray, step: StepOutput, mode: str) -> np.ndarray:
    """Combine base-model and bias distributions into per-token scores.

    ``scaled`` mixes convexly over every token and stays a distribution.
    ``unscaled`` mixes only inside the valid set and leaves tokens outside
    it at their base-model probability; the result is an unnormalized score
    vector meant for argmax decoding only.
    """
    p_mdl = np.asarray(p_mdl, dtype=np.float64)
    if p_mdl.shape != step.p_ptr.shape:
        raise ValueError(
            f"length mismatch: base model {p_mdl.shape[0]} vs module {step.p_ptr.shape[0]}"
        )
    if abs(p_mdl.sum() - 1.0) > 1e-9:
        raise ValueError("base-model row does not sum to 1")
    if mode == "scaled":
        return p_mdl * (1.0 - step.p_gen) + step.p_ptr * step.p_gen
    if mode == "unscaled":
        scores = p_mdl.copy()
        members = list(step.valid)
        scores[members] = p_mdl[members] * (1.0 - step.p_gen) + step.p_ptr[members] * step.p_gen
        return scores
    raise ValueError(f"unknown interpolation mode {mode!r}")


CHECKPOINT_VERSION = 1
_MATRIX_ORDER = ("token_embed", "w_query", "w_gate", "b_gate")


def save_params(params: PgParams, path: str) -> None:
    """Write a checkpoint: one JSON header line, then row-major float64 LE."""
    header = {
        "version": CHECKPOINT_VERSION,
        "seed": params.seed,
        "shapes": {
            "token_embed": list(params.token_embed.shape),
            "w_query": list(params.w_query.shape),
            "w_gate": [params.w_gate.shape[0]],
            "b_gate": [1],
        },
        "order": list(_MATRIX_ORDER),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for name in _MATRIX_ORDER:
            arr = np.atleast_1d(np.asarray(getattr(params, name), dtype=np.float64))
            fh.write(arr.astype("<f8").tobytes(order="C"))


def load_params(path: str) -> PgParams:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version in {path}")
        shapes = header["shapes"]
        arrays = {}
        for name in header["order"]:
            shape = tuple(shapes[name])
            count = int(np.prod(shape))
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"truncated checkpoint {path}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return PgParams(
        arrays["token_embed"],
        arrays["w_query"],
        arrays["w_gate"],
        float(arrays["b_gate"][0]),
        int(header["seed"]),
    )
