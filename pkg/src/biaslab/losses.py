"""Training objectives for the copy module and their analytic gradients.

Two bias-specific losses train the module directly: a weighted binary
cross-entropy that teaches the gate to fire exactly on bias-word positions,
and a cross-entropy on the bias distribution masked to those positions.
The recognizer's own cross-entropy (applied to the scaled interpolation
output) is kept as the baseline objective.  A central finite-difference
harness verifies every gradient path.

Position indexing is 0-based.  Per-utterance losses and gradients are plain
sums over positions; ``grad`` sums them over the batch (so duplicating an
utterance doubles the gradient) and leaves any batch-size normalization to
the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biastrie import PrefixTree, TrieCursor, advance_cursor, build_trie, valid_set
from .pointer import PgParams, StepOutput, forward_step
from .tokenizer import TokenizedUtterance, Vocab

LOG_FLOOR = 1e-12

TWO_LOSS = "two_loss"
ASR = "asr"
MODES = (TWO_LOSS, ASR)


class DivergenceError(ValueError):
    """A gradient or loss stopped being finite during optimization."""


@dataclass(frozen=True)
class BiasMask:
    """Token positions lying inside reference words that are on the bias list."""

    positions: frozenset[int]
    size: int


@dataclass
class LossReport:
    """Loss values summed over a batch; ``total`` follows the training mode."""

    l_asr: float
    l_gen: float
    l_ptr: float
    total: float
    n_clamped: int = 0
    per_position: list | None = None


@dataclass
class ParamGrads:
    """Gradient of a loss with respect to every copy-module parameter."""

    token_embed: np.ndarray
    w_query: np.ndarray
    w_gate: np.ndarray
    b_gate: float = 0.0

    @classmethod
    def zeros_like(cls, params: PgParams) -> "ParamGrads":
        return cls(
            np.zeros_like(params.token_embed),
            np.zeros_like(params.w_query),
            np.zeros_like(params.w_gate),
            0.0,
        )

    def add_(self, other: "ParamGrads") -> None:
        self.token_embed += other.token_embed
        self.w_query += other.w_query
        self.w_gate += other.w_gate
        self.b_gate += other.b_gate

    def scaled(self, factor: float) -> "ParamGrads":
        return ParamGrads(
            self.token_embed * factor,
            self.w_query * factor,
            self.w_gate * factor,
            self.b_gate * factor,
        )

    def l2_norm(self) -> float:
        return float(
            np.sqrt(
                np.sum(self.token_embed**2)
                + np.sum(self.w_query**2)
                + np.sum(self.w_gate**2)
                + self.b_gate**2
            )
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.token_embed))
            and np.all(np.isfinite(self.w_query))
            and np.all(np.isfinite(self.w_gate))
            and np.isfinite(self.b_gate)
        )


@dataclass
class BiasExample:
    """One utterance prepared for teacher-forced training.

    ``valid_sets[i]`` is the bias-continuation set at position i when the
    reference prefix has been consumed; at every masked position the gold
    token is guaranteed to be a member.
    """

    utt_id: str
    tokens: tuple[int, ...]
    h_seq: np.ndarray
    p_mdl_seq: np.ndarray
    valid_sets: tuple[tuple[int, ...], ...]
    mask: BiasMask
    tree: PrefixTree


def bias_positions(ref: TokenizedUtterance, bias_words: set[str]) -> BiasMask:
    """All token positions of reference words that are on the bias list."""
    positions: set[int] = set()
    for word_idx, start, end in ref.word_spans:
        if ref.words[word_idx] in bias_words:
            positions.update(range(start, end))
    return BiasMask(frozenset(positions), ref.size)


def teacher_valid_sets(tree: PrefixTree, tokens: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Valid bias sets along the reference, advancing the cursor with gold tokens."""
    cursor = TrieCursor()
    out = []
    for tok in tokens:
        out.append(tuple(valid_set(tree, cursor)))
        cursor = advance_cursor(tree, cursor, tok)
    return tuple(out)


def prepare_example(
    vocab: Vocab,
    utt_id: str,
    ref: TokenizedUtterance,
    h_seq: np.ndarray,
    p_mdl_seq: np.ndarray,
    bias_words: list[str],
) -> BiasExample:
    """Bundle an utterance with its bias trie, mask, and teacher-forced sets."""
    h_seq = np.asarray(h_seq, dtype=np.float64)
    p_mdl_seq = np.asarray(p_mdl_seq, dtype=np.float64)
    if h_seq.shape[0] != ref.size or p_mdl_seq.shape[0] != ref.size:
        raise ValueError(f"utterance {utt_id}: sequence length mismatch")
    tree = build_trie(vocab, list(bias_words))
    mask = bias_positions(ref, set(w.lower() for w in bias_words))
    return BiasExample(
        utt_id, ref.tokens, h_seq, p_mdl_seq, teacher_valid_sets(tree, ref.tokens), mask, tree
    )


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return float(e / (1.0 + e))


def _clamped_log(value: float) -> tuple[float, bool]:
    if value < LOG_FLOOR:
        return float(np.log(LOG_FLOOR)), True
    return float(np.log(value)), False


def loss_asr(p_seq: np.ndarray, ref: TokenizedUtterance) -> float:
    """Negative log-likelihood of the reference under per-step distributions."""
    p_seq = np.asarray(p_seq, dtype=np.float64)
    if p_seq.shape[0] != ref.size:
        raise ValueError("probability rows do not match the reference length")
    if np.any(np.abs(p_seq.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("probability rows must sum to 1")
    total = 0.0
    for i, tok in enumerate(ref.tokens):
        log_p, _ = _clamped_log(float(p_seq[i, tok]))
        total -= log_p
    return total


def loss_gen(p_gen_seq: np.ndarray, mask: BiasMask, alpha: float) -> float:
    """Weighted binary cross-entropy of the gate against mask membership.

    Positions on the mask are weighted by ``alpha`` and positions off it by
    ``1 - alpha``; an alpha above 0.5 favors the minority (bias) class.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    p_gen_seq = np.asarray(p_gen_seq, dtype=np.float64)
    if p_gen_seq.shape[0] != mask.size:
        raise ValueError("gate sequence does not match the mask length")
    total = 0.0
    for i in range(mask.size):
        if i in mask.positions:
            log_p, _ = _clamped_log(float(p_gen_seq[i]))
            total -= alpha * log_p
        else:
            log_q, _ = _clamped_log(1.0 - float(p_gen_seq[i]))
            total -= (1.0 - alpha) * log_q
    return float(total)


def loss_ptr(step_outputs: list[StepOutput], ref: TokenizedUtterance, mask: BiasMask) -> float:
    """Cross-entropy of the bias distribution at masked positions only."""
    total = 0.0
    for i in sorted(mask.positions):
        gold = ref.tokens[i]
        step = step_outputs[i]
        if gold not in step.valid:
            raise ValueError(f"mask/trie inconsistency at position {i}")
        log_p, _ = _clamped_log(float(step.p_ptr[gold]))
        total -= log_p
    return total


def _utterance_pass(
    params: PgParams,
    ex: BiasExample,
    mode: str,
    alpha: float,
    want_grad: bool,
) -> tuple[float, float, float, int, np.ndarray, np.ndarray, ParamGrads | None]:
    """Teacher-forced forward (and optional backward) over one utterance.

    Returns (l_gen, l_ptr, l_asr, n_clamped, gates, gate_valid, grads).
    ``gates`` holds the per-position gate probability (0 where the valid set
    is empty) and ``gate_valid`` marks positions with a nonempty valid set.
    """
    dim = params.embed_dim
    state_dim = params.state_dim
    sqrt_d = np.sqrt(dim)
    w_state = params.w_gate[:state_dim]
    w_ctx = params.w_gate[state_dim:]

    seq_len = len(ex.tokens)
    gates = np.zeros(seq_len)
    gate_valid = np.zeros(seq_len, dtype=bool)
    l_gen = l_ptr = l_asr = 0.0
    n_clamped = 0
    grads = ParamGrads.zeros_like(params) if want_grad else None

    for i in range(seq_len):
        gold = ex.tokens[i]
        in_k = i in ex.mask.positions
        members_t = ex.valid_sets[i]
        if not members_t:
            if in_k:
                raise ValueError(f"mask/trie inconsistency at position {i}")
            # gate forced shut: no loss terms beyond the base-model NLL
            log_p, clamped = _clamped_log(float(ex.p_mdl_seq[i, gold]))
            l_asr -= log_p
            n_clamped += clamped
            continue

        members = np.asarray(members_t, dtype=np.intp)
        h = ex.h_seq[i]
        emb = params.token_embed[members]
        query = params.w_query @ h
        logits = emb @ query / sqrt_d
        logits -= logits.max()
        p = np.exp(logits)
        p /= p.sum()
        ctx = p @ emb
        pre = w_state @ h + w_ctx @ ctx + params.b_gate
        gate = _sigmoid(float(pre))
        gates[i] = gate
        gate_valid[i] = True

        pos = int(np.searchsorted(members, gold))
        gold_pos = pos if pos < len(members) and members[pos] == gold else None

        clamped_gate = clamped_ptr = False
        if in_k:
            if gold_pos is None:
                raise ValueError(f"mask/trie inconsistency at position {i}")
            log_g, clamped_gate = _clamped_log(gate)
            l_gen -= alpha * log_g
            log_p_gold, clamped_ptr = _clamped_log(float(p[gold_pos]))
            l_ptr -= log_p_gold
            n_clamped += clamped_gate + clamped_ptr
        else:
            log_one_minus, clamped_gate = _clamped_log(1.0 - gate)
            l_gen -= (1.0 - alpha) * log_one_minus
            n_clamped += clamped_gate

        p_mdl_gold = float(ex.p_mdl_seq[i, gold])
        ptr_gold = float(p[gold_pos]) if gold_pos is not None else 0.0
        p_final = p_mdl_gold * (1.0 - gate) + ptr_gold * gate
        log_final, clamped_asr = _clamped_log(p_final)
        l_asr -= log_final
        n_clamped += clamped_asr

        if not want_grad:
            continue

        # gradient seeds match the clamped loss: a floored log contributes 0
        if mode == TWO_LOSS:
            if in_k:
                d_pre = 0.0 if clamped_gate else -alpha * (1.0 - gate)
                d_z = np.zeros_like(p)
                if not clamped_ptr:
                    d_z = p.copy()
                    d_z[gold_pos] -= 1.0
            else:
                d_pre = 0.0 if clamped_gate else (1.0 - alpha) * gate
                d_z = np.zeros_like(p)
        else:
            d_z = np.zeros_like(p)
            if clamped_asr:
                d_pre = 0.0
            else:
                inv = -1.0 / p_final
                d_pre = inv * (ptr_gold - p_mdl_gold) * gate * (1.0 - gate)
                if gold_pos is not None:
                    d_z = inv * gate * ptr_gold * (-p)
                    d_z[gold_pos] += inv * gate * ptr_gold

        # context reaches the loss only through the gate pre-activation
        d_ctx = d_pre * w_ctx
        proj = emb @ d_ctx
        d_z = d_z + p * (proj - ctx @ d_ctx)

        d_query = (d_z @ emb) / sqrt_d
        grads.token_embed[members] += np.outer(d_z, query) / sqrt_d + np.outer(p, d_ctx)
        grads.w_query += np.outer(d_query, h)
        grads.w_gate[:state_dim] += d_pre * h
        grads.w_gate[state_dim:] += d_pre * ctx
        grads.b_gate += d_pre

    return l_gen, l_ptr, l_asr, n_clamped, gates, gate_valid, grads


def _mode_total(mode: str, l_gen: float, l_ptr: float, l_asr: float) -> float:
    if mode == TWO_LOSS:
        return l_gen + l_ptr
    if mode == ASR:
        return l_asr
    raise ValueError(f"unknown loss mode {mode!r}")


def evaluate(
    params: PgParams, batch: list[BiasExample], mode: str, alpha: float
) -> LossReport:
    """Losses summed over a batch, without gradients."""
    tg = tp = ta = 0.0
    clamped = 0
    for ex in batch:
        l_gen, l_ptr, l_asr, n_cl, _, _, _ = _utterance_pass(params, ex, mode, alpha, False)
        tg, tp, ta = tg + l_gen, tp + l_ptr, ta + l_asr
        clamped += n_cl
    return LossReport(ta, tg, tp, _mode_total(mode, tg, tp, ta), clamped)


def gate_rates(
    params: PgParams, batch: list[BiasExample], threshold: float = 0.5
) -> dict[str, float]:
    """Teacher-forced gate acceptance rates at the decision boundary.

    Only positions with a nonempty valid set count; the hit rate is over
    masked positions, the false-fire rate over unmasked ones.
    """
    tp = fn = fp = tn = 0
    gate_sum_on_mask = 0.0
    mask_positions = 0
    for ex in batch:
        _, _, _, _, gates, gate_valid, _ = _utterance_pass(params, ex, TWO_LOSS, 0.5, False)
        for i in range(len(ex.tokens)):
            if not gate_valid[i]:
                continue
            fired = gates[i] >= threshold
            if i in ex.mask.positions:
                mask_positions += 1
                gate_sum_on_mask += gates[i]
                tp += fired
                fn += not fired
            else:
                fp += fired
                tn += not fired
    tar = tp / (tp + fn) if tp + fn else 0.0
    far = fp / (fp + tn) if fp + tn else 0.0
    mean_gate = gate_sum_on_mask / mask_positions if mask_positions else 0.0
    return {
        "tar": tar,
        "far": far,
        "tp": tp,
        "fn": fn,
        "fp": fp,
        "tn": tn,
        "mean_gate_on_mask": mean_gate,
    }


def grad(
    params: PgParams, batch: list[BiasExample], mode: str, alpha: float
) -> tuple[ParamGrads, LossReport]:
    """Analytic gradient of the mode's objective, summed over the batch."""
    total = ParamGrads.zeros_like(params)
    tg = tp = ta = 0.0
    clamped = 0
    for ex in batch:
        l_gen, l_ptr, l_asr, n_cl, _, _, g = _utterance_pass(params, ex, mode, alpha, True)
        if not g.is_finite():
            raise DivergenceError(f"non-finite gradient on utterance {ex.utt_id}")
        total.add_(g)
        tg, tp, ta = tg + l_gen, tp + l_ptr, ta + l_asr
        clamped += n_cl
    report = LossReport(ta, tg, tp, _mode_total(mode, tg, tp, ta), clamped)
    return total, report


def _flatten(obj: PgParams | ParamGrads) -> np.ndarray:
    return np.concatenate(
        [
            obj.token_embed.ravel(),
            obj.w_query.ravel(),
            obj.w_gate.ravel(),
            [obj.b_gate],
        ]
    )


def _unflatten(template: PgParams, vec: np.ndarray) -> PgParams:
    sizes = [template.token_embed.size, template.w_query.size, template.w_gate.size, 1]
    parts = np.split(vec, np.cumsum(sizes)[:-1])
    return PgParams(
        parts[0].reshape(template.token_embed.shape),
        parts[1].reshape(template.w_query.shape),
        parts[2].reshape(template.w_gate.shape),
        float(parts[3][0]),
        template.seed,
    )


def fd_check(
    params: PgParams,
    batch: list[BiasExample],
    mode: str,
    alpha: float,
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    if not 1e-7 <= step <= 1e-3:
        raise ValueError(f"finite-difference step {step} outside [1e-7, 1e-3]")
    analytic, _ = grad(params, batch, mode, alpha)
    analytic_vec = _flatten(analytic)
    base = _flatten(params)

    def total_at(vec: np.ndarray) -> float:
        return evaluate(_unflatten(params, vec), batch, mode, alpha).total

    worst = 0.0
    for j in range(base.size):
        probe = base.copy()
        probe[j] = base[j] + step
        up = total_at(probe)
        probe[j] = base[j] - step
        down = total_at(probe)
        numeric = (up - down) / (2.0 * step)
        err = abs(analytic_vec[j] - numeric) / max(abs(analytic_vec[j]), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst


def step_trace(
    params: PgParams, batch: list[BiasExample], mode: str, alpha: float
) -> list[dict]:
    """Per-step diagnostic records: losses, gate, and the gate gradient seed.

    One record per (utterance, position); the per-step loss fields sum to the
    batch report of ``evaluate``.  ``d_gate_pre`` is the derivative of the
    mode's objective with respect to the gate pre-activation at that step.
    """
    _mode_total(mode, 0.0, 0.0, 0.0)
    records: list[dict] = []
    for ex in batch:
        for i in range(len(ex.tokens)):
            gold = ex.tokens[i]
            in_k = i in ex.mask.positions
            members = ex.valid_sets[i]
            p_mdl_gold = float(ex.p_mdl_seq[i, gold])
            if not members:
                records.append(
                    {
                        "utt": ex.utt_id,
                        "step": i,
                        "in_mask": in_k,
                        "valid_count": 0,
                        "p_gen": 0.0,
                        "p_ptr_gold": 0.0,
                        "l_gen": 0.0,
                        "l_ptr": 0.0,
                        "l_asr": -_clamped_log(p_mdl_gold)[0],
                        "d_gate_pre": 0.0,
                    }
                )
                continue
            step = forward_step(params, ex.h_seq[i], list(members))
            gate = step.p_gen
            ptr_gold = float(step.p_ptr[gold])
            l_gen_i = (
                -alpha * _clamped_log(gate)[0]
                if in_k
                else -(1.0 - alpha) * _clamped_log(1.0 - gate)[0]
            )
            l_ptr_i = -_clamped_log(ptr_gold)[0] if in_k else 0.0
            p_final = p_mdl_gold * (1.0 - gate) + ptr_gold * gate
            l_asr_i = -_clamped_log(p_final)[0]
            if mode == TWO_LOSS:
                d_pre = -alpha * (1.0 - gate) if in_k else (1.0 - alpha) * gate
            else:
                d_pre = (
                    0.0
                    if p_final < LOG_FLOOR
                    else -(ptr_gold - p_mdl_gold) / p_final * gate * (1.0 - gate)
                )
            records.append(
                {
                    "utt": ex.utt_id,
                    "step": i,
                    "in_mask": in_k,
                    "valid_count": len(members),
                    "p_gen": gate,
                    "p_ptr_gold": ptr_gold,
                    "l_gen": l_gen_i,
                    "l_ptr": l_ptr_i,
                    "l_asr": l_asr_i,
                    "d_gate_pre": d_pre,
                }
            )
    return records


def alpha_derivative(p_gen_seq: np.ndarray, mask: BiasMask) -> float:
    """Analytic derivative of the gate loss with respect to its class weight."""
    p_gen_seq = np.asarray(p_gen_seq, dtype=np.float64)
    total = 0.0
    for i in range(mask.size):
        if i in mask.positions:
            total -= _clamped_log(float(p_gen_seq[i]))[0]
        else:
            total += _clamped_log(1.0 - float(p_gen_seq[i]))[0]
    return float(total)
