import numpy as np
import pytest

from biaslab.pointer import (
    StepOutput,
    forward_step,
    init_params,
    interpolate,
    load_params,
    save_params,
)


def test_init_deterministic():
    a = init_params(3, 8, 4, 6)
    b = init_params(3, 8, 4, 6)
    assert np.array_equal(a.token_embed, b.token_embed)
    assert np.array_equal(a.w_query, b.w_query)
    assert np.array_equal(a.w_gate, b.w_gate)
    assert a.b_gate == b.b_gate


def test_init_seed_sensitivity():
    assert not np.array_equal(init_params(1, 8, 4, 6).token_embed,
                              init_params(2, 8, 4, 6).token_embed)


def test_init_shapes():
    params = init_params(0, 8, 4, 6)
    assert params.token_embed.shape == (8, 4)
    assert params.w_query.shape == (4, 6)
    assert params.w_gate.shape == (10,)
    assert params.b_gate == -9.0


def test_init_bounds_follow_fan_in():
    params = init_params(5, 64, 16, 25)
    assert np.abs(params.token_embed).max() <= 1 / np.sqrt(16)
    assert np.abs(params.w_query).max() <= 1 / np.sqrt(25)
    assert np.abs(params.w_gate).max() <= 1 / np.sqrt(41)


def test_init_rejects_bad_dims():
    with pytest.raises(ValueError):
        init_params(0, 0, 4, 6)


def test_forward_empty_valid_set():
    params = init_params(7, 8, 4, 6)
    step = forward_step(params, np.zeros(6), [])
    assert step.p_gen == 0.0
    assert np.all(step.p_ptr == 0.0)
    assert np.all(step.context == 0.0)


def test_forward_singleton_is_certain():
    params = init_params(7, 8, 4, 6)
    step = forward_step(params, np.linspace(-1, 1, 6), [3])
    assert step.p_ptr[3] == 1.0
    assert step.p_ptr.sum() == 1.0


def test_forward_normalization_seed7():
    params = init_params(7, 8, 4, 6)
    step = forward_step(params, np.linspace(-1, 1, 6), [1, 4, 6])
    assert abs(step.p_ptr.sum() - 1.0) < 1e-12
    assert 0.0 < step.p_gen < 1.0
    assert set(np.nonzero(step.p_ptr)[0]) == {1, 4, 6}


def test_forward_rejects_nonfinite_state():
    params = init_params(7, 8, 4, 6)
    with pytest.raises(ValueError, match="non-finite"):
        forward_step(params, np.array([np.nan] + [0.0] * 5), [1])


def test_forward_deterministic():
    params = init_params(9, 8, 4, 6)
    h = np.linspace(0, 1, 6)
    a = forward_step(params, h, [0, 2, 5])
    b = forward_step(params, h, [0, 2, 5])
    assert np.array_equal(a.p_ptr, b.p_ptr)
    assert a.p_gen == b.p_gen


def make_step(p_ptr, p_gen, valid):
    p = np.asarray(p_ptr, dtype=np.float64)
    members = np.asarray(sorted(valid), dtype=np.intp)
    ctx = np.zeros(2)
    return StepOutput(p, p_gen, tuple(int(m) for m in members), ctx)


def test_interpolate_hand_example():
    p_mdl = np.array([0.5, 0.3, 0.2])
    step = make_step([0.0, 0.0, 1.0], 0.4, [2])
    scaled = interpolate(p_mdl, step, "scaled")
    assert np.allclose(scaled, [0.30, 0.18, 0.52], atol=1e-15)
    unscaled = interpolate(p_mdl, step, "unscaled")
    assert np.allclose(unscaled, [0.5, 0.3, 0.52], atol=1e-15)


def test_interpolate_gate_closed_is_base_model():
    p_mdl = np.array([0.5, 0.3, 0.2])
    step = make_step([0.0, 1.0, 0.0], 0.0, [1])
    for mode in ("scaled", "unscaled"):
        assert np.array_equal(interpolate(p_mdl, step, mode), p_mdl)


def test_interpolate_gate_open_scaled_is_bias():
    p_mdl = np.array([0.5, 0.3, 0.2])
    step = make_step([0.0, 1.0, 0.0], 1.0, [1])
    assert np.array_equal(interpolate(p_mdl, step, "scaled"), step.p_ptr)


def test_interpolate_unscaled_outside_set_untouched():
    rng = np.random.default_rng(0)
    for _ in range(50):
        vocab_size = int(rng.integers(3, 12))
        p_mdl = rng.dirichlet(np.ones(vocab_size))
        k = int(rng.integers(1, vocab_size))
        valid = sorted(rng.choice(vocab_size, size=k, replace=False).tolist())
        raw = np.zeros(vocab_size)
        raw[valid] = rng.dirichlet(np.ones(k))
        gate = float(rng.uniform(0.01, 1))
        step = make_step(raw, gate, valid)
        out = interpolate(p_mdl, step, "unscaled")
        outside = [i for i in range(vocab_size) if i not in valid]
        assert np.array_equal(out[outside], p_mdl[outside])
        for c in valid:
            if raw[c] > p_mdl[c]:
                assert out[c] > p_mdl[c]


def test_interpolate_scaled_stays_normalized():
    rng = np.random.default_rng(1)
    for _ in range(50):
        vocab_size = int(rng.integers(3, 12))
        p_mdl = rng.dirichlet(np.ones(vocab_size))
        k = int(rng.integers(1, vocab_size))
        valid = sorted(rng.choice(vocab_size, size=k, replace=False).tolist())
        raw = np.zeros(vocab_size)
        raw[valid] = rng.dirichlet(np.ones(k))
        step = make_step(raw, float(rng.uniform(0, 1)), valid)
        assert abs(interpolate(p_mdl, step, "scaled").sum() - 1.0) < 1e-9


def test_interpolate_length_mismatch():
    step = make_step([0.0, 1.0, 0.0], 0.5, [1])
    with pytest.raises(ValueError, match="length mismatch"):
        interpolate(np.array([0.5, 0.5]), step, "scaled")


def test_interpolate_rejects_unnormalized_base():
    step = make_step([0.0, 1.0, 0.0], 0.5, [1])
    with pytest.raises(ValueError, match="sum to 1"):
        interpolate(np.array([0.5, 0.3, 0.1]), step, "scaled")


def test_checkpoint_roundtrip(tmp_path):
    params = init_params(13, 9, 5, 7)
    params.b_gate = -1.25
    path = str(tmp_path / "ckpt.bin")
    save_params(params, path)
    loaded = load_params(path)
    assert np.array_equal(loaded.token_embed, params.token_embed)
    assert np.array_equal(loaded.w_query, params.w_query)
    assert np.array_equal(loaded.w_gate, params.w_gate)
    assert loaded.b_gate == params.b_gate
    assert loaded.seed == 13


def test_checkpoint_bytes_deterministic(tmp_path):
    a, b = str(tmp_path / "a.bin"), str(tmp_path / "b.bin")
    save_params(init_params(4, 6, 3, 5), a)
    save_params(init_params(4, 6, 3, 5), b)
    assert open(a, "rb").read() == open(b, "rb").read()
