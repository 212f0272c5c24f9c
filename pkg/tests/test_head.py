"""Refinement head: counts, init, forward against the loop oracle,
invariances, loss and normalizer arithmetic."""

import numpy as np
import pytest

import relish.diffcore as dc
from oracles import head_forward_loops, huber_scalar, matmul_loops
from relish.errors import ConfigError, DataError, EmptySupportError, ShapeError
from relish.head import (
    RelishConfig,
    count_parameters,
    fit_normalizer,
    huber_loss,
    init_params,
    param_shapes,
    predict,
    project_tokens,
    refine_step,
    relish_forward,
)
from relish.rng import CounterRng
from relish.tokens import TokenStates

TINY = RelishConfig(backbone_dim=6, head_dim=4, num_heads=2, num_blocks=2, dropout=0.0)


def tiny_tokens(seq_len=5, dim=6, seed=3, masked_tail=0, dtype=np.float32):
    states = CounterRng(seed, 900 + seq_len).normal_matrix(seq_len, dim).astype(dtype)
    mask = np.ones(seq_len, dtype=np.uint8)
    if masked_tail:
        mask[-masked_tail:] = 0
    return TokenStates(states=states, mask=mask, id=f"t{seed}")


# ---------------------------------------------------------------------------
# configuration and counting


def test_config_invariants():
    with pytest.raises(ConfigError):
        RelishConfig(backbone_dim=8, head_dim=10, num_heads=4)  # not divisible
    with pytest.raises(ConfigError):
        RelishConfig(backbone_dim=8, num_blocks=0)
    with pytest.raises(ConfigError):
        RelishConfig(backbone_dim=8, dropout=1.0)
    with pytest.raises(ConfigError):
        RelishConfig(backbone_dim=8, huber_delta=0.0)
    assert RelishConfig(backbone_dim=8).ffn_width == 1024  # 4 x default head_dim


def test_count_parameters_reference_widths():
    # integer equality with the published footprints
    assert count_parameters(RelishConfig(backbone_dim=4096)) == 3_418_625
    assert count_parameters(RelishConfig(backbone_dim=5120)) == 3_680_769
    assert count_parameters(RelishConfig(backbone_dim=5376)) == 3_746_305


def test_count_matches_shape_table_and_store():
    for config in (TINY, RelishConfig(backbone_dim=17, head_dim=8, num_heads=4, num_blocks=1)):
        from_shapes = sum(r * c for r, c in param_shapes(config).values())
        assert count_parameters(config) == from_shapes
        assert init_params(config, 0).num_values() == from_shapes


# ---------------------------------------------------------------------------
# initialization


def test_init_deterministic_and_seed_sensitive():
    a = init_params(TINY, 42)
    b = init_params(TINY, 42)
    c = init_params(TINY, 43)
    for name in a.names():
        np.testing.assert_array_equal(a[name].value, b[name].value)
    assert any(not np.array_equal(a[n].value, c[n].value) for n in a.names())


def test_init_structure():
    params = init_params(TINY, 1)
    assert (params["proj.b"].value == 0).all()
    assert (params["block0.ln1.gamma"].value == 1).all()
    assert (params["block0.ln1.beta"].value == 0).all()
    assert np.abs(params["r0"].value).max() <= 0.1
    bound = np.sqrt(1.0 / TINY.backbone_dim)
    assert np.abs(params["proj.W"].value).max() <= bound


def test_init_weight_spread():
    # uniform(-b, b) has sd b/sqrt(3); a 256x256 draw should sit within 20%
    config = RelishConfig(backbone_dim=256, head_dim=256, num_heads=8, num_blocks=1)
    w = init_params(config, 7)["proj.W"].value
    expect = np.sqrt(1.0 / 256) / np.sqrt(3.0)
    assert abs(w.std() / expect - 1.0) < 0.2


# ---------------------------------------------------------------------------
# projection


def test_project_tokens_selector():
    # projection [I; 0] with zero bias selects the first head_dim columns
    params = init_params(TINY, 0)
    w = np.zeros((6, 4), dtype=np.float32)
    w[:4, :4] = np.eye(4)
    params["proj.W"].value[...] = w
    params["proj.b"].value[...] = 0.0
    tokens = tiny_tokens()
    np.testing.assert_allclose(
        project_tokens(tokens, params).value, tokens.states[:, :4], atol=1e-7
    )


def test_project_tokens_zero_states_give_bias():
    params = init_params(TINY, 0)
    tokens = TokenStates.dense(np.zeros((3, 6), dtype=np.float32))
    out = project_tokens(tokens, params).value
    for row in out:
        np.testing.assert_allclose(row, params["proj.b"].value[0], atol=0)


def test_project_tokens_matches_matmul_oracle():
    params = init_params(TINY, 5, dtype=np.float64)
    tokens = tiny_tokens(seq_len=3, dtype=np.float64)
    expect = matmul_loops(tokens.states, params["proj.W"].value) + params["proj.b"].value[0]
    np.testing.assert_allclose(project_tokens(tokens, params).value, expect, atol=1e-12)


def test_project_tokens_dim_mismatch():
    params = init_params(TINY, 0)
    with pytest.raises(ShapeError):
        project_tokens(tiny_tokens(dim=7, seed=1), params)


# ---------------------------------------------------------------------------
# refinement blocks against the formula-by-formula oracle


def test_refine_step_matches_loop_oracle():
    from oracles import refine_step_loops

    params = init_params(TINY, 9, dtype=np.float64)
    tokens = tiny_tokens(seq_len=4, dtype=np.float64)
    memory = project_tokens(tokens, params)
    stepped = refine_step(params["r0"], memory, tokens.mask, params, 0, TINY)
    w = {
        "Wq": params["block0.attn.Wq"].value,
        "bq": params["block0.attn.bq"].value[0],
        "Wk": params["block0.attn.Wk"].value,
        "bk": params["block0.attn.bk"].value[0],
        "Wv": params["block0.attn.Wv"].value,
        "bv": params["block0.attn.bv"].value[0],
        "Wo": params["block0.attn.Wo"].value,
        "bo": params["block0.attn.bo"].value[0],
        "g1": params["block0.ln1.gamma"].value[0],
        "be1": params["block0.ln1.beta"].value[0],
        "W1": params["block0.ffn.W1"].value,
        "b1": params["block0.ffn.b1"].value[0],
        "W2": params["block0.ffn.W2"].value,
        "b2": params["block0.ffn.b2"].value[0],
        "g2": params["block0.ln2.gamma"].value[0],
        "be2": params["block0.ln2.beta"].value[0],
    }
    oracle_latent = refine_step_loops(
        params["r0"].value[0], memory.value, tokens.mask, w, TINY.num_heads
    )
    np.testing.assert_allclose(stepped.value[0], oracle_latent, atol=1e-12)


def test_single_token_attention_is_identity_weight():
    # with one unmasked token every head puts weight 1 on it, so identical
    # memories of any length give the same output
    params = init_params(TINY, 11)
    one = tiny_tokens(seq_len=1)
    repeated = TokenStates.dense(np.repeat(one.states, 4, axis=0))
    assert predict(one, params, TINY) == pytest.approx(
        predict(repeated, params, TINY), abs=1e-6
    )


def test_refine_step_all_masked_rejected():
    params = init_params(TINY, 0)
    tokens = tiny_tokens(seq_len=3)
    memory = project_tokens(tokens, params)
    with pytest.raises(EmptySupportError):
        refine_step(params["r0"], memory, np.zeros(3, dtype=np.uint8), params, 0, TINY)


# ---------------------------------------------------------------------------
# whole-head forward


def test_forward_matches_composed_oracle():
    config = RelishConfig(backbone_dim=5, head_dim=4, num_heads=2, num_blocks=3, dropout=0.0)
    params = init_params(config, 21, dtype=np.float64)
    tokens = tiny_tokens(seq_len=6, dim=5, seed=8, masked_tail=2, dtype=np.float64)
    got = relish_forward(tokens, params, config).item()
    expect = head_forward_loops(tokens.states, tokens.mask, params, config)
    assert got == pytest.approx(expect, abs=1e-12)


def test_forward_token_permutation_invariance():
    params = init_params(TINY, 31)
    rng = np.random.default_rng(0)
    for _ in range(20):
        tokens = tiny_tokens(seq_len=7, seed=int(rng.integers(1 << 30)), masked_tail=2)
        base = predict(tokens, params, TINY)
        perm = rng.permutation(7)
        shuffled = TokenStates(
            states=tokens.states[perm], mask=tokens.mask[perm], id=tokens.id
        )
        assert predict(shuffled, params, TINY) == pytest.approx(base, abs=1e-5)


def test_forward_padding_invariance_is_exact():
    params = init_params(TINY, 41)
    tokens = tiny_tokens(seq_len=5)
    padded = tokens.padded_to(9)
    assert predict(tokens, params, TINY) == predict(padded, params, TINY)


def test_compacted_drops_masked_rows():
    states = np.arange(12, dtype=np.float32).reshape(4, 3)
    tokens = TokenStates(states=states, mask=np.array([1, 0, 1, 0], dtype=np.uint8))
    packed = tokens.compacted()
    np.testing.assert_array_equal(packed.states, states[[0, 2]])
    np.testing.assert_array_equal(packed.mask, [1, 1])
    dense = TokenStates.dense(states)
    assert dense.compacted() is dense  # nothing to drop, no copy


def test_forward_deterministic_and_dropout_needs_rng():
    params = init_params(TINY, 51)
    tokens = tiny_tokens()
    assert predict(tokens, params, TINY) == predict(tokens, params, TINY)
    dropout_config = RelishConfig(backbone_dim=6, head_dim=4, num_heads=2, num_blocks=2)
    with pytest.raises(ConfigError):
        relish_forward(tokens, params, dropout_config, dropout_on=True)
    with_drop = relish_forward(
        tokens, params, dropout_config, dropout_on=True, rng=np.random.default_rng(0)
    )
    assert np.isfinite(with_drop.item())


# ---------------------------------------------------------------------------
# loss and normalizer


def test_huber_loss_values_and_mse_agreement():
    assert huber_loss(3.0, 3.0, 1.0) == 0.0
    assert huber_loss(3.5, 3.0, 1.0) == pytest.approx(0.125)
    assert huber_loss(5.0, 3.0, 1.0) == pytest.approx(1.5)
    rng = np.random.default_rng(1)
    for _ in range(100):
        r = float(rng.uniform(-1, 1))
        assert huber_loss(r, 0.0, 1.0) == pytest.approx(0.5 * r * r, abs=1e-15)
        assert huber_loss(r, 0.0, 1.0) == pytest.approx(huber_scalar(r, 1.0), abs=1e-15)


def test_normalizer_hand_case():
    norm = fit_normalizer([1.0, 2.0, 3.0], eps=1e-12)
    assert norm.mu == pytest.approx(2.0)
    assert norm.sigma == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-12)
    assert norm.normalize(3.0) == pytest.approx(1.224744871391589, abs=1e-6)
    assert norm.normalize(2.0) == 0.0


def test_normalizer_round_trip():
    norm = fit_normalizer([0.5, 1.5, 9.0, -2.0])
    for y in (-3.0, 0.0, 7.25):
        assert norm.denormalize(norm.normalize(y)) == pytest.approx(y, abs=1e-9)


def test_normalizer_rejects_empty():
    with pytest.raises(DataError):
        fit_normalizer([])


def test_constant_targets_still_round_trip():
    # sigma 0 leaves only the eps guard; the affine map must still invert
    norm = fit_normalizer([4.0, 4.0, 4.0])
    assert norm.sigma == 0.0
    assert norm.denormalize(norm.normalize(4.0)) == pytest.approx(4.0)
