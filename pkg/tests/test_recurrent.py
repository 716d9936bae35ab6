import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtslot import autodiff as ad
from mtslot.recurrent import (BiLstmParams, CharEncoderParams, LstmpParams, bilstm_batch,
                              bilstm_encode, char_word_encode, encode_words, lstmp_step,
                              reverse_index)


def _zero(p):
    for q in p.parameters():
        q.value = np.zeros_like(q.value)


def test_zero_params_give_zero_state(rng):
    p = LstmpParams.init("l", 3, 4, 2, rng)
    _zero(p)
    m, c = lstmp_step(p, np.ones(3), np.zeros(2), np.zeros(4))
    assert not m.value.any() and not c.value.any()


def test_full_dims(rng):
    p = LstmpParams.init("l", 200, 250, 170, rng)
    m, c = lstmp_step(p, rng.normal(size=200), np.zeros(170), np.zeros(250))
    assert m.value.shape == (170,) and c.value.shape == (250,)


def test_scalar_cell_by_hand(rng):
    p = LstmpParams.init("l", 1, 1, 1, rng)
    vals = {"W_ix": .5, "W_im": -.3, "w_ic": .2, "b_i": .1,
            "W_fx": -.4, "W_fm": .6, "w_fc": -.1, "b_f": .3,
            "W_cx": .7, "W_cm": .2, "b_c": -.2,
            "W_ox": .1, "W_om": -.5, "w_oc": .4, "b_o": .05, "W_proj": 1.5}
    for q in p.parameters():
        q.value = np.full_like(q.value, vals[q.name.split("/")[-1]])
    x, m0, c0 = 0.8, -0.4, 0.6
    sig = lambda z: 1 / (1 + math.exp(-z))
    i = sig(.5 * x - .3 * m0 + .2 * c0 + .1)
    f = sig(-.4 * x + .6 * m0 - .1 * c0 + .3)
    c = f * c0 + i * math.tanh(.7 * x + .2 * m0 - .2)
    o = sig(.1 * x - .5 * m0 + .4 * c + .05)
    m = 1.5 * o * math.tanh(c)
    mt, ct = lstmp_step(p, np.array([x]), np.array([m0]), np.array([c0]))
    assert abs(ct.value[0] - c) < 1e-12 and abs(mt.value[0] - m) < 1e-12


def test_step_shape_error(rng):
    p = LstmpParams.init("l", 3, 4, 2, rng)
    with pytest.raises(ad.ShapeError):
        lstmp_step(p, np.ones(5), np.zeros(2), np.zeros(4))


def test_step_gradients_fd(rng):
    p = LstmpParams.init("l", 3, 4, 2, rng, init_range=0.5)
    xs = rng.normal(size=(4, 3))

    def loss():
        m, c = ad.constant(np.zeros(2)), ad.constant(np.zeros(4))
        for t in range(4):
            m, c = lstmp_step(p, xs[t], m, c)
        return ad.sum_(ad.mul(m, ad.constant([1.0, -0.7])))

    errs = ad.check_parameters(loss, p.parameters())
    assert max(errs.values()) < 1e-4


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=5))
def test_reverse_index_is_involution(lengths):
    T = max(lengths)
    r = reverse_index(np.array(lengths), T)
    np.testing.assert_array_equal(r[r], np.arange(T * len(lengths)))


def test_length_one_sequence(rng):
    p = BiLstmParams.init("b", 2, 3, 2, rng)
    x = rng.normal(size=(1, 2))
    out = bilstm_encode(p, x).value
    mf, _ = lstmp_step(p.forward, x[0], np.zeros(2), np.zeros(3))
    mb, _ = lstmp_step(p.backward, x[0], np.zeros(2), np.zeros(3))
    np.testing.assert_allclose(out[0], np.concatenate([mf.value, mb.value]), atol=1e-14)


def test_palindrome_symmetry(rng):
    p = BiLstmParams.init("b", 3, 4, 2, rng)
    for a, b in zip(p.forward.parameters(), p.backward.parameters()):
        b.value = a.value.copy()
    half = rng.normal(size=(2, 3))
    x = np.vstack([half, rng.normal(size=(1, 3)), half[::-1]])
    out = bilstm_encode(p, x).value
    np.testing.assert_allclose(out[:, :2], out[::-1, 2:], atol=1e-14)


def test_full_output_width(rng):
    p = BiLstmParams.init("b", 8, 250, 170, rng)
    assert bilstm_encode(p, rng.normal(size=(5, 8))).value.shape == (5, 340)


def test_batch_equals_one_at_a_time(rng):
    p = BiLstmParams.init("b", 3, 4, 2, rng)
    seqs = [rng.normal(size=(n, 3)) for n in (3, 1, 5)]
    lengths = np.array([3, 1, 5])
    X = np.zeros((5, 3, 3))
    for b, s in enumerate(seqs):
        X[:len(s), b] = s
    out, f_last, b_last = bilstm_batch(p, ad.constant(X.reshape(15, 3)), lengths)
    out = out.value.reshape(5, 3, 4)
    for b, s in enumerate(seqs):
        single = bilstm_encode(p, s).value
        np.testing.assert_allclose(out[:len(s), b], single, atol=1e-13)
        np.testing.assert_allclose(f_last.value[b], single[-1, :2], atol=1e-13)
        np.testing.assert_allclose(b_last.value[b], single[0, 2:], atol=1e-13)


def test_fused_scan_matches_reference(rng):
    p = BiLstmParams.init("b", 3, 4, 2, rng, init_range=0.5)
    lengths = np.array([4, 2, 3])
    X = ad.Parameter("X", rng.normal(size=(12, 3)))
    w = rng.normal(size=(12, 4))
    grads = {}
    for ref in (False, True):
        out, _, _ = bilstm_batch(p, X, lengths, reference=ref)
        g = ad.backward(ad.sum_(ad.mul(out, ad.constant(w))))
        grads[ref] = (out.value, {q.name: g[q] for q in [X, *p.parameters()]})
    np.testing.assert_allclose(grads[False][0], grads[True][0], atol=1e-13)
    for k, v in grads[True][1].items():
        np.testing.assert_allclose(grads[False][1][k], v, atol=1e-12, err_msg=k)


def test_bilstm_gradients_fd(rng):
    p = BiLstmParams.init("b", 2, 3, 2, rng, init_range=0.5)
    X = rng.normal(size=(6, 2))
    w = ad.constant(rng.normal(size=(6, 4)))
    loss = lambda: ad.sum_(ad.mul(bilstm_batch(p, ad.constant(X), [3, 2])[0], w))
    assert max(ad.check_parameters(loss, p.parameters()).values()) < 1e-4


def test_char_encoder_width(rng):
    p = CharEncoderParams.init("abc", rng)
    assert char_word_encode(p, "cab").value.shape == (40,)
    assert char_word_encode(p, "zzz").value.shape == (40,)


def test_char_encoder_zero_propagation(rng):
    p = CharEncoderParams.init("ab", rng)
    for q in p.parameters():
        if q is not p.table and q is not p.reduce_W:
            q.value = np.zeros_like(q.value)
    assert not char_word_encode(p, "abba").value.any()


def test_char_encoder_batch_matches_single(rng):
    p = CharEncoderParams.init("abcde", rng, 3, 4, 2, 5, 6)
    words = ["a", "bead", "cab"]
    batch = encode_words(p, words).value
    for i, w in enumerate(words):
        np.testing.assert_allclose(batch[i], char_word_encode(p, w).value, atol=1e-14)


def test_char_encoder_rejects_empty(rng):
    p = CharEncoderParams.init("a", rng)
    with pytest.raises(ValueError):
        encode_words(p, [""])


def test_char_encoder_gradients_fd(rng):
    p = CharEncoderParams.init("abc", rng, 2, 2, 2, 3, 2, init_range=0.5)
    w = ad.constant(rng.normal(size=2))
    loss = lambda: ad.sum_(ad.mul(char_word_encode(p, "cab"), w))
    assert max(ad.check_parameters(loss, p.parameters()).values()) < 1e-4
