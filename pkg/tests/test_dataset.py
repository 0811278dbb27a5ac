import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvrvar.dataset import (
    SynthSpec,
    TimeSeriesMatrix,
    build_matrix_form,
    lag_embed,
    load_binary,
    load_csv,
    load_matrix,
    save_binary,
    save_csv,
    synth_multiresolution,
    synth_planted_var,
)
from tvrvar.errors import DataError, FormatError, ParameterError, ParseError, SizeError
from tvrvar.model import coefficient_tensor


# -- CSV and binary ---------------------------------------------------------

def test_load_csv_direct(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2,3\n4,5,6")
    data = load_csv(f)
    assert (data.N, data.T) == (2, 3)
    assert data.S[0, 2] == 3


def test_load_csv_header(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("a,b\n1,2")
    data = load_csv(f, header=True)
    assert (data.N, data.T) == (1, 2)


def test_load_csv_scientific_and_transpose(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1e-3,2.5E2\n-3,4\n5,6\n")
    data = load_csv(f, transpose=True)
    assert data.S.shape == (2, 3)
    assert data.S[0, 0] == 1e-3 and data.S[1, 0] == 250.0


def test_load_csv_ragged(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2,3\n4,5\n")
    with pytest.raises(FormatError, match="row 1"):
        load_csv(f)


def test_load_csv_parse_error(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2\n3,x\n")
    with pytest.raises(ParseError) as info:
        load_csv(f)
    assert (info.value.row, info.value.col) == (1, 1)


def test_load_csv_empty(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("")
    with pytest.raises(FormatError):
        load_csv(f)


def test_missing_values_rejected(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,nan,3\n")
    with pytest.raises(DataError, match="missing"):
        load_csv(f)


def test_csv_round_trip(tmp_path, rng):
    f = tmp_path / "a.csv"
    f.write_text("\n".join(",".join(f"{v:.12e}" for v in row) for row in rng.standard_normal((3, 7)) * 1e3))
    again = tmp_path / "b.csv"
    save_csv(again, load_csv(f).S)
    np.testing.assert_allclose(load_csv(again).S, load_csv(f).S, rtol=1e-12, atol=0)
    # 17 significant digits reproduce the doubles exactly
    np.testing.assert_array_equal(load_csv(again).S, load_csv(f).S)


def test_binary_layout(tmp_path):
    S = np.arange(6, dtype=float).reshape(2, 3)
    f = tmp_path / "m.tvm"
    save_binary(f, S)
    raw = f.read_bytes()
    assert raw[:4] == b"TVM1"
    assert struct.unpack("<QQ", raw[4:20]) == (2, 3)
    # column-major payload
    np.testing.assert_array_equal(np.frombuffer(raw[20:], "<f8"), [0, 3, 1, 4, 2, 5])
    np.testing.assert_array_equal(load_binary(f).S, S)
    np.testing.assert_array_equal(load_matrix(f).S, S)


def test_binary_truncated(tmp_path):
    f = tmp_path / "m.tvm"
    f.write_bytes(b"TVM1" + struct.pack("<QQ", 2, 2) + b"\0" * 8)
    with pytest.raises(FormatError):
        load_binary(f)


def test_matrix_validation():
    with pytest.raises(DataError):
        TimeSeriesMatrix(np.ones((2, 1)))
    with pytest.raises(DataError):
        TimeSeriesMatrix(np.array([[1.0, np.inf]]))


# -- lag embedding ----------------------------------------------------------

def test_lag_embed_hand_computed():
    pairs = lag_embed(TimeSeriesMatrix(np.array([[1.0, 2, 3], [4, 5, 6]])), 1)
    np.testing.assert_array_equal(pairs.ys, [[2, 5], [3, 6]])
    np.testing.assert_array_equal(pairs.zs, [[1, 4], [2, 5]])
    assert pairs.count == 2


def test_lag_embed_boundary(rng):
    S = rng.standard_normal((3, 5))
    pairs = lag_embed(TimeSeriesMatrix(S), 4)
    assert pairs.count == 1
    assert pairs.Z.shape == (12, 1)


def test_lag_embed_d2_index_oracle(rng):
    S = rng.standard_normal((3, 8))
    pairs = lag_embed(TimeSeriesMatrix(S), 2)
    for i in range(pairs.count):
        t = i + 2  # 0-based column of y_t
        np.testing.assert_array_equal(pairs.Y[:, i], S[:, t])
        np.testing.assert_array_equal(pairs.Z[:3, i], S[:, t - 1])
        np.testing.assert_array_equal(pairs.Z[3:, i], S[:, t - 2])


def test_lag_embed_range(rng):
    with pytest.raises(ParameterError):
        lag_embed(TimeSeriesMatrix(rng.standard_normal((2, 4))), 4)
    with pytest.raises(ParameterError):
        lag_embed(TimeSeriesMatrix(rng.standard_normal((2, 4))), 0)


@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(2, 12), st.integers(1, 5))
def test_lag_embed_reassembles(seed, N, T, d):
    d = min(d, T - 1)
    S = np.random.default_rng(seed).standard_normal((N, T))
    pairs = lag_embed(TimeSeriesMatrix(S), d)
    np.testing.assert_array_equal(pairs.Y, S[:, d:])
    # the first lag block of the next pair is the current target
    np.testing.assert_array_equal(pairs.Z[:N, 1:], pairs.Y[:, :-1])
    np.testing.assert_array_equal(pairs.Z[(d - 1) * N:, 0], S[:, 0])


# -- matrix form ------------------------------------------------------------

def test_matrix_form_hand_computed():
    Y, Zt = build_matrix_form(lag_embed(TimeSeriesMatrix(np.array([[1.0, 2, 3]])), 1))
    np.testing.assert_array_equal(Y, [[2, 3]])
    np.testing.assert_array_equal(Zt, [[1, 0], [0, 2]])


def test_matrix_form_shape(rng):
    pairs = lag_embed(TimeSeriesMatrix(rng.standard_normal((3, 9))), 2)
    Y, Zt = build_matrix_form(pairs)
    assert Y.shape[1] == pairs.count == Zt.shape[1]
    assert Zt.shape[0] == 6 * pairs.count


def test_matrix_form_cap(rng):
    pairs = lag_embed(TimeSeriesMatrix(rng.standard_normal((10, 200))), 1)
    with pytest.raises(SizeError, match="vector-form"):
        build_matrix_form(pairs, cap=1000)


# -- planted generator ------------------------------------------------------

def test_planted_noiseless_identity():
    data, truth = synth_planted_var(SynthSpec(N=5, T=40, d=2, R=2, seed=3))
    pairs = lag_embed(data, 2)
    A = coefficient_tensor(truth)
    for i in range(pairs.count):
        assert np.linalg.norm(pairs.Y[:, i] - A[i] @ pairs.Z[:, i]) <= 1e-12 * max(1.0, np.linalg.norm(pairs.Y[:, i]))


def test_planted_deterministic():
    a, fa = synth_planted_var(SynthSpec(N=6, T=30, R=2, noise_sd=0.1, seed=9))
    b, fb = synth_planted_var(SynthSpec(N=6, T=30, R=2, noise_sd=0.1, seed=9))
    assert a.S.tobytes() == b.S.tobytes()
    assert fa.G.tobytes() == fb.G.tobytes()
    c, _ = synth_planted_var(SynthSpec(N=6, T=30, R=2, noise_sd=0.1, seed=10))
    assert not np.array_equal(a.S, c.S)


def test_planted_spectral_radius_and_bounded():
    data, truth = synth_planted_var(SynthSpec(N=10, T=200, d=1, R=3, seed=0))
    radii = [np.abs(np.linalg.eigvals(A)).max() for A in coefficient_tensor(truth)]
    assert max(radii) <= 0.95 + 1e-12
    # simulate again from the planted coefficients
    A = coefficient_tensor(truth)
    s = data.S[:, 0].copy()
    for i in range(199):
        s = A[i] @ s
        assert np.linalg.norm(s) <= 1e3
    assert np.linalg.norm(data.S, axis=0).max() <= 1e3


def test_planted_rank_bound():
    with pytest.raises(ParameterError):
        synth_planted_var(SynthSpec(N=3, T=10, R=4))


# -- multiresolution generator ----------------------------------------------

def _mres(**kw):
    base = dict(N=30, T=400, d=1, R=3, kind="multiresolution", switch_t=200, base_freq=1 / 20, seed=1)
    base.update(kw)
    return SynthSpec(**base)


def _dominant_bin(S):
    S = S - S.mean(axis=1, keepdims=True)
    power = (np.abs(np.fft.rfft(S, axis=1)) ** 2).sum(axis=0)
    return int(np.argmax(power[1:]) + 1)


def test_multires_first_segment_periodic():
    data = synth_multiresolution(_mres(R=1))
    S = data.S[:, :200]
    np.testing.assert_allclose(S[:, 20:], S[:, :-20], atol=1e-12)


def test_multires_fft_frequencies():
    spec = _mres()
    S = synth_multiresolution(spec).S
    n1, n2 = spec.switch_t, spec.T - spec.switch_t
    f1 = _dominant_bin(S[:, :spec.switch_t]) / n1
    f2 = _dominant_bin(S[:, spec.switch_t:]) / n2
    assert abs(f1 - spec.base_freq) <= 1 / n1
    assert abs(f2 - 2 * spec.base_freq) <= 1 / n2


def test_multires_splice_modes():
    soft = synth_multiresolution(_mres(base_freq=1 / 33)).S
    hard = synth_multiresolution(_mres(base_freq=1 / 33, hard_splice=True)).S
    np.testing.assert_allclose(soft[:, :200], hard[:, :200], atol=1e-12)
    jump_soft = np.linalg.norm(soft[:, 200] - soft[:, 199])
    jump_hard = np.linalg.norm(hard[:, 200] - hard[:, 199])
    typical = np.median(np.linalg.norm(np.diff(soft[:, 201:], axis=1), axis=0))
    assert jump_soft <= 1.5 * typical
    assert not np.allclose(soft[:, 200:], hard[:, 200:])
    assert jump_hard != jump_soft


def test_multires_deterministic_and_valid():
    assert synth_multiresolution(_mres()).S.tobytes() == synth_multiresolution(_mres()).S.tobytes()
    with pytest.raises(ParameterError):
        synth_multiresolution(_mres(switch_t=2))
