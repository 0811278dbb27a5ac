import numpy as np
import pytest

from tvrvar import evaluation as ev
from tvrvar.dataset import SynthSpec, synth_multiresolution
from tvrvar.dmd import DmdResult, dmd_frequency_report, fit_dmd, normalize_dmd_modes, reconstruct
from tvrvar.errors import ParameterError, RankError


def _linear(A, s0, T):
    S = np.empty((len(s0), T))
    S[:, 0] = s0
    for t in range(1, T):
        S[:, t] = A @ S[:, t - 1]
    return S


def test_diagonal_system():
    S = _linear(np.diag([0.9, 0.5]), np.array([1.0, 1.0]), 20)
    res = fit_dmd(S, 2)
    np.testing.assert_allclose(res.eigenvalues, [0.9, 0.5], atol=1e-10)
    np.testing.assert_allclose(reconstruct(res, range(19)).real, S[:, :19], atol=1e-10)


def test_constant_data():
    S = np.tile(np.array([[2.0], [-1.0], [0.5]]), (1, 10))
    res = fit_dmd(S, 1)
    assert res.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(reconstruct(res, [0, 5]).real, S[:, :2], atol=1e-12)


def test_rotation_conjugate_pair():
    th = 2 * np.pi / 12
    A = 0.98 * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    res = fit_dmd(_linear(A, np.array([1.0, 0.0]), 40), 2)
    lam = res.eigenvalues
    assert lam[0] == pytest.approx(np.conj(lam[1]), abs=1e-10)
    assert lam[0].imag > 0
    growth, freq = dmd_frequency_report(res, dt=0.5)
    np.testing.assert_allclose(growth, np.log(0.98) / 0.5, rtol=1e-8)
    np.testing.assert_allclose(np.abs(freq), 1 / 12 / 0.5, rtol=1e-8)


def test_ordering_and_closure(rng):
    A = rng.standard_normal((6, 6))
    A /= 1.1 * np.abs(np.linalg.eigvals(A)).max()
    res = fit_dmd(_linear(A, rng.standard_normal(6), 60), 6)
    lam = res.eigenvalues
    mags = np.abs(lam)
    assert np.all(np.diff(mags) <= 1e-8)
    # the multiset of eigenvalues is closed under conjugation
    np.testing.assert_allclose(np.sort_complex(lam), np.sort_complex(np.conj(lam)), atol=1e-8)
    np.testing.assert_allclose(np.sort_complex(lam), np.sort_complex(np.linalg.eigvals(A)), atol=1e-6)


def test_zero_eigenvalue_growth():
    res = DmdResult(
        eigenvalues=np.array([0.8, 0.0], dtype=complex),
        modes=np.eye(2, dtype=complex),
        amplitudes=np.ones(2, dtype=complex),
        temporal=np.ones((3, 2), dtype=complex),
    )
    growth, freq = dmd_frequency_report(res)
    assert growth[-1] == -np.inf
    assert growth[0] == pytest.approx(np.log(0.8))
    np.testing.assert_array_equal(freq, 0.0)


def test_rank_errors():
    S = _linear(np.diag([0.9, 0.5]), np.array([1.0, 0.0]), 10)
    with pytest.raises(RankError):
        fit_dmd(S, 2)
    with pytest.raises(ParameterError):
        fit_dmd(S, 0)
    with pytest.raises(ParameterError):
        fit_dmd(S, 3)
    with pytest.raises(ParameterError):
        dmd_frequency_report(fit_dmd(S, 1), dt=0.0)


def test_normalize_keeps_reconstruction(rng):
    S = _linear(np.diag([0.9, 0.7, 0.4]), rng.standard_normal(3), 15)
    res = fit_dmd(S, 3)
    res2 = normalize_dmd_modes(res)
    np.testing.assert_allclose(np.linalg.norm(res2.modes, axis=0), 1.0)
    np.testing.assert_allclose(reconstruct(res2, range(5)), reconstruct(res, range(5)), atol=1e-12)


def test_single_mode_cannot_track_frequency_switch():
    spec = SynthSpec(N=20, T=300, R=2, kind="multiresolution", switch_t=150, base_freq=1 / 25)
    res = fit_dmd(synth_multiresolution(spec), 2)
    _, freq = dmd_frequency_report(res)
    # one constant frequency per mode; it can match at most one regime
    for f in np.abs(freq):
        hit1 = abs(f - spec.base_freq) < 0.1 * spec.base_freq
        hit2 = abs(f - 2 * spec.base_freq) < 0.1 * spec.base_freq
        assert not (hit1 and hit2)


def test_check_dmd_passes():
    passed, measured = ev.check_dmd()
    assert passed, measured
    assert measured["multiresolution_rank"] == 2
