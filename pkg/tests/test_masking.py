import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dfrg import dsp, masking, mixing
from dfrg.audio_io import Waveform
from dfrg.errors import InvalidLevel, MaskAboveOne, ShapeMismatch
from dfrg.masking import EnhancerSpec, Mask, MaskKind

mags = arrays(np.float64, (4, 6), elements=st.floats(0.0, 10.0))


def complex_pair(rng, shape=(8, 17)):
    s = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    n = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return s, n


# --- IRM / PSM / binary ---------------------------------------------------

def test_irm_basic_cases():
    s = np.array([[1.0, 2.0, 0.0, 3.0]])
    n = np.array([[1.0, 0.0, 0.0, 1.0]])
    np.testing.assert_allclose(masking.irm(s, n).values, [[0.5, 1.0, 0.0, 0.75]])


def test_irm_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        masking.irm(np.ones((2, 3)), np.ones((3, 2)))


@given(mags, mags)
def test_irm_in_unit_interval(s, n):
    m = masking.irm(s, n)
    assert np.all((m.values >= 0) & (m.values <= 1))


def test_psm_equals_one_without_noise(rng):
    s, _ = complex_pair(rng)
    m = masking.psm(s, s)
    np.testing.assert_allclose(m.values, 1.0)


def test_psm_quadrature_is_zero():
    s = np.array([[1j]])
    y = np.array([[1.0 + 0j]])
    assert masking.psm(s, y).values[0, 0] == 0.0


def test_psm_matches_per_bin_formula(rng):
    s, n = complex_pair(rng, (5, 7))
    y = s + n
    y[0, 0] = 0.0
    got = masking.psm(s, y).values
    for t in range(5):
        for f in range(7):
            if abs(y[t, f]) == 0:
                want = 0.0
            else:
                ratio = abs(s[t, f]) / abs(y[t, f])
                want = ratio * np.cos(np.angle(s[t, f]) - np.angle(y[t, f]))
                want = min(max(want, 0.0), 1.0)
            assert got[t, f] == pytest.approx(want, abs=1e-12)


def test_binary_mask():
    m = masking.binary_mask(np.array([[2.0, 1.0, 0.5]]), np.array([[1.0, 1.0, 1.0]]))
    assert m.values.tolist() == [[1.0, 0.0, 0.0]]
    assert m.kind is MaskKind.BINARY


# --- apply / distortion -----------------------------------------------------

def test_apply_mask_special_cases(rng):
    y = np.abs(rng.standard_normal((6, 9)))
    np.testing.assert_array_equal(masking.apply_mask(y, masking.all_one(y.shape)), y)
    np.testing.assert_array_equal(masking.apply_mask(y, masking.all_zero(y.shape)), 0.0)
    with pytest.raises(ShapeMismatch):
        masking.apply_mask(y, masking.all_one((2, 2)))


@given(mags, mags)
def test_irm_recovers_clean_magnitude_when_aligned(s, n):
    out = masking.apply_mask(s + n, masking.irm(s, n))
    np.testing.assert_allclose(out, s, atol=1e-12, rtol=1e-12)


def test_distortion_all_one_and_all_zero_exact(rng):
    s, n = complex_pair(rng)
    assert np.array_equal(masking.distortion(s, n, masking.all_one(s.shape)), n)
    assert np.array_equal(masking.distortion(s, n, masking.all_zero(s.shape)), -s)


@settings(max_examples=50)
@given(mags, mags)
def test_distortion_irm_vanishes_on_aligned_magnitudes(s, n):
    d = masking.distortion(s, n, masking.irm(s, n))
    assert np.sum(d**2) <= 1e-10 * np.sum(s**2)


def test_distortion_rejects_mask_above_one(rng):
    s, n = complex_pair(rng, (2, 2))
    with pytest.raises(MaskAboveOne):
        masking.distortion(s, n, Mask(np.full((2, 2), 1.5), "psm"))


@given(mags, mags, arrays(np.float64, (4, 6), elements=st.floats(0.0, 1.0)))
def test_enhanced_magnitude_is_speech_plus_distortion(s, n, m):
    mask = Mask(m, "perturbed")
    d = masking.distortion(s, n, mask)
    np.testing.assert_allclose(masking.apply_mask(s + n, mask), np.abs(s + d), atol=1e-12, rtol=1e-12)


# --- report -----------------------------------------------------------------

def brute_report(s, n, m):
    d = n * m - s * (1 - m)
    dn = np.sqrt(sum(abs(v) ** 2 for v in d.ravel()))
    nn = np.sqrt(sum(abs(v) ** 2 for v in n.ravel()))
    dot = sum((np.conj(a) * b).real for a, b in zip(n.ravel(), d.ravel()))
    return {
        "residue": sum(abs(v) ** 2 for v in (n * m).ravel()),
        "attenuation": sum(abs(v) ** 2 for v in (s * (1 - m)).ravel()),
        "d": dn**2,
        "cos": dot / (dn * nn),
    }


def test_report_matches_brute_force(rng):
    s, n = complex_pair(rng, (4, 4))
    m = Mask(rng.uniform(0, 1, (4, 4)), "perturbed")
    rep = masking.analyze_distortion(s, n, m)
    want = brute_report(s, n, m.values)
    assert rep.noise_residue_energy == pytest.approx(want["residue"], rel=1e-12)
    assert rep.speech_attenuation_energy == pytest.approx(want["attenuation"], rel=1e-12)
    assert rep.distortion_energy == pytest.approx(want["d"], rel=1e-12)
    assert rep.deviation_cosine == pytest.approx(want["cos"], rel=1e-12)


def test_report_all_one(rng):
    s, n = complex_pair(rng)
    rep = masking.analyze_distortion(s, n, masking.all_one(s.shape))
    assert rep.deviation_cosine == pytest.approx(1.0, abs=1e-12)
    assert rep.snr_enhanced_db == pytest.approx(rep.snr_noisy_db, abs=1e-12)


def test_report_irm_aligned_caps_snr(rng):
    s, n = complex_pair(rng)
    m = masking.irm(np.abs(s), np.abs(n))
    rep = masking.analyze_distortion(s, n, m, aligned=True)
    assert rep.distortion_energy <= 1e-10 * rep.speech_energy
    assert rep.domain == "aligned_magnitude"
    assert rep.snr_enhanced_db > 250  # capped at 300 when D is exactly zero
    exact = masking.analyze_distortion(np.ones((2, 2)), np.ones((2, 2)), masking.irm(np.ones((2, 2)), np.ones((2, 2))))
    assert exact.snr_enhanced_db == masking.SNR_CAP_DB


def test_deviation_cosine_strictly_below_one(rng):
    s, n = complex_pair(rng)
    m = Mask(rng.uniform(0.05, 0.95, s.shape), "perturbed")
    rep = masking.analyze_distortion(s, n, m)
    assert rep.deviation_cosine < 1.0


# --- perturbed IRM ----------------------------------------------------------

def test_perturbed_zero_level_is_irm(rng):
    s, n = np.abs(rng.standard_normal((5, 5))), np.abs(rng.standard_normal((5, 5)))
    np.testing.assert_array_equal(masking.perturbed_irm(s, n, 0.0, 3).values, masking.irm(s, n).values)


def test_perturbed_deterministic(rng):
    s, n = np.abs(rng.standard_normal((5, 5))), np.abs(rng.standard_normal((5, 5)))
    a = masking.perturbed_irm(s, n, 1.0, 11).values
    b = masking.perturbed_irm(s, n, 1.0, 11).values
    assert a.tobytes() == b.tobytes()
    assert np.all((a >= 0) & (a <= 1))
    with pytest.raises(InvalidLevel):
        masking.perturbed_irm(s, n, 1.5, 0)


def test_perturbed_distortion_grows_with_level():
    r = np.random.default_rng(0)
    s, n = np.abs(r.standard_normal((10, 20))), np.abs(r.standard_normal((10, 20)))
    levels = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    means = [
        np.mean([
            masking.analyze_distortion(s, n, masking.perturbed_irm(s, n, lv, seed)).distortion_energy
            for seed in range(100)
        ])
        for lv in levels
    ]
    assert all(b >= a for a, b in zip(means, means[1:])), means


# --- enhancer spec / utterance enhancement ---------------------------------

@pytest.mark.parametrize(
    "text,kind,level",
    [("irm", "irm", None), ("one", "all_one", None), ("zero", "all_zero", None), ("perturbed:0.3", "perturbed", 0.3)],
)
def test_enhancer_parse(text, kind, level):
    e = EnhancerSpec.parse(text, seed=4)
    assert e.kind == kind and e.noise_level == level
    assert EnhancerSpec.from_dict(e.to_dict()) == e


def test_enhancer_parse_rejects_garbage():
    with pytest.raises(ValueError):
        EnhancerSpec.parse("wiener")


def _mixture(clean, noise, snr):
    return mixing.mix(mixing.MixtureSpec("c", "n", 0, snr), clean, noise)


def test_enhance_all_one_is_roundtrip(clean_wave, noise_wave):
    y, n = _mixture(clean_wave, noise_wave, 3.0)
    out = masking.enhance_utterance(y, EnhancerSpec("all_one"), clean_wave, n)
    np.testing.assert_allclose(out.samples, dsp.istft(dsp.stft(y)).samples, atol=1e-12)


def test_enhance_all_zero_silences(clean_wave, noise_wave):
    y, n = _mixture(clean_wave, noise_wave, 3.0)
    out = masking.enhance_utterance(y, EnhancerSpec("all_zero"), clean_wave, n)
    assert np.sum(out.samples**2) < 1e-10 * np.sum(y.samples**2)


@pytest.mark.parametrize("snr", mixing.PROTOCOL_SNRS)
def test_enhance_irm_raises_snr(clean_wave, noise_wave, snr):
    y, n = _mixture(clean_wave, noise_wave, snr)
    out = masking.enhance_utterance(y, EnhancerSpec("irm"), clean_wave, n)
    before = mixing.measure_snr(clean_wave, y.samples - clean_wave.samples)
    after = mixing.measure_snr(clean_wave, out.samples - clean_wave.samples)
    assert after > before


def test_enhance_accepts_callable(clean_wave, noise_wave):
    y, n = _mixture(clean_wave, noise_wave, 0.0)
    out = masking.enhance_utterance(y, lambda S, N, Y: np.full(Y.values.shape, 0.5), clean_wave, n)
    np.testing.assert_allclose(out.samples, 0.5 * dsp.istft(dsp.stft(y)).samples, atol=1e-12)


def test_enhance_length_mismatch(clean_wave, noise_wave):
    with pytest.raises(ShapeMismatch):
        masking.enhance_utterance(clean_wave, EnhancerSpec(), clean_wave, Waveform(noise_wave.samples[:10]))
