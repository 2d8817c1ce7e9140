"""Intermittent slabs: profile transform, series/physical agreement, scaling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from activeci.slabs import (
    Profile,
    SlabSpec,
    build_profile,
    certify_scaling,
    slab_fourier,
    slab_physical,
    write_scaling_csv,
)


@pytest.fixture(scope="module")
def profile():
    return build_profile("odd-bump")


def test_profile_normalization_and_oddness(profile):
    # L^2 norm over [-1, 1] equals 1 by construction
    val, _ = quad(lambda x: profile(np.array([x]))[0] ** 2, -1.0, 1.0)
    assert abs(val - 1.0) < 1e-10
    x = np.linspace(0.01, 0.99, 25)
    assert np.allclose(profile(-x), -profile(x), atol=1e-15)
    # compactly supported
    assert np.allclose(profile(np.array([1.0, 1.5, -2.0])), 0.0)


def test_profile_norm_constant_frozen(profile):
    # frozen oracle for the normalization constant
    assert abs(profile.norm_const - 3.8603051878895536) < 1e-10


def test_fhat_oracle_against_direct_quadrature(profile):
    # fhat(t) = integral of phi(x) e^{-2 pi i t x} over [-1, 1]
    # = -2i * int_0^1 phi(x) sin(2 pi t x) dx by oddness
    for t in (0.3, 1.0, 2.7):
        re, _ = quad(lambda x: profile(np.array([x]))[0] * math.cos(2 * np.pi * t * x), -1, 1, limit=200)
        im, _ = quad(lambda x: -profile(np.array([x]))[0] * math.sin(2 * np.pi * t * x), -1, 1, limit=200)
        got = profile.fhat(t)
        assert abs(got - complex(re, im)) < 1e-10
    # oddness: fhat(0) = 0, fhat(-t) = conj(fhat(t)) = -fhat(t) (imaginary)
    assert abs(profile.fhat(0.0)) < 1e-12
    assert abs(profile.fhat(0.7) + profile.fhat(-0.7)) < 1e-14
    assert abs(np.real(profile.fhat(0.7))) < 1e-12


def test_slabspec_validation(profile):
    with pytest.raises(ValueError):
        SlabSpec(k=(4, 3), lam=100, eps=0.5, profile=profile)  # not pow2
    with pytest.raises(ValueError):
        SlabSpec(k=(4, 3), lam=256, eps=0.3, profile=profile)  # lam^eps not int
    with pytest.raises(ValueError):
        SlabSpec(k=(4, 3), lam=2, eps=1.0, profile=profile)  # no disjointness
    spec = SlabSpec(k=(4, 3), lam=256, eps=0.5, profile=profile)
    assert spec.harmonic_step == 16


def test_slab_mean_free_and_support(profile):
    spec = SlabSpec(k=(4, 3), lam=64, eps=0.5, profile=profile)
    f = slab_fourier(spec, mode_cap=40)
    assert (0, 0) not in f.coeffs
    assert f.is_hermitian()
    step = spec.harmonic_step
    for xi in f.coeffs:
        # every mode is a multiple of lam^eps k
        assert xi[0] * spec.k[1] == xi[1] * spec.k[0]
        assert xi[0] % (step * spec.k[0]) == 0


def test_poisson_summation_agreement(profile):
    # Fourier-series values match the direct translated-profile sum
    rng = np.random.default_rng(42)
    for lam, eps in [(64, 0.5), (256, 0.5), (256, 0.25)]:
        spec = SlabSpec(k=(4, 3), lam=lam, eps=eps, profile=profile)
        f = slab_fourier(spec)
        pts = rng.uniform(0.0, 1.0, size=(20, 2))
        scale = max(abs(slab_physical(spec, x)) for x in pts)
        scale = max(scale, spec.lam ** ((1 - eps) / 2) * 0.1)
        for x in pts:
            series = sum(
                np.real(a * np.exp(2j * np.pi * np.dot(xi, x)))
                for xi, a in f.coeffs.items()
            )
            direct = slab_physical(spec, x)
            assert abs(series - direct) / scale < 1e-8


def test_l2_norm_is_scale_invariant(profile):
    # ||rho||_{L^2} = ||phi||_{L^2([-1,1])} = 1 at every (lam, eps)
    from activeci.slabs import _line_norm

    for lam, eps in [(64, 0.5), (1024, 0.5), (4096, 0.25)]:
        spec = SlabSpec(k=(4, 3), lam=lam, eps=eps, profile=profile)
        assert abs(_line_norm(spec, 2.0) - 1.0) < 1e-3


def test_certified_scaling_slopes(profile):
    rows = certify_scaling(
        (4, 3), profile, [64, 256, 1024, 4096], 0.5, [1.0, 2.0, np.inf]
    )
    by_p = {}
    for row in rows:
        by_p[row["p"]] = row
    assert abs(by_p[1.0]["fitted_slope"] - (-0.25)) < 0.05 * 1.0
    assert abs(by_p[2.0]["fitted_slope"] - 0.0) < 0.05
    assert abs(by_p["inf"]["fitted_slope"] - 0.25) < 0.05
    for row in rows:
        assert abs(row["deviation"]) < 0.05


def test_scaling_csv_roundtrip(tmp_path, profile):
    rows = certify_scaling((4, 3), profile, [64, 256], 0.5, [2.0])
    path = tmp_path / "scaling.csv"
    write_scaling_csv(rows, path)
    text = path.read_text().splitlines()
    assert text[0] == "p,lam,norm,fitted_slope,target_slope,deviation"
    assert len(text) == 1 + len(rows)


@pytest.mark.parametrize(
    "lam,eps", [(64, 0.5), (256, 0.5), (256, 0.25), (1024, 0.5)]
)
def test_parseval_slab(lam, eps, profile=None):
    prof = build_profile("odd-bump")
    spec = SlabSpec(k=(4, 3), lam=lam, eps=eps, profile=prof)
    f = slab_fourier(spec)
    coeff_l2 = math.sqrt(sum(abs(a) ** 2 for a in f.coeffs.values()))
    # Parseval: series L^2 equals ||phi||_{L^2} = 1 up to the spectral tail
    assert abs(coeff_l2 - 1.0) < 1e-6
