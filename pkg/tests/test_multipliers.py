"""Drift-operator symbols: frozen values, structural claims, JSON loading."""

import json

import numpy as np
import pytest

from activeci.fields import SpectralField
from activeci.multipliers import (
    ClaimViolation,
    apply_T,
    check_claims,
    even_part,
    ipm2d,
    ipm3d,
    load_multiplier,
    mg,
    sqg,
)


def test_ipm2d_frozen_values():
    m = ipm2d()
    # oracle: xi = (1, 2), |xi|^2 = 5 -> (2/5, -1/5)
    assert np.allclose(m((1, 2)), [0.4, -0.2])
    # oracle: xi = (0, 1) -> (0, 0)
    assert np.allclose(m((0, 1)), [0.0, 0.0])
    assert np.allclose(m((1, 0)), [0.0, -1.0])


def test_ipm3d_frozen_values():
    m = ipm3d()
    # oracle: xi = (1, 2, 2), |xi|^2 = 9 -> (2/9, 4/9, -5/9)
    assert np.allclose(m((1, 2, 2)), [2.0 / 9.0, 4.0 / 9.0, -5.0 / 9.0])


def test_even_parts_frozen():
    m = ipm2d()
    # oracle: the two slab directions used throughout
    assert np.allclose(even_part(m, (4, 3)), [24.0 / 25.0, -32.0 / 25.0])
    assert np.allclose(even_part(m, (4, -3)), [-24.0 / 25.0, -32.0 / 25.0])


def test_symbol_rejects_origin():
    with pytest.raises(ValueError):
        ipm2d()((0, 0))


@pytest.mark.parametrize("maker", [ipm2d, ipm3d])
def test_ipm_claims_all_consistent(maker):
    report = check_claims(maker())
    for name, rec in report.items():
        assert rec["consistent"], f"{name}: {rec}"
        assert rec["pass"], f"{name}: {rec}"


def test_sqg_is_odd_and_says_so():
    report = check_claims(sqg())
    assert not report["not_odd"]["pass"]
    assert report["not_odd"]["consistent"]
    for name in ("homogeneous_deg0", "divergence_free", "real_output", "bounded"):
        assert report[name]["pass"], name


def test_mg_is_unbounded_and_says_so():
    report = check_claims(mg(), sample=[(l * l, l, 1) for l in range(1, 30)])
    assert not report["bounded"]["pass"]
    assert report["bounded"]["consistent"]
    assert report["bounded"]["max"] > 10.0


def test_apply_T_drops_mean_and_keeps_reality():
    m = ipm2d()
    theta = SpectralField.scalar(
        2,
        {(0, 0): 3.0, (1, 2): 1.0 + 0.5j, (-1, -2): 1.0 - 0.5j},
        reality=True,
    )
    u = apply_T(m, theta)
    assert (0, 0) not in u.coeffs
    assert u.rank == 1
    assert np.allclose(u.coefficient((1, 2)), np.array([0.4, -0.2]) * (1.0 + 0.5j))
    assert u.is_hermitian()


def test_apply_T_rejects_vectors_and_dim_mismatch():
    m = ipm2d()
    vec = SpectralField.vector(2, {(1, 0): np.array([1.0, 0.0])})
    with pytest.raises(ValueError):
        apply_T(m, vec)
    theta3 = SpectralField.scalar(3, {(1, 0, 0): 1.0})
    with pytest.raises(ValueError):
        apply_T(m, theta3)


def test_apply_T_commutes_with_fractional_laplacian():
    from activeci.fields import fractional_laplacian

    m = ipm2d()
    theta = SpectralField.scalar(
        2,
        {(1, 2): 1.0 + 0.5j, (-1, -2): 1.0 - 0.5j, (3, 0): 0.2, (-3, 0): 0.2},
        reality=True,
    )
    a = apply_T(m, fractional_laplacian(theta, 0.7))
    b = fractional_laplacian(apply_T(m, theta), 0.7)
    diff = (a - b).pruned(rel=1e-13)
    assert diff.is_zero() or diff.max_amp() < 1e-13 * b.max_amp()


def test_even_part_reflection_symmetry():
    m = ipm2d()
    for xi in [(1, 0), (4, 3), (-7, 2), (5, -5)]:
        neg = tuple(-c for c in xi)
        assert np.allclose(even_part(m, xi), even_part(m, neg))


def test_even_part_claim_violation_for_fake_symbol():
    from activeci.multipliers import Multiplier

    bad = Multiplier(2, lambda xi: np.array([1j, 0.0]), "bad")
    with pytest.raises(ClaimViolation):
        even_part(bad, (1, 0))


def test_load_multiplier_roundtrip(tmp_path):
    spec = {
        "name": "ipm2d-json",
        "dim": 2,
        "components": [
            {
                "num": [[1, 1, 1.0, 0.0]],
                "den": [[2, 0, 1.0, 0.0], [0, 2, 1.0, 0.0]],
            },
            {
                "num": [[2, 0, -1.0, 0.0]],
                "den": [[2, 0, 1.0, 0.0], [0, 2, 1.0, 0.0]],
            },
        ],
        "claims": {},
    }
    path = tmp_path / "sym.json"
    path.write_text(json.dumps(spec))
    m = load_multiplier(path)
    ref = ipm2d()
    for xi in [(1, 0), (0, 3), (4, 3), (-7, 2)]:
        assert np.allclose(m(xi), ref(xi))
    report = check_claims(m)
    assert all(rec["pass"] for rec in report.values())
