# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Unit tests, and local fixtures for the multiplier module."""
from fractions import Fraction
import math

import numpy as np
import pytest


def packet(center=0.0, width=1.0, frequency=0.0, start=-16, stop=16, count=256):
    """Return a modulated Gaussian sampled on [start, stop)."""
    from sparsedom.signals import SampledFunction

    return SampledFunction.from_callable(
        lambda x: np.exp(-0.5 * ((x - center) / width) ** 2 + 1j * frequency * x),
        start,
        stop,
        count,
    )


def real_triple():
    """Return three real Gaussians on a common grid."""
    return [
        packet(-1.0, 1.0).with_values(packet(-1.0, 1.0).values.real),
        packet(0.5, 1.5).with_values(packet(0.5, 1.5).values.real),
        packet(1.0, 0.8).with_values(packet(1.0, 0.8).values.real),
    ]


def complex_triple():
    """Return three modulated Gaussians on a common grid."""
    return [packet(-1.0, 1.0, 0.7), packet(0.5, 1.5, -0.4), packet(1.0, 0.8, 0.2)]


def test_bump_profile():
    """Test the flat part, the support and the smoothness of the bump."""
    from sparsedom.multiplier import bump

    assert np.all(bump(np.array([0.0, 1 / 32, -1 / 16])) == 1.0)
    assert np.all(bump(np.array([1 / 8, -0.2, 3.0])) == 0.0)
    middle = bump(np.linspace(1 / 16, 1 / 8, 50))
    assert np.all(np.diff(middle) <= 0)
    assert 0 < bump(3 / 32) < 1


def test_gamma_parametrization():
    """Test the default basis, completion from beta and the degenerate case."""
    from sparsedom.multiplier import GammaParametrization
    from sparsedom.multiplier import SHARPNESS_BETA

    default = GammaParametrization.default()
    assert default.delta == pytest.approx(1 / math.sqrt(2.0))
    assert default.eta(0) == pytest.approx(default.beta)
    assert default.line(1.0, 0.0) == pytest.approx(default.beta[0] - default.beta[2])

    sharp = GammaParametrization.from_beta(SHARPNESS_BETA)
    assert sum(sharp.gamma) == pytest.approx(0.0, abs=1e-12)
    assert all(abs(g) > 0.1 for g in sharp.gamma)
    with pytest.raises(ValueError):
        GammaParametrization.from_beta((1.0, 1.0, -2.0))
    with pytest.raises(ValueError):
        GammaParametrization((1.0, 0.0, 0.0), (0.0, 1.0, 0.0))


def test_multiplier_spec_kinds(tmpdir):
    """Test evaluation of every kind and the tabulated loader."""
    from sparsedom.multiplier import counterexample_build
    from sparsedom.multiplier import MultiplierSpec

    with pytest.raises(ValueError):
        MultiplierSpec("square")
    assert np.all(MultiplierSpec("identity").evaluate([1.0, -3.0], 2.0) == 1.0)

    bht = MultiplierSpec("bht_sign")
    assert bht.evaluate(1.0, 0.0) == 1.0
    assert bht.evaluate(-1.0, 0.0) == -1.0
    assert bht.evaluate(2.0, 2.0) == 0.0

    m = counterexample_build([1, -1, 1])
    centers = m.centers()
    assert m.evaluate(centers[1, 0], centers[1, 1]) == pytest.approx(-1.0)
    assert m.evaluate(centers[2, 0], centers[2, 1]) == pytest.approx(1.0)
    assert m.evaluate(centers[0, 0] + 0.01, centers[0, 1]) == 0.0
    assert m.to_json()["signs"] == [1, -1, 1]
    assert m.to_json()["narrowing"] == 256

    path = tmpdir.join("table.csv")
    rows = ["xi1,xi2,re,im"] + [
        f"{a},{b},1.0,0.5" for a in (-1.0, 0.0, 1.0) for b in (-1.0, 0.0, 1.0)
    ]
    path.write("\n".join(rows) + "\n")
    table = MultiplierSpec.from_csv(str(path))
    assert table.evaluate(0.25, -0.5) == pytest.approx(1.0 + 0.5j)
    assert table.evaluate(3.0, 0.0) == 0.0


@pytest.mark.parametrize(
    "signs,size",
    [([], 0), ([1, 0], 2), ([1, -1], 3), ([2], 1)],
)
def test_counterexample_build_rejects(signs, size):
    """Test the validation of signs and sizes."""
    from sparsedom.multiplier import counterexample_build

    with pytest.raises(ValueError):
        counterexample_build(signs, size)


def test_bumps_disjoint():
    """Test that the family has pairwise disjoint supports."""
    from sparsedom.multiplier import bumps_disjoint
    from sparsedom.multiplier import counterexample_build

    assert bumps_disjoint(counterexample_build([1] * 8))
    assert bumps_disjoint(counterexample_build([1, -1, 1, -1], narrowing=1))


def test_decay_constants_identity_and_sign():
    """Test the cumulative and the per order readings on the two basic multipliers."""
    from sparsedom.multiplier import decay_constants
    from sparsedom.multiplier import MultiplierSpec

    identity = MultiplierSpec("identity")
    assert decay_constants(identity, 4, cumulative=False) == [1.0, 0.0, 0.0, 0.0, 0.0]
    assert decay_constants(identity, 4) == [1.0] * 5

    bht = MultiplierSpec("bht_sign")
    assert decay_constants(bht, 4) == [1.0] * 5
    assert decay_constants(bht, 3, cumulative=False) == [1.0, 0.0, 0.0, 0.0]


def test_decay_constants_family_uniform():
    """Test that the decay constants do not depend on M."""
    from sparsedom.multiplier import family_decay_spread

    report = family_decay_spread(sizes=(1, 2, 4, 8), n_max=2)
    assert report["constants"]["1"][0] == pytest.approx(1.0)
    assert all(spread < 0.05 for spread in report["spread"])


def test_identity_quadrature():
    """Test that m = 1 gives the integral of the product."""
    from sparsedom.multiplier import lambda_m_quadrature
    from sparsedom.multiplier import MultiplierSpec

    functions = complex_triple()
    expected = functions[0].step * np.sum(
        functions[0].values * functions[1].values * functions[2].values
    )
    for pad in (1, 2):
        result = lambda_m_quadrature(MultiplierSpec("identity"), functions, pad=pad)
        assert abs(result.value - expected) <= 1e-6 * abs(expected)
        assert result.warnings == []
    assert result.to_json()["inputs"]["pad"] == 2


def test_quadrature_requires_common_grid():
    """Test the input validation."""
    from sparsedom.multiplier import lambda_m_quadrature
    from sparsedom.multiplier import MultiplierSpec

    functions = complex_triple()
    with pytest.raises(ValueError):
        lambda_m_quadrature(MultiplierSpec("identity"), functions[:2])
    with pytest.raises(ValueError):
        lambda_m_quadrature(
            MultiplierSpec("identity"), functions[:2] + [packet(count=128)]
        )
    with pytest.raises(ValueError):
        lambda_m_quadrature(MultiplierSpec("identity"), functions, method="separable")


def test_aliasing_warning():
    """Test that a function with energy near the Nyquist frequency is flagged."""
    from sparsedom.multiplier import lambda_m_quadrature
    from sparsedom.multiplier import MultiplierSpec

    functions = complex_triple()
    functions[1] = packet(0.0, 1.0, 23.0)
    result = lambda_m_quadrature(MultiplierSpec("identity"), functions)
    assert len(result.warnings) == 1
    assert "f2" in result.warnings[0]


def test_disjoint_support_vanishes():
    """Test that frequency supports away from the bumps give zero."""
    from sparsedom.multiplier import counterexample_build
    from sparsedom.multiplier import lambda_m_quadrature

    m = counterexample_build([1, -1], narrowing=1)
    functions = [
        packet(0.0, 4.0, -5.0, -32, 32, 512),
        packet(0.0, 4.0, 0.0, -32, 32, 512),
        packet(0.0, 4.0, 0.0, -32, 32, 512),
    ]
    for method in ("grid", "separable"):
        assert abs(lambda_m_quadrature(m, functions, method=method).value) < 1e-10


def test_separable_matches_grid():
    """Test that both quadratures of a counterexample multiplier agree."""
    from sparsedom.multiplier import counterexample_build
    from sparsedom.multiplier import lambda_m_quadrature

    m = counterexample_build([1, -1], narrowing=1)
    centers = m.centers()
    functions = [
        packet(0.0, 6.0, centers[0, j], -32, 32, 512) for j in range(3)
    ]
    grid = lambda_m_quadrature(m, functions, method="grid").value
    separable = lambda_m_quadrature(m, functions, method="separable").value
    assert abs(grid) > 1e-3
    assert abs(grid - separable) <= 1e-6 * abs(grid)


def test_bilinear_apply_pairs_with_third():
    """Test that int T_m(f1, f2) f3 equals Lambda_m."""
    from sparsedom.multiplier import bilinear_apply
    from sparsedom.multiplier import lambda_m_quadrature
    from sparsedom.multiplier import MultiplierSpec

    functions = complex_triple()
    for kind in ("identity", "bht_sign"):
        m = MultiplierSpec(kind)
        output = bilinear_apply(m, functions[0], functions[1])
        paired = output.step * np.sum(output.values * functions[2].values)
        expected = lambda_m_quadrature(m, functions).value
        assert abs(paired - expected) <= 1e-8 * max(1.0, abs(expected))

    output = bilinear_apply(MultiplierSpec("identity"), functions[0], functions[1])
    assert np.allclose(output.values, functions[0].values * functions[1].values, atol=1e-10)


def test_bht_padding_convergence():
    """Test the sign multiplier against a four times finer frequency grid."""
    from sparsedom.multiplier import lambda_m_quadrature
    from sparsedom.multiplier import MultiplierSpec

    functions = [packet(-1.0, 1.0, 0.7, -64, 64, 512), packet(0.5, 1.5, -0.4, -64, 64, 512)]
    functions.append(packet(1.0, 0.8, 0.2, -64, 64, 512))
    m = MultiplierSpec("bht_sign")
    coarse = lambda_m_quadrature(m, functions).value
    fine = lambda_m_quadrature(m, functions, pad=4).value
    assert abs(fine) > 1e-3
    assert abs(coarse - fine) <= 5e-2 * abs(fine)


def test_translation_invariance():
    """Test that a common shift by whole cells leaves Lambda unchanged."""
    from sparsedom.multiplier import lambda_m_quadrature
    from sparsedom.multiplier import MultiplierSpec

    functions = complex_triple()
    shifted = [f.with_values(np.roll(f.values, 12)) for f in functions]
    for kind in ("identity", "bht_sign"):
        m = MultiplierSpec(kind)
        value = lambda_m_quadrature(m, functions).value
        moved = lambda_m_quadrature(m, shifted).value
        assert abs(value - moved) <= 1e-9 * max(1.0, abs(value))


def test_modulation_invariance():
    """Test a modulation along gamma for the sign multiplier."""
    from sparsedom.multiplier import GammaParametrization
    from sparsedom.multiplier import lambda_m_quadrature
    from sparsedom.multiplier import MultiplierSpec

    functions = complex_triple()
    width = functions[0].size * functions[0].step
    theta = math.sqrt(6.0) * 2 * np.pi * 4 / width
    gamma = GammaParametrization.default().gamma
    x = functions[0].midpoints
    modulated = [
        f.with_values(f.values * np.exp(1j * theta * g * x)) for f, g in zip(functions, gamma)
    ]
    m = MultiplierSpec("bht_sign")
    value = lambda_m_quadrature(m, functions).value
    moved = lambda_m_quadrature(m, modulated).value
    assert abs(value) > 1e-3
    assert abs(value - moved) <= 1e-8 * abs(value)


def test_parity():
    """Test that real inputs give real forms for even m and imaginary forms for the sign."""
    from sparsedom.multiplier import lambda_m_quadrature
    from sparsedom.multiplier import MultiplierSpec

    functions = real_triple()
    identity = lambda_m_quadrature(MultiplierSpec("identity"), functions).value
    assert abs(identity.imag) <= 1e-12 * abs(identity)
    sign = lambda_m_quadrature(MultiplierSpec("bht_sign"), functions).value
    assert abs(sign.imag) > 1e-4
    assert abs(sign.real) <= 1e-9 * abs(sign)


def test_sign_reversal():
    """Test that flipping every sign negates the form."""
    from sparsedom.multiplier import counterexample_build
    from sparsedom.multiplier import lambda_m_quadrature

    signs = [1, -1, -1, 1]
    m = counterexample_build(signs, narrowing=1)
    flipped = counterexample_build([-sign for sign in signs], narrowing=1)
    centers = m.centers()
    functions = [packet(0.0, 6.0, centers[1, j], -32, 32, 512) for j in range(3)]
    value = lambda_m_quadrature(m, functions).value
    assert abs(value) > 1e-3
    assert lambda_m_quadrature(flipped, functions).value == pytest.approx(-value)


def test_vector_valued_form():
    """Test the component sums and the count check."""
    from sparsedom.multiplier import lambda_m_quadrature
    from sparsedom.multiplier import MultiplierSpec
    from sparsedom.multiplier import vector_valued_form
    from sparsedom.signals import VectorSignal

    first, second = complex_triple(), real_triple()
    signals = [VectorSignal([first[j], second[j]], 3) for j in range(3)]
    multipliers = [MultiplierSpec("identity"), MultiplierSpec("bht_sign")]
    report = vector_valued_form(multipliers, signals)
    values = [
        lambda_m_quadrature(multipliers[0], first).value,
        lambda_m_quadrature(multipliers[1], second).value,
    ]
    assert report["absolute"] == pytest.approx(sum(abs(v) for v in values))
    assert report["signed"] == pytest.approx([sum(values).real, sum(values).imag])
    assert report["absolute"] >= math.hypot(*report["signed"]) - 1e-12
    with pytest.raises(ValueError):
        vector_valued_form(multipliers[:1], signals)


def test_multiplier_domination_check():
    """Test that one sparse collection serves every multiplier."""
    from sparsedom.grid import ExponentTuple
    from sparsedom.multiplier import multiplier_domination_check
    from sparsedom.multiplier import MultiplierSpec
    from sparsedom.signals import SampledFunction

    functions = [
        SampledFunction.from_callable(lambda x, c=c: np.exp(-40 * (x - c) ** 2), 0, 1, 128)
        for c in (0.4, 0.5, 0.6)
    ]
    multipliers = [MultiplierSpec("identity"), MultiplierSpec("bht_sign")]
    report = multiplier_domination_check(multipliers, functions, ExponentTuple(2, 2, 2))
    assert len(report["records"]) == 2
    assert report["psf"] > 0
    assert report["grid_type"] in (0, 1, 2)
    assert all(0 <= record["ratio"] < math.inf for record in report["records"])
    assert report["max_ratio"] == max(record["ratio"] for record in report["records"])
    assert isinstance(report["collection_digest"], str)


def test_sharpness_experiment():
    """Test monotone lower bounds, the prediction and the CSV table."""
    from sparsedom.multiplier import sharpness_experiment

    table = sharpness_experiment(Fraction(6, 5), Fraction(6, 5), sizes=(1, 2, 4), seeds=(0,))
    assert table.predicted == pytest.approx(1 / 6)
    bounds = [row["lower_bound"] for row in table.rows]
    assert [row["M"] for row in table.rows] == [1, 2, 4]
    assert all(b > 0 for b in bounds)
    assert all(later >= earlier * (1 - 1e-6) for earlier, later in zip(bounds, bounds[1:]))
    assert math.isfinite(table.exponent)
    assert table.to_csv().splitlines()[0] == "M,lower_bound"
    assert len(table.to_csv().splitlines()) == 4
    with pytest.raises(ValueError):
        sharpness_experiment("inf", 2)


def test_sharpness_warns_outside_growth(caplog):
    """Test the warning when no growth is predicted."""
    import logging

    from sparsedom.multiplier import sharpness_experiment

    with caplog.at_level(logging.WARNING):
        table = sharpness_experiment(2, 2, sizes=(1, 2), seeds=(0,))
    assert table.predicted < 0
    assert "no growth" in caplog.text


def vector_pair(count=512):
    """Return two unit vector signals with r = 3 on [0, 1)."""
    from sparsedom.multiplier import normalize_vector
    from sparsedom.signals import SampledFunction
    from sparsedom.signals import VectorSignal

    def component(c):
        return SampledFunction.from_callable(lambda x: np.exp(-30 * (x - c) ** 2), 0, 1, count)

    first = normalize_vector(VectorSignal([component(0.3), component(0.6)], 3), 3)
    second = normalize_vector(VectorSignal([component(0.5), component(0.7)], 3), 3)
    return first, second


def test_normalize_vector():
    """Test the normalization and the vanishing case."""
    from sparsedom.multiplier import normalize_vector
    from sparsedom.multiplier import vector_norm
    from sparsedom.signals import SampledFunction
    from sparsedom.signals import VectorSignal

    first, _ = vector_pair()
    assert vector_norm(first, 3) == pytest.approx(1.0)
    zero = VectorSignal([SampledFunction(0, 1, np.zeros(4))], 2)
    with pytest.raises(ValueError):
        normalize_vector(zero, 2)


def test_weak_type_sets():
    """Test the measure bounds of the exceptional sets."""
    from sparsedom.grid import ExponentTuple
    from sparsedom.grid import Interval
    from sparsedom.multiplier import HOLE_RATIO
    from sparsedom.multiplier import weak_type_sets

    first, second = vector_pair()
    f3 = Interval(0, 1)
    sets = weak_type_sets(first, second, f3, ExponentTuple(2, 2, 2), 3, 3)
    measures = sets.measures
    assert measures["f3"] == 1
    assert measures["holes"] <= HOLE_RATIO
    assert sets.constant >= 1.0
    assert sets.valid
    assert measures["f3"] - measures["enlarged"] <= measures["major"] <= measures["f3"]
    assert all(f3.contains(interval) for interval in sets.major)
    data = sets.to_json()
    assert set(data) >= {"H", "H_tilde", "F3_prime", "constant", "doublings", "valid"}

    tight = weak_type_sets(first, second, f3, ExponentTuple(2, 2, 2), 3, 3, constant=1e-3)
    assert tight.doublings > 0
    assert tight.measures["holes"] <= HOLE_RATIO

    with pytest.raises(ValueError):
        weak_type_sets(first, second, [], ExponentTuple(2, 2, 2), 3, 3)


def test_maximal_dyadic_dense():
    """Test the selection of maximal dense dyadic intervals."""
    from sparsedom.grid import Interval
    from sparsedom.multiplier import maximal_dyadic_dense

    holes = [(Fraction(1, 4), Fraction(1, 4) + Fraction(1, 256))]
    selected = maximal_dyadic_dense(holes, 1 / 256)
    assert selected == [Interval(Fraction(1, 4), Fraction(1, 8))]
    assert maximal_dyadic_dense([], 1 / 256) == []


def test_isk_check():
    """Test clean and violating exceptional sets."""
    from sparsedom.grid import Interval
    from sparsedom.multiplier import ExceptionalSets
    from sparsedom.multiplier import isk_check
    from sparsedom.signals import SampledFunction

    f3 = SampledFunction(0, 1 / 64, np.ones(64))
    intervals = [Interval(0, Fraction(1, 2)), Interval(Fraction(1, 2), Fraction(1, 2))]
    clean = ExceptionalSets([], [], [Interval(0, 1)], 1.0, 0, {})
    report = isk_check(intervals, clean, f3, 2)
    assert report == {"checked": 2, "violations": [], "holds": True}

    hole = Interval(Fraction(1, 8), Fraction(1, 8))
    dirty = ExceptionalSets([hole], [], [], 1.0, 0, {})
    report = isk_check(intervals, dirty, f3, 2)
    assert not report["holds"]
    assert report["violations"][0]["density"] == pytest.approx(0.25)

    half = f3.with_values(np.concatenate([np.zeros(32), np.ones(32)]))
    assert isk_check(intervals, dirty, half, 2)["checked"] == 1


def test_corvv_range_examples():
    """Test the worked examples and the validation of r."""
    from sparsedom.grid import INF
    from sparsedom.grid import is_admissible
    from sparsedom.multiplier import corvv_range

    holds, q3, witness = corvv_range(2, 2, (3, 3, 3))
    assert holds and q3 is INF
    assert is_admissible(witness, open_tuple=True)
    assert corvv_range(1.1, 1.1, (3, 3, 3)) == (False, INF, None)
    assert corvv_range(4, 4, (3, 3, 3))[1] == 2
    with pytest.raises(ValueError):
        corvv_range(2, 2, (2, 2, 2))
    with pytest.raises(ValueError):
        corvv_range(1, 2, (3, 3, 3))


@pytest.mark.parametrize("q1", [Fraction(6, 5), Fraction(3, 2), 2, 3, "inf"])
@pytest.mark.parametrize("q2", [Fraction(6, 5), Fraction(3, 2), 2, 3, 4])
@pytest.mark.parametrize("r", [(3, 3, 3), (2, 4, 4), ("inf", 2, 2), (4, 2, 4)])
def test_corvv_range_brute_force(q1, q2, r):
    """Test the range check against a search over a lattice of reciprocals."""
    from sparsedom.grid import as_exponent
    from sparsedom.grid import reciprocal
    from sparsedom.multiplier import corvv_lattice_search
    from sparsedom.multiplier import corvv_range

    holds, q3, witness = corvv_range(q1, q2, r)
    bounds = [
        max(reciprocal(as_exponent(q)), reciprocal(as_exponent(value)))
        for q, value in zip((q1, q2, q3), r)
    ]
    axes = [float(b) + np.arange(1, 120) / 120 for b in bounds]
    axes = [axis[axis < 1] for axis in axes]
    a1, a2, a3 = np.meshgrid(*axes, indexing="ij", sparse=True)
    found = np.any(np.maximum(a1, 0.5) + np.maximum(a2, 0.5) + np.maximum(a3, 0.5) < 2)
    assert holds == bool(found)
    assert corvv_lattice_search(q1, q2, r) == bool(found)
    if holds:
        assert all(
            p < b
            for p, b in zip(witness, (1 / bound if bound else math.inf for bound in bounds))
        )
