from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swsim.errors import InvalidConfig, ShapeError
from swsim.mapper import SectionConfig, build_matrix_mapping, build_vector_mapping
from swsim.quant import QuantizedTensor, quantize
from swsim.xbar import (
    AdcProfile,
    adc_quantize,
    exact_reference,
    full_scale,
    lossless_resolution,
    section_column_sums,
    simulate_matmul,
    simulate_section,
    simulate_vector,
)

from oracles import adc_oracle, dot_oracle, random_instance, simulate_vector_oracle

EXAMPLE_B = [7, 0, 1, 0, 2, 0, 1, 0]
X_B = [1, 0, 3, 0, 2, 0, 1, 0]


def qvec(codes, bits=3):
    return QuantizedTensor.from_codes(codes, bits=bits)


def test_adc_quantize_examples():
    assert adc_quantize(-1, 10, 6) == -1
    # hand oracle: K = 3, step = 2, 3/2 = 1.5 -> 2 -> 4
    assert adc_oracle(3, 3, 6) == 4
    assert adc_quantize(3, 3, 6) == 4
    assert adc_quantize(5, 0, 6) == 0
    assert adc_quantize(-100, 0, 1) == 0
    # K = 1, step 6: 7/6 rounds to 1, clamp keeps 1
    assert adc_quantize(7, 2, 6) == 6
    assert adc_quantize(1, 1, 6) == 0


@settings(max_examples=500, deadline=None)
@given(st.integers(1, 300), st.integers(0, 11), st.data())
def test_adc_quantize_matches_brute_force(fs, r, data):
    v = data.draw(st.integers(-fs, fs))
    assert Fraction(adc_quantize(v, r, fs)) == adc_oracle(v, r, fs)


def test_profile_helpers():
    fs = full_scale(128, 8)
    assert fs == 128 * 255
    r = lossless_resolution(fs)
    assert 2 ** (r - 1) - 1 >= fs > 2 ** (r - 2) - 1
    assert AdcProfile.lossless(8, fs).is_lossless
    assert not AdcProfile.fixed(10, 8, fs).is_lossless
    with pytest.raises(InvalidConfig):
        AdcProfile((1, -1), 5)
    with pytest.raises(InvalidConfig):
        AdcProfile((1, 1), 0)


def test_section_column_sums_examples():
    vm = build_vector_mapping(qvec(EXAMPLE_B), SectionConfig(2, "sorted"))
    s0, s1 = vm.sections
    assert section_column_sums(s0, [3, 1]).tolist() == [0, 0, 4]
    assert section_column_sums(s1, [2, 1]).tolist() == [1, 3, 1]
    assert section_column_sums(s1, [0, 0]).tolist() == [0, 0, 0]
    with pytest.raises(ShapeError):
        section_column_sums(s1, [1, 2, 3])


def test_simulate_section_examples():
    vm = build_vector_mapping(qvec(EXAMPLE_B), SectionConfig(2, "sorted"))
    prof = AdcProfile.lossless(3, full_scale(2, 2))
    s0, s1 = vm.sections
    assert simulate_section(s0, [3, 1], prof) == 4
    assert simulate_section(s1, [2, 1], prof) == 4 * 1 + 2 * 3 + 1 * 1
    empty = build_vector_mapping(qvec([0, 0]), SectionConfig(2, "unsorted")).sections[0]
    assert not empty.active_mask.any()
    assert simulate_section(empty, [5, 5], prof) == 0


def test_simulate_vector_example_b():
    oracle = dot_oracle(EXAMPLE_B, X_B)
    assert oracle == 15
    prof = AdcProfile.fixed(10, 3, full_scale(2, 2))
    for order in ("sorted", "unsorted", "shuffled"):
        vm = build_vector_mapping(qvec(EXAMPLE_B), SectionConfig(2, order, seed=5))
        acc, log = simulate_vector(vm, np.array(X_B), prof)
        assert acc == 15
        assert log.num_sections == vm.num_sections
    vm = build_vector_mapping(qvec([0] * 8), SectionConfig(2, "sorted"))
    assert simulate_vector(vm, np.array(X_B), prof)[0] == 0


def test_conversion_log_counts():
    prof = AdcProfile((10, 0, 10), full_scale(2, 2))
    vm = build_vector_mapping(qvec(EXAMPLE_B), SectionConfig(2, "sorted"))
    _, log = simulate_vector(vm, np.array(X_B), prof)
    # active [0,0,1], [1,1,1]; column 1 has no ADC
    assert log.performed.astype(int).tolist() == [[0, 0, 1], [1, 0, 1]]
    assert log.conversions == 3
    recs = list(log.records())
    assert len(recs) == 6
    assert all(perf <= (act and r > 0) for _, _, act, r, perf in recs)


def test_exact_reference():
    assert exact_reference(qvec(EXAMPLE_B), np.array(X_B)).tolist() == [15]
    x = np.array([[3, -2], [5, 1]])
    assert exact_reference(QuantizedTensor.from_codes([[1, 0]], bits=1), x).tolist() == [[3, -2]]
    assert not exact_reference(np.zeros((2, 2), dtype=int), x).any()
    with pytest.raises(ShapeError):
        exact_reference(np.zeros((2, 3), dtype=int), x)


def test_simulate_matmul_composition_and_zero_profile():
    q = qvec(EXAMPLE_B)
    mm = build_matrix_mapping(q, SectionConfig(2, "sorted"))
    prof = AdcProfile.lossless(3, full_scale(2, 2))
    res = simulate_matmul(mm, np.array(X_B), prof)
    acc, _ = simulate_vector(mm.rows[0], np.array(X_B), prof)
    assert res.outputs.tolist() == [[acc]]
    assert res.max_abs == 0 and res.rmse == 0 and res.exact
    res0 = simulate_matmul(mm, np.array(X_B), AdcProfile.fixed(0, 3, full_scale(2, 2)))
    assert res0.outputs.tolist() == [[0]]
    assert res0.conversions == 0
    assert res0.max_abs == 15


def test_simulate_matmul_dequantized_scaling():
    rng = np.random.default_rng(1)
    qw = quantize(rng.normal(size=(3, 20)), 6)
    qx = quantize(rng.normal(size=(20, 2)), 5)
    mm = build_matrix_mapping(qw, SectionConfig(8, "sorted"))
    res = simulate_matmul(mm, qx, AdcProfile.lossless(6, full_scale(8, 5)))
    ref = (qw.codes @ qx.codes) * qw.scale * qx.scale
    np.testing.assert_allclose(res.dequantized, ref, rtol=1e-12)


def test_workers_match_sequential():
    rng = np.random.default_rng(2)
    inst = random_instance(rng)
    mm = build_matrix_mapping(inst["qw"], SectionConfig(inst["R"], "sorted"))
    prof = AdcProfile.fixed(4, inst["b"], full_scale(inst["R"], inst["bx"]))
    a = simulate_matmul(mm, inst["qx"], prof, workers=1)
    b = simulate_matmul(mm, inst["qx"], prof, workers=4)
    assert a.outputs.tolist() == b.outputs.tolist()


@pytest.mark.parametrize("seed", range(40))
def test_vectorized_path_matches_section_oracle(seed):
    """Reduced-resolution simulation equals the slow section-by-section oracle."""
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, max_f=64)
    b, R, bx = inst["b"], inst["R"], inst["bx"]
    fs = full_scale(R, bx)
    res = tuple(int(r) for r in rng.integers(0, lossless_resolution(fs) + 2, b))
    prof = AdcProfile(res, fs)
    x = inst["qx"].codes[:, 0]
    for order in ("sorted", "unsorted"):
        mm = build_matrix_mapping(inst["qw"], SectionConfig(R, order))
        for vm in mm.rows:
            acc, log = simulate_vector(vm, x, prof)
            want, conv, _ = simulate_vector_oracle(vm, x, res, fs)
            assert Fraction(acc) == want
            assert log.conversions == conv
            per_section = sum(
                Fraction(simulate_section(s, x[np.where(vm.sources[k] < 0, 0, vm.sources[k])] * (vm.sources[k] >= 0), prof))
                for k, s in enumerate(vm.sections)
            )
            assert per_section == want
