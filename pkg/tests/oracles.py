"""Slow, independent reference implementations used by the tests.

Nothing here calls the vectorized code paths of swsim; bit expansion, ADC
rounding and accumulation are re-derived with plain Python integers and
fractions.
"""
from fractions import Fraction

import numpy as np

from swsim.mapper import PAD
from swsim.quant import prune_magnitude, quantize


def bits_of(m, b):
    return [int(c) for c in format(int(m), f"0{b}b")]


def adc_oracle(value, r, fs):
    """Nearest level on the grid ``c * fs / K``, ties away from zero, clamped."""
    if r <= 1:
        return Fraction(0)
    k = 2 ** (r - 1) - 1
    if k >= fs:
        return Fraction(value)
    step = Fraction(fs, k)
    best = None
    for c in range(-k, k + 1):
        level = c * step
        d = abs(Fraction(value) - level)
        if best is None or d < best[0] or (d == best[0] and abs(level) > abs(best[1])):
            best = (d, level)
    return best[1]


def column_sums_oracle(mags, signs, xs, b):
    sums = [0] * b
    for m, s, x in zip(mags, signs, xs):
        for j, bit in enumerate(bits_of(m, b)):
            sums[j] += int(s) * bit * int(x)
    return sums


def simulate_vector_oracle(vm, x, resolutions, fs):
    """Section by section, column by column, with explicit active checks.

    Returns ``(value, conversions, error_bound)``; the bound adds
    ``significance * step / 2`` for quantized active columns and the whole
    column magnitude for dropped ones.
    """
    b = vm.bits
    total = Fraction(0)
    conversions = 0
    bound = Fraction(0)
    for s in range(vm.sources.shape[0]):
        src = vm.sources[s]
        xs = [0 if i == PAD else int(x[i]) for i in src]
        mags = [int(m) for m in vm.magnitudes[s]]
        sums = column_sums_oracle(mags, vm.signs[s], xs, b)
        for j in range(b):
            active = any(bits_of(m, b)[j] for m in mags)
            if not active:
                continue
            r = resolutions[j]
            sig = 2 ** (b - 1 - j)
            if r > 0:
                conversions += 1
            total += sig * adc_oracle(sums[j], r, fs)
            if r <= 1:
                bound += sig * abs(sums[j])
            elif 2 ** (r - 1) - 1 < fs:
                bound += sig * Fraction(fs, 2 ** (r - 1) - 1) / 2
    return total, conversions, bound


def dot_oracle(w_codes, x_codes):
    return sum(int(a) * int(b) for a, b in zip(w_codes, x_codes))


def random_instance(rng, max_f=256, rows_choices=(1, 4, 16, 128), sparsities=(0.0, 0.5, 0.9)):
    """One fuzz case: quantized weights (out x f), quantized activations (f x B) and knobs."""
    f = int(rng.integers(1, max_f + 1))
    b = int(rng.integers(1, 9))
    bx = int(rng.integers(1, 9))
    R = int(rng.choice(rows_choices))
    sparsity = float(rng.choice(sparsities))
    out = int(rng.integers(1, 4))
    batch = int(rng.integers(1, 3))
    sigma = float(rng.uniform(0.05, 2.0))
    w = prune_magnitude(rng.normal(0, sigma, (out, f)), sparsity)
    x = rng.normal(0, 1.0, (f, batch))
    return {
        "f": f,
        "b": b,
        "bx": bx,
        "R": R,
        "sparsity": sparsity,
        "qw": quantize(w, b),
        "qx": quantize(x, bx),
    }


def expected_sorted_sections(magnitudes_row, R):
    nnz = int(np.count_nonzero(magnitudes_row))
    return -(-nnz // R)

