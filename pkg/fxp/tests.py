from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from sic.errors import DataError

from .arithmetic import (
    FormatMismatchError,
    FxpComplex,
    FxpFormat,
    FxpReal,
    InvalidFormatError,
    OpCounter,
    adder_tree,
    cmul3,
    dequantize,
    fxp_add,
    fxp_sum,
    mac_reduce,
    quantize,
    quantize_array,
    round_shift,
    sequential_sum,
    shift_raw,
)


class FxpFormatTests(SimpleTestCase):

    def test_range_matches_width(self):
        fmt = FxpFormat(8, 6)
        self.assertEqual(fmt.raw_max, 127)
        self.assertEqual(fmt.raw_min, -128)
        self.assertEqual(fmt.max_value, 2 - 2 ** -6)
        self.assertEqual(fmt.min_value, -2.0)

    def test_invalid_formats_rejected(self):
        for total, frac in [(1, 0), (33, 4), (8, 8), (8, -1)]:
            with self.assertRaises(InvalidFormatError):
                FxpFormat(total, frac)

    def test_int_bits_preset(self):
        self.assertEqual(FxpFormat.with_int_bits(25), FxpFormat(25, 21))
        self.assertEqual(FxpFormat.with_int_bits(4).frac_bits, 0)


class QuantizeTests(SimpleTestCase):

    def test_zero(self):
        self.assertEqual(quantize(0.0, FxpFormat(16, 12)).raw, 0)

    def test_exactly_representable(self):
        v = quantize(1.0, FxpFormat(8, 6))
        self.assertEqual(v.raw, 64)
        self.assertEqual(v.value, 1.0)
        self.assertFalse(v.overflow)

    def test_non_finite_rejected(self):
        fmt = FxpFormat(16, 12)
        for x in (float('nan'), float('inf'), -float('inf')):
            with self.assertRaises(DataError):
                quantize(x, fmt)
        with self.assertRaises(DataError):
            quantize_array([0.5, float('nan')], fmt)

    def test_saturation_flagged(self):
        v = quantize(100.0, FxpFormat(8, 6))
        self.assertEqual(v.raw, 127)
        self.assertEqual(v.value, 1.984375)
        self.assertTrue(v.overflow)
        lattice = [r / 64 for r in range(-128, 128)]
        self.assertEqual(max(lattice), v.value)
        self.assertEqual(quantize(-100.0, FxpFormat(8, 6)).raw, -128)

    def test_ties_to_even(self):
        fmt = FxpFormat(8, 0)
        self.assertEqual(quantize(2.5, fmt).raw, 2)
        self.assertEqual(quantize(3.5, fmt).raw, 4)
        self.assertEqual(quantize(-2.5, fmt).raw, -2)

    def test_error_within_half_lsb(self):
        fmt = FxpFormat(16, 12)
        rng = np.random.default_rng(1)
        for x in rng.uniform(-7.9, 7.9, 2000):
            v = quantize(x, fmt)
            self.assertLessEqual(abs(v.value - x), 2 ** -13)

    def test_monotone(self):
        fmt = FxpFormat(10, 5)
        xs = np.sort(np.random.default_rng(2).uniform(-40, 40, 5000))
        raws = [quantize(x, fmt).raw for x in xs]
        self.assertTrue(all(a <= b for a, b in zip(raws, raws[1:])))

    def test_round_trip_exhaustive(self):
        for total in range(2, 13):
            for frac in (0, total // 2, total - 1):
                fmt = FxpFormat(total, frac)
                for raw in range(fmt.raw_min, fmt.raw_max + 1):
                    v = FxpReal(raw, fmt)
                    self.assertEqual(quantize(dequantize(v), fmt), v)

    def test_array_path_matches_scalar(self):
        fmt = FxpFormat(12, 7)
        xs = np.random.default_rng(3).uniform(-20, 20, 500)
        np.testing.assert_array_equal(quantize_array(xs, fmt), [quantize(x, fmt).raw for x in xs])


class AddTests(SimpleTestCase):

    def test_exact_lattice(self):
        fmt = FxpFormat(16, 12)
        self.assertEqual(fxp_add(quantize(0.25, fmt), quantize(0.5, fmt)).value, 0.75)

    def test_saturates_at_max(self):
        fmt = FxpFormat(16, 12)
        top = FxpReal(fmt.raw_max, fmt)
        result = fxp_add(top, top)
        self.assertEqual(result.raw, fmt.raw_max)
        self.assertTrue(result.overflow)

    def test_matches_wide_integer_oracle(self):
        fmt = FxpFormat(12, 4)
        rng = np.random.default_rng(4)
        for a, b in rng.integers(fmt.raw_min, fmt.raw_max + 1, size=(3000, 2)):
            expected = min(max(int(a) + int(b), fmt.raw_min), fmt.raw_max)
            x, y = FxpReal(int(a), fmt), FxpReal(int(b), fmt)
            self.assertEqual(fxp_add(x, y).raw, expected)
            self.assertEqual(fxp_add(y, x).raw, expected)

    def test_format_mismatch(self):
        with self.assertRaises(FormatMismatchError):
            fxp_add(quantize(1.0, FxpFormat(16, 12)), quantize(1.0, FxpFormat(16, 10)))

    def test_sum_order_is_left_to_right(self):
        fmt = FxpFormat(8, 0)
        values = [FxpReal(100, fmt), FxpReal(100, fmt), FxpReal(-100, fmt)]
        # (100 + 100) saturates to 127 before the subtraction.
        self.assertEqual(fxp_sum(values).raw, 27)
        self.assertEqual(fxp_sum([values[0], values[2], values[1]]).raw, 100)


class Cmul3Tests(SimpleTestCase):

    def test_identity(self):
        fmt = FxpFormat(16, 12)
        one = FxpComplex.from_complex(1 + 0j, fmt)
        rng = np.random.default_rng(5)
        for z in rng.uniform(-3, 3, (200, 2)):
            x = FxpComplex.from_complex(complex(*z), fmt)
            y = cmul3(one, x)
            self.assertLessEqual(abs(y.re.raw - x.re.raw), 1)
            self.assertLessEqual(abs(y.im.raw - x.im.raw), 1)

    def test_three_mult_identity_in_exact_arithmetic(self):
        rng = np.random.default_rng(6)
        for a, b, c, d in rng.integers(-10 ** 6, 10 ** 6, size=(1000, 4)):
            a, b, c, d = (Fraction(int(v), 977) for v in (a, b, c, d))
            s1, s2, s3 = a * c, b * d, (a + b) * (c + d)
            self.assertEqual(s1 - s2, a * c - b * d)
            self.assertEqual(s3 - s1 - s2, a * d + b * c)

    def test_wide_mode_rounds_exact_product_once(self):
        fmt = FxpFormat(20, 14)
        rng = np.random.default_rng(7)
        for ar, ai, br, bi in rng.integers(-2 ** 15, 2 ** 15, size=(1000, 4)):
            x = FxpComplex(FxpReal(int(ar), fmt), FxpReal(int(ai), fmt))
            y = FxpComplex(FxpReal(int(br), fmt), FxpReal(int(bi), fmt))
            re_exact = x.re.exact * y.re.exact - x.im.exact * y.im.exact
            im_exact = x.re.exact * y.im.exact + x.im.exact * y.re.exact
            product = cmul3(x, y, wide=True)
            clamp = lambda v: min(max(v, fmt.raw_min), fmt.raw_max)
            self.assertEqual(product.re.raw, clamp(round(re_exact * fmt.scale)))
            self.assertEqual(product.im.raw, clamp(round(im_exact * fmt.scale)))

    def test_quantized_path_close_to_float(self):
        fmt = FxpFormat(24, 16)
        rng = np.random.default_rng(8)
        for z in rng.uniform(-4, 4, (500, 4)):
            x = FxpComplex.from_complex(complex(z[0], z[1]), fmt)
            y = FxpComplex.from_complex(complex(z[2], z[3]), fmt)
            self.assertAlmostEqual(cmul3(x, y).value, x.value * y.value, delta=4 * fmt.resolution)

    def test_internal_saturation_flagged(self):
        fmt = FxpFormat(8, 4)
        x = FxpComplex.from_complex(-8 - 8j, fmt)
        product = cmul3(x, x)
        # (-8)(-8) already saturates the first partial product
        self.assertTrue(product.re.overflow)
        self.assertTrue(product.im.overflow)
        wide = cmul3(x, x, wide=True)
        self.assertFalse(wide.re.overflow)
        self.assertTrue(wide.im.overflow)
        self.assertEqual(wide.im.raw, fmt.raw_max)

    def test_in_range_product_not_flagged(self):
        fmt = FxpFormat(16, 12)
        x = FxpComplex.from_complex(0.5 - 0.25j, fmt)
        for wide in (False, True):
            product = cmul3(x, x, wide=wide)
            self.assertFalse(product.re.overflow)
            self.assertFalse(product.im.overflow)

    def test_op_counter(self):
        fmt = FxpFormat(16, 12)
        counter = OpCounter()
        x = FxpComplex.from_complex(0.5 - 0.25j, fmt)
        for _ in range(17):
            cmul3(x, x, counter)
        self.assertEqual(counter.as_tuple(), (3 * 17, 5 * 17))

    def test_format_mismatch(self):
        with self.assertRaises(FormatMismatchError):
            cmul3(FxpComplex.from_complex(1j, FxpFormat(16, 12)), FxpComplex.from_complex(1j, FxpFormat(16, 8)))


class ReductionTests(SimpleTestCase):

    def test_single_lane_is_sequential(self):
        fmt = FxpFormat(8, 0)
        products = np.array([100, 100, -100, 5])
        self.assertEqual(int(mac_reduce(products, 1, fmt)), int(sequential_sum(list(products), fmt)))
        self.assertEqual(int(mac_reduce(products, 1, fmt)), 32)

    def test_lanes_change_observable_result(self):
        fmt = FxpFormat(8, 0)
        products = np.array([100, 100, -100, -100])
        # lanes=2: (100 - 100) + (100 - 100) = 0 without saturation
        self.assertEqual(int(mac_reduce(products, 2, fmt)), 0)
        self.assertEqual(int(mac_reduce(products, 1, fmt)), -73)

    def test_add_count_is_terms_minus_one(self):
        fmt = FxpFormat(16, 8)
        for n_terms in range(1, 12):
            for lanes in range(1, n_terms + 1):
                counter = OpCounter()
                mac_reduce(np.ones((3, n_terms), dtype=np.int64), lanes, fmt, counter)
                self.assertEqual(counter.adds, 3 * (n_terms - 1))

    def test_empty_lanes_cost_no_adds(self):
        fmt = FxpFormat(16, 8)
        products = np.array([[3, -5], [7, 1]], dtype=np.int64)
        for lanes in (2, 3, 8):
            counter = OpCounter()
            result = mac_reduce(products, lanes, fmt, counter)
            np.testing.assert_array_equal(result, [-2, 8])
            self.assertEqual(counter.adds, 2)

    def test_adder_tree_pairs_ascending(self):
        fmt = FxpFormat(8, 0)
        # three lanes: the last lane is carried up, (a + b) + c
        self.assertEqual(int(adder_tree([120, 20, -30], fmt)), 97)
        self.assertEqual(int(adder_tree([120, -30, 20, 10], fmt)), 120)

    def test_round_shift_half_even(self):
        np.testing.assert_array_equal(round_shift([5, 7, -5, -7, 6], 1), [2, 4, -2, -4, 3])

    def test_shift_raw_saturates_left(self):
        fmt = FxpFormat(8, 4)
        np.testing.assert_array_equal(shift_raw([100, -100, 3], 2, fmt), [127, -128, 12])
        np.testing.assert_array_equal(shift_raw([6, 10], -2, fmt), [2, 2])
