import csv
import math

import numpy as np
import pytest

from latsum.numkernel import LOG_ZERO
from latsum.stirling import (
    StirlingTable,
    brute_force_s2,
    build_table,
    hennecart_f_log,
    ln_of_int,
    measure_envelope_constants,
    simple_form_log,
    stirling_log,
    verify_log_table,
)


@pytest.fixture(scope="module")
def exact_300():
    return build_table(300, "exact")


@pytest.fixture(scope="module")
def log_300():
    return build_table(300, "log")


class TestBuildTable:
    def test_known_small_values(self, exact_300):
        assert exact_300.value(4, 2) == 3
        assert exact_300.value(5, 2) == 10
        assert exact_300.value(6, 3) == 15
        assert exact_300.value(2, 1) == 1
        assert exact_300.value(0, 0) == 1

    def test_zero_pattern(self, exact_300):
        assert exact_300.value(3, 2) == 0
        assert exact_300.value(7, 0) == 0
        assert exact_300.value(10, 6) == 0

    def test_half_diagonal_identity(self, exact_300):
        for q in range(1, 151):
            want = math.factorial(2 * q) // (math.factorial(q) * 2**q)
            assert exact_300.value(2 * q, q) == want

    def test_recurrence_closure(self, exact_300):
        for p in range(2, 301):
            for q in range(1, p // 2 + 1):
                left = exact_300.value(p - 1, q)
                diag = exact_300.value(p - 2, q - 1)
                assert exact_300.value(p, q) == q * left + (p - 1) * diag

    def test_memory_guard(self):
        with pytest.raises(ValueError):
            build_table(5001, "exact")
        with pytest.raises(ValueError):
            build_table(10, "bogus")

    def test_log_mode_zero_pattern(self, log_300):
        assert log_300.log_value(3, 2) == LOG_ZERO
        assert log_300.log_value(2, 1) == 0.0


class TestStirlingLog:
    def test_forced_zero(self, log_300):
        assert stirling_log(log_300, 3, 2).is_zero
        assert stirling_log(log_300, 12, 0).is_zero

    def test_single_partition(self, log_300):
        assert stirling_log(log_300, 2, 1).log_mag == 0.0

    def test_out_of_range(self, log_300):
        with pytest.raises(ValueError):
            stirling_log(log_300, 301, 1)

    def test_log_matches_exact(self, exact_300, log_300):
        worst = verify_log_table(log_300, exact_300, p_limit=300)
        assert worst <= 1e-10


class TestBruteForce:
    def test_hand_cases(self):
        assert brute_force_s2(4, 2) == 3
        assert brute_force_s2(2, 1) == 1
        assert brute_force_s2(0, 0) == 1
        assert brute_force_s2(5, 3) == 0

    def test_half_identity(self):
        for q in range(1, 7):
            assert brute_force_s2(2 * q, q) == math.factorial(2 * q) // (
                math.factorial(q) * 2**q)

    def test_table_agreement(self, exact_300):
        for p in range(0, 11):
            for q in range(0, p // 2 + 2):
                assert brute_force_s2(p, q) == exact_300.value(p, q), (p, q)

    def test_size_guard(self):
        with pytest.raises(ValueError):
            brute_force_s2(15, 3)


class TestHennecart:
    def test_ratio_converges(self, exact_300):
        errs = []
        for p in (100, 300):
            q = p // 3
            ratio = math.exp(hennecart_f_log(p, q).log_mag - exact_300.log_value(p, q))
            errs.append(abs(ratio - 1))
        assert errs[1] < errs[0]
        assert errs[1] < 5e-3

    def test_f_10_3(self, exact_300):
        ratio = math.exp(hennecart_f_log(10, 3).log_mag - exact_300.log_value(10, 3))
        assert abs(ratio - 1) < 0.25

    def test_domain_guard(self):
        with pytest.raises(ValueError):
            hennecart_f_log(10, 5)
        with pytest.raises(ValueError):
            hennecart_f_log(10, 0)


class TestSimpleForm:
    def test_equality_on_half_line(self, exact_300):
        for p in (6, 20, 100):
            q = p // 2
            assert simple_form_log(p, q).log_mag == pytest.approx(
                exact_300.log_value(p, q), abs=1e-10)

    def test_zero_above_half(self):
        assert simple_form_log(10, 6).is_zero
        assert simple_form_log(9, 0).is_zero

    def test_sandwich_over_full_range(self, exact_300):
        from latsum.stirling import ln_simple_form_grid

        lo, hi = math.inf, 0.0
        for p in range(2, 301):
            qs = np.arange(1, p // 2 + 1)
            ln_s2 = np.array([exact_300.log_value(p, int(q)) for q in qs])
            ratios = np.exp(ln_s2 - ln_simple_form_grid(p, qs))
            lo, hi = min(lo, float(ratios.min())), max(hi, float(ratios.max()))
        assert 0 < lo <= hi < math.inf
        # measured sandwich constants stay in a stable window
        assert 0.8 < lo <= 1.0 + 1e-9
        assert hi < 1.1


class TestEnvelopeConstants:
    def test_measured_constants(self, exact_300):
        consts = measure_envelope_constants(exact_300, p_limit=200, binom_limit=40)
        d = consts.as_dict()
        assert 0 < d["stirling_envelope"]["lo"] <= d["stirling_envelope"]["hi"]
        assert 0 < d["hennecart_ratio"]["lo"] <= d["hennecart_ratio"]["hi"]
        assert d["binomial_envelope"]["hi"] == pytest.approx(
            math.sqrt(2 * math.pi), rel=1e-12)


class TestPlumbing:
    def test_ln_of_int_huge(self):
        n = math.factorial(500)
        # ln(500!) via Stirling series as an independent check
        want = (0.5 * math.log(2 * math.pi * 500) + 500 * (math.log(500) - 1)
                + 1 / (12 * 500))
        assert ln_of_int(n) == pytest.approx(want, rel=1e-10)
        with pytest.raises(ValueError):
            ln_of_int(0)

    def test_csv_dump(self, tmp_path, log_300):
        small = build_table(8, "log")
        path = tmp_path / "table.csv"
        small.dump_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["p", "q", "ln_S2"]
        assert len(rows) == 1 + sum(p // 2 + 1 for p in range(9))
        by_key = {(int(r[0]), int(r[1])): float(r[2]) for r in rows[1:]}
        assert by_key[(4, 2)] == pytest.approx(math.log(3), abs=1e-12)
        assert by_key[(3, 1)] == pytest.approx(math.log(brute_force_s2(3, 1)), abs=1e-12)
