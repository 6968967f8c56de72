import pytest

from sentikit.crf import TaggedSpan
from sentikit.errors import ContractError
from sentikit.metrics import PRF, SpanScorer, accuracy, f1, span_f1


def H(start, end):
    return TaggedSpan("H", start, end)


def T(start, end):
    return TaggedSpan("T", start, end)


class TestAccuracy:
    def test_fraction_correct(self):
        assert accuracy(["a", "b", "a", "a"], ["a", "b", "b", "a"]) == 0.75

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractError):
            accuracy(["a"], ["a", "b"])

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            accuracy([], [])


class TestF1:
    def test_harmonic_mean(self):
        assert f1(1.0, 0.5) == pytest.approx(2 / 3)

    def test_zero_zero_is_zero(self):
        assert f1(0.0, 0.0) == 0.0


class TestBinarySpanF1:
    def test_any_overlap_counts(self):
        s = SpanScorer(["H"])
        s.add([H(0, 1)], [H(1, 5)])  # one shared token
        b = s.binary("H")
        assert (b.precision, b.recall, b.f1) == (1.0, 1.0, 1.0)

    def test_gold_span_credited_once(self):
        # three predictions all touch the same gold: recall must stay 1.0
        s = SpanScorer(["H"])
        s.add([H(0, 0), H(2, 2), H(4, 4)], [H(0, 5)])
        b = s.binary("H")
        assert b.recall == 1.0
        assert b.precision == 1.0

    def test_role_mismatch_is_a_miss(self):
        s = SpanScorer(["H", "T"])
        s.add([H(0, 2)], [T(0, 2)])
        assert s.binary("H").precision == 0.0
        assert s.binary("T").recall == 0.0

    def test_both_empty_scores_perfect(self):
        s = SpanScorer(["H"])
        s.add([], [])
        assert s.binary("H") == PRF(1.0, 1.0, 1.0)
        assert s.proportional("H") == PRF(1.0, 1.0, 1.0)

    def test_spurious_prediction_costs_precision(self):
        s = SpanScorer(["H"])
        s.add([H(0, 0), H(5, 6)], [H(0, 0)])
        b = s.binary("H")
        assert b.precision == 0.5 and b.recall == 1.0


class TestProportionalSpanF1:
    def test_half_coverage_exact(self):
        # prediction covers 2 of the gold's 4 tokens and nothing else
        s = SpanScorer(["H"])
        s.add([H(0, 1)], [H(0, 3)])
        p = s.proportional("H")
        assert p.precision == pytest.approx(1.0)
        assert p.recall == pytest.approx(0.5)
        assert p.f1 == pytest.approx(2 / 3)

    def test_overlong_prediction_costs_precision(self):
        s = SpanScorer(["H"])
        s.add([H(0, 3)], [H(0, 1)])
        p = s.proportional("H")
        assert p.precision == pytest.approx(0.5)
        assert p.recall == pytest.approx(1.0)

    def test_best_overlap_not_sum(self):
        # a prediction touching two golds is credited with its best match only
        s = SpanScorer(["H"])
        s.add([H(0, 3)], [H(0, 0), H(2, 3)])
        p = s.proportional("H")
        assert p.precision == pytest.approx(2 / 4)


class TestMicroAndReport:
    def test_micro_pools_counts_across_roles(self):
        s = SpanScorer(["H", "T"])
        s.add([H(0, 0)], [H(0, 0)])       # H exact hit
        s.add([T(0, 1)], [T(5, 6)])       # T total miss
        micro = s.report()["micro"]["binary"]
        assert micro.precision == 0.5 and micro.recall == 0.5

    def test_report_has_all_roles(self):
        s = SpanScorer(["H", "T"])
        rep = s.report()
        assert set(rep) == {"H", "T", "micro"}
        assert set(rep["H"]) == {"binary", "prop"}

    def test_span_f1_wrapper(self):
        rep = span_f1([[H(0, 1)]], [[H(0, 1)]], ["H"])
        assert rep["H"]["binary"].f1 == 1.0

    def test_wrapper_length_mismatch(self):
        with pytest.raises(ContractError):
            span_f1([[]], [[], []], ["H"])


class TestBounds:
    def test_metrics_stay_in_unit_interval(self, rng):
        roles = ["H", "T"]
        s = SpanScorer(roles)

        def random_spans():
            out = []
            for role in roles:
                for _ in range(int(rng.integers(0, 3))):
                    a = int(rng.integers(0, 12))
                    out.append(TaggedSpan(role, a, a + int(rng.integers(0, 4))))
            return out

        for _ in range(200):
            s.add(random_spans(), random_spans())
        rep = s.report()
        for role in roles + ["micro"]:
            for kind in ("binary", "prop"):
                prf = rep[role][kind]
                for v in (prf.precision, prf.recall, prf.f1):
                    assert 0.0 <= v <= 1.0
