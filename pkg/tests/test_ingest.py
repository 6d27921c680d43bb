"""Record ingestion: quantizer, bipartition, empirical joint, release plans."""

import numpy as np
import pytest

from preaudit import (
    CharacteristicSpec,
    apply_release_plan,
    binarize_characteristic,
    build_empirical_joint,
    build_release_plan,
    fit_quantizer,
    interval_marginal,
)
from preaudit.ingest import (
    EQUAL_FREQUENCY,
    EQUAL_WIDTH,
    Quantizer,
    RecordSet,
    read_records_csv,
)

from conftest import BINARY_PAIR, make_binary_pair


class TestQuantizer:
    def test_equal_frequency_quartiles(self):
        values = np.arange(1.0, 101.0)
        quant = fit_quantizer(values, EQUAL_FREQUENCY, 4)
        assert quant.interval_count == 4
        counts = np.bincount(quant.assign(values), minlength=4)
        assert counts.min() >= 24 and counts.max() <= 26

    def test_equal_width_cuts(self):
        values = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        quant = fit_quantizer(values, EQUAL_WIDTH, 4)
        np.testing.assert_allclose(quant.cut_points, [1.0, 2.0, 3.0])

    def test_intervals_are_right_open(self):
        quant = Quantizer(EQUAL_WIDTH, (1.0, 2.0))
        got = quant.assign(np.array([0.5, 1.0, 1.5, 2.0, 9.0]))
        np.testing.assert_array_equal(got, [0, 1, 1, 2, 2])

    def test_too_few_distinct_values(self):
        with pytest.raises(ValueError, match="distinct"):
            fit_quantizer(np.array([1.0, 1.0, 2.0]), EQUAL_FREQUENCY, 3)

    def test_tied_quantiles_rejected(self):
        values = np.array([1.0] * 50 + [2.0, 3.0, 4.0])
        with pytest.raises(ValueError, match="tied"):
            fit_quantizer(values, EQUAL_FREQUENCY, 4)

    def test_constant_column_rejected_equal_width(self):
        with pytest.raises(ValueError, match="constant"):
            fit_quantizer(np.array([2.0, 2.0, 2.0]), EQUAL_WIDTH, 2)

    def test_too_few_intervals(self):
        with pytest.raises(ValueError):
            fit_quantizer(np.arange(10.0), EQUAL_FREQUENCY, 1)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            fit_quantizer(np.array([1.0, np.nan, 2.0]), EQUAL_WIDTH, 2)

    def test_json_dict(self):
        quant = Quantizer(EQUAL_WIDTH, (0.5,))
        assert quant.to_json_dict() == {
            "strategy": EQUAL_WIDTH, "cut_points": [0.5],
        }

    def test_decreasing_cuts_rejected(self):
        with pytest.raises(ValueError, match="increasing"):
            Quantizer(EQUAL_WIDTH, (2.0, 1.0))


class TestBipartition:
    def test_informative_split_found(self):
        # values A and B always land low, C lands high: best split {A,B}|{C}
        rng = np.random.default_rng(3)
        labels = list("AABB" * 25 + "CCCC" * 25)
        intervals = np.array([0] * 100 + [1] * 100)
        part = binarize_characteristic(intervals, labels, ("A", "B", "C"))
        assert set(part.first) == {"A", "B"}
        assert set(part.second) == {"C"}
        assert part.mi == pytest.approx(1.0, abs=1e-9)

    def test_uninformative_tie_break(self):
        # labels independent of intervals: every split scores zero, so the
        # lexicographic rule keeps the first value alone
        labels = ["A", "B", "C", "A", "B", "C"]
        intervals = np.array([0, 0, 0, 1, 1, 1])
        part = binarize_characteristic(intervals, labels, ("A", "B", "C"))
        assert part.first == ("A",)
        assert part.second == ("B", "C")
        assert part.mi == pytest.approx(0.0, abs=1e-12)

    def test_two_values_identity(self):
        labels = ["A", "B", "A", "B"]
        intervals = np.array([0, 0, 1, 1])
        part = binarize_characteristic(intervals, labels, ("A", "B"))
        assert part.first == ("A",)
        assert part.second == ("B",)

    def test_contiguous_restriction(self):
        # the best unrestricted split {A,C}|{B} is not order-respecting
        labels = list("A" * 30 + "B" * 30 + "C" * 30)
        intervals = np.array([0] * 30 + [1] * 30 + [0] * 30)
        free = binarize_characteristic(intervals, labels, ("A", "B", "C"))
        assert set(free.first) == {"A", "C"}
        contig = binarize_characteristic(intervals, labels, ("A", "B", "C"),
                                         contiguous=True)
        assert contig.first in (("A",), ("A", "B"))

    def test_value_cap(self):
        labels = [f"v{i}" for i in range(21)]
        with pytest.raises(ValueError, match="cap"):
            binarize_characteristic(np.zeros(21, dtype=int), labels,
                                    tuple(labels))

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            binarize_characteristic(np.array([0]), ["X"], ("A", "B", "C"))


class TestRecordSet:
    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError, match="unknown value"):
            RecordSet(BINARY_PAIR, ("r1",), np.array([1.0]),
                      (("midland",), ("north",)))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            RecordSet(BINARY_PAIR, ("r1", "r2"), np.array([1.0]),
                      (("low", "low"), ("north", "south")))


class TestReadCsv(object):
    def _write(self, tmp_path, text):
        path = tmp_path / "records.csv"
        path.write_text(text)
        return str(path)

    def test_round_trip(self, tmp_path):
        path = self._write(
            tmp_path,
            "id,value,income,region\n"
            "r1,1.5,low,north\n"
            "r2,2.5,high,south\n",
        )
        rs = read_records_csv(path, BINARY_PAIR)
        assert rs.ids == ("r1", "r2")
        np.testing.assert_allclose(rs.values, [1.5, 2.5])
        assert rs.labels[0] == ("low", "high")
        assert rs.labels[1] == ("north", "south")

    def test_missing_column(self, tmp_path):
        path = self._write(tmp_path, "id,value,income\nr1,1.0,low\n")
        with pytest.raises(ValueError, match="region"):
            read_records_csv(path, BINARY_PAIR)

    def test_non_numeric_value(self, tmp_path):
        path = self._write(
            tmp_path,
            "id,value,income,region\nr1,abc,low,north\n",
        )
        with pytest.raises(ValueError, match="non-numeric"):
            read_records_csv(path, BINARY_PAIR)

    def test_empty_file(self, tmp_path):
        path = self._write(tmp_path, "id,value,income,region\n")
        with pytest.raises(ValueError, match="no records"):
            read_records_csv(path, BINARY_PAIR)


class TestEmpiricalJoint:
    def test_counts_over_n(self):
        specs = BINARY_PAIR
        rs = RecordSet(
            specs,
            tuple(f"r{i}" for i in range(4)),
            np.array([1.0, 1.0, 3.0, 3.0]),
            (("low", "low", "high", "low"),
             ("north", "south", "south", "north")),
        )
        quant = Quantizer(EQUAL_WIDTH, (2.0,))
        dist = build_empirical_joint(rs, quant)
        np.testing.assert_allclose(
            dist.probs,
            [[0.25, 0.25, 0.0, 0.0], [0.25, 0.0, 0.0, 0.25]],
            atol=1e-15,
        )

    def test_grouping_merges_values(self):
        spec = (
            CharacteristicSpec("size", ("s", "m", "l"), "private"),
            CharacteristicSpec("region", ("north", "south"), "nonprivate"),
        )
        rs = RecordSet(
            spec,
            ("a", "b", "c"),
            np.array([0.5, 1.5, 2.5]),
            (("s", "m", "l"), ("north", "north", "south")),
        )
        quant = Quantizer(EQUAL_WIDTH, (1.0, 2.0))
        dist = build_empirical_joint(
            rs, quant, {"size": (("s", "m"), ("l",))}
        )
        assert dist.characteristics[0].values == ("s|m", "l")
        assert dist.combination_count == 4
        assert float(dist.probs.sum()) == pytest.approx(1.0, abs=1e-15)

    def test_grouping_must_cover_values(self):
        spec = (
            CharacteristicSpec("size", ("s", "m", "l"), "private"),
            CharacteristicSpec("region", ("north", "south"), "nonprivate"),
        )
        rs = RecordSet(spec, ("a",), np.array([0.5]), (("s",), ("north",)))
        quant = Quantizer(EQUAL_WIDTH, (1.0,))
        with pytest.raises(ValueError, match="cover"):
            build_empirical_joint(rs, quant, {"size": (("s", "m"),)})


class TestReleasePlan:
    def test_pushforward_matches_target(self, d1):
        target = make_binary_pair([
            [0.35, 0.10, 0.05, 0.00],
            [0.00, 0.05, 0.20, 0.25],
        ])
        plan = build_release_plan(d1, target)
        for r in range(4):
            push = d1.probs[:, r] @ plan.couplings[r]
            np.testing.assert_allclose(push, target.probs[:, r], atol=1e-12)

    def test_rows_are_stochastic(self, d1):
        target = make_binary_pair([
            [0.05, 0.05, 0.25, 0.25],
            [0.30, 0.10, 0.00, 0.00],
        ])
        plan = build_release_plan(d1, target)
        np.testing.assert_allclose(plan.couplings.sum(axis=2), 1.0, atol=1e-9)
        assert np.all(plan.couplings >= 0.0)

    def test_identity_when_unchanged(self, d1):
        plan = build_release_plan(d1, d1)
        for r in range(4):
            np.testing.assert_allclose(plan.couplings[r], np.eye(2),
                                       atol=1e-12)

    def test_marginal_mismatch_rejected(self, d1):
        other = make_binary_pair([
            [0.25, 0.25, 0.05, 0.05],
            [0.05, 0.05, 0.15, 0.15],
        ])
        with pytest.raises(ValueError, match="mismatch"):
            build_release_plan(d1, other)

    def test_apply_is_seed_deterministic(self, d1):
        target = make_binary_pair([
            [0.35, 0.15, 0.25, 0.00],
            [0.00, 0.00, 0.00, 0.25],
        ])
        plan = build_release_plan(d1, target)
        intervals = np.array([0, 0, 1, 1, 0, 1])
        combos = np.array([0, 1, 2, 3, 3, 0])
        one = apply_release_plan(plan, intervals, combos,
                                 np.random.default_rng(5))
        two = apply_release_plan(plan, intervals, combos,
                                 np.random.default_rng(5))
        np.testing.assert_array_equal(one, two)

    def test_apply_respects_deterministic_rows(self, d1):
        plan = build_release_plan(d1, d1)
        intervals = np.array([0, 1, 1, 0])
        combos = np.array([0, 0, 3, 2])
        out = apply_release_plan(plan, intervals, combos,
                                 np.random.default_rng(11))
        np.testing.assert_array_equal(out, intervals)

    def test_sampled_frequencies_approach_target(self, d1):
        target = make_binary_pair([
            [0.15, 0.05, 0.15, 0.15],
            [0.20, 0.10, 0.10, 0.10],
        ])
        plan = build_release_plan(d1, target)
        rng = np.random.default_rng(13)
        # release many records from cell (0, a) and compare frequencies with
        # the coupling row
        n = 4000
        out = apply_release_plan(plan, np.zeros(n, dtype=int),
                                 np.zeros(n, dtype=int), rng)
        freq = np.bincount(out, minlength=2) / n
        np.testing.assert_allclose(freq, plan.couplings[0, 0], atol=0.03)
