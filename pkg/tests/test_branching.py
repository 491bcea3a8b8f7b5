"""Choice routing: sampled draws and exact enumeration agree by design."""

import numpy as np
import pytest

from csbc.branching import (
    BranchCapacityError,
    SampledChooser,
    enumerate_branches,
)
from csbc.streams import derive_rng


def biased_coin_pair(chooser):
    a = chooser.choose("A", (0.75, 0.25), "first")
    b = chooser.choose("B", (0.5, 0.5), "second") if a == 0 else 0
    return (a, b)


class TestEnumerate:
    def test_probabilities_sum_to_one(self):
        leaves = enumerate_branches(biased_coin_pair)
        assert abs(sum(l.probability for l in leaves) - 1.0) < 1e-12
        assert len(leaves) == 3

    def test_leaf_probabilities(self):
        got = {l.result: l.probability for l in enumerate_branches(biased_coin_pair)}
        assert got == {(0, 0): 0.375, (0, 1): 0.375, (1, 0): 0.25}

    def test_deterministic_choice_creates_no_branch(self):
        def run(chooser):
            chooser.choose("A", (1.0, 0.0), "forced")
            return chooser.choose("A", (0.5, 0.5), "real")

        leaves = enumerate_branches(run)
        assert len(leaves) == 2
        # The forced step is not recorded as a branching step.
        assert all(len(l.steps) == 1 for l in leaves)

    def test_capacity_guard(self):
        def run(chooser):
            for i in range(30):
                chooser.choose("A", (0.5, 0.5), f"c{i}")
            return None

        with pytest.raises(BranchCapacityError):
            enumerate_branches(run, max_branches=1000)

    def test_near_one_probability_skips_draw(self):
        def run(chooser):
            return chooser.choose("A", (1.0 - 1e-15, 1e-15), "almost sure")

        leaves = enumerate_branches(run)
        assert len(leaves) == 1 and leaves[0].result == 0


class TestSampled:
    def test_deterministic_given_stream(self):
        r1 = [
            biased_coin_pair(SampledChooser({"A": derive_rng(7, i, 0),
                                             "B": derive_rng(7, i, 1)}))
            for i in range(50)
        ]
        r2 = [
            biased_coin_pair(SampledChooser({"A": derive_rng(7, i, 0),
                                             "B": derive_rng(7, i, 1)}))
            for i in range(50)
        ]
        assert r1 == r2

    def test_frequencies_match_enumeration(self):
        n = 4000
        counts = {}
        for i in range(n):
            chooser = SampledChooser(
                {"A": derive_rng(3, i, 0), "B": derive_rng(3, i, 1)}
            )
            res = biased_coin_pair(chooser)
            counts[res] = counts.get(res, 0) + 1
        exact = {l.result: l.probability for l in enumerate_branches(biased_coin_pair)}
        for outcome, p in exact.items():
            freq = counts.get(outcome, 0) / n
            sigma = np.sqrt(p * (1 - p) / n)
            assert abs(freq - p) < 4 * sigma

    def test_lazy_stream_construction(self):
        built = []

        def factory(name):
            def make():
                built.append(name)
                return derive_rng(0, 0)

            return make

        chooser = SampledChooser({"A": factory("A"), "B": factory("B")})
        chooser.choose("A", (0.5, 0.5), "only A draws")
        assert built == ["A"]

    def test_degenerate_distribution_consumes_nothing(self):
        rng = derive_rng(11, 0)
        before = rng.bit_generator.state["state"]["counter"].copy()
        chooser = SampledChooser({"A": rng})
        assert chooser.choose("A", (0.0, 1.0), "forced") == 1
        after = rng.bit_generator.state["state"]["counter"]
        np.testing.assert_array_equal(before, after)
