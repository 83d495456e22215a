import itertools

import pytest

from conftest import (
    enumerate_strategies,
    eq_rel,
    formula,
    impl_rel,
    naive_truth,
    naive_winnable,
    rel,
    strategy_wins,
)
from qcollapse.corpus import CorpusSpec, instances
from qcollapse.errors import GuardrailError, StructuralError
from qcollapse.game import (
    Adversary,
    Strategy,
    check_strategy,
    evaluate_truth,
    extract_strategy,
    full_adversary,
    winnable,
)
from qcollapse.model import Constraint


def adv(*coords):
    return Adversary(tuple(frozenset(c) for c in coords))


class TestEvaluateTruth:
    def test_forall_exists_equality(self):
        assert evaluate_truth(formula(2, "Ay Ex", [Constraint(eq_rel(), ("y", "x"))]))

    def test_exists_forall_equality(self):
        assert not evaluate_truth(formula(2, "Ex Ay", [Constraint(eq_rel(), ("x", "y"))]))

    def test_empty_body(self):
        assert evaluate_truth(formula(2, "Ay Ex Az", []))

    def test_two_clause_instance(self):
        # forall y exists x: (y or x) and (not y or not x)
        clause_or = rel("Or", 2, 2, [(0, 1), (1, 0), (1, 1)])
        clause_nand = rel("Nand", 2, 2, [(0, 0), (0, 1), (1, 0)])
        phi = formula(
            2, "Ay Ex",
            [Constraint(clause_or, ("y", "x")), Constraint(clause_nand, ("y", "x"))],
        )
        assert naive_truth(phi) is True
        assert evaluate_truth(phi) is True

    def test_matches_naive_oracle_on_corpus(self):
        spec = CorpusSpec(seed=11, count=120, max_vars=5, max_universals=3)
        for _, phi in instances(spec):
            assert evaluate_truth(phi) == naive_truth(phi)

    def test_guardrail(self):
        body = [Constraint(eq_rel(), (f"v{i}", f"v{i}")) for i in range(40)]
        phi = formula(2, " ".join(f"Av{i}" for i in range(40)), body)
        with pytest.raises(GuardrailError):
            evaluate_truth(phi)


class TestWinnable:
    def test_full_adversary_is_truth(self):
        spec = CorpusSpec(seed=3, count=80, max_vars=5, max_universals=3)
        for _, phi in instances(spec):
            n = len(phi.universal_vars)
            assert winnable(phi, full_adversary(n, phi.domain.size)) == evaluate_truth(phi)

    def test_singleton_adversary_single_check(self):
        phi = formula(2, "Ex Ay", [Constraint(eq_rel(), ("x", "y"))])
        assert winnable(phi, adv({0}))
        assert winnable(phi, adv({1}))
        assert not winnable(phi, adv({0, 1}))

    def test_length_mismatch(self):
        phi = formula(2, "Ay Ex", [Constraint(eq_rel(), ("y", "x"))])
        with pytest.raises(StructuralError):
            winnable(phi, adv({0}, {1}))

    def test_empty_coordinate_rejected(self):
        with pytest.raises(StructuralError):
            adv(set())

    def test_domination_monotonicity(self):
        # bigger adversaries are harder: winnable(big) implies winnable(small)
        spec = CorpusSpec(seed=5, count=40, max_vars=5, max_universals=2)
        for _, phi in instances(spec):
            n = len(phi.universal_vars)
            if n == 0:
                continue
            coords = [
                [frozenset(c) for c in ({0}, {1}, {0, 1})] for _ in range(n)
            ]
            for small in itertools.product(*coords):
                small_adv = Adversary(small)
                big = Adversary(
                    tuple(frozenset({0, 1}) for _ in range(n))
                )
                if winnable(phi, big):
                    assert winnable(phi, small_adv)

    def test_matches_naive_winnability_on_corpus(self):
        import random

        rng = random.Random(321)
        specs = [
            CorpusSpec(seed=210, count=60, max_vars=6, max_universals=4),
            CorpusSpec(seed=211, count=40, max_vars=4, max_universals=2, domain_size=3),
        ]
        for spec in specs:
            for _, phi in instances(spec):
                n = len(phi.universal_vars)
                d = phi.domain.size
                coords = tuple(
                    frozenset(rng.sample(range(d), rng.randint(1, d)))
                    for _ in range(n)
                )
                adversary = Adversary(coords)
                assert winnable(phi, adversary) == naive_winnable(phi, adversary)

    def test_agrees_with_strategy_enumeration(self):
        # tiny instances: compare against the explicit strategy-space semantics
        spec = CorpusSpec(seed=13, count=25, max_vars=3, max_universals=2, max_constraints=2)
        for _, phi in instances(spec):
            n = len(phi.universal_vars)
            coords = tuple(frozenset({0, 1}) for _ in range(n))
            expected = any(
                strategy_wins(phi, tables, coords)
                for tables in enumerate_strategies(phi)
            )
            assert winnable(phi, Adversary(coords)) == expected


class TestStrategies:
    def setup_method(self):
        self.phi = formula(2, "Ay Ex", [Constraint(eq_rel(), ("y", "x"))])
        self.full = full_adversary(1, 2)

    def test_extracted_strategy_copies(self):
        sigma = extract_strategy(self.phi, self.full)
        assert sigma.responses["x"] == {(0,): 0, (1,): 1}
        assert check_strategy(self.phi, self.full, sigma)

    def test_constant_strategy_fails(self):
        sigma = Strategy({"x": {(0,): 0, (1,): 0}})
        assert not check_strategy(self.phi, self.full, sigma)

    def test_undefined_strategy_fails(self):
        sigma = Strategy({"x": {(0,): 0}})
        assert not check_strategy(self.phi, self.full, sigma)

    def test_unwinnable_returns_none(self):
        phi = formula(2, "Ex Ay", [Constraint(eq_rel(), ("x", "y"))])
        assert extract_strategy(phi, full_adversary(1, 2)) is None

    def test_empty_body_any_total_strategy_wins(self):
        phi = formula(2, "Ay Ex", [])
        sigma = Strategy({"x": {(0,): 1, (1,): 1}})
        assert check_strategy(phi, full_adversary(1, 2), sigma)

    def test_extraction_replays_on_corpus(self):
        spec = CorpusSpec(seed=17, count=60, max_vars=5, max_universals=3)
        for _, phi in instances(spec):
            n = len(phi.universal_vars)
            adversary = full_adversary(n, phi.domain.size)
            sigma = extract_strategy(phi, adversary)
            if sigma is None:
                assert not winnable(phi, adversary)
            else:
                assert check_strategy(phi, adversary, sigma)

    def test_horn_style_instance(self):
        phi = formula(
            2, "Ay1 Ex1 Ay2 Ex2",
            [
                Constraint(impl_rel(), ("y1", "x1")),
                Constraint(impl_rel(), ("y2", "x2")),
                Constraint(impl_rel(), ("x1", "x2")),
            ],
        )
        adversary = full_adversary(2, 2)
        sigma = extract_strategy(phi, adversary)
        assert sigma is not None
        assert check_strategy(phi, adversary, sigma)

    def test_dump_format(self):
        sigma = extract_strategy(self.phi, self.full)
        assert sigma.dump() == "x | 0 | 0\nx | 1 | 1\n"
