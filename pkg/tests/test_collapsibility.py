import dataclasses
import itertools

import pytest

from qcollapse.algebra import Congruence, disjoint_maximal_congruence
from qcollapse.collapse import qcsp_via_collapse
from qcollapse.collapsibility import (
    Adversary,
    CertEntry,
    CertificateBuilder,
    adv_family,
    build_certificate,
    composable,
    detect_sink_candidate,
    dominated,
    is_alphabeta_projective,
    lift_through_quotient,
    parse_certificate,
    plan_certificate,
    search_composable,
    serialize_certificate,
    verify_certificate,
)
from qcollapse.corpus import CorpusSpec, instances
from qcollapse.errors import BuildError, StructuralError
from qcollapse.game import constant_adversary, evaluate_truth, full_adversary, winnable
from qcollapse.model import Algebra, Domain
from qcollapse.ops import (
    and_op,
    dual_discriminator,
    from_function,
    majority_op,
    minority_op,
    or_op,
    projection_op,
    semilattice_to_shared,
)
from qcollapse.polymorph import generate_term_operations, op_image


def adv(*coords):
    return Adversary(tuple(frozenset(c) for c in coords))


def shared_algebra():
    return Algebra(Domain(3, ("a", "b", "c")), (semilattice_to_shared(3, 2, "s"),))


ALGEBRAS = {
    "and": Algebra(Domain(2), (and_op(),)),
    "or": Algebra(Domain(2), (or_op(),)),
    "minority": Algebra(Domain(2), (minority_op(),)),
    "majority": Algebra(Domain(2), (majority_op(),)),
    "dualdisc3": Algebra(Domain(3), (dual_discriminator(3),)),
}


class TestAdversaryFamilies:
    def test_example_family_is_exact(self):
        fam = adv_family(4, {1}, 1, {0, 1})
        one, full = frozenset({1}), frozenset({0, 1})
        expected = {
            Adversary((full, one, one, one)),
            Adversary((one, full, one, one)),
            Adversary((one, one, full, one)),
            Adversary((one, one, one, full)),
            Adversary((one, one, one, one)),
        }
        assert set(fam.members()) == expected
        assert len(fam) == 5

    def test_width_zero(self):
        fam = adv_family(3, {0}, 0, {0, 1})
        assert fam.members() == [constant_adversary(3, frozenset({0}))]

    def test_binomial_count(self):
        fam = adv_family(3, {0}, 2, {0, 1, 2})
        assert len(fam) == 1 + 3 + 3
        assert len(fam.members()) == 7

    def test_equal_base_and_wide_collapse(self):
        fam = adv_family(4, {1}, 2, {1})
        assert fam.members() == [constant_adversary(4, frozenset({1}))]

    def test_width_beyond_length_clamps(self):
        fam = adv_family(2, {0}, 5, {0, 1})
        assert len(fam.members()) == 4

    def test_membership(self):
        fam = adv_family(4, {1}, 1, {0, 1})
        assert adv({1}, {0, 1}, {1}, {1}) in fam
        assert adv({0, 1}, {0, 1}, {1}, {1}) not in fam

    def test_empty_coordinate_rejected(self):
        with pytest.raises(StructuralError):
            adv_family(3, set(), 1, {0})


from hypothesis import given, settings
from hypothesis import strategies as st


def _adversary_strategy(n, domain_size):
    coord = st.frozensets(
        st.integers(min_value=0, max_value=domain_size - 1), min_size=1
    )
    return st.tuples(*[coord] * n).map(Adversary)


@settings(max_examples=80, deadline=None)
@given(a=_adversary_strategy(3, 3), b=_adversary_strategy(3, 3), c=_adversary_strategy(3, 3))
def test_domination_is_a_partial_order(a, b, c):
    assert dominated(a, a)
    if dominated(a, b) and dominated(b, a):
        assert a == b
    if dominated(a, b) and dominated(b, c):
        assert dominated(a, c)


@settings(max_examples=60, deadline=None)
@given(
    sources=st.tuples(_adversary_strategy(2, 3), _adversary_strategy(2, 3)),
    data=st.data(),
)
def test_exact_image_is_composable_and_monotone(sources, data):
    s = semilattice_to_shared(3, 2)
    image = Adversary(
        tuple(op_image(s, [b.coords[i] for b in sources]) for i in range(2))
    )
    assert composable(image, s, list(sources))
    # any coordinate-wise shrink of the image stays composable
    shrunk = []
    for coord in image.coords:
        values = sorted(coord)
        kept = data.draw(st.sets(st.sampled_from(values), min_size=1))
        shrunk.append(frozenset(kept))
    assert composable(Adversary(tuple(shrunk)), s, list(sources))


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=5),
    width=st.integers(min_value=0, max_value=3),
    base=st.integers(min_value=0, max_value=2),
)
def test_family_count_matches_binomials(n, width, base):
    import math

    fam = adv_family(n, {base}, width, {0, 1, 2})
    expected = sum(math.comb(n, i) for i in range(min(width, n) + 1))
    members = fam.members()
    assert len(members) == len(set(members)) == len(fam) == expected
    for member in members:
        assert member in fam


class TestDominated:
    def test_smallest_member_dominated_by_all(self):
        fam = adv_family(4, {1}, 1, {0, 1})
        bottom = constant_adversary(4, frozenset({1}))
        for member in fam.members():
            assert dominated(bottom, member)

    def test_reflexive(self):
        a = adv({0}, {0, 1})
        assert dominated(a, a)

    def test_full_not_dominated_by_smaller(self):
        assert not dominated(full_adversary(2, 2), adv({0}, {0, 1}))

    def test_length_mismatch(self):
        with pytest.raises(StructuralError):
            dominated(adv({0}), adv({0}, {1}))


class TestComposable:
    def test_minority_recovers_full_from_source(self):
        m = minority_op()
        assert composable(adv({0, 1}), m, [adv({0, 1}), adv({0}), adv({0})])

    def test_projection_composes_anything(self):
        target = adv({0, 1}, {1})
        assert composable(target, projection_op(2, 2, 1), [target, adv({0}, {0})])

    def test_and_with_unit(self):
        assert composable(adv({0, 1}), and_op(), [adv({1}), adv({0, 1})])
        assert composable(adv({0, 1}), and_op(), [adv({0, 1}), adv({1})])

    def test_arity_mismatch(self):
        with pytest.raises(StructuralError):
            composable(adv({0}), and_op(), [adv({0})])


class TestChainBuilders:
    @pytest.mark.parametrize("n", range(1, 9))
    def test_and_chain(self, n):
        alg = ALGEBRAS["and"]
        cert = build_certificate(CertificateBuilder("and_chain"), alg, n)
        assert verify_certificate(cert, alg, n)
        assert cert.width == 1 and cert.source == frozenset({1})
        assert len(cert.steps()) == n - 1

    @pytest.mark.parametrize("n", range(1, 9))
    def test_unit_element_or(self, n):
        alg = ALGEBRAS["or"]
        cert = build_certificate(CertificateBuilder("unit_element"), alg, n)
        assert verify_certificate(cert, alg, n)
        assert cert.width == 1 and cert.source == frozenset({0})

    @pytest.mark.parametrize("n", range(1, 9))
    def test_maltsev_chain(self, n):
        alg = ALGEBRAS["minority"]
        cert = build_certificate(CertificateBuilder("maltsev_chain", {"source": 0}), alg, n)
        assert verify_certificate(cert, alg, n)
        assert cert.width == 1 and cert.source == frozenset({0})

    @pytest.mark.parametrize("n", range(1, 9))
    def test_dualdisc_chain(self, n):
        alg = ALGEBRAS["dualdisc3"]
        cert = build_certificate(CertificateBuilder("dualdisc_chain"), alg, n)
        assert verify_certificate(cert, alg, n)
        assert cert.width == 1 and cert.source == frozenset({0, 1})

    @pytest.mark.parametrize("n", range(1, 9))
    def test_near_unanimity_width(self, n):
        alg = ALGEBRAS["majority"]
        cert = build_certificate(
            CertificateBuilder("near_unanimity", {"source": 0}), alg, n
        )
        assert verify_certificate(cert, alg, n)
        assert cert.width == 2 and cert.source == frozenset({0})

    def test_singleton(self):
        alg = ALGEBRAS["and"]
        cert = build_certificate(CertificateBuilder("singleton", {"element": 1}), alg, 5)
        assert verify_certificate(cert, alg, 5)
        assert cert.width == 0 and cert.target == frozenset({1})

    def test_wrong_operation_rejected(self):
        with pytest.raises(BuildError):
            build_certificate(CertificateBuilder("maltsev_chain"), ALGEBRAS["and"], 3)

    def test_non_idempotent_rejected(self):
        flip = from_function("nf", 1, 2, lambda x: 1 - x)
        with pytest.raises(BuildError):
            build_certificate(CertificateBuilder("and_chain"), Algebra(Domain(2), (flip,)), 3)


class TestTwoElementDispatch:
    @pytest.mark.parametrize(
        "name,source", [("and", {1}), ("or", {0}), ("minority", {0}), ("majority", {0, 1})]
    )
    def test_dispatch(self, name, source):
        alg = ALGEBRAS[name]
        cert = build_certificate(CertificateBuilder("two_element"), alg, 6)
        assert verify_certificate(cert, alg, 6)
        assert cert.width == 1
        assert cert.source == frozenset(source)

    def test_gset_fails(self):
        alg = Algebra(Domain(2), (projection_op(2, 2, 1),))
        with pytest.raises(BuildError, match="G-set"):
            build_certificate(CertificateBuilder("two_element"), alg, 3)


class TestCompositeBuilders:
    def test_strictly_simple_on_and(self):
        alg = ALGEBRAS["and"]
        for n in (1, 4):
            cert = build_certificate(CertificateBuilder("strictly_simple"), alg, n)
            assert verify_certificate(cert, alg, n)
            assert cert.width == 1 and len(cert.source) == 1

    def test_pair_minimal_on_dualdisc(self):
        alg = ALGEBRAS["dualdisc3"]
        for n in (1, 3):
            cert = build_certificate(CertificateBuilder("pair_minimal"), alg, n)
            assert verify_certificate(cert, alg, n)
            assert len(cert.source) == 1

    def test_pair_minimal_rejects_shared_semilattice(self):
        with pytest.raises(BuildError):
            build_certificate(CertificateBuilder("pair_minimal"), shared_algebra(), 2)

    def test_extends_step(self):
        alg = ALGEBRAS["majority"]
        builder = CertificateBuilder(
            "extends_step",
            {
                "inner": CertificateBuilder("singleton", {"element": 1}),
                "target": frozenset({0, 1}),
            },
        )
        cert = build_certificate(builder, alg, 5)
        assert verify_certificate(cert, alg, 5)
        assert cert.width == 2

    def test_subalgebra_enlarge(self):
        alg = shared_algebra()
        builder = CertificateBuilder(
            "subalgebra_enlarge",
            {"inner": CertificateBuilder("singleton", {"element": 0})},
        )
        cert = build_certificate(builder, alg, 3)
        # {0} is already closed, so nothing grows
        assert cert.target == frozenset({0})
        assert verify_certificate(cert, alg, 3)

    def test_combine_requires_source_containment(self):
        alg = ALGEBRAS["dualdisc3"]
        builder = CertificateBuilder(
            "combine_subsets",
            {
                "first": CertificateBuilder("singleton", {"element": 0}),
                "second": CertificateBuilder("singleton", {"element": 2}),
            },
        )
        with pytest.raises(BuildError):
            build_certificate(builder, alg, 2)

    def test_combine_unions_targets(self):
        alg = ALGEBRAS["dualdisc3"]
        builder = CertificateBuilder(
            "combine_subsets",
            {
                "first": CertificateBuilder("singleton", {"element": 0}),
                "second": CertificateBuilder("singleton", {"element": 0}),
            },
        )
        cert = build_certificate(builder, alg, 2)
        assert cert.target == frozenset({0})
        assert verify_certificate(cert, alg, 2)


def block_mix_algebra():
    def m4(x, y, z):
        t = (x // 2) ^ (y // 2) ^ (z // 2)
        mixed = len({x // 2, y // 2, z // 2}) > 1
        return 2 * t + (x + y + z + (1 if mixed else 0)) % 2

    return Algebra(Domain(4), (from_function("blockmix", 3, 4, m4),))


def block_meet_algebra():
    def f3(x, y):
        if x < 2 and y < 2:
            return x & y
        if x == 2 and y == 2:
            return 2
        return 1 - (x if x < 2 else y)

    return Algebra(Domain(3), (from_function("meet3", 2, 3, f3),))


class TestQuotientLift:
    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_two_block_maltsev_quotient(self, n):
        alg = block_mix_algebra()
        cert = build_certificate(CertificateBuilder("quotient_lift"), alg, n)
        assert verify_certificate(cert, alg, n)
        assert cert.width == 1

    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_semilattice_quotient(self, n):
        alg = block_meet_algebra()
        cert = build_certificate(CertificateBuilder("quotient_lift"), alg, n)
        assert verify_certificate(cert, alg, n)
        # the quotient semilattice has the singleton block {2} as unit
        assert cert.source == frozenset({2})

    def test_identity_congruence_passthrough(self):
        alg = ALGEBRAS["and"]
        ident = Congruence((frozenset({0}), frozenset({1})))
        inner = build_certificate(CertificateBuilder("and_chain"), alg, 3)
        lifted = lift_through_quotient(inner, alg, ident, [0, 1])
        assert verify_certificate(lifted, alg, 3)
        assert lifted.width == 1

    def test_missing_representative(self):
        alg = ALGEBRAS["and"]
        ident = Congruence((frozenset({0}), frozenset({1})))
        inner = build_certificate(CertificateBuilder("and_chain"), alg, 3)
        with pytest.raises(BuildError):
            lift_through_quotient(inner, alg, ident, [0])

    def test_rejects_unverifiable_quotient_cert(self):
        alg = block_meet_algebra()
        cong = disjoint_maximal_congruence(alg)
        bogus = build_certificate(CertificateBuilder("and_chain"), ALGEBRAS["and"], 2)
        wrong_n = dataclasses.replace(bogus, n=3)
        with pytest.raises(BuildError):
            lift_through_quotient(wrong_n, alg, cong, [0, 2])


class TestVerification:
    def test_broken_containment_detected(self):
        alg = ALGEBRAS["and"]
        cert = build_certificate(CertificateBuilder("and_chain"), alg, 4)
        entries = list(cert.entries)
        victim = next(i for i, e in enumerate(entries) if e.op is not None)
        wider = Adversary(tuple(frozenset({0, 1}) for _ in entries[victim].adversary.coords))
        entries[victim] = dataclasses.replace(entries[victim], adversary=wider)
        broken = dataclasses.replace(cert, entries=tuple(entries))
        outcome = verify_certificate(broken, alg, 4)
        assert not outcome and "containment" in outcome.failure

    def test_non_axiom_detected(self):
        alg = ALGEBRAS["and"]
        cert = build_certificate(CertificateBuilder("and_chain"), alg, 4)
        entries = list(cert.entries)
        entries[0] = CertEntry(constant_adversary(4, frozenset({0})))
        broken = dataclasses.replace(cert, entries=tuple(entries))
        outcome = verify_certificate(broken, alg, 4)
        assert not outcome and "axiom" in outcome.failure

    def test_wrong_trace_detected(self):
        alg = Algebra(Domain(2), (and_op(), or_op()))
        cert = build_certificate(
            CertificateBuilder("unit_element", {"op": and_op()}), alg, 3
        )
        entries = list(cert.entries)
        victim = next(i for i, e in enumerate(entries) if e.op is not None)
        entries[victim] = dataclasses.replace(entries[victim], trace=("gen", 1))
        broken = dataclasses.replace(cert, entries=tuple(entries))
        outcome = verify_certificate(broken, alg, 3)
        assert not outcome and "trace" in outcome.failure

    def test_wrong_n_detected(self):
        alg = ALGEBRAS["and"]
        cert = build_certificate(CertificateBuilder("and_chain"), alg, 4)
        assert not verify_certificate(cert, alg, 5)

    def test_forward_reference_detected(self):
        alg = ALGEBRAS["and"]
        cert = build_certificate(CertificateBuilder("and_chain"), alg, 3)
        entries = list(cert.entries)
        victim = next(i for i, e in enumerate(entries) if e.op is not None)
        entries[victim] = dataclasses.replace(
            entries[victim], inputs=(victim,) + entries[victim].inputs[1:]
        )
        broken = dataclasses.replace(cert, entries=tuple(entries))
        outcome = verify_certificate(broken, alg, 3)
        assert not outcome and "forward" in outcome.failure

    def test_result_out_of_range_detected(self):
        alg = ALGEBRAS["and"]
        cert = build_certificate(CertificateBuilder("and_chain"), alg, 3)
        broken = dataclasses.replace(cert, result=len(cert.entries))
        outcome = verify_certificate(broken, alg, 3)
        assert not outcome and "result" in outcome.failure

    def test_result_not_dominating_detected(self):
        alg = ALGEBRAS["and"]
        cert = build_certificate(CertificateBuilder("and_chain"), alg, 3)
        axiom_id = next(
            i for i, e in enumerate(cert.entries)
            if e.op is None and e.adversary != full_adversary(3, 2)
        )
        broken = dataclasses.replace(cert, result=axiom_id)
        outcome = verify_certificate(broken, alg, 3)
        assert not outcome and "dominate" in outcome.failure

    def test_certificate_text_rejects_garbage(self):
        alg = ALGEBRAS["and"]
        with pytest.raises(StructuralError):
            parse_certificate("certificate n=2 width=1 source=1 target=0,1\nnonsense line\nresult 0\n", alg)

    def test_serialization_roundtrip(self):
        for name, alg in ALGEBRAS.items():
            builder, _ = plan_certificate(alg)
            cert = build_certificate(builder, alg, 4)
            text = serialize_certificate(cert, alg.domain.size)
            assert parse_certificate(text, alg) == cert


class TestSearch:
    def test_target_already_axiom(self):
        alg = ALGEBRAS["and"]
        target = constant_adversary(2, frozenset({1}))
        outcome = search_composable(alg, target, [target])
        assert outcome.found and outcome.steps == ()

    def test_and_derivation_found(self):
        alg = ALGEBRAS["and"]
        outcome = search_composable(
            alg, full_adversary(2, 2), adv_family(2, {1}, 1, {0, 1}).members(), arity_cap=2
        )
        assert outcome.found
        # replay the derivation steps
        for step in outcome.steps:
            assert composable(step.adversary, step.op, step.inputs)

    def test_shared_semilattice_exhausts(self):
        alg = shared_algebra()
        axioms = [
            m for x in range(3) for m in adv_family(2, {x}, 1, {0, 1, 2}).members()
        ]
        outcome = search_composable(alg, full_adversary(2, 3), axioms, arity_cap=3)
        assert not outcome.found
        assert outcome.caps["arity_cap"] == 3
        assert not outcome.caps["term_closure_truncated"]

    def test_search_subsumes_builders(self):
        # wherever a chain builder proves composability, the search finds it
        for name in ("and", "minority", "majority"):
            alg = ALGEBRAS[name]
            builder, _ = plan_certificate(alg)
            cert = build_certificate(builder, alg, 3)
            axioms = [
                m
                for a in cert.source
                for m in adv_family(3, {a}, cert.width, range(alg.domain.size)).members()
            ]
            outcome = search_composable(alg, full_adversary(3, 2), axioms)
            assert outcome.found


class TestAlphaBetaProjective:
    alpha, beta = frozenset({0, 2}), frozenset({1, 2})

    def test_shared_semilattice(self):
        assert is_alphabeta_projective(semilattice_to_shared(3, 2), self.alpha, self.beta)

    def test_projection(self):
        assert is_alphabeta_projective(projection_op(3, 2, 2), self.alpha, self.beta)

    def test_dual_discriminator_is_not(self):
        assert not is_alphabeta_projective(dual_discriminator(3), self.alpha, self.beta)

    def test_all_terms_projective(self):
        terms = generate_term_operations(shared_algebra(), 3)
        assert not terms.truncated
        for op in terms.operations:
            assert is_alphabeta_projective(op, self.alpha, self.beta)


class TestSinkDetection:
    def test_shared_semilattice_certified(self):
        verdict = detect_sink_candidate(shared_algebra())
        assert verdict.kind == "sink_certified"

    def test_two_element_never_sink(self):
        for name in ("and", "or", "minority", "majority"):
            assert detect_sink_candidate(ALGEBRAS[name]).kind == "not_sink"

    def test_dualdisc_not_sink_via_certificate(self):
        verdict = detect_sink_candidate(ALGEBRAS["dualdisc3"])
        assert verdict.kind == "not_sink"
        assert "not enclosed" in verdict.reason

    def test_relabeled_sink(self):
        # shared element 0: subalgebras {0,1} and {0,2}
        verdict = detect_sink_candidate(Algebra(Domain(3), (semilattice_to_shared(3, 0),)))
        assert verdict.kind == "sink_certified"

    def test_four_element_inconclusive(self):
        verdict = detect_sink_candidate(block_mix_algebra())
        assert verdict.kind == "inconclusive"

    def test_non_idempotent_rejected(self):
        flip = from_function("nf", 1, 3, lambda x: (x + 1) % 3)
        with pytest.raises(StructuralError):
            detect_sink_candidate(Algebra(Domain(3), (flip,)))


class TestSemanticSoundness:
    def test_composable_winnable_transfer(self):
        # formulas invariant under AND: whenever the sources are winnable and
        # the target composes from them, the target is winnable
        spec = CorpusSpec(
            seed=53, count=40, max_vars=5, max_universals=2, closure_ops=(and_op(),)
        )
        land = and_op()
        checked = 0
        for _, phi in instances(spec):
            n = len(phi.universal_vars)
            if n == 0:
                continue
            members = adv_family(n, {1}, 1, {0, 1}).members()
            for b1, b2 in itertools.product(members, repeat=2):
                if not (winnable(phi, b1) and winnable(phi, b2)):
                    continue
                image = Adversary(
                    tuple(
                        op_image(land, [b1.coords[i], b2.coords[i]])
                        for i in range(n)
                    )
                )
                assert composable(image, land, [b1, b2])
                assert winnable(phi, image)
                checked += 1
        assert checked >= 50

    @pytest.mark.parametrize(
        "algebra_factory,builder,spec_seed,domain_size",
        [
            (block_meet_algebra, CertificateBuilder("quotient_lift"), 61, 3),
            (block_mix_algebra, CertificateBuilder("quotient_lift"), 67, 4),
            (lambda: ALGEBRAS["dualdisc3"], CertificateBuilder("pair_minimal"), 71, 3),
        ],
    )
    def test_hard_builders_imply_reduction_correct(
        self, algebra_factory, builder, spec_seed, domain_size
    ):
        alg = algebra_factory()
        widths = set()
        sources = set()
        for n in (1, 2, 3):
            cert = build_certificate(builder, alg, n)
            assert verify_certificate(cert, alg, n)
            widths.add(cert.width)
            sources.add(cert.source)
        (width,) = widths
        (source,) = sources
        spec = CorpusSpec(
            seed=spec_seed, count=20, domain_size=domain_size, max_vars=4,
            max_universals=2, max_constraints=3, closure_ops=alg.generators,
        )
        for _, phi in instances(spec):
            reduced = qcsp_via_collapse(phi, width, source, width_cap=max(width, 3))
            assert reduced == evaluate_truth(phi)

    def test_certificate_implies_reduction_correct(self):
        # and-closed corpus decided through the certified (width, source)
        alg = ALGEBRAS["and"]
        builder, _ = plan_certificate(alg)
        spec = CorpusSpec(
            seed=59, count=30, max_vars=6, max_universals=3, closure_ops=(and_op(),)
        )
        for _, phi in instances(spec):
            n = max(len(phi.universal_vars), 1)
            cert = build_certificate(builder, alg, n)
            assert verify_certificate(cert, alg, n)
            assert qcsp_via_collapse(phi, cert.width, cert.source) == evaluate_truth(phi)
