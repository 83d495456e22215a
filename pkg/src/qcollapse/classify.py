"""Classification front ends for two-element, three-element, and conservative
constraint languages.

Positive verdicts carry a verified collapsibility certificate; hardness
verdicts carry the algebraic witness (a G-set factor, or the failure of all
four two-element dispatch operations) together with citation tags naming the
classification results relied on. Every capped search embeds its caps.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

from .algebra import Factor, has_gset_factor
from .collapsibility import (
    Certificate,
    CertificateBuilder,
    build_certificate,
    plan_certificate,
    verify_certificate,
)
from .cspsolve import CspInstance, solve_csp
from .errors import BuildError, GuardrailError, StructuralError
from .model import Algebra, Constraint, ConstraintLanguage, Operation
from .ops import and_op, dual_discriminator, majority_op, minority_op, or_op, semilattice_to_shared
from .polymorph import (
    discover_polymorphisms,
    is_polymorphism_of_language,
    polymorphism_failure,
    tag_operation,
)

SAMPLE_CERTIFICATE_N = 4


@dataclass
class ClassificationVerdict:
    label: str  # P_certified | NP_hard_certified | PSPACE_complete_cited | unresolved | inconclusive
    citations: tuple[str, ...]
    builder: CertificateBuilder | None = None
    certificate: Certificate | None = None
    reduction_width: int | None = None
    reduction_source: frozenset[int] | None = None
    witness: dict = field(default_factory=dict)
    caps: dict = field(default_factory=dict)


def _certified_p(
    label_citations: tuple[str, ...],
    algebra: Algebra,
    caps: dict,
    builder: CertificateBuilder | None = None,
) -> ClassificationVerdict:
    if builder is None:
        builder, notes = plan_certificate(algebra)
        if notes:
            caps = dict(caps, planning_notes=tuple(notes))
    cert = build_certificate(builder, algebra, SAMPLE_CERTIFICATE_N)
    check = verify_certificate(cert, algebra, SAMPLE_CERTIFICATE_N)
    if not check:
        raise BuildError(f"certificate failed verification: {check.failure}")
    return ClassificationVerdict(
        "P_certified",
        label_citations,
        builder=builder,
        certificate=cert,
        reduction_width=cert.width,
        reduction_source=cert.source,
        caps=caps,
    )


def classify_two_element(language: ConstraintLanguage) -> ClassificationVerdict:
    """Complete dichotomy over {0,1}: one of AND, OR, majority, minority as
    polymorphism yields a tractable, certified reduction; otherwise the
    idempotent-polymorphism algebra is a G-set and the problem is cited
    PSPACE-complete."""
    if language.domain.size != 2:
        raise StructuralError("two-element classification needs a two-element domain")
    candidates = (and_op(), or_op(), majority_op(), minority_op())
    hits = [op for op in candidates if is_polymorphism_of_language(op, language)]
    caps = {"dispatch_ops": tuple(op.name for op in candidates)}
    if hits:
        algebra = Algebra(language.domain, tuple(hits))
        return _certified_p(
            ("two-element-qcsp-classification", "collapse-reduction-soundness"),
            algebra,
            caps,
            CertificateBuilder("two_element"),
        )
    witnesses = {}
    for op in candidates:
        for rel in language.relations:
            failure = polymorphism_failure(op, rel)
            if failure is not None:
                rows, image = failure
                witnesses[op.name] = {
                    "relation": rel.name,
                    "rows": rows,
                    "image": image,
                }
                break
    return ClassificationVerdict(
        "PSPACE_complete_cited",
        ("two-element-qcsp-classification",),
        witness=witnesses,
        caps=caps,
    )


def find_polymorphism_with_shape(
    language: ConstraintLanguage,
    arity: int,
    forced: Mapping[tuple[int, ...], int],
    name: str = "shaped",
) -> Operation | None:
    """Search for a polymorphism whose table honors the forced entries, by
    solving a CSP whose variables are the free table cells.

    Every choice of rows from a relation yields one constraint reusing that
    relation over the cells it touches, so the search is complete.
    """
    d = language.domain.size
    cells = list(itertools.product(range(d), repeat=arity))
    for cell, value in forced.items():
        if len(cell) != arity or not (0 <= value < d):
            raise StructuralError("forced entry out of range")
    var_of = {c: "t" + "_".join(str(v) for v in c) for c in cells}
    constraints = set()
    for rel in language.relations:
        rows = rel.sorted_tuples()
        for choice in itertools.product(rows, repeat=arity):
            cols = tuple(tuple(t[j] for t in choice) for j in range(rel.arity))
            args = tuple(
                forced[c] if c in forced else var_of[c] for c in cols
            )
            constraints.add(Constraint(rel, args))
    free = tuple(var_of[c] for c in cells if c not in forced)
    solution = solve_csp(CspInstance(language.domain, free, tuple(sorted(constraints, key=str))))
    if solution is None:
        return None
    table = tuple(
        forced[c] if c in forced else solution[var_of[c]] for c in cells
    )
    op = Operation(name, arity, d, table)
    assert is_polymorphism_of_language(op, language)
    return op


def _maltsev_template(d: int) -> dict[tuple[int, int, int], int]:
    forced = {}
    for x in range(d):
        for y in range(d):
            forced[(x, x, y)] = y
            forced[(y, x, x)] = y
    return forced


def _majority_template(d: int) -> dict[tuple[int, int, int], int]:
    forced = {}
    for x in range(d):
        for y in range(d):
            forced[(x, x, y)] = x
            forced[(x, y, x)] = x
            forced[(y, x, x)] = x
    return forced


def discovered_generators(
    language: ConstraintLanguage, arity_cap: int, candidate_cap: int
) -> tuple[tuple[Operation, ...], dict]:
    """Idempotent polymorphisms by exhaustive sweep where the guardrail
    allows, topped up with targeted ternary template searches; projections are
    dropped since they never constrain the structure."""
    d = language.domain.size
    found: list[Operation] = []
    swept_to = 0
    for k in range(1, arity_cap + 1):
        try:
            for op in discover_polymorphisms(language, k, candidate_cap):
                if op.arity == k and not tag_operation(op).projection:
                    found.append(op)
            swept_to = k
        except GuardrailError:
            break
    targeted = []
    templates_ran: tuple[str, ...] = ()
    if arity_cap >= 3 and swept_to < 3:
        templates_ran = ("dual_discriminator", "maltsev", "majority")
        dd = dual_discriminator(d)
        if is_polymorphism_of_language(dd, language):
            targeted.append(dd)
        maltsev = find_polymorphism_with_shape(language, 3, _maltsev_template(d), "maltsev")
        if maltsev is not None:
            targeted.append(maltsev)
        majority = find_polymorphism_with_shape(language, 3, _majority_template(d), "majority")
        if majority is not None:
            targeted.append(majority)
    caps = {
        "exhaustive_arity": swept_to,
        "arity_cap": arity_cap,
        "candidate_cap": candidate_cap,
        "targeted_templates": templates_ran,
    }
    return tuple(found) + tuple(targeted), caps


def _factor_witness(factor: Factor) -> dict:
    return {
        "subalgebra": tuple(sorted(factor.universe)),
        "blocks": tuple(tuple(sorted(b)) for b in factor.blocks),
        "quotient_size": factor.quotient.domain.size,
    }


def classify_three_element(
    language: ConstraintLanguage, arity_cap: int = 3, candidate_cap: int = 100_000
) -> ClassificationVerdict:
    """Classification over a three-element domain, outside the zone where the
    shared-element semilattice is a polymorphism (there the problem is only
    known coNP-hard, and the verdict is `unresolved`)."""
    if language.domain.size != 3:
        raise StructuralError("three-element classification needs a three-element domain")
    for shared in range(3):
        shape = semilattice_to_shared(3, shared)
        if is_polymorphism_of_language(shape, language):
            return ClassificationVerdict(
                "unresolved",
                ("three-element-semilattice-conp-hardness",),
                witness={"semilattice_shared_element": shared},
            )
    generators, caps = discovered_generators(language, arity_cap, candidate_cap)
    algebra = Algebra(language.domain, generators)
    gset, factor = has_gset_factor(algebra)
    if gset:
        return ClassificationVerdict(
            "NP_hard_certified",
            ("gset-factor-np-hardness", "three-element-qcsp-classification"),
            witness=_factor_witness(factor),
            caps=caps,
        )
    try:
        return _certified_p(
            ("three-element-qcsp-classification", "collapse-reduction-soundness"),
            algebra,
            caps,
        )
    except BuildError as err:
        return ClassificationVerdict(
            "inconclusive",
            ("three-element-qcsp-classification",),
            witness={"builder_failure": str(err)},
            caps=caps,
        )


def classify_conservative(
    language: ConstraintLanguage, arity_cap: int = 3, candidate_cap: int = 100_000
) -> ClassificationVerdict:
    """Dichotomy for languages containing every nonempty subset of the domain
    as a unary relation: a G-set factor means NP-hard, otherwise every pair of
    elements spans a subalgebra and the pair-minimal builder certifies the
    reduction."""
    d = language.domain.size
    unary = {
        frozenset(t[0] for t in rel.tuples)
        for rel in language.relations
        if rel.arity == 1
    }
    for size in range(1, d + 1):
        for subset in itertools.combinations(range(d), size):
            if frozenset(subset) not in unary:
                raise StructuralError(
                    f"conservative classification needs every nonempty subset as a "
                    f"unary relation; missing {set(subset)}"
                )
    if d == 1:
        return _certified_p(
            ("conservative-qcsp-classification",),
            Algebra(language.domain, ()),
            {},
            CertificateBuilder("singleton", {"element": 0}),
        )
    generators, caps = discovered_generators(language, arity_cap, candidate_cap)
    algebra = Algebra(language.domain, generators)
    gset, factor = has_gset_factor(algebra)
    if gset:
        return ClassificationVerdict(
            "NP_hard_certified",
            ("gset-factor-np-hardness", "conservative-qcsp-classification"),
            witness=_factor_witness(factor),
            caps=caps,
        )
    try:
        return _certified_p(
            ("conservative-qcsp-classification", "collapse-reduction-soundness"),
            algebra,
            caps,
            CertificateBuilder("pair_minimal"),
        )
    except BuildError as err:
        return ClassificationVerdict(
            "inconclusive",
            ("conservative-qcsp-classification",),
            witness={"builder_failure": str(err)},
            caps=caps,
        )
