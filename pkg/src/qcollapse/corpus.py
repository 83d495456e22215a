"""Seeded random instance generation.

All randomness flows through one `random.Random(seed)` so identical parameters
reproduce identical corpora byte for byte. Relations can be closed under a set
of operations, which makes those operations polymorphisms by construction.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterator, Sequence

from .model import (
    Constraint,
    ConstraintLanguage,
    Domain,
    EXISTS,
    FORALL,
    Operation,
    QuantifiedFormula,
    Relation,
)
from .polymorph import close_relation_under


@dataclass
class CorpusSpec:
    seed: int = 0
    count: int = 100
    domain_size: int = 2
    relation_count: int = 2
    max_relation_arity: int = 3
    max_vars: int = 6
    max_universals: int = 3
    max_constraints: int = 4
    constant_chance: float = 0.15
    closure_ops: tuple[Operation, ...] = ()


def random_relation(
    rng: random.Random,
    name: str,
    domain_size: int,
    max_arity: int,
    closure_ops: Sequence[Operation] = (),
) -> Relation:
    arity = rng.randint(1, max_arity)
    rows = [t for t in itertools.product(range(domain_size), repeat=arity) if rng.random() < 0.5]
    if not rows:
        rows = [tuple(rng.randrange(domain_size) for _ in range(arity))]
    rel = Relation(name, arity, domain_size, frozenset(rows))
    for op in closure_ops:
        rel = close_relation_under(rel, op)
    return rel


def random_language(rng: random.Random, spec: CorpusSpec) -> ConstraintLanguage:
    relations = tuple(
        random_relation(rng, f"R{i}", spec.domain_size, spec.max_relation_arity, spec.closure_ops)
        for i in range(spec.relation_count)
    )
    return ConstraintLanguage(Domain(spec.domain_size), relations)


def random_formula(
    rng: random.Random, language: ConstraintLanguage, spec: CorpusSpec
) -> QuantifiedFormula:
    var_count = rng.randint(1, spec.max_vars)
    names = [f"v{i}" for i in range(var_count)]
    prefix = []
    universals = 0
    for name in names:
        if universals < spec.max_universals and rng.random() < 0.5:
            prefix.append((FORALL, name))
            universals += 1
        else:
            prefix.append((EXISTS, name))
    body = []
    for _ in range(rng.randint(1, spec.max_constraints)):
        rel = language.relations[rng.randrange(len(language.relations))]
        args: list[str | int] = []
        for _ in range(rel.arity):
            if rng.random() < spec.constant_chance:
                args.append(rng.randrange(language.domain.size))
            else:
                args.append(names[rng.randrange(var_count)])
        body.append(Constraint(rel, tuple(args)))
    return QuantifiedFormula(language.domain, tuple(prefix), tuple(body))


def instances(spec: CorpusSpec) -> Iterator[tuple[ConstraintLanguage, QuantifiedFormula]]:
    """The seeded corpus: a fresh language plus formula per instance."""
    rng = random.Random(spec.seed)
    for _ in range(spec.count):
        language = random_language(rng, spec)
        yield language, random_formula(rng, language, spec)
