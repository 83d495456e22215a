"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import pytest

from qcollapse.model import (
    Domain,
    EXISTS,
    FORALL,
    QuantifiedFormula,
    Relation,
)


def rel(name: str, arity: int, domain_size: int, rows) -> Relation:
    return Relation(name, arity, domain_size, frozenset(tuple(r) for r in rows))


def eq_rel(domain_size: int = 2) -> Relation:
    return rel("Eq", 2, domain_size, [(v, v) for v in range(domain_size)])


def nae_rel() -> Relation:
    rows = set(itertools.product(range(2), repeat=3)) - {(0, 0, 0), (1, 1, 1)}
    return rel("NAE", 3, 2, rows)


def impl_rel() -> Relation:
    return rel("Impl", 2, 2, [(0, 0), (0, 1), (1, 1)])


def affine_rel() -> Relation:
    rows = [t for t in itertools.product(range(2), repeat=3) if sum(t) % 2 == 0]
    return rel("Aff", 3, 2, rows)


def formula(domain_size: int, prefix_spec: str, body) -> QuantifiedFormula:
    """prefix_spec like "Ay Ex" builds (forall y, exists x)."""
    prefix = []
    for token in prefix_spec.split():
        q = FORALL if token[0] == "A" else EXISTS
        prefix.append((q, token[1:]))
    return QuantifiedFormula(Domain(domain_size), tuple(prefix), tuple(body))


def naive_truth(phi: QuantifiedFormula) -> bool:
    """Plain recursive first-order evaluation; the independent truth oracle."""

    def rec(i: int, env: dict) -> bool:
        if i == len(phi.prefix):
            return all(c.holds(env) for c in phi.body)
        q, v = phi.prefix[i]
        values = range(phi.domain.size)
        if q == FORALL:
            return all(rec(i + 1, {**env, v: val}) for val in values)
        return any(rec(i + 1, {**env, v: val}) for val in values)

    return rec(0, {})


def naive_winnable(phi: QuantifiedFormula, adversary) -> bool:
    """Memoization-free winnability recursion; the independent game oracle."""

    def rec(i: int, env: dict, u: int) -> bool:
        if i == len(phi.prefix):
            return all(c.holds(env) for c in phi.body)
        q, v = phi.prefix[i]
        if q == FORALL:
            return all(
                rec(i + 1, {**env, v: val}, u + 1)
                for val in sorted(adversary.coords[u])
            )
        return any(rec(i + 1, {**env, v: val}, u) for val in range(phi.domain.size))

    return rec(0, {}, 0)


def enumerate_strategies(phi: QuantifiedFormula):
    """All total strategies in the universal-dependence sense; tiny inputs only."""
    ubefore = phi.universals_before
    d = phi.domain.size
    per_var = []
    for x in phi.existential_vars:
        contexts = list(itertools.product(range(d), repeat=len(ubefore[x])))
        tables = itertools.product(range(d), repeat=len(contexts))
        per_var.append([(x, dict(zip(contexts, t))) for t in tables])
    if not per_var:
        yield {}
        return
    for combo in itertools.product(*per_var):
        yield {x: table for x, table in combo}


def strategy_wins(phi: QuantifiedFormula, tables: dict, coords) -> bool:
    """Replays a raw strategy table against every universal assignment the
    coordinate sets allow."""
    uvars = phi.universal_vars
    ubefore = phi.universals_before
    for combo in itertools.product(*[sorted(c) for c in coords]):
        tau = dict(zip(uvars, combo))
        env = dict(tau)
        for x in phi.existential_vars:
            env[x] = tables[x][tuple(tau[u] for u in ubefore[x])]
        if not all(c.holds(env) for c in phi.body):
            return False
    return True


@pytest.fixture
def two_domain() -> Domain:
    return Domain(2)


@pytest.fixture
def abc_domain() -> Domain:
    return Domain(3, ("a", "b", "c"))
