"""Structural analysis of finite idempotent algebras: subalgebras, congruences,
quotients, factors, G-sets, and the enclosure/connectivity predicates used by
the collapsibility classifier.

All global enumerations are restricted to universes of at most
MAX_ENUM_UNIVERSE elements so every sweep stays exhaustive.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import GuardrailError, StructuralError
from .model import Algebra, Domain, Operation
from .polymorph import op_image

MAX_ENUM_UNIVERSE = 6


@dataclass(frozen=True)
class SubalgebraInfo:
    universe: frozenset[int]
    proper: bool
    maximal_proper: bool
    nontrivial: bool


@dataclass(frozen=True)
class SubalgebraSet:
    algebra: Algebra
    entries: tuple[SubalgebraInfo, ...]

    def universes(self) -> list[frozenset[int]]:
        return [e.universe for e in self.entries]

    def maximal_proper(self) -> list[frozenset[int]]:
        return [e.universe for e in self.entries if e.maximal_proper]


@dataclass(frozen=True)
class Congruence:
    """A partition of the universe whose induced equivalence relation is
    invariant under all generators."""

    blocks: tuple[frozenset[int], ...]

    def __post_init__(self):
        canon = tuple(sorted((frozenset(b) for b in self.blocks), key=lambda b: min(b)))
        object.__setattr__(self, "blocks", canon)
        if any(not b for b in canon):
            raise StructuralError("congruence blocks must be nonempty")
        universe = sorted(v for b in canon for v in b)
        if len(universe) != len(set(universe)):
            raise StructuralError("congruence blocks must be disjoint")

    def block_of(self, element: int) -> int:
        for i, b in enumerate(self.blocks):
            if element in b:
                return i
        raise StructuralError(f"element {element} not covered by the congruence")

    def relates(self, a: int, b: int) -> bool:
        return self.block_of(a) == self.block_of(b)


@dataclass(frozen=True)
class Factor:
    """A homomorphic image of a subalgebra: the quotient of the restriction of
    the algebra to `universe` by `congruence` (stated on re-indexed elements)."""

    universe: frozenset[int]
    congruence: Congruence
    quotient: Algebra
    # block i of the quotient corresponds to this set of original elements
    blocks: tuple[frozenset[int], ...]


def _check_universe(algebra: Algebra):
    if algebra.domain.size > MAX_ENUM_UNIVERSE:
        raise GuardrailError(
            f"universe of size {algebra.domain.size} exceeds the enumeration cap "
            f"of {MAX_ENUM_UNIVERSE}"
        )


def is_closed(algebra: Algebra, subset: frozenset[int]) -> bool:
    return all(op_image(g, [subset] * g.arity) <= subset for g in algebra.generators)


def generated_subalgebra(algebra: Algebra, seed: Sequence[int]) -> frozenset[int]:
    """Least generator-closed superset of the seed, by fixed-point iteration."""
    current = frozenset(seed)
    if not current:
        raise StructuralError("seed must be nonempty")
    if any(not (0 <= v < algebra.domain.size) for v in current):
        raise StructuralError("seed element out of range")
    while True:
        grown = current
        for g in algebra.generators:
            grown = grown | op_image(g, [current] * g.arity)
        if grown == current:
            return current
        current = grown


def enumerate_subalgebras(algebra: Algebra) -> SubalgebraSet:
    """All generator-closed nonempty subsets, with propriety/maximality flags."""
    _check_universe(algebra)
    n = algebra.domain.size
    closed = []
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            fs = frozenset(subset)
            if is_closed(algebra, fs):
                closed.append(fs)
    entries = []
    proper = [u for u in closed if len(u) < n]
    for u in closed:
        is_proper = len(u) < n
        maximal = is_proper and not any(u < v for v in proper)
        entries.append(SubalgebraInfo(u, is_proper, maximal, len(u) >= 2))
    return SubalgebraSet(algebra, tuple(entries))


def _partitions(items: Sequence[int]) -> Iterator[list[set[int]]]:
    """All partitions, in restricted-growth order."""
    items = list(items)
    if not items:
        yield []
        return

    def rec(i: int, blocks: list[set[int]]):
        if i == len(items):
            yield [set(b) for b in blocks]
            return
        for b in blocks:
            b.add(items[i])
            yield from rec(i + 1, blocks)
            b.remove(items[i])
        blocks.append({items[i]})
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def _preserves_partition(op: Operation, block_of: dict[int, int]) -> bool:
    # single-coordinate swaps within a block suffice: the relation is
    # transitive, so general tuple pairs decompose into such swaps
    d = op.domain_size
    for args in itertools.product(range(d), repeat=op.arity):
        base = op.table[op.index(args)]
        for pos in range(op.arity):
            for alt in range(d):
                if alt == args[pos] or block_of[alt] != block_of[args[pos]]:
                    continue
                swapped = list(args)
                swapped[pos] = alt
                if block_of[op.table[op.index(tuple(swapped))]] != block_of[base]:
                    return False
    return True


def enumerate_congruences(algebra: Algebra) -> list[Congruence]:
    """Every partition of the universe preserved by all generators."""
    _check_universe(algebra)
    out = []
    for blocks in _partitions(range(algebra.domain.size)):
        block_of = {v: i for i, b in enumerate(blocks) for v in b}
        if all(_preserves_partition(g, block_of) for g in algebra.generators):
            out.append(Congruence(tuple(frozenset(b) for b in blocks)))
    return out


def quotient(algebra: Algebra, congruence: Congruence) -> Algebra:
    """The block algebra; verifies each generator is well-defined on blocks."""
    blocks = congruence.blocks
    universe = sorted(v for b in blocks for v in b)
    if universe != list(range(algebra.domain.size)):
        raise StructuralError("congruence does not partition the universe")
    block_of = {v: i for i, b in enumerate(blocks) for v in b}
    reps = [min(b) for b in blocks]
    q = len(blocks)
    gens = []
    for g in algebra.generators:
        table = []
        for combo in itertools.product(range(q), repeat=g.arity):
            table.append(block_of[g(*(reps[c] for c in combo))])
        qop = Operation(f"{g.name}~", g.arity, q, tuple(table))
        # well-definedness: every choice of representatives must agree
        for args in itertools.product(range(algebra.domain.size), repeat=g.arity):
            expected = qop.table[qop.index(tuple(block_of[a] for a in args))]
            if block_of[g(*args)] != expected:
                raise StructuralError(
                    f"quotient of {g.name} is not well-defined; the partition is "
                    "not a congruence"
                )
        gens.append(qop)
    return Algebra(Domain(q), tuple(gens))


def restrict(algebra: Algebra, universe: frozenset[int]) -> tuple[Algebra, list[int]]:
    """Restriction to a closed subset, re-indexed to 0..|B|-1.

    Returns the subalgebra and the list mapping new indices to old elements.
    """
    if not is_closed(algebra, universe):
        raise StructuralError("subset is not closed under the generators")
    old = sorted(universe)
    new_of = {v: i for i, v in enumerate(old)}
    gens = []
    for g in algebra.generators:
        table = []
        for combo in itertools.product(old, repeat=g.arity):
            table.append(new_of[g(*combo)])
        gens.append(Operation(g.name, g.arity, len(old), tuple(table)))
    return Algebra(Domain(len(old)), tuple(gens)), old


def enumerate_factors(algebra: Algebra) -> list[Factor]:
    """Quotients of every subalgebra by every congruence of its restriction;
    includes the algebra itself via the identity congruence on the full
    universe."""
    _check_universe(algebra)
    out = []
    for universe in enumerate_subalgebras(algebra).universes():
        sub, old = restrict(algebra, universe)
        for cong in enumerate_congruences(sub):
            q = quotient(sub, cong)
            blocks = tuple(frozenset(old[i] for i in b) for b in cong.blocks)
            out.append(Factor(universe, cong, q, blocks))
    return out


def canonical_form(algebra: Algebra) -> tuple:
    """Relabeling-invariant fingerprint: the least generator-table profile over
    all permutations of the universe. Used to deduplicate factors in reports;
    witnesses keep their original labels."""
    d = algebra.domain.size
    best = None
    for perm in itertools.permutations(range(d)):
        profile = []
        for g in algebra.generators:
            table = []
            for args in itertools.product(range(d), repeat=g.arity):
                preimage = tuple(perm.index(a) for a in args)
                table.append(perm[g(*preimage)])
            profile.append((g.arity, tuple(table)))
        key = (d, tuple(sorted(profile)))
        if best is None or key < best:
            best = key
    return best


def _permutation_projection_coord(op: Operation) -> tuple[int, tuple[int, ...]] | None:
    """A coordinate i and permutation pi with op(a_1..a_k) = pi(a_i), if any."""
    d = op.domain_size
    for i in range(op.arity):
        pi: list[int | None] = [None] * d
        ok = True
        for args in itertools.product(range(d), repeat=op.arity):
            v = op.table[op.index(args)]
            if pi[args[i]] is None:
                pi[args[i]] = v
            elif pi[args[i]] != v:
                ok = False
                break
        if ok and sorted(pi) == list(range(d)):
            return i + 1, tuple(pi)  # type: ignore[arg-type]
    return None


def is_gset(algebra: Algebra) -> bool:
    """True iff the universe has at least two elements and every generator is a
    permutation applied to one argument.

    That shape is preserved by composition, so the generator-level check
    settles the property for all term operations.
    """
    if algebra.domain.size < 2:
        return False
    return all(_permutation_projection_coord(g) is not None for g in algebra.generators)


def has_gset_factor(algebra: Algebra) -> tuple[bool, Factor | None]:
    """Search every factor; returns the first G-set witness when one exists."""
    for factor in enumerate_factors(algebra):
        if is_gset(factor.quotient):
            return True, factor
    return False, None


@dataclass(frozen=True)
class PredicateResult:
    """A boolean verdict with an explicit flag for vacuous (one-element) cases."""

    holds: bool
    trivial: bool = False

    def __bool__(self) -> bool:
        return self.holds


def is_strictly_simple(algebra: Algebra) -> PredicateResult:
    """Simple (only trivial congruences) with every proper subalgebra
    one-element."""
    _check_universe(algebra)
    if algebra.domain.size == 1:
        return PredicateResult(True, trivial=True)
    for cong in enumerate_congruences(algebra):
        if len(cong.blocks) not in (1, algebra.domain.size):
            return PredicateResult(False)
    for info in enumerate_subalgebras(algebra).entries:
        if info.proper and info.nontrivial:
            return PredicateResult(False)
    return PredicateResult(True)


def is_pair_minimal(algebra: Algebra) -> bool:
    """Every two-element subset generates a subalgebra with no proper
    non-trivial subalgebra."""
    _check_universe(algebra)
    if algebra.domain.size < 2:
        raise StructuralError("pair minimality needs at least two elements")
    for pair in itertools.combinations(range(algebra.domain.size), 2):
        generated = generated_subalgebra(algebra, pair)
        sub, _ = restrict(algebra, generated)
        for info in enumerate_subalgebras(sub).entries:
            if info.proper and info.nontrivial:
                return False
    return True


def is_enclosed(algebra: Algebra) -> bool:
    """Images of tuples of maximal proper subalgebras stay inside some maximal
    proper subalgebra.

    Checking generators decides the property for all term operations:
    projections send any tuple of maximal subalgebras into one of them, and a
    composite's image is contained in its outer operation's image of the inner
    containments.
    """
    _check_universe(algebra)
    maximal = enumerate_subalgebras(algebra).maximal_proper()
    for g in algebra.generators:
        for combo in itertools.product(maximal, repeat=g.arity):
            image = op_image(g, combo)
            if not any(image <= m for m in maximal):
                return False
    return True


def is_fully_connected(algebra: Algebra) -> PredicateResult:
    """The overlap graph of maximal proper subalgebras is connected."""
    _check_universe(algebra)
    if algebra.domain.size == 1:
        return PredicateResult(True, trivial=True)
    maximal = enumerate_subalgebras(algebra).maximal_proper()
    if len(maximal) <= 1:
        return PredicateResult(True, trivial=len(maximal) == 0)
    reached = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in range(len(maximal)):
            if j not in reached and maximal[i] & maximal[j]:
                reached.add(j)
                frontier.append(j)
    return PredicateResult(len(reached) == len(maximal))


def disjoint_maximal_congruence(algebra: Algebra) -> Congruence | None:
    """When the algebra is enclosed and its maximal proper subalgebras are
    pairwise disjoint and cover the universe, the partition they form is a
    congruence; it is returned after an explicit re-check."""
    _check_universe(algebra)
    if not is_enclosed(algebra):
        return None
    maximal = enumerate_subalgebras(algebra).maximal_proper()
    if len(maximal) < 2:
        return None
    covered: set[int] = set()
    for m in maximal:
        if covered & m:
            return None
        covered |= m
    if covered != set(range(algebra.domain.size)):
        return None
    block_of = {v: i for i, b in enumerate(maximal) for v in b}
    for g in algebra.generators:
        if not _preserves_partition(g, block_of):
            raise StructuralError(
                "internal consistency check failed: the disjoint maximal-subalgebra "
                "partition of an enclosed algebra is expected to be a congruence"
            )
    return Congruence(tuple(maximal))
