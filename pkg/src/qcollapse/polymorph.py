"""Polymorphism testing, operation composition, term-operation (clone)
generation up to an arity cap, detectors for the named operation classes, and
pointwise application of polymorphisms to satisfying assignments.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import GuardrailError, StructuralError
from .model import Algebra, ConstraintLanguage, Operation, Relation
from .ops import projection_op

DEFAULT_CHECK_CAP = 10_000_000
DEFAULT_COUNT_CAP = 20_000
DEFAULT_ARITY_CAP = 3

# Construction trace for a term operation:
#   ("gen", i)        generator i of the algebra
#   ("proj", k, i)    arity-k projection onto coordinate i (1-based)
#   ("comp", outer, (inner, ...))  composition of traces
Trace = tuple


def polymorphism_failure(
    op: Operation, rel: Relation, check_cap: int = DEFAULT_CHECK_CAP
) -> tuple[tuple[tuple[int, ...], ...], tuple[int, ...]] | None:
    """The first witness (rows, image) with image outside the relation, or None."""
    if op.domain_size != rel.domain_size:
        raise StructuralError("operation and relation are over different domains")
    rows = rel.sorted_tuples()
    if len(rows) ** op.arity > check_cap:
        raise GuardrailError(
            f"{len(rows)}^{op.arity} tuple combinations exceed the cap of {check_cap}"
        )
    d = op.domain_size
    table = op.table
    for choice in itertools.product(rows, repeat=op.arity):
        image = []
        for col in range(rel.arity):
            idx = 0
            for t in choice:
                idx = idx * d + t[col]
            image.append(table[idx])
        if tuple(image) not in rel.tuples:
            return choice, tuple(image)
    return None


def is_polymorphism(op: Operation, rel: Relation, check_cap: int = DEFAULT_CHECK_CAP) -> bool:
    """True iff applying the operation coordinate-wise to any tuples of the
    relation lands back in the relation."""
    return polymorphism_failure(op, rel, check_cap) is None


def is_polymorphism_of_language(
    op: Operation, language: ConstraintLanguage, check_cap: int = DEFAULT_CHECK_CAP
) -> bool:
    return all(is_polymorphism(op, r, check_cap) for r in language.relations)


def op_image(op: Operation, sets: Sequence[Iterable[int]]) -> frozenset[int]:
    """Element-wise image f(B_1, ..., B_k)."""
    if len(sets) != op.arity:
        raise StructuralError(f"operation {op.name}: expected {op.arity} argument sets")
    d = op.domain_size
    table = op.table
    out = set()
    for combo in itertools.product(*[sorted(set(s)) for s in sets]):
        idx = 0
        for a in combo:
            idx = idx * d + a
        out.add(table[idx])
    return frozenset(out)


@dataclass(frozen=True)
class OperationTags:
    projection: bool
    idempotent: bool
    semilattice: bool
    maltsev: bool
    majority: bool
    minority: bool
    dual_discriminator: bool
    near_unanimity: bool
    unit_element: int | None


def _projection_coord(op: Operation) -> int | None:
    for i in range(op.arity):
        if all(op.table[op.index(args)] == args[i] for args in op.inputs()):
            return i + 1
    return None


def _unit_element(op: Operation) -> int | None:
    if op.arity != 2:
        return None
    d = op.domain_size
    for u in range(d):
        if all(op.table[op.index((u, a))] == a == op.table[op.index((a, u))] for a in range(d)):
            return u
    return None


def _near_unanimity(op: Operation) -> bool:
    if op.arity < 3:
        return False
    d = op.domain_size
    for x in range(d):
        for y in range(d):
            for pos in range(op.arity):
                args = [x] * op.arity
                args[pos] = y
                if op.table[op.index(args)] != x:
                    return False
    return True


def tag_operation(op: Operation) -> OperationTags:
    """Classify an operation by exhaustive identity checking over its table."""
    d = op.domain_size
    idempotent = op.is_idempotent()
    semilattice = False
    if op.arity == 2:
        commutative = all(
            op.table[op.index((x, y))] == op.table[op.index((y, x))]
            for x in range(d)
            for y in range(d)
        )
        associative = commutative and all(
            op.table[op.index((op.table[op.index((x, y))], z))]
            == op.table[op.index((x, op.table[op.index((y, z))]))]
            for x in range(d)
            for y in range(d)
            for z in range(d)
        )
        semilattice = idempotent and commutative and associative
    maltsev = majority = minority = dualdisc = False
    if op.arity == 3:
        maltsev = all(
            op.table[op.index((x, x, y))] == y and op.table[op.index((y, x, x))] == y
            for x in range(d)
            for y in range(d)
        )
        majority = all(
            op.table[op.index((x, x, y))] == x
            and op.table[op.index((x, y, x))] == x
            and op.table[op.index((y, x, x))] == x
            for x in range(d)
            for y in range(d)
        )
        minority = all(
            op.table[op.index((x, x, y))] == y
            and op.table[op.index((x, y, x))] == y
            and op.table[op.index((y, x, x))] == y
            for x in range(d)
            for y in range(d)
        )
        dualdisc = all(
            op.table[op.index((x, y, z))] == (x if x == y else z)
            for x in range(d)
            for y in range(d)
            for z in range(d)
        )
    return OperationTags(
        projection=_projection_coord(op) is not None,
        idempotent=idempotent,
        semilattice=semilattice,
        maltsev=maltsev,
        majority=majority,
        minority=minority,
        dual_discriminator=dualdisc,
        near_unanimity=_near_unanimity(op),
        unit_element=_unit_element(op),
    )


def compose(outer: Operation, inners: Sequence[Operation], name: str | None = None) -> Operation:
    """g(a) = outer(inner_1(a), ..., inner_n(a)); all inners share one arity."""
    if len(inners) != outer.arity:
        raise StructuralError(
            f"compose: {outer.name} has arity {outer.arity}, got {len(inners)} inner operations"
        )
    if not inners:
        raise StructuralError("compose: no inner operations")
    m = inners[0].arity
    d = outer.domain_size
    for g in inners:
        if g.arity != m:
            raise StructuralError("compose: inner operations must share one arity")
        if g.domain_size != d:
            raise StructuralError("compose: mixed domains")
    outer_table = outer.table
    table = []
    for cols in zip(*(g.table for g in inners)):
        oidx = 0
        for v in cols:
            oidx = oidx * d + v
        table.append(outer_table[oidx])
    label = name or f"{outer.name}({', '.join(g.name for g in inners)})"
    return Operation(label, m, d, tuple(table))


def replay_trace(algebra: Algebra, trace: Trace) -> Operation:
    """Rebuild the operation a construction trace denotes, from the algebra's
    generators, projections, and composition."""
    kind = trace[0]
    if kind == "gen":
        return algebra.generators[trace[1]]
    if kind == "proj":
        return projection_op(algebra.domain.size, trace[1], trace[2])
    if kind == "comp":
        outer = replay_trace(algebra, trace[1])
        inners = [replay_trace(algebra, t) for t in trace[2]]
        return compose(outer, inners)
    raise StructuralError(f"unknown trace node {kind!r}")


def trace_to_str(trace: Trace) -> str:
    kind = trace[0]
    if kind == "gen":
        return f"g{trace[1]}"
    if kind == "proj":
        return f"p{trace[1]}.{trace[2]}"
    if kind == "comp":
        return "(" + " ".join([trace_to_str(trace[1])] + [trace_to_str(t) for t in trace[2]]) + ")"
    raise StructuralError(f"unknown trace node {kind!r}")


def parse_trace(text: str) -> Trace:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def atom(tok: str) -> Trace:
        if tok.startswith("g"):
            return ("gen", int(tok[1:]))
        if tok.startswith("p"):
            arity, coord = tok[1:].split(".")
            return ("proj", int(arity), int(coord))
        raise StructuralError(f"bad trace token {tok!r}")

    def parse() -> Trace:
        nonlocal pos
        if pos >= len(tokens):
            raise StructuralError("truncated trace")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            outer = parse()
            inners = []
            while pos < len(tokens) and tokens[pos] != ")":
                inners.append(parse())
            if pos >= len(tokens):
                raise StructuralError("unclosed trace")
            pos += 1
            return ("comp", outer, tuple(inners))
        if tok == ")":
            raise StructuralError("unexpected ')' in trace")
        return atom(tok)

    out = parse()
    if pos != len(tokens):
        raise StructuralError("trailing tokens in trace")
    return out


@dataclass(frozen=True)
class TermOperationSet:
    """Term operations of an algebra discovered by closure up to an arity cap.

    `operations` is in discovery order; `traces` rebuilds each member from the
    generators. When `truncated` is set the closure hit its count cap and the
    set may be incomplete.
    """

    algebra: Algebra
    arity_cap: int
    operations: tuple[Operation, ...]
    traces: Mapping[Operation, Trace]
    truncated: bool

    def of_arity(self, k: int) -> list[Operation]:
        return [f for f in self.operations if f.arity == k]


def generate_term_operations(
    algebra: Algebra, arity_cap: int = DEFAULT_ARITY_CAP, count_cap: int = DEFAULT_COUNT_CAP
) -> TermOperationSet:
    """Fixed-point closure per target arity: seed with projections and the
    generators of matching arity, then keep composing generators with
    already-found operations until nothing new appears or the cap is hit.

    Composition never raises the arity above the cap because a composite's
    arity equals its inner operations' shared arity.
    """
    if arity_cap < 1:
        raise StructuralError("arity cap must be >= 1")
    d = algebra.domain.size
    found: dict[Operation, Trace] = {}
    order: list[Operation] = []
    truncated = False

    def add(op: Operation, trace: Trace) -> bool:
        nonlocal truncated
        if op in found:
            return False
        if len(found) >= count_cap:
            truncated = True
            return False
        found[op] = trace
        order.append(op)
        return True

    for m in range(1, arity_cap + 1):
        for i in range(1, m + 1):
            add(projection_op(d, m, i), ("proj", m, i))
        for gi, g in enumerate(algebra.generators):
            if g.arity == m:
                add(g, ("gen", gi))
        # close arity-m operations under outer application of every generator;
        # each round only tries argument combos touching the last round's finds,
        # and candidate tables are deduplicated before Operation construction
        current = [op for op in order if op.arity == m]
        seen_tables = {op.table for op in current}
        frontier = list(current)
        while frontier and not truncated:
            frontier_set = set(frontier)
            old = [op for op in current if op not in frontier_set]
            new_ops: list[Operation] = []
            for gi, g in enumerate(algebra.generators):
                if truncated:
                    break
                outer_table = g.table
                for p in range(g.arity):
                    pools = [old] * p + [frontier] + [current] * (g.arity - 1 - p)
                    for combo in itertools.product(*pools):
                        table = []
                        for cols in zip(*(c.table for c in combo)):
                            oidx = 0
                            for v in cols:
                                oidx = oidx * d + v
                            table.append(outer_table[oidx])
                        key = tuple(table)
                        if key in seen_tables:
                            continue
                        seen_tables.add(key)
                        h = Operation(f"t{m}.{len(found)}", m, d, key)
                        if add(h, ("comp", ("gen", gi), tuple(found[c] for c in combo))):
                            new_ops.append(h)
                        if truncated:
                            break
                    if truncated:
                        break
            current = current + new_ops
            frontier = new_ops
    return TermOperationSet(algebra, arity_cap, tuple(order), dict(found), truncated)


def discover_polymorphisms(
    language: ConstraintLanguage,
    arity_cap: int = DEFAULT_ARITY_CAP,
    candidate_cap: int = DEFAULT_CHECK_CAP,
    check_cap: int = DEFAULT_CHECK_CAP,
) -> tuple[Operation, ...]:
    """All idempotent polymorphisms of arity <= arity_cap, by exhausting the
    idempotent operation tables of each arity.

    Raises GuardrailError when an arity has too many candidate tables; use the
    targeted detectors in `classify` for larger domains.
    """
    d = language.domain.size
    out: list[Operation] = []
    for k in range(1, arity_cap + 1):
        free_cells = d**k - d
        if d**free_cells > candidate_cap:
            raise GuardrailError(
                f"{d}^{free_cells} idempotent arity-{k} candidates exceed the cap; "
                "restrict the arity cap or use a targeted detector"
            )
        diagonal = {tuple([a] * k): a for a in range(d)}
        cells = [args for args in itertools.product(range(d), repeat=k) if args not in diagonal]
        for values in itertools.product(range(d), repeat=len(cells)):
            entries = dict(zip(cells, values))
            entries.update(diagonal)
            table = tuple(entries[args] for args in itertools.product(range(d), repeat=k))
            op = Operation(f"f{k}_{len(out)}", k, d, table)
            if is_polymorphism_of_language(op, language, check_cap):
                out.append(op)
    return tuple(out)


def apply_pointwise(op: Operation, assignments: Sequence[Mapping[str, int]]) -> dict[str, int]:
    """The coordinate-wise image assignment g(v) = f(g_1(v), ..., g_k(v))."""
    if len(assignments) != op.arity:
        raise StructuralError(f"expected {op.arity} assignments, got {len(assignments)}")
    if not assignments:
        raise StructuralError("no assignments")
    keys = set(assignments[0])
    for g in assignments[1:]:
        if set(g) != keys:
            raise StructuralError("assignments must share one variable set")
    return {v: op(*(g[v] for g in assignments)) for v in assignments[0]}


def close_relation_under(rel: Relation, op: Operation) -> Relation:
    """Smallest superset of the relation invariant under the operation."""
    if rel.domain_size != op.domain_size:
        raise StructuralError("relation and operation are over different domains")
    tuples = set(rel.tuples)
    while True:
        fresh = set()
        for choice in itertools.product(sorted(tuples), repeat=op.arity):
            image = tuple(op(*(t[c] for t in choice)) for c in range(rel.arity))
            if image not in tuples:
                fresh.add(image)
        if not fresh:
            return Relation(rel.name, rel.arity, rel.domain_size, frozenset(tuples))
        tuples |= fresh
