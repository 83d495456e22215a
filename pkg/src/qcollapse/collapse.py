"""Collapsing machinery: instantiate universal variables with constants,
enumerate bounded collapsings, encode a collapsed formula as an existential
CSP over strategy-output variables, and run the collapse-based decision
pipeline.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .cspsolve import CspInstance, solve_csp
from .errors import GuardrailError, StructuralError
from .model import Constraint, Domain, QuantifiedFormula

DEFAULT_WIDTH_CAP = 3
DEFAULT_ENCODING_CAP = 10_000_000


@dataclass(frozen=True)
class Collapsing:
    """A formula with all universal variables outside `kept_universals`
    instantiated to `constant`."""

    origin: QuantifiedFormula
    kept_universals: tuple[str, ...]
    constant: int
    result: QuantifiedFormula


def instantiate_universals(
    formula: QuantifiedFormula, substitution: Mapping[str, int]
) -> QuantifiedFormula:
    """Remove the substituted universal quantifiers and replace every bound
    occurrence in the body with the given constant."""
    universal = set(formula.universal_vars)
    for var, val in substitution.items():
        if var not in universal:
            raise StructuralError(f"{var!r} is not a universal variable")
        if not (0 <= val < formula.domain.size):
            raise StructuralError(f"constant {val} out of range for {var!r}")
    prefix = tuple(entry for entry in formula.prefix if entry[1] not in substitution)
    body = tuple(
        Constraint(
            c.relation,
            tuple(substitution.get(a, a) if isinstance(a, str) else a for a in c.args),
        )
        for c in formula.body
    )
    return QuantifiedFormula(formula.domain, prefix, body)


def enumerate_collapsings(
    formula: QuantifiedFormula, j: int, constant: int
) -> list[Collapsing]:
    """One collapsing per subset U' of universal variables with |U'| <= j,
    ordered by subset size then lexicographically by position."""
    if j < 0:
        raise StructuralError("collapse width must be >= 0")
    uvars = formula.universal_vars
    out = []
    for size in range(min(j, len(uvars)) + 1):
        for kept in itertools.combinations(range(len(uvars)), size):
            kept_names = tuple(uvars[i] for i in kept)
            substitution = {v: constant for v in uvars if v not in kept_names}
            out.append(
                Collapsing(formula, kept_names, constant, instantiate_universals(formula, substitution))
            )
    return out


def enumerate_j_collapsings(formula: QuantifiedFormula, j: int) -> list[Collapsing]:
    """Union over all constants, deduplicated by the fully substituted formula."""
    seen: dict[QuantifiedFormula, Collapsing] = {}
    for a in formula.domain.elements():
        for col in enumerate_collapsings(formula, j, a):
            seen.setdefault(col.result, col)
    return list(seen.values())


def csp_variable_name(existential: str, context: Sequence[tuple[str, int]]) -> str:
    """Stable name for the strategy-output variable (x, tau restricted to the
    universals before x), e.g. ``x@y1=0,y2=1``."""
    suffix = ",".join(f"{u}={v}" for u, v in context)
    return f"{existential}@{suffix}"


def collapsing_to_csp(
    collapsed: QuantifiedFormula, encoding_cap: int = DEFAULT_ENCODING_CAP
) -> CspInstance:
    """Encode a collapsed formula as an existential CSP whose variables are
    the possible strategy outputs; the CSP is satisfiable iff the collapsed
    formula is true."""
    d = collapsed.domain.size
    uvars = collapsed.universal_vars
    assignments = d ** len(uvars)
    if assignments * max(len(collapsed.body), 1) > encoding_cap:
        raise GuardrailError(
            f"encoding would emit about {assignments * len(collapsed.body)} constraints"
        )
    ubefore = collapsed.universals_before
    variables: list[str] = []
    for x in collapsed.existential_vars:
        for combo in itertools.product(range(d), repeat=len(ubefore[x])):
            variables.append(csp_variable_name(x, tuple(zip(ubefore[x], combo))))
    constraints: list[Constraint] = []
    for combo in itertools.product(range(d), repeat=len(uvars)):
        tau = dict(zip(uvars, combo))
        for c in collapsed.body:
            args: list[str | int] = []
            for a in c.args:
                if isinstance(a, int):
                    args.append(a)
                elif a in tau:
                    args.append(tau[a])
                else:
                    context = tuple((u, tau[u]) for u in ubefore[a])
                    args.append(csp_variable_name(a, context))
            constraints.append(Constraint(c.relation, tuple(args)))
    return CspInstance(collapsed.domain, tuple(variables), tuple(constraints))


def combine_csp(
    instances: Sequence[CspInstance], domain: Domain | None = None
) -> CspInstance:
    """Variable-disjoint union: satisfiable iff every member is."""
    if not instances:
        if domain is None:
            raise StructuralError("combining an empty list needs an explicit domain")
        return CspInstance(domain, (), ())
    base = instances[0].domain
    for inst in instances:
        if inst.domain != base:
            raise StructuralError("cannot combine CSP instances over different domains")
    variables: list[str] = []
    constraints: list[Constraint] = []
    for k, inst in enumerate(instances):
        rename = {v: f"c{k}.{v}" for v in inst.variables}
        variables.extend(rename[v] for v in inst.variables)
        for c in inst.constraints:
            args = tuple(rename[a] if isinstance(a, str) else a for a in c.args)
            constraints.append(Constraint(c.relation, args))
    return CspInstance(base, tuple(variables), tuple(constraints))


def relevant_collapsings(
    formula: QuantifiedFormula,
    j: int,
    source: Iterable[int] | None,
    width_cap: int = DEFAULT_WIDTH_CAP,
) -> list[Collapsing]:
    """The (j, a)-collapsings for a in `source`, or all j-collapsings when
    `source` is None; deduplicated by resulting formula.

    The encoding emits |A|^min(j, universals) constraint copies per constraint,
    so widths above `width_cap` are refused.
    """
    if j > width_cap:
        raise GuardrailError(f"collapse width {j} exceeds the cap of {width_cap}")
    if source is None:
        return enumerate_j_collapsings(formula, j)
    seen: dict[QuantifiedFormula, Collapsing] = {}
    for a in sorted(set(source)):
        if not (0 <= a < formula.domain.size):
            raise StructuralError(f"source element {a} out of range")
        for col in enumerate_collapsings(formula, j, a):
            seen.setdefault(col.result, col)
    return list(seen.values())


def qcsp_via_collapse(
    formula: QuantifiedFormula,
    j: int,
    source: Iterable[int] | None = None,
    encoding_cap: int = DEFAULT_ENCODING_CAP,
    width_cap: int = DEFAULT_WIDTH_CAP,
) -> bool:
    """True iff every relevant collapsing is true, decided through one combined
    CSP. Equivalence with formula truth is the caller's certificate obligation.
    """
    collapsings = relevant_collapsings(formula, j, source, width_cap)
    encoded = [collapsing_to_csp(c.result, encoding_cap) for c in collapsings]
    combined = combine_csp(encoded, formula.domain)
    return solve_csp(combined) is not None


def collapse_verdicts(
    formula: QuantifiedFormula,
    j: int,
    source: Iterable[int] | None = None,
    encoding_cap: int = DEFAULT_ENCODING_CAP,
    width_cap: int = DEFAULT_WIDTH_CAP,
) -> list[tuple[Collapsing, bool]]:
    """Per-collapsing truth, for reports."""
    out = []
    for col in relevant_collapsings(formula, j, source, width_cap):
        out.append((col, solve_csp(collapsing_to_csp(col.result, encoding_cap)) is not None))
    return out
