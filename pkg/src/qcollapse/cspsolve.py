"""Complete finite-domain CSP solver for existential instances.

Backtracking over extensional relations with generalized arc consistency:
variables are picked by smallest remaining candidate set (ties by identifier),
values are tried in ascending order, so results are deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

from .errors import GuardrailError, StructuralError
from .model import Constraint, Domain

DEFAULT_NODE_CAP = 10_000_000


@dataclass(frozen=True)
class CspInstance:
    """Existential-only conjunction of constraints over named variables."""

    domain: Domain
    variables: tuple[str, ...]
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        declared = set(self.variables)
        if len(declared) != len(self.variables):
            raise StructuralError("duplicate CSP variable")
        for c in self.constraints:
            if c.relation.domain_size != self.domain.size:
                raise StructuralError(f"constraint on {c.relation.name} over a different domain")
            for v in c.variables:
                if v not in declared:
                    raise StructuralError(f"constraint uses undeclared variable {v!r}")


class _Propagator:
    def __init__(self, instance: CspInstance):
        self.instance = instance
        self.domains: dict[str, set[int]] = {
            v: set(range(instance.domain.size)) for v in instance.variables
        }
        self.watch: dict[str, list[int]] = {v: [] for v in instance.variables}
        for idx, c in enumerate(instance.constraints):
            for v in c.variables:
                self.watch[v].append(idx)

    def _revise(self, cidx: int) -> tuple[set[str], bool]:
        """Filter each variable of the constraint to its supported values.

        Returns (changed variables, still consistent).
        """
        c = self.instance.constraints[cidx]
        if not c.variables:
            ok = tuple(a for a in c.args) in c.relation.tuples
            return set(), ok
        supported: dict[str, set[int]] = {v: set() for v in c.variables}
        for t in c.relation.tuples:
            row: dict[str, int] = {}
            good = True
            for pos, a in enumerate(c.args):
                if isinstance(a, int):
                    if t[pos] != a:
                        good = False
                        break
                else:
                    seen = row.get(a)
                    if seen is None:
                        if t[pos] not in self.domains[a]:
                            good = False
                            break
                        row[a] = t[pos]
                    elif seen != t[pos]:
                        good = False
                        break
            if good:
                for v, val in row.items():
                    supported[v].add(val)
        changed = set()
        for v in c.variables:
            dom = self.domains[v]
            if not dom <= supported[v]:
                dom &= supported[v]
                changed.add(v)
                if not dom:
                    return changed, False
        return changed, True

    def propagate(self, seed: Iterable[int]) -> bool:
        queue = deque(seed)
        queued = set(queue)
        while queue:
            cidx = queue.popleft()
            queued.discard(cidx)
            changed, ok = self._revise(cidx)
            if not ok:
                return False
            for v in changed:
                for other in self.watch[v]:
                    if other != cidx and other not in queued:
                        queue.append(other)
                        queued.add(other)
        return True

    def snapshot(self) -> dict[str, set[int]]:
        return {v: set(d) for v, d in self.domains.items()}

    def restore(self, snap: dict[str, set[int]]):
        self.domains = snap


def solve_csp(instance: CspInstance, node_cap: int = DEFAULT_NODE_CAP) -> dict[str, int] | None:
    """A total satisfying assignment, or None when the instance is unsatisfiable."""
    prop = _Propagator(instance)
    if not prop.propagate(range(len(instance.constraints))):
        return None
    nodes = 0

    def search() -> dict[str, int] | None:
        nonlocal nodes
        nodes += 1
        if nodes > node_cap:
            raise GuardrailError(f"CSP search exceeded {node_cap} nodes")
        pending = [(len(dom), v) for v, dom in prop.domains.items() if len(dom) > 1]
        if not pending:
            solution = {v: next(iter(dom)) for v, dom in prop.domains.items()}
            assert all(c.holds(solution) for c in instance.constraints)
            return solution
        _, var = min(pending)
        for val in sorted(prop.domains[var]):
            snap = prop.snapshot()
            prop.domains[var] = {val}
            if prop.propagate(prop.watch[var]):
                found = search()
                if found is not None:
                    return found
            prop.restore(snap)
        return None

    return search()


def enumerate_solutions(instance: CspInstance, limit: int | None = None) -> list[dict[str, int]]:
    """Every satisfying assignment by plain enumeration. Test oracle; exponential."""
    import itertools

    out = []
    for combo in itertools.product(range(instance.domain.size), repeat=len(instance.variables)):
        assignment = dict(zip(instance.variables, combo))
        if all(c.holds(assignment) for c in instance.constraints):
            out.append(assignment)
            if limit is not None and len(out) >= limit:
                break
    return out
