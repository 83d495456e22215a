"""Adversary algebra and the collapsibility certificate engine.

A certificate is a concrete per-n derivation list: each step asserts that one
adversary is composable, via a term operation given with its construction
trace, from previously derived adversaries or axioms. Axioms are exactly the
members of the single-source families Adv(n, {a}, w, A) for a in the source
set. Builders emit the instantiated chain for the requested n; verification is
pure finite replay.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

from .algebra import (
    disjoint_maximal_congruence,
    enumerate_subalgebras,
    generated_subalgebra,
    has_gset_factor,
    is_enclosed,
    is_fully_connected,
    is_pair_minimal,
    is_strictly_simple,
    quotient,
    restrict,
    Congruence,
)
from .errors import BuildError, StructuralError
from .game import Adversary, constant_adversary, full_adversary
from .model import Algebra, Operation
from .ops import semilattice_to_shared
from .polymorph import (
    Trace,
    generate_term_operations,
    op_image,
    parse_trace,
    replay_trace,
    tag_operation,
    trace_to_str,
)

DEFAULT_TERM_COUNT_CAP = 2_000
DEFAULT_SEARCH_DEPTH = 6


# ---------------------------------------------------------------------------
# Adversary families, domination, composability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdversaryFamily:
    """The length-n adversaries equal to `wide` on at most `width` coordinates
    and to `base` everywhere else."""

    n: int
    base: frozenset[int]
    width: int
    wide: frozenset[int]

    def __post_init__(self):
        if not self.base or not self.wide:
            raise StructuralError("adversary coordinates must be nonempty")
        if self.n < 1 or self.width < 0:
            raise StructuralError("family needs n >= 1 and width >= 0")

    def member(self, positions: Iterable[int]) -> Adversary:
        chosen = set(positions)
        return Adversary(
            tuple(self.wide if i in chosen else self.base for i in range(self.n))
        )

    def members(self) -> list[Adversary]:
        """Enumerated by |S| ascending then lexicographic position set."""
        if self.base == self.wide:
            return [self.member(())]
        out = []
        for size in range(min(self.width, self.n) + 1):
            for positions in itertools.combinations(range(self.n), size):
                out.append(self.member(positions))
        return out

    def __iter__(self) -> Iterator[Adversary]:
        return iter(self.members())

    def __len__(self) -> int:
        if self.base == self.wide:
            return 1
        return sum(math.comb(self.n, i) for i in range(min(self.width, self.n) + 1))

    def __contains__(self, adv: Adversary) -> bool:
        if len(adv) != self.n:
            return False
        wide_at = [i for i, c in enumerate(adv.coords) if c != self.base]
        if len(wide_at) > self.width:
            return False
        return all(adv.coords[i] == self.wide for i in wide_at)


def adv_family(n: int, base: Iterable[int], width: int, wide: Iterable[int]) -> AdversaryFamily:
    return AdversaryFamily(n, frozenset(base), width, frozenset(wide))


def dominated(a: Adversary, b: Adversary) -> bool:
    """True iff every coordinate of `a` is contained in the matching one of `b`."""
    if len(a) != len(b):
        raise StructuralError("adversaries of different length")
    return all(x <= y for x, y in zip(a.coords, b.coords))


def composable(target: Adversary, op: Operation, sources: Sequence[Adversary]) -> bool:
    """target <| op(sources): every coordinate of the target is inside the
    element-wise image of the sources' matching coordinates."""
    if len(sources) != op.arity:
        raise StructuralError(f"operation {op.name}: expected {op.arity} source adversaries")
    for s in sources:
        if len(s) != len(target):
            raise StructuralError("adversaries of different length")
    for i in range(len(target)):
        if not target.coords[i] <= op_image(op, [s.coords[i] for s in sources]):
            return False
    return True


def _image_adversary(op: Operation, sources: Sequence[Adversary]) -> Adversary:
    n = len(sources[0])
    return Adversary(
        tuple(op_image(op, [s.coords[i] for s in sources]) for i in range(n))
    )


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertEntry:
    """An axiom (op is None) or a derivation step."""

    adversary: Adversary
    op: Operation | None = None
    trace: Trace | None = None
    inputs: tuple[int, ...] = ()


@dataclass(frozen=True)
class Certificate:
    """Derivation showing target^n is composable from the width-bounded
    single-source adversary families of `source`."""

    target: frozenset[int]
    source: frozenset[int]
    width: int
    n: int
    entries: tuple[CertEntry, ...]
    result: int
    warnings: tuple[str, ...] = ()

    def axioms(self) -> list[Adversary]:
        return [e.adversary for e in self.entries if e.op is None]

    def steps(self) -> list[CertEntry]:
        return [e for e in self.entries if e.op is not None]


@dataclass
class VerificationResult:
    ok: bool
    failure: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def _is_axiom_member(
    adv: Adversary, source: frozenset[int], width: int, domain_size: int
) -> bool:
    full = frozenset(range(domain_size))
    for a in sorted(source):
        single = frozenset((a,))
        other = [i for i, c in enumerate(adv.coords) if c != single]
        if len(other) <= width and all(adv.coords[i] == full for i in other):
            return True
    return False


def verify_certificate(
    certificate: Certificate, algebra: Algebra, n: int | None = None
) -> VerificationResult:
    """Replay every step, re-derive every operation from its trace, check the
    axioms belong to the declared families, and check the final adversary
    dominates target^n. Returns the first failure as a diagnostic."""
    d = algebra.domain.size
    if n is not None and certificate.n != n:
        return VerificationResult(False, f"certificate is for n={certificate.n}, not n={n}")
    n = certificate.n
    if not certificate.source:
        return VerificationResult(False, "empty source set")
    if not certificate.target or not certificate.target <= frozenset(range(d)):
        return VerificationResult(False, "target is not a nonempty subset of the universe")
    for idx, e in enumerate(certificate.entries):
        if len(e.adversary) != n:
            return VerificationResult(False, f"entry {idx}: adversary length != n")
        if e.op is None:
            if not _is_axiom_member(e.adversary, certificate.source, certificate.width, d):
                return VerificationResult(
                    False,
                    f"axiom {idx}: not a member of the declared source/width families",
                )
            continue
        if any(i >= idx for i in e.inputs):
            return VerificationResult(False, f"step {idx}: forward reference")
        if e.trace is None:
            return VerificationResult(False, f"step {idx}: missing construction trace")
        try:
            rebuilt = replay_trace(algebra, e.trace)
        except (StructuralError, IndexError) as err:
            return VerificationResult(False, f"step {idx}: trace replay failed: {err}")
        if rebuilt != e.op:
            return VerificationResult(False, f"step {idx}: trace does not rebuild the operation")
        sources = [certificate.entries[i].adversary for i in e.inputs]
        try:
            if not composable(e.adversary, e.op, sources):
                return VerificationResult(False, f"step {idx}: coordinate containment fails")
        except StructuralError as err:
            return VerificationResult(False, f"step {idx}: {err}")
    if not (0 <= certificate.result < len(certificate.entries)):
        return VerificationResult(False, "result id out of range")
    final = certificate.entries[certificate.result].adversary
    goal = constant_adversary(n, certificate.target)
    if not dominated(goal, final):
        return VerificationResult(False, "final adversary does not dominate target^n")
    return VerificationResult(True)


class _Assembler:
    """Accumulates certificate entries, deduplicating by derived adversary and
    recording each step's adversary as the exact image of its inputs."""

    def __init__(self, algebra: Algebra, n: int, source: frozenset[int], width: int):
        self.algebra = algebra
        self.n = n
        self.source = source
        self.width = width
        self.entries: list[CertEntry] = []
        self.index: dict[Adversary, int] = {}
        self.warnings: list[str] = []

    def adversary_of(self, ref: int) -> Adversary:
        return self.entries[ref].adversary

    def axiom(self, adv: Adversary) -> int:
        if not _is_axiom_member(adv, self.source, self.width, self.algebra.domain.size):
            raise BuildError(
                f"internal: {adv.coords} is outside the declared axiom families"
            )
        existing = self.index.get(adv)
        if existing is not None:
            return existing
        self.entries.append(CertEntry(adv))
        self.index[adv] = len(self.entries) - 1
        return len(self.entries) - 1

    def step(self, op: Operation, trace: Trace, inputs: Sequence[int]) -> int:
        if len(inputs) != op.arity:
            raise BuildError(f"internal: {op.name} needs {op.arity} inputs")
        sources = [self.entries[i].adversary for i in inputs]
        image = _image_adversary(op, sources)
        existing = self.index.get(image)
        if existing is not None:
            return existing
        self.entries.append(CertEntry(image, op, trace, tuple(inputs)))
        self.index[image] = len(self.entries) - 1
        return len(self.entries) - 1

    def finish(self, target: frozenset[int], result: int) -> Certificate:
        return Certificate(
            target,
            self.source,
            self.width,
            self.n,
            tuple(self.entries),
            result,
            tuple(self.warnings),
        )


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


@dataclass
class CertificateBuilder:
    """A named construction strategy with its parameters.

    Strategies: singleton, and_chain, unit_element, maltsev_chain,
    dualdisc_chain, near_unanimity, extends_step, subalgebra_enlarge,
    combine_subsets, strictly_simple, pair_minimal, two_element, quotient_lift.
    """

    strategy: str
    params: dict = field(default_factory=dict)


def _require_idempotent(algebra: Algebra):
    if not algebra.is_idempotent():
        raise BuildError("certificate builders require an idempotent algebra")


def _require_n(n: int):
    if n < 1:
        raise BuildError("certificates are built per n >= 1")


def _full_set(algebra: Algebra) -> frozenset[int]:
    return frozenset(range(algebra.domain.size))


def _resolve_op(
    algebra: Algebra,
    op: Operation | None,
    trace: Trace | None,
    want: Callable[[Operation], bool],
    description: str,
    arity_cap: int = 3,
    count_cap: int = DEFAULT_TERM_COUNT_CAP,
) -> tuple[Operation, Trace, list[str]]:
    """Pin down (operation, trace): use explicit parameters when given, else
    scan the term closure for the first operation satisfying `want`."""
    if trace is not None:
        rebuilt = replay_trace(algebra, trace)
        if op is not None and rebuilt != op:
            raise BuildError(f"{description}: trace does not rebuild the given operation")
        if not want(rebuilt):
            raise BuildError(f"{description}: the supplied operation fails the identity checks")
        return rebuilt, trace, []
    if op is not None:
        for gi, g in enumerate(algebra.generators):
            if g == op:
                if not want(op):
                    raise BuildError(f"{description}: the supplied operation fails the identity checks")
                return op, ("gen", gi), []
        terms = generate_term_operations(algebra, max(op.arity, 1), count_cap)
        if op in terms.traces:
            if not want(op):
                raise BuildError(f"{description}: the supplied operation fails the identity checks")
            warn = ["term closure truncated while locating the operation"] if terms.truncated else []
            return op, terms.traces[op], warn
        raise BuildError(f"{description}: the operation is not a known term operation")
    terms = generate_term_operations(algebra, arity_cap, count_cap)
    for candidate in terms.operations:
        if want(candidate):
            warn = ["term closure truncated during the scan"] if terms.truncated else []
            return candidate, terms.traces[candidate], warn
    extra = " (closure truncated)" if terms.truncated else ""
    raise BuildError(f"{description}: no matching term operation found{extra}")


def _build_singleton(algebra: Algebra, n: int, element: int) -> Certificate:
    if not (0 <= element < algebra.domain.size):
        raise BuildError(f"element {element} out of range")
    asm = _Assembler(algebra, n, frozenset((element,)), 0)
    ref = asm.axiom(constant_adversary(n, frozenset((element,))))
    return asm.finish(frozenset((element,)), ref)


def _build_unit_chain(
    algebra: Algebra, n: int, op: Operation, trace: Trace, unit: int
) -> Certificate:
    """Width-1 chain for a binary operation with a unit element: at each step
    the next coordinate is released to the full domain."""
    full = _full_set(algebra)
    tags = tag_operation(op)
    if op.arity != 2 or tags.unit_element != unit or not tags.idempotent:
        raise BuildError(f"{op.name} is not an idempotent binary operation with unit {unit}")
    asm = _Assembler(algebra, n, frozenset((unit,)), 1)
    fam = adv_family(n, (unit,), 1, full)
    prev = asm.axiom(fam.member((0,)))
    for i in range(1, n):
        prev = asm.step(op, trace, (prev, asm.axiom(fam.member((i,)))))
    return asm.finish(full, prev)


def _build_maltsev_chain(
    algebra: Algebra, n: int, op: Operation, trace: Trace, source: int
) -> Certificate:
    full = _full_set(algebra)
    if op.arity != 3 or not tag_operation(op).maltsev:
        raise BuildError(f"{op.name} does not satisfy the Mal'tsev identities")
    asm = _Assembler(algebra, n, frozenset((source,)), 1)
    fam = adv_family(n, (source,), 1, full)
    base = asm.axiom(fam.member(()))
    prev = asm.axiom(fam.member((0,)))
    for i in range(1, n):
        prev = asm.step(op, trace, (prev, base, asm.axiom(fam.member((i,)))))
    return asm.finish(full, prev)


def _build_dualdisc_chain(
    algebra: Algebra, n: int, op: Operation, trace: Trace, b: int, c: int
) -> Certificate:
    """Two width-1 chains advanced in lockstep, one per tracked source element."""
    full = _full_set(algebra)
    if b == c:
        raise BuildError("the two tracked source elements must differ")
    if op.arity != 3 or not tag_operation(op).dual_discriminator:
        raise BuildError(f"{op.name} is not the dual discriminator")
    asm = _Assembler(algebra, n, frozenset((b, c)), 1)
    fam_b = adv_family(n, (b,), 1, full)
    fam_c = adv_family(n, (c,), 1, full)
    prev_b = asm.axiom(fam_b.member((0,)))
    prev_c = asm.axiom(fam_c.member((0,)))
    for i in range(1, n):
        next_b = asm.step(op, trace, (prev_b, prev_c, asm.axiom(fam_b.member((i,)))))
        next_c = asm.step(op, trace, (prev_c, prev_b, asm.axiom(fam_c.member((i,)))))
        prev_b, prev_c = next_b, next_c
    return asm.finish(full, prev_b)


def _widen(adv: Adversary, positions: frozenset[int], full: frozenset[int]) -> Adversary:
    return Adversary(
        tuple(full if i in positions else c for i, c in enumerate(adv.coords))
    )


def _reachable(cert: Certificate) -> list[int]:
    seen: set[int] = set()
    stack = [cert.result]
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        stack.extend(cert.entries[i].inputs)
    return sorted(seen)


def _graft(
    asm: _Assembler,
    cert: Certificate,
    resolve_axiom: Callable[[Adversary], int],
    transform_op: Callable[[CertEntry], tuple[Operation, Trace]] | None = None,
) -> int:
    """Re-emit the ancestry of the certificate's result into the assembler,
    mapping axioms through `resolve_axiom` and recomputing every step's
    adversary as the exact image of its (possibly enlarged) inputs."""
    local: dict[int, int] = {}
    for idx in _reachable(cert):
        e = cert.entries[idx]
        if e.op is None:
            local[idx] = resolve_axiom(e.adversary)
        else:
            op, trace = (e.op, e.trace) if transform_op is None else transform_op(e)
            local[idx] = asm.step(op, trace, tuple(local[i] for i in e.inputs))
    return local[cert.result]


def _axiom_shape(
    adv: Adversary, full: frozenset[int], fallback: int
) -> tuple[int, frozenset[int]]:
    """Decompose a single-source family member into (element, wide positions);
    all-wide members carry no element, so `fallback` stands in."""
    wide = frozenset(i for i, c in enumerate(adv.coords) if c == full and len(full) > 1)
    singles = {c for i, c in enumerate(adv.coords) if i not in wide}
    if len(full) == 1:
        return next(iter(full)), frozenset()
    if len(singles) > 1 or any(len(c) != 1 for c in singles):
        raise BuildError("internal: axiom adversary is not a single-source family member")
    element = next(iter(next(iter(singles)))) if singles else fallback
    return element, wide


def _extends(op: Operation, small: frozenset[int], large: frozenset[int]) -> bool:
    """Every argument position of `op`, restricted to `small` there and `large`
    elsewhere, reaches all of `large`."""
    if op.arity < 2:
        return False
    for i in range(op.arity):
        sets: list[frozenset[int]] = [large] * op.arity
        sets[i] = small
        if not large <= op_image(op, sets):
            return False
    return True


def _extend_cert(
    algebra: Algebra,
    n: int,
    inner: Certificate,
    op: Operation,
    trace: Trace,
    target: frozenset[int],
) -> Certificate:
    """Derivation of target^n from the inner certificate's sources, through an
    operation extending the inner target to `target`; width grows by arity-1."""
    full = _full_set(algebra)
    small = inner.target
    if not small <= target:
        raise BuildError("extension target must contain the inner target")
    if not _extends(op, small, target):
        raise BuildError(f"{op.name} does not extend the inner target to the requested set")
    k = op.arity
    width = inner.width + k - 1
    asm = _Assembler(algebra, n, inner.source, width)
    base_memo: dict[frozenset[int], int] = {}

    def base(positions: frozenset[int]) -> int:
        ref = base_memo.get(positions)
        if ref is None:
            ref = _graft(asm, inner, lambda adv: asm.axiom(_widen(adv, positions, full)))
            base_memo[positions] = ref
        return ref

    need_memo: dict[frozenset[int], int] = {}

    def need(positions: frozenset[int]) -> int:
        ref = need_memo.get(positions)
        if ref is not None:
            return ref
        if len(positions) <= k - 1:
            ref = base(positions)
        else:
            anchors = sorted(positions)[:k]
            ref = asm.step(
                op, trace, tuple(need(positions - {a}) for a in anchors)
            )
        need_memo[positions] = ref
        return ref

    result = need(frozenset(range(n)))
    return asm.finish(target, result)


def _enlarge_cert(algebra: Algebra, n: int, inner: Certificate) -> Certificate:
    """Close every coordinate of the inner result to its generated subalgebra
    by repeatedly applying escaping generators to the whole adversary."""
    asm = _Assembler(algebra, n, inner.source, inner.width)
    ref = _graft(asm, inner, lambda adv: asm.axiom(adv))
    while True:
        adv = asm.adversary_of(ref)
        escaping = None
        for gi, g in enumerate(algebra.generators):
            if any(
                not op_image(g, [c] * g.arity) <= c for c in set(adv.coords)
            ):
                escaping = (gi, g)
                break
        if escaping is None:
            break
        gi, g = escaping
        ref = asm.step(g, ("gen", gi), (ref,) * g.arity)
    target = generated_subalgebra(algebra, sorted(inner.target))
    return asm.finish(target, ref)


def _combine_certs(
    algebra: Algebra, n: int, first: Certificate, second: Certificate
) -> Certificate:
    """Union of two collapsible subsets; the second's source must sit inside
    the first's target set, and widths add."""
    full = _full_set(algebra)
    if not second.source <= first.target:
        raise BuildError("the second source must be contained in the first target set")
    width = first.width + second.width
    asm = _Assembler(algebra, n, first.source, width)
    widened: dict[frozenset[int], int] = {}

    def resolve(adv: Adversary) -> int:
        _, wide = _axiom_shape(adv, full, min(second.source))
        ref = widened.get(wide)
        if ref is None:
            ref = _graft(asm, first, lambda a: asm.axiom(_widen(a, wide, full)))
            widened[wide] = ref
        return ref

    result = _graft(asm, second, resolve)
    return asm.finish(first.target | second.target, result)


def _lift_sub_cert(
    algebra: Algebra, n: int, sub_elements: Sequence[int], sub_cert: Certificate
) -> Certificate:
    """Replay a subalgebra certificate inside the full algebra: relabelled
    axioms come from the full-domain families and every image only grows."""
    full = _full_set(algebra)
    sub_full = frozenset(range(len(sub_elements)))
    source = frozenset(sub_elements[s] for s in sub_cert.source)
    asm = _Assembler(algebra, n, source, sub_cert.width)

    def resolve(adv: Adversary) -> int:
        element, wide = _axiom_shape(adv, sub_full, min(sub_cert.source))
        fam = adv_family(n, (sub_elements[element],), sub_cert.width, full)
        return asm.axiom(fam.member(sorted(wide)))

    def transform(e: CertEntry) -> tuple[Operation, Trace]:
        return replay_trace(algebra, e.trace), e.trace

    result = _graft(asm, sub_cert, resolve, transform)
    target = frozenset(sub_elements[s] for s in sub_cert.target)
    return asm.finish(target, result)


def _build_near_unanimity(
    algebra: Algebra, n: int, op: Operation, trace: Trace, source: int
) -> Certificate:
    if not tag_operation(op).near_unanimity:
        raise BuildError(f"{op.name} does not satisfy the near-unanimity identities")
    inner = _build_singleton(algebra, n, source)
    return _extend_cert(algebra, n, inner, op, trace, _full_set(algebra))


def _build_two_element(algebra: Algebra, n: int, count_cap: int) -> Certificate:
    """Dispatch over the term operations of a two-element idempotent algebra;
    fails exactly when the algebra is essentially a G-set."""
    if algebra.domain.size != 2:
        raise BuildError("two_element applies to two-element algebras only")
    terms = generate_term_operations(algebra, 3, count_cap)
    semilattice = maltsev = dualdisc = nu = None
    for op in terms.operations:
        t = tag_operation(op)
        if semilattice is None and t.semilattice and t.unit_element is not None:
            semilattice = (op, t.unit_element)
        if maltsev is None and t.maltsev:
            maltsev = op
        if dualdisc is None and t.dual_discriminator:
            dualdisc = op
        if nu is None and t.near_unanimity:
            nu = op
    if semilattice is not None:
        op, unit = semilattice
        return _build_unit_chain(algebra, n, op, terms.traces[op], unit)
    if maltsev is not None:
        return _build_maltsev_chain(algebra, n, maltsev, terms.traces[maltsev], 0)
    if dualdisc is not None:
        return _build_dualdisc_chain(algebra, n, dualdisc, terms.traces[dualdisc], 0, 1)
    if nu is not None:
        return _build_near_unanimity(algebra, n, nu, terms.traces[nu], 0)
    raise BuildError(
        "no semilattice, Mal'tsev, dual discriminator, or near-unanimity term "
        "operation up to arity 3: the algebra is a G-set"
    )


def _special_semilattice_shape(op: Operation) -> int | None:
    """The absorbing element m when op(x, y) = m for all x != y, else None."""
    if op.arity != 2 or not op.is_idempotent():
        return None
    d = op.domain_size
    off = {op.table[op.index((x, y))] for x in range(d) for y in range(d) if x != y}
    if len(off) == 1:
        return next(iter(off))
    return None


def _build_strictly_simple(algebra: Algebra, n: int, count_cap: int) -> Certificate:
    """Dispatch for strictly simple idempotent algebras without a G-set factor:
    a dual discriminator, a Mal'tsev operation, or a semilattice collapsing all
    unequal pairs to one element must appear among the term operations."""
    if not is_strictly_simple(algebra):
        raise BuildError("the algebra is not strictly simple")
    terms = generate_term_operations(algebra, 3, count_cap)
    for op in terms.operations:
        t = tag_operation(op)
        if t.maltsev:
            return _build_maltsev_chain(algebra, n, op, terms.traces[op], 0)
        if t.near_unanimity:
            # a dual discriminator lands here too: near-unanimity keeps the
            # source one-element, which the callers' inductions require
            return _build_near_unanimity(algebra, n, op, terms.traces[op], 0)
    for op in terms.operations:
        m = _special_semilattice_shape(op)
        if m is None:
            continue
        anchor = next(a for a in range(algebra.domain.size) if a != m)
        inner = _build_singleton(algebra, n, anchor)
        pair = _extend_cert(
            algebra, n, inner, op, terms.traces[op], frozenset((anchor, m))
        )
        cert = _enlarge_cert(algebra, n, pair)
        if cert.target != _full_set(algebra):
            raise BuildError("the two-element seed does not generate the whole algebra")
        return cert
    extra = " (closure truncated)" if terms.truncated else ""
    raise BuildError(f"no dispatch operation found for the strictly simple algebra{extra}")


def _build_pair_minimal(algebra: Algebra, n: int, count_cap: int) -> Certificate:
    """Grow a collapsible subset one element at a time: each new element joins
    the current source inside a strictly simple generated subalgebra, and the
    union step reroots the source there."""
    if not is_pair_minimal(algebra):
        raise BuildError("the algebra is not pair minimal")
    d = algebra.domain.size
    current = _build_singleton(algebra, n, 0)
    covered = {0}
    source_element = 0
    while covered != set(range(d)):
        fresh = min(set(range(d)) - covered)
        pair_universe = generated_subalgebra(algebra, (source_element, fresh))
        sub, elements = restrict(algebra, pair_universe)
        if sub.domain.size == 1:
            covered.add(fresh)
            continue
        sub_cert = _build_strictly_simple(sub, n, count_cap)
        lifted = _lift_sub_cert(algebra, n, elements, sub_cert)
        current = _combine_certs(algebra, n, lifted, current)
        covered |= set(pair_universe) | set(current.target)
        source_element = next(iter(lifted.source))
    if current.target != frozenset(range(d)):
        current = _enlarge_cert(algebra, n, current)
        if current.target != frozenset(range(d)):
            raise BuildError("pair-minimal induction did not reach the full universe")
    return current


def lift_through_quotient(
    quotient_certificate: Certificate,
    algebra: Algebra,
    congruence: Congruence,
    representatives: Iterable[int],
) -> Certificate:
    """Lift a certificate for the block algebra back to the original algebra:
    block-valued axioms become representative-valued axioms, traces replay on
    the original generators, and a closing enlargement reaches the universe.

    `representatives` must contain one element of every source block.
    """
    _require_idempotent(algebra)
    q_alg = quotient(algebra, congruence)
    n = quotient_certificate.n
    check = verify_certificate(quotient_certificate, q_alg)
    if not check:
        raise BuildError(f"quotient certificate does not verify: {check.failure}")
    reps = sorted(set(representatives))
    block_rep: dict[int, int] = {}
    for t in reps:
        if not (0 <= t < algebra.domain.size):
            raise BuildError(f"representative {t} out of range")
        block_rep.setdefault(congruence.block_of(t), t)
    for s in quotient_certificate.source:
        if s not in block_rep:
            raise BuildError(f"no representative given for source block {s}")
    q_full = frozenset(range(q_alg.domain.size))
    full = _full_set(algebra)
    asm = _Assembler(
        algebra, n, frozenset(reps), quotient_certificate.width
    )

    def resolve(adv: Adversary) -> int:
        block, wide = _axiom_shape(adv, q_full, min(quotient_certificate.source))
        fam = adv_family(n, (block_rep[block],), quotient_certificate.width, full)
        return asm.axiom(fam.member(sorted(wide)))

    def transform(e: CertEntry) -> tuple[Operation, Trace]:
        return replay_trace(algebra, e.trace), e.trace

    ref = _graft(asm, quotient_certificate, resolve, transform)
    closed = _enlarge_cert(algebra, n, asm.finish(full, ref))
    final = closed.entries[closed.result].adversary
    if not dominated(full_adversary(n, algebra.domain.size), final):
        raise BuildError("lifted derivation does not reach the full universe")
    return closed


def build_certificate(builder: CertificateBuilder, algebra: Algebra, n: int) -> Certificate:
    """Run a named construction strategy; raises BuildError with the reason
    when the strategy does not apply."""
    _require_idempotent(algebra)
    _require_n(n)
    p = builder.params
    count_cap = p.get("count_cap", DEFAULT_TERM_COUNT_CAP)
    strategy = builder.strategy
    if strategy == "singleton":
        return _build_singleton(algebra, n, p.get("element", 0))
    if strategy in ("and_chain", "unit_element"):
        if strategy == "and_chain" and algebra.domain.size != 2:
            raise BuildError("and_chain applies to two-element algebras")
        unit = p.get("unit")

        def want(opn: Operation) -> bool:
            t = tag_operation(opn)
            if t.unit_element is None or not t.idempotent or opn.arity != 2:
                return False
            return unit is None or t.unit_element == unit

        op, trace, warns = _resolve_op(
            algebra, p.get("op"), p.get("trace"), want,
            "unit_element", arity_cap=2, count_cap=count_cap,
        )
        resolved_unit = tag_operation(op).unit_element
        cert = _build_unit_chain(algebra, n, op, trace, resolved_unit)
        return _with_warnings(cert, warns)
    if strategy == "maltsev_chain":
        op, trace, warns = _resolve_op(
            algebra, p.get("op"), p.get("trace"),
            lambda opn: tag_operation(opn).maltsev,
            "maltsev_chain", count_cap=count_cap,
        )
        return _with_warnings(
            _build_maltsev_chain(algebra, n, op, trace, p.get("source", 0)), warns
        )
    if strategy == "dualdisc_chain":
        op, trace, warns = _resolve_op(
            algebra, p.get("op"), p.get("trace"),
            lambda opn: tag_operation(opn).dual_discriminator,
            "dualdisc_chain", count_cap=count_cap,
        )
        b, c = p.get("pair", (0, 1))
        return _with_warnings(_build_dualdisc_chain(algebra, n, op, trace, b, c), warns)
    if strategy == "near_unanimity":
        op, trace, warns = _resolve_op(
            algebra, p.get("op"), p.get("trace"),
            lambda opn: tag_operation(opn).near_unanimity,
            "near_unanimity", count_cap=count_cap,
        )
        return _with_warnings(
            _build_near_unanimity(algebra, n, op, trace, p.get("source", 0)), warns
        )
    if strategy == "extends_step":
        inner = build_certificate(p["inner"], algebra, n)
        op, trace, warns = _resolve_op(
            algebra, p.get("op"), p.get("trace"),
            lambda opn: _extends(opn, inner.target, frozenset(p["target"])),
            "extends_step", count_cap=count_cap,
        )
        return _with_warnings(
            _extend_cert(algebra, n, inner, op, trace, frozenset(p["target"])), warns
        )
    if strategy == "subalgebra_enlarge":
        inner = build_certificate(p["inner"], algebra, n)
        return _enlarge_cert(algebra, n, inner)
    if strategy == "combine_subsets":
        first = build_certificate(p["first"], algebra, n)
        second = build_certificate(p["second"], algebra, n)
        return _combine_certs(algebra, n, first, second)
    if strategy == "strictly_simple":
        return _build_strictly_simple(algebra, n, count_cap)
    if strategy == "pair_minimal":
        return _build_pair_minimal(algebra, n, count_cap)
    if strategy == "two_element":
        return _build_two_element(algebra, n, count_cap)
    if strategy == "quotient_lift":
        congruence = disjoint_maximal_congruence(algebra)
        if congruence is None:
            raise BuildError(
                "quotient_lift needs an enclosed algebra whose maximal proper "
                "subalgebras are disjoint and covering"
            )
        q_alg = quotient(algebra, congruence)
        q_builder = p.get("inner")
        if q_builder is None:
            q_builder, _ = plan_certificate(q_alg, count_cap=count_cap)
        q_cert = build_certificate(q_builder, q_alg, n)
        reps = p.get("representatives")
        if reps is None:
            reps = [min(congruence.blocks[s]) for s in sorted(q_cert.source)]
        return lift_through_quotient(q_cert, algebra, congruence, reps)
    raise BuildError(f"unknown strategy {strategy!r}")


def _with_warnings(cert: Certificate, warnings: Sequence[str]) -> Certificate:
    if not warnings:
        return cert
    return Certificate(
        cert.target, cert.source, cert.width, cert.n,
        cert.entries, cert.result, cert.warnings + tuple(warnings),
    )


def plan_certificate(
    algebra: Algebra,
    count_cap: int = DEFAULT_TERM_COUNT_CAP,
    _depth: int = 0,
) -> tuple[CertificateBuilder, list[str]]:
    """Choose a construction strategy by structural analysis; raises BuildError
    when no strategy applies (which is exactly the sink/G-set territory)."""
    _require_idempotent(algebra)
    if _depth > algebra.domain.size + 2:
        raise BuildError("strategy recursion exceeded the universe size")
    d = algebra.domain.size
    if d == 1:
        return CertificateBuilder("singleton", {"element": 0}), []
    if d == 2:
        probe = _build_two_element(algebra, 1, count_cap)  # raises on G-sets
        return CertificateBuilder("two_element", {"count_cap": count_cap}), list(probe.warnings)
    notes: list[str] = []

    def tagged_builder(op: Operation, trace: Trace) -> CertificateBuilder | None:
        t = tag_operation(op)
        if op.arity == 2 and t.idempotent and t.unit_element is not None:
            return CertificateBuilder(
                "unit_element", {"op": op, "trace": trace, "unit": t.unit_element}
            )
        if t.maltsev:
            return CertificateBuilder(
                "maltsev_chain", {"op": op, "trace": trace, "source": 0}
            )
        if t.dual_discriminator:
            return CertificateBuilder(
                "dualdisc_chain", {"op": op, "trace": trace, "pair": (0, 1)}
            )
        if t.near_unanimity:
            return CertificateBuilder(
                "near_unanimity", {"op": op, "trace": trace, "source": 0}
            )
        return None

    # generators first: no closure needed when one of them already qualifies
    for gi, g in enumerate(algebra.generators):
        builder = tagged_builder(g, ("gen", gi))
        if builder is not None:
            return builder, notes
    terms = generate_term_operations(algebra, 3, count_cap)
    if terms.truncated:
        notes.append("term closure truncated during strategy planning")
    for op in terms.operations:
        builder = tagged_builder(op, terms.traces[op])
        if builder is not None:
            return builder, notes
    if is_strictly_simple(algebra):
        return CertificateBuilder("strictly_simple", {"count_cap": count_cap}), notes
    gset, _ = has_gset_factor(algebra)
    if not gset and is_pair_minimal(algebra):
        return CertificateBuilder("pair_minimal", {"count_cap": count_cap}), notes
    congruence = disjoint_maximal_congruence(algebra)
    if congruence is not None and any(len(b) > 1 for b in congruence.blocks):
        q_alg = quotient(algebra, congruence)
        q_builder, q_notes = plan_certificate(q_alg, count_cap, _depth + 1)
        return (
            CertificateBuilder("quotient_lift", {"inner": q_builder, "count_cap": count_cap}),
            notes + q_notes,
        )
    raise BuildError("no certificate strategy applies")


# ---------------------------------------------------------------------------
# Bounded composability search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchStep:
    adversary: Adversary
    op: Operation
    trace: Trace
    inputs: tuple[Adversary, ...]


@dataclass
class SearchOutcome:
    found: bool
    steps: tuple[SearchStep, ...] = ()
    rounds: int = 0
    caps: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.found


def search_composable(
    algebra: Algebra,
    target: Adversary,
    axioms: Iterable[Adversary],
    arity_cap: int = 3,
    depth: int = DEFAULT_SEARCH_DEPTH,
    count_cap: int = DEFAULT_TERM_COUNT_CAP,
) -> SearchOutcome:
    """Saturate the derivable adversaries under every term operation up to the
    arity cap, keeping only domination-maximal members.

    Exhaustion is conclusive only relative to the caps, which are echoed in
    the outcome.
    """
    terms = generate_term_operations(algebra, arity_cap, count_cap)
    caps = {
        "arity_cap": arity_cap,
        "depth": depth,
        "term_count": len(terms.operations),
        "term_closure_truncated": terms.truncated,
    }
    axioms = list(axioms)
    for a in axioms:
        if len(a) != len(target):
            raise StructuralError("axiom adversary length differs from the target")
    provenance: dict[Adversary, SearchStep | None] = {}
    frontier: list[Adversary] = []

    def add(adv: Adversary, step: SearchStep | None) -> bool:
        if any(dominated(adv, kept) for kept in frontier):
            return False
        if adv not in provenance:
            provenance[adv] = step
        frontier[:] = [kept for kept in frontier if not dominated(kept, adv)]
        frontier.append(adv)
        return True

    for a in axioms:
        add(a, None)

    def finished() -> Adversary | None:
        for adv in frontier:
            if dominated(target, adv):
                return adv
        return None

    rounds = 0
    winner = finished()
    while winner is None and rounds < depth:
        rounds += 1
        additions = []
        for op in terms.operations:
            pool = list(frontier)
            for combo in itertools.product(pool, repeat=op.arity):
                image = _image_adversary(op, combo)
                if image not in provenance:
                    additions.append(
                        SearchStep(image, op, terms.traces[op], tuple(combo))
                    )
        changed = False
        for step in additions:
            if add(step.adversary, step):
                changed = True
        winner = finished()
        if winner is not None or not changed:
            break
    if winner is None:
        return SearchOutcome(False, (), rounds, caps)
    chain: list[SearchStep] = []
    seen: set[Adversary] = set()

    def unwind(adv: Adversary):
        if adv in seen:
            return
        seen.add(adv)
        step = provenance.get(adv)
        if step is None:
            return
        for inp in step.inputs:
            unwind(inp)
        chain.append(step)

    unwind(winner)
    return SearchOutcome(True, tuple(chain), rounds, caps)


# ---------------------------------------------------------------------------
# Three-element sink detection
# ---------------------------------------------------------------------------


def is_alphabeta_projective(
    op: Operation, alpha: frozenset[int], beta: frozenset[int]
) -> bool:
    """The operation acts, at the level of the two maximal proper subalgebras,
    as a projection: some coordinate i has image inside the i-th argument's
    subalgebra for every argument pattern."""
    for i in range(op.arity):
        if all(
            op_image(op, pattern) <= pattern[i]
            for pattern in itertools.product((alpha, beta), repeat=op.arity)
        ):
            return True
    return False


@dataclass
class SinkVerdict:
    kind: str  # sink_certified | not_sink | inconclusive
    reason: str
    certificate: Certificate | None = None
    builder: CertificateBuilder | None = None
    caps: dict = field(default_factory=dict)


def _shared_semilattice_in_terms(
    algebra: Algebra, shared: int, count_cap: int
) -> Operation | None:
    terms = generate_term_operations(algebra, 2, count_cap)
    wanted = semilattice_to_shared(algebra.domain.size, shared)
    for op in terms.operations:
        if op == wanted:
            return op
    return None


def detect_sink_candidate(
    algebra: Algebra,
    count_cap: int = DEFAULT_TERM_COUNT_CAP,
    check_n: Sequence[int] = (1, 2, 3),
) -> SinkVerdict:
    """Certified sink verdicts for idempotent algebras on at most 3 elements.

    A sink must be enclosed, fully connected, have no G-set factor, and admit
    no collapsibility certificate; on three elements the certification route
    is: exactly two two-element subalgebras sharing one element, the
    semilattice collapsing unequal pairs to the shared element among the binary
    term operations, and every generator projective at the level of the two
    subalgebras.
    """
    if not algebra.is_idempotent():
        raise StructuralError("sink detection assumes an idempotent algebra")
    caps = {"count_cap": count_cap, "check_n": tuple(check_n)}
    d = algebra.domain.size
    if d <= 2:
        return SinkVerdict("not_sink", "no one- or two-element algebra is a sink", caps=caps)
    if d > 3:
        return SinkVerdict(
            "inconclusive", f"certified verdicts cover universes up to 3 elements, not {d}",
            caps=caps,
        )
    if not is_enclosed(algebra):
        return SinkVerdict("not_sink", "not enclosed", caps=caps)
    if not is_fully_connected(algebra):
        return SinkVerdict("not_sink", "not fully connected", caps=caps)
    gset, factor = has_gset_factor(algebra)
    if gset:
        return SinkVerdict(
            "not_sink",
            f"has a G-set factor on universe {sorted(factor.universe)}",
            caps=caps,
        )
    two_element_subs = [
        u for u in enumerate_subalgebras(algebra).universes() if len(u) == 2
    ]
    if len(two_element_subs) == 2:
        alpha, beta = two_element_subs
        common = alpha & beta
        if len(common) == 1:
            shared = next(iter(common))
            has_shape = _shared_semilattice_in_terms(algebra, shared, count_cap)
            projective = all(
                is_alphabeta_projective(g, alpha, beta) for g in algebra.generators
            )
            if has_shape is not None and projective:
                return SinkVerdict(
                    "sink_certified",
                    "two overlapping two-element subalgebras, the collapsing "
                    "semilattice is a term operation, and all generators are "
                    "projective over them",
                    caps=caps,
                )
    try:
        builder, notes = plan_certificate(algebra, count_cap)
        cert = None
        for n in check_n:
            cert = build_certificate(builder, algebra, n)
            check = verify_certificate(cert, algebra, n)
            if not check:
                raise BuildError(f"built certificate failed verification: {check.failure}")
        return SinkVerdict(
            "not_sink",
            "collapsible: a certificate builder succeeds"
            + (f" ({'; '.join(notes)})" if notes else ""),
            certificate=cert,
            builder=builder,
            caps=caps,
        )
    except BuildError as err:
        return SinkVerdict("inconclusive", f"no builder applies: {err}", caps=caps)


# ---------------------------------------------------------------------------
# Certificate text format
# ---------------------------------------------------------------------------


def _format_coord(coord: frozenset[int], domain_size: int) -> str:
    if len(coord) == domain_size:
        return "*"
    return "{" + ",".join(str(v) for v in sorted(coord)) + "}"


def serialize_certificate(cert: Certificate, domain_size: int) -> str:
    lines = [
        "certificate"
        f" n={cert.n}"
        f" width={cert.width}"
        f" source={','.join(str(s) for s in sorted(cert.source))}"
        f" target={','.join(str(t) for t in sorted(cert.target))}"
        f" domain={domain_size}"
    ]
    for idx, e in enumerate(cert.entries):
        adv = " ".join(_format_coord(c, domain_size) for c in e.adversary.coords)
        if e.op is None:
            lines.append(f"axiom {idx}: {adv}")
        else:
            ids = ", ".join(str(i) for i in e.inputs)
            lines.append(f"step {idx}: {adv} <= {trace_to_str(e.trace)}({ids})")
    lines.append(f"result {cert.result}")
    for w in cert.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def parse_certificate(text: str, algebra: Algebra) -> Certificate:
    header: dict[str, str] = {}
    entries: list[CertEntry] = []
    result: int | None = None
    warnings: list[str] = []
    d = algebra.domain.size
    full = frozenset(range(d))

    def coord(tok: str) -> frozenset[int]:
        if tok == "*":
            return full
        if not (tok.startswith("{") and tok.endswith("}")):
            raise StructuralError(f"bad adversary coordinate {tok!r}")
        return frozenset(int(v) for v in tok[1:-1].split(",") if v)

    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("certificate"):
            for part in line.split()[1:]:
                key, _, value = part.partition("=")
                header[key] = value
        elif line.startswith("axiom"):
            _, rest = line.split(":", 1)
            entries.append(CertEntry(Adversary(tuple(coord(t) for t in rest.split()))))
        elif line.startswith("step"):
            _, rest = line.split(":", 1)
            adv_text, _, deriv = rest.partition("<=")
            adv = Adversary(tuple(coord(t) for t in adv_text.split()))
            trace_text, _, ids_text = deriv.strip().rpartition("(")
            trace = parse_trace(trace_text.strip())
            ids = tuple(
                int(tok) for tok in ids_text.rstrip(")").split(",") if tok.strip()
            )
            entries.append(CertEntry(adv, replay_trace(algebra, trace), trace, ids))
        elif line.startswith("result"):
            result = int(line.split()[1])
        elif line.startswith("warning:"):
            warnings.append(line.split(":", 1)[1].strip())
        else:
            raise StructuralError(f"unrecognized certificate line {line!r}")
    if result is None or "n" not in header:
        raise StructuralError("certificate text is missing its header or result")
    return Certificate(
        target=frozenset(int(v) for v in header["target"].split(",") if v),
        source=frozenset(int(v) for v in header["source"].split(",") if v),
        width=int(header["width"]),
        n=int(header["n"]),
        entries=tuple(entries),
        result=result,
        warnings=tuple(warnings),
    )
