"""In-memory model of an affine loop nest plus JSON ingestion and checking.

A nest consists of statements with parametric box (or explicit-vertex)
iteration domains, array declarations, affine accesses and affine
dependences.  Dependences are *input*: deriving them from accesses is out of
scope, but `load_nest` cross-checks every dependence numerically at the
smallest parameter values.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from .algebra import IntMatrix, IntVector

DEP_KINDS = ("flow", "anti", "out", "in")
ACCESS_KINDS = ("read", "write")

DEFAULT_ENUM_CAP = 10**6


class NestError(ValueError):
    """Malformed or inconsistent loop-nest input."""


class EnumerationError(ValueError):
    """A domain cannot be enumerated (wrong form or too many points)."""


@dataclass(frozen=True)
class OuterVars:
    names: tuple[str, ...]
    minima: IntVector  # smallest admissible value per outer variable

    @property
    def count(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class AffineBound:
    param_coeffs: IntVector  # length e
    constant: int

    def value_at(self, n_vals) -> int:
        return self.param_coeffs.dot(n_vals) + self.constant


@dataclass(frozen=True)
class Domain:
    """Either a parametric box or an explicit list of parametric vertices."""

    box: tuple[tuple[AffineBound, AffineBound], ...] | None = None
    explicit_vertices: tuple[tuple[IntMatrix, IntVector], ...] | None = None

    def __post_init__(self):
        if (self.box is None) == (self.explicit_vertices is None):
            raise NestError("domain must have exactly one of box / vertices")

    @property
    def dim(self) -> int:
        if self.box is not None:
            return len(self.box)
        return len(self.explicit_vertices[0][1]) if self.explicit_vertices else 0


@dataclass(frozen=True)
class Statement:
    id: str
    depth: int
    domain: Domain
    textual_order: int


@dataclass(frozen=True)
class ArrayDecl:
    id: str
    dim: int


@dataclass(frozen=True)
class Access:
    array: str
    statement: str
    slot: int
    kind: str  # read | write
    iter_coeffs: IntMatrix  # dim x depth
    param_coeffs: IntMatrix  # dim x e
    offset: IntVector  # length dim

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.array, self.statement, self.slot)

    def index_at(self, point, n_vals) -> IntVector:
        return self.iter_coeffs.matvec(point) + self.param_coeffs.matvec(n_vals) + self.offset


@dataclass(frozen=True)
class Dependence:
    source: str
    target: str
    kind: str  # flow | anti | out | in
    source_map: IntMatrix  # depth(source) x depth(target)
    param_map: IntMatrix  # depth(source) x e
    shift: IntVector  # length depth(source)
    domain: Domain  # subset of the target statement's domain
    produced_by: tuple[str, int] | None = None  # (array, read slot) for flow deps

    def source_point(self, target_point, n_vals) -> IntVector:
        return (
            self.source_map.matvec(target_point)
            + self.param_map.matvec(n_vals)
            - self.shift
        )


@dataclass(frozen=True)
class LoopNest:
    outer_vars: OuterVars
    statements: tuple[Statement, ...]
    arrays: tuple[ArrayDecl, ...]
    accesses: tuple[Access, ...]
    dependences: tuple[Dependence, ...]

    @property
    def max_depth(self) -> int:
        return max(s.depth for s in self.statements)

    def statement(self, sid: str) -> Statement:
        for s in self.statements:
            if s.id == sid:
                return s
        raise NestError(f"unknown statement {sid!r}")

    def array(self, aid: str) -> ArrayDecl:
        for a in self.arrays:
            if a.id == aid:
                return a
        raise NestError(f"unknown array {aid!r}")

    def access(self, key) -> Access:
        for acc in self.accesses:
            if acc.key == tuple(key):
                return acc
        raise NestError(f"unknown access {key!r}")


def vertices(domain: Domain) -> list[tuple[IntMatrix, IntVector]]:
    """Parametric vertices (R, omega) with v = R*N + omega.

    Box domains yield the corner combinations of lower/upper bounds,
    deduplicated; explicit vertex lists pass through unchanged.
    """
    if domain.explicit_vertices is not None:
        return list(domain.explicit_vertices)
    out = []
    seen = set()
    for choice in itertools.product((0, 1), repeat=len(domain.box)):
        r_rows = []
        omega = []
        for pick, (lo, hi) in zip(choice, domain.box):
            bound = hi if pick else lo
            r_rows.append(tuple(bound.param_coeffs))
            omega.append(bound.constant)
        e = len(domain.box[0][0].param_coeffs) if domain.box else 0
        key = (tuple(r_rows), tuple(omega))
        if key not in seen:
            seen.add(key)
            out.append((IntMatrix(r_rows, e), IntVector(omega)))
    return out


def enumerate_domain(domain: Domain, n_vals, cap: int = DEFAULT_ENUM_CAP) -> list[IntVector]:
    """All integer points of a box domain at concrete parameters, lex order."""
    if domain.box is None:
        raise EnumerationError("explicit-vertex domains cannot be enumerated")
    ranges = []
    total = 1
    for lo, hi in domain.box:
        a, b = lo.value_at(n_vals), hi.value_at(n_vals)
        if b < a:
            raise EnumerationError(f"empty domain at N={tuple(n_vals)}: [{a}..{b}]")
        total *= b - a + 1
        if total > cap:
            raise EnumerationError(f"domain has more than {cap} points")
        ranges.append(range(a, b + 1))
    return [IntVector(p) for p in itertools.product(*ranges)]


def contains_point(domain: Domain, point, n_vals) -> bool:
    if domain.box is None:
        raise EnumerationError("containment check needs a box domain")
    return all(
        lo.value_at(n_vals) <= x <= hi.value_at(n_vals)
        for x, (lo, hi) in zip(point, domain.box)
    )


# ---------------------------------------------------------------------------
# JSON ingestion / serialization.  Field names below are the wire format.
# ---------------------------------------------------------------------------


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise NestError(f"{where}: missing field {key!r}")
    return obj[key]


def _parse_bound(obj: dict, e: int, where: str) -> AffineBound:
    coeffs = IntVector(_need(obj, "coeffs", where))
    if len(coeffs) != e:
        raise NestError(f"{where}: bound has {len(coeffs)} coefficients, expected {e}")
    return AffineBound(coeffs, int(_need(obj, "const", where)))


def _parse_domain(obj: dict, e: int, where: str) -> Domain:
    if "box" in obj:
        box = tuple(
            (
                _parse_bound(_need(pair, "lower", where), e, where),
                _parse_bound(_need(pair, "upper", where), e, where),
            )
            for pair in obj["box"]
        )
        return Domain(box=box)
    if "vertices" in obj:
        verts = []
        for v in obj["vertices"]:
            r = IntMatrix(_need(v, "R", where), e)
            omega = IntVector(_need(v, "omega", where))
            if r.nrows != len(omega):
                raise NestError(f"{where}: vertex R/omega dimensions differ")
            verts.append((r, omega))
        if verts and len({len(om) for _, om in verts}) != 1:
            raise NestError(f"{where}: vertices of mixed dimensionality")
        return Domain(explicit_vertices=tuple(verts))
    raise NestError(f"{where}: domain needs 'box' or 'vertices'")


def _parse_matrix(obj, nrows: int, ncols: int, where: str) -> IntMatrix:
    m = IntMatrix(obj, ncols if not obj else None)
    if m.nrows != nrows or m.ncols != ncols:
        raise NestError(f"{where}: expected {nrows}x{ncols} matrix, got {m.nrows}x{m.ncols}")
    return m


def load_nest(source) -> LoopNest:
    """Parse and fully validate a loop-nest description.

    `source` is a JSON string, a parsed dict, or a path to a JSON file.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise NestError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")

    params = _need(doc, "params", "document")
    names = tuple(_need(p, "name", "params") for p in params)
    if len(set(names)) != len(names):
        raise NestError("duplicate outer variable names")
    outer = OuterVars(names, IntVector(_need(p, "min", "params") for p in params))
    e = outer.count
    n0 = outer.minima

    stmts_doc = _need(doc, "statements", "document")
    if not stmts_doc:
        raise NestError("no statements")
    statements = []
    for s in stmts_doc:
        sid = _need(s, "id", "statements")
        where = f"statement {sid!r}"
        depth = int(_need(s, "depth", where))
        dom = _parse_domain(_need(s, "domain", where), e, where)
        if dom.dim != depth:
            raise NestError(f"{where}: domain dimensionality {dom.dim} != depth {depth}")
        if dom.box is not None:
            for k, (lo, hi) in enumerate(dom.box):
                if hi.value_at(n0) < lo.value_at(n0):
                    raise NestError(f"{where}: dimension {k} empty at N^(0)")
        statements.append(Statement(sid, depth, dom, int(_need(s, "order", where))))
    if len({s.id for s in statements}) != len(statements):
        raise NestError("duplicate statement ids")

    arrays = []
    for a in _need(doc, "arrays", "document"):
        aid = _need(a, "id", "arrays")
        dim = int(_need(a, "dim", f"array {aid!r}"))
        if dim < 1:
            raise NestError(f"array {aid!r}: dim must be >= 1")
        arrays.append(ArrayDecl(aid, dim))
    if len({a.id for a in arrays}) != len(arrays):
        raise NestError("duplicate array ids")

    nest = LoopNest(outer, tuple(statements), tuple(arrays), (), ())

    accesses = []
    for acc in _need(doc, "accesses", "document"):
        aid = _need(acc, "array", "accesses")
        sid = _need(acc, "statement", "accesses")
        slot = int(_need(acc, "slot", "accesses"))
        where = f"access ({aid!r}, {sid!r}, {slot})"
        arr = nest.array(aid)
        stmt = nest.statement(sid)
        kind = _need(acc, "kind", where)
        if kind not in ACCESS_KINDS:
            raise NestError(f"{where}: bad kind {kind!r}")
        accesses.append(
            Access(
                aid,
                sid,
                slot,
                kind,
                _parse_matrix(_need(acc, "F", where), arr.dim, stmt.depth, where),
                _parse_matrix(_need(acc, "G", where), arr.dim, e, where),
                IntVector(_need(acc, "f", where)),
            )
        )
        if len(accesses[-1].offset) != arr.dim:
            raise NestError(f"{where}: offset length != array dim")
    if len({a.key for a in accesses}) != len(accesses):
        raise NestError("duplicate access (array, statement, slot) keys")

    dependences = []
    for i, dep in enumerate(doc.get("dependences", [])):
        where = f"dependence #{i}"
        src = nest.statement(_need(dep, "source", where))
        tgt = nest.statement(_need(dep, "target", where))
        kind = _need(dep, "kind", where)
        if kind not in DEP_KINDS:
            raise NestError(f"{where}: bad kind {kind!r}")
        dom = _parse_domain(_need(dep, "domain", where), e, where)
        if dom.dim != tgt.depth:
            raise NestError(f"{where}: domain dimensionality != target depth")
        produced = None
        if dep.get("produced_by") is not None:
            pb = dep["produced_by"]
            produced = (_need(pb, "array", where), int(_need(pb, "slot", where)))
        d = Dependence(
            src.id,
            tgt.id,
            kind,
            _parse_matrix(_need(dep, "Phi", where), src.depth, tgt.depth, where),
            _parse_matrix(_need(dep, "Psi", where), src.depth, e, where),
            IntVector(_need(dep, "phi", where)),
            dom,
            produced,
        )
        if len(d.shift) != src.depth:
            raise NestError(f"{where}: phi length != source depth")
        if produced is not None:
            acc = next((a for a in accesses if a.key == (produced[0], tgt.id, produced[1])), None)
            if acc is None:
                raise NestError(f"{where}: produced_by does not name an access of the target")
        # every vertex of the dependence domain must map into the source
        # domain and lie inside the target domain (checked at N^(0))
        if src.domain.box is not None and tgt.domain.box is not None:
            for r, omega in vertices(dom):
                v = r.matvec(n0) + omega
                if not contains_point(tgt.domain, v, n0):
                    raise NestError(f"{where}: vertex {tuple(v)} outside target domain at N^(0)")
                ipt = d.source_point(v, n0)
                if not contains_point(src.domain, ipt, n0):
                    raise NestError(
                        f"{where}: source image {tuple(ipt)} outside source domain at N^(0)"
                    )
        dependences.append(d)

    return LoopNest(outer, tuple(statements), tuple(arrays), tuple(accesses), tuple(dependences))


def _bound_doc(b: AffineBound) -> dict:
    return {"coeffs": list(b.param_coeffs), "const": b.constant}


def _domain_doc(d: Domain) -> dict:
    if d.box is not None:
        return {"box": [{"lower": _bound_doc(lo), "upper": _bound_doc(hi)} for lo, hi in d.box]}
    return {
        "vertices": [
            {"R": [list(r) for r in rm.rows], "omega": list(om)}
            for rm, om in d.explicit_vertices
        ]
    }


def serialize(nest: LoopNest) -> dict:
    """Inverse of `load_nest`; the result reparses to an equivalent nest."""
    return {
        "params": [
            {"name": n, "min": m} for n, m in zip(nest.outer_vars.names, nest.outer_vars.minima)
        ],
        "statements": [
            {
                "id": s.id,
                "depth": s.depth,
                "domain": _domain_doc(s.domain),
                "order": s.textual_order,
            }
            for s in nest.statements
        ],
        "arrays": [{"id": a.id, "dim": a.dim} for a in nest.arrays],
        "accesses": [
            {
                "array": a.array,
                "statement": a.statement,
                "slot": a.slot,
                "kind": a.kind,
                "F": [list(r) for r in a.iter_coeffs.rows],
                "G": [list(r) for r in a.param_coeffs.rows],
                "f": list(a.offset),
            }
            for a in nest.accesses
        ],
        "dependences": [
            {
                "source": d.source,
                "target": d.target,
                "kind": d.kind,
                "Phi": [list(r) for r in d.source_map.rows],
                "Psi": [list(r) for r in d.param_map.rows],
                "phi": list(d.shift),
                "domain": _domain_doc(d.domain),
                "produced_by": (
                    None
                    if d.produced_by is None
                    else {"array": d.produced_by[0], "slot": d.produced_by[1]}
                ),
            }
            for d in nest.dependences
        ],
    }
