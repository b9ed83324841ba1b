"""Loop-nest ingestion, validation, vertices and enumeration."""

import copy

import pytest

from affsched.nest import (
    EnumerationError,
    NestError,
    contains_point,
    enumerate_domain,
    load_nest,
    serialize,
    vertices,
)
from conftest import FIXTURE_NAMES, fixture_doc, fixture_nest


class TestLoading:
    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    def test_fixtures_load(self, name):
        nest = fixture_nest(name)
        assert nest.statements and nest.arrays and nest.accesses

    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    def test_round_trip(self, name):
        nest = fixture_nest(name)
        again = load_nest(serialize(nest))
        assert serialize(again) == serialize(nest)

    def test_load_from_path(self, tmp_path):
        import json

        p = tmp_path / "n.json"
        p.write_text(json.dumps(fixture_doc("vecadd")))
        nest = load_nest(str(p))
        assert nest.max_depth == 1

    def test_parse_error_reports_location(self):
        with pytest.raises(NestError, match="line"):
            load_nest("{ bad json }")


class TestValidationErrors:
    def test_missing_field(self):
        doc = fixture_doc("vecadd")
        del doc["statements"][0]["depth"]
        with pytest.raises(NestError, match="depth"):
            load_nest(doc)

    def test_duplicate_statement_ids(self):
        doc = fixture_doc("vecadd")
        doc["statements"].append(copy.deepcopy(doc["statements"][0]))
        with pytest.raises(NestError, match="duplicate"):
            load_nest(doc)

    def test_duplicate_access_keys(self):
        doc = fixture_doc("vecadd")
        doc["accesses"].append(copy.deepcopy(doc["accesses"][0]))
        with pytest.raises(NestError, match="duplicate"):
            load_nest(doc)

    def test_bad_access_shape(self):
        doc = fixture_doc("vecadd")
        doc["accesses"][0]["F"] = [[1, 0]]
        with pytest.raises(NestError, match="expected 1x1"):
            load_nest(doc)

    def test_bad_dependence_kind(self):
        doc = fixture_doc("chain")
        doc["dependences"][0]["kind"] = "sideways"
        with pytest.raises(NestError, match="bad kind"):
            load_nest(doc)

    def test_empty_domain_at_minimum(self):
        doc = fixture_doc("vecadd")
        doc["statements"][0]["domain"]["box"][0]["lower"]["const"] = 5
        doc["params"][0]["min"] = 1
        with pytest.raises(NestError, match="empty"):
            load_nest(doc)

    def test_dependence_source_outside_domain(self):
        doc = fixture_doc("chain")
        # shift so the source image falls before the first iteration
        doc["dependences"][0]["phi"] = [5]
        with pytest.raises(NestError, match="source image"):
            load_nest(doc)

    def test_produced_by_must_resolve(self):
        doc = fixture_doc("chain")
        doc["dependences"][0]["produced_by"] = {"array": "x", "slot": 9}
        with pytest.raises(NestError, match="produced_by"):
            load_nest(doc)

    def test_unknown_statement_in_access(self):
        doc = fixture_doc("vecadd")
        doc["accesses"][0]["statement"] = "nope"
        with pytest.raises(NestError, match="unknown statement"):
            load_nest(doc)


class TestVertices:
    def test_chain_vertices(self):
        nest = fixture_nest("chain")
        verts = vertices(nest.statements[0].domain)
        evaluated = sorted(tuple(r.matvec([5]) + om) for r, om in verts)
        assert evaluated == [(1,), (5,)]

    def test_square_domain_has_four_corners(self):
        nest = fixture_nest("stencil")
        assert len(vertices(nest.statements[0].domain)) == 4

    def test_degenerate_corners_are_deduplicated(self):
        doc = fixture_doc("vecadd")
        # collapse the loop to the single point i = 0
        doc["statements"][0]["domain"]["box"][0]["upper"] = {"coeffs": [0], "const": 0}
        nest = load_nest(doc)
        assert len(vertices(nest.statements[0].domain)) == 1

    def test_explicit_vertices_pass_through(self):
        doc = fixture_doc("vecadd")
        doc["statements"][0]["domain"] = {
            "vertices": [
                {"R": [[0]], "omega": [0]},
                {"R": [[1]], "omega": [0]},
            ]
        }
        nest = load_nest(doc)
        assert len(vertices(nest.statements[0].domain)) == 2


class TestEnumeration:
    def test_points_in_lex_order(self):
        nest = fixture_nest("stencil")
        pts = enumerate_domain(nest.statements[0].domain, [2])
        assert [tuple(p) for p in pts] == [(1, 1), (1, 2), (2, 1), (2, 2)]

    def test_cap(self):
        nest = fixture_nest("stencil")
        with pytest.raises(EnumerationError, match="more than"):
            enumerate_domain(nest.statements[0].domain, [100], cap=10)

    def test_contains_point(self):
        nest = fixture_nest("stencil")
        dom = nest.statements[0].domain
        assert contains_point(dom, [1, 3], [3])
        assert not contains_point(dom, [0, 1], [3])
        assert not contains_point(dom, [1, 4], [3])

    def test_explicit_vertex_domain_cannot_enumerate(self):
        doc = fixture_doc("vecadd")
        doc["statements"][0]["domain"] = {"vertices": [{"R": [[0]], "omega": [0]}]}
        nest = load_nest(doc)
        with pytest.raises(EnumerationError):
            enumerate_domain(nest.statements[0].domain, [3])


class TestAccessAndDependence:
    def test_index_at(self):
        nest = fixture_nest("stencil")
        acc = nest.access(("u", "S1", 2))
        assert tuple(acc.index_at([3, 4], [9])) == (2, 4)

    def test_source_point(self):
        nest = fixture_nest("chain")
        dep = nest.dependences[0]
        assert tuple(dep.source_point([4], [9])) == (3,)

    def test_lookup_errors(self):
        nest = fixture_nest("vecadd")
        with pytest.raises(NestError):
            nest.statement("zz")
        with pytest.raises(NestError):
            nest.array("zz")
        with pytest.raises(NestError):
            nest.access(("zz", "S1", 1))
