# vim: set filetype=python ts=4 sw=4
# -*- coding: utf-8 -*-
"""Unit tests, and local fixtures for the tiles module."""
from fractions import Fraction
import math

import numpy as np
import pytest


def blank(origin=-16, step=1 / 32, count=1024):
    """Return a zero sampled function carrying the packet grid."""
    from sparsedom.signals import SampledFunction

    return SampledFunction(origin, step, np.zeros(count))


def unit_tritile(freqs=((6, 1), (-1, 1), (-7, 1))):
    """Return a tritile over [0, 1) with unit frequency intervals."""
    from sparsedom.grid import DyadicInterval
    from sparsedom.grid import Interval
    from sparsedom.tiles import Tritile

    return Tritile(DyadicInterval(0, 0), tuple(Interval(left, length) for left, length in freqs))


@pytest.fixture(scope="module")
def collection():
    """Return the default two scale collection."""
    from sparsedom.tiles import generate_rank1

    return generate_rank1(seed=0, scales=(-1, 0), density=1)


def packet_sum(collection, j, grid):
    """Return the sum of the component j packets of a collection."""
    from sparsedom.tiles import build_wave_packet

    total = sum(build_wave_packet(tritile.tile(j), grid).samples for tritile in collection)
    return grid.with_values(total)


def test_tile_area():
    """Test that tiles outside the area window are refused."""
    from sparsedom.grid import DyadicInterval
    from sparsedom.grid import Interval
    from sparsedom.tiles import Tile

    Tile(DyadicInterval(0, 0), Interval(0, 2))
    with pytest.raises(ValueError):
        Tile(DyadicInterval(0, 0), Interval(0, 4))
    with pytest.raises(ValueError):
        unit_tritile(freqs=((0, 1), (1, 1)))


def test_tritile_hull_and_json():
    """Test the frequency hull and the JSON round trip."""
    from sparsedom.grid import Interval
    from sparsedom.tiles import Tritile

    tritile = unit_tritile()
    assert tritile.hull == Interval.from_endpoints(-8, 8)
    assert Tritile.from_json(tritile.to_json()) == tritile


def test_generate_rank1_is_valid(collection):
    """Test that generated collections pass the validation."""
    from sparsedom.tiles import Rank1Collection
    from sparsedom.tiles import validate_rank1

    assert len(collection) == 9
    report = validate_rank1(collection)
    assert report.valid
    assert bool(report)
    restored = Rank1Collection.from_json(collection.to_json())
    assert restored.tritiles == collection.tritiles
    assert restored.separation == 8


def test_generate_rank1_dense():
    """Test denser and deeper generation."""
    from sparsedom.tiles import generate_rank1
    from sparsedom.tiles import validate_rank1

    dense = generate_rank1(seed=3, scales=(-2, -1, 0), density=2)
    assert len(dense) > 0
    assert validate_rank1(dense).valid
    assert dense.meta["density"] == 2


@pytest.mark.parametrize("separation,density", [(2, 1), (3, 1), (12, 1), (8, 0)])
def test_generate_rank1_rejects(separation, density):
    """Test that separations without room for property c are refused."""
    from sparsedom.tiles import generate_rank1

    with pytest.raises(ValueError):
        generate_rank1(separation=separation, density=density)


def test_validate_rank1_violations():
    """Test that shared time intervals and close scales are reported."""
    from sparsedom.grid import DyadicInterval
    from sparsedom.grid import Interval
    from sparsedom.tiles import Rank1Collection
    from sparsedom.tiles import Tritile
    from sparsedom.tiles import validate_rank1

    first = unit_tritile()
    second = unit_tritile(freqs=((6, 1), (10, 1), (20, 1)))
    report = validate_rank1(Rank1Collection([first, second]))
    assert not report.valid
    assert {"property": "b", "pair": [0, 1], "component": 0} in report.violations

    half = Fraction(1, 2)
    wide = Tritile(DyadicInterval(1, 0), tuple(Interval(left, half) for left in (6, -1, -7)))
    report = validate_rank1(Rank1Collection([first, wide]))
    properties = {item["property"] for item in report.violations}
    assert "a" in properties


def test_packet_normalizations():
    """Test the l1 and l2 normalizations and the measured adaptation."""
    from sparsedom.tiles import adaptation_constants
    from sparsedom.tiles import build_wave_packet

    tile = unit_tritile().tile(0)
    packet = build_wave_packet(tile, blank())
    constants = adaptation_constants(packet, 4)
    assert constants[0] == pytest.approx(1.0)
    assert all(math.isfinite(value) for value in constants)
    assert all(a <= b for a, b in zip(constants, constants[1:]))
    assert np.max(np.abs(packet.samples)) <= 1.0 + 1e-12

    normalized = build_wave_packet(tile, blank(), "l2")
    assert normalized.norm2() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        build_wave_packet(tile, blank(), "sup")


def test_packet_orthogonality():
    """Test that packets over one interval with disjoint frequencies are orthogonal."""
    from sparsedom.tiles import build_wave_packet

    tritile = unit_tritile()
    grid = blank()
    first = build_wave_packet(tritile.tile(0), grid, "l2")
    second = build_wave_packet(tritile.tile(1), grid, "l2")
    inner = grid.step * np.sum(first.samples * np.conj(second.samples))
    assert abs(inner) < 1e-10


def test_packet_resolution_limits():
    """Test frequencies below the resolution and above the Nyquist limit."""
    from sparsedom.grid import DyadicInterval
    from sparsedom.grid import Interval
    from sparsedom.tiles import build_wave_packet
    from sparsedom.tiles import Tile

    narrow = Tile(DyadicInterval(6, 0), Interval(Fraction(10, 64), Fraction(1, 64)))
    with pytest.raises(ValueError):
        build_wave_packet(narrow, blank())
    fast = Tile(DyadicInterval(0, 0), Interval(200, 1))
    with pytest.raises(ValueError):
        build_wave_packet(fast, blank())


def test_packet_csv():
    """Test the packet export."""
    from sparsedom.tiles import build_wave_packet
    from sparsedom.tiles import packet_csv

    packet = build_wave_packet(unit_tritile().tile(2), blank(count=256))
    lines = packet_csv(packet).splitlines()
    assert lines[0] == "x,real,imag,abs"
    assert len(lines) == 257


def test_tritile_map_and_form():
    """Test the tritile map on a packet and the multilinearity of the form."""
    from sparsedom.tiles import build_wave_packet
    from sparsedom.tiles import tritile_form
    from sparsedom.tiles import tritile_map

    tritile = unit_tritile()
    grid = blank()
    packet = build_wave_packet(tritile.tile(1), grid, "l2")
    assert tritile_map(grid.with_values(packet.samples), tritile, 1, "l2") == pytest.approx(1.0)

    functions = [
        grid.with_values(build_wave_packet(tritile.tile(j), grid).samples) for j in range(3)
    ]
    value = tritile_form([tritile], functions)
    assert value > 0
    doubled = [functions[0].with_values(2 * functions[0].values)] + functions[1:]
    assert tritile_form([tritile], doubled) == pytest.approx(2 * value)
    assert tritile_form([], functions) == 0.0


def test_restrict_and_good_set(collection):
    """Test filtering by time intervals."""
    from sparsedom.grid import Interval
    from sparsedom.tiles import good_set
    from sparsedom.tiles import restrict

    unit = Interval(0, 1)
    assert len(restrict(collection, unit, "leq")) == 9
    assert len(restrict(collection, unit, "eq")) == 1
    assert len(restrict(collection, Interval(0, Fraction(1, 8)), "leq")) == 1
    assert len(good_set(collection, [Interval(0, Fraction(1, 2))])) == 5
    assert len(good_set(collection, [])) == 9
    with pytest.raises(ValueError):
        restrict(collection, unit, "lt")


def test_trees(collection):
    """Test tree enumeration and the split properties."""
    from sparsedom.grid import Interval
    from sparsedom.tiles import check_tree_split
    from sparsedom.tiles import enumerate_trees
    from sparsedom.tiles import maximal_tree
    from sparsedom.tiles import Tree
    from sparsedom.tiles import tree_split

    trees = enumerate_trees(collection, levels=2)
    assert trees
    for tree in trees:
        report = check_tree_split(tree)
        assert report["covers"] and report["disjoint"], report["violations"]
        parts = tree_split(tree)
        assert sum(len(part) for part in parts) <= len(tree)

    coarse = restrict_first(collection)
    tree = maximal_tree(collection, Interval(0, 1), coarse.freqs[1].center)
    assert coarse in tree.members
    with pytest.raises(ValueError):
        Tree([coarse], Interval(0, Fraction(1, 2)), coarse.freqs[1].center)


def restrict_first(collection):
    """Return the tritile over [0, 1)."""
    return next(tritile for tritile in collection if tritile.time.length == 1)


def test_almost_localized_check(collection):
    """Test the almost localization ratios on a small suite."""
    from sparsedom.grid import Interval
    from sparsedom.tiles import almost_localized_check

    grid = blank()
    rng = np.random.default_rng(1)
    noise = grid.with_values(rng.normal(size=grid.size))
    packets = packet_sum(collection, 0, grid)
    suite = [noise, packets, grid]
    report = almost_localized_check(collection, Interval(0, 1), suite)
    assert report["tritiles"] == 1
    assert report["skipped"] == 1
    assert 0 < report["sup_ratio"] < math.inf
    assert 0 < report["l2_ratio"] < math.inf


def test_tail_form_decays():
    """Test that moving the outside function away lowers the tail ratio."""
    from sparsedom.grid import Interval
    from sparsedom.signals import SampledFunction
    from sparsedom.tiles import Rank1Collection
    from sparsedom.tiles import tail_bound_check
    from sparsedom.tiles import tail_form

    local = Rank1Collection([unit_tritile()])
    interval = Interval(0, 1)

    def box(left):
        return SampledFunction.from_callable(
            lambda x: ((x >= left) & (x < left + 1)) * 1.0, -96, 96, 1536
        )

    exponents = (Fraction(3, 2), Fraction(3, 2), 3)
    ratios = []
    for separation in (4, 8, 16):
        functions = [box(0), box(0), box(separation)]
        report = tail_bound_check(local, interval, functions, exponents, ("in", "in", "out"))
        assert report["bound"] > 0
        ratios.append(report["ratio"])
    assert ratios[-1] < ratios[0]

    assert tail_form(local, interval, [box(0), box(0), box(0)], ("in", "in", "out")) == 0.0
    with pytest.raises(ValueError):
        tail_bound_check(local, interval, [box(0)] * 3, exponents, ("in", "in", "in"))
    with pytest.raises(ValueError):
        tail_form(local, interval, [box(0)] * 3, ("in", "in", "near"))


def test_domination_check(collection):
    """Test the sparse domination report and its modulation invariance."""
    from sparsedom.grid import ExponentTuple
    from sparsedom.tiles import domination_check

    grid = blank()
    exponents = ExponentTuple(Fraction(3, 2), Fraction(3, 2), 3)
    functions = [packet_sum(collection, j, grid) for j in range(3)]
    report = domination_check(collection, functions, exponents)
    assert report["form"] > 0
    assert 0 < report["ratio"] < math.inf
    assert len(report["collection_digest"]) == 64
    assert report["sparse"].eta == Fraction(1, 6)

    theta = 2 * math.pi * 4 / (grid.step * grid.size)
    shifts = (theta, -theta, 0.0)
    modulated = [
        f.with_values(f.values * np.exp(1j * shift * f.midpoints))
        for f, shift in zip(functions, shifts)
    ]
    moved = domination_check(collection.modulate(shifts), modulated, exponents)
    assert moved["form"] == pytest.approx(report["form"], rel=1e-6)
    assert moved["ratio"] == pytest.approx(report["ratio"], rel=1e-6)


def test_domination_check_zero(collection):
    """Test that zero inputs give a zero ratio."""
    from sparsedom.grid import ExponentTuple
    from sparsedom.tiles import domination_check

    grid = blank()
    exponents = ExponentTuple(Fraction(3, 2), Fraction(3, 2), 3)
    report = domination_check(collection, [grid, grid, grid], exponents)
    assert report["ratio"] == 0.0
    assert report["form"] == 0.0
