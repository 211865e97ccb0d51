import json
import math

import numpy as np
import pytest

from embedded_eigen import gluer
from embedded_eigen.errors import (
    DuplicateEnergyError,
    EdgeEnergyError,
    FileFormatError,
    OutOfHorizonError,
)
from embedded_eigen.model import (
    BoundaryAngle,
    PieceKind,
    Potential,
    PotentialPiece,
    SolutionTrace,
    dump_document,
    evaluate,
    make_energy_point,
    potential_from_dict,
    potential_to_dict,
    read_potential,
    resonance_classes,
    write_potential,
    zero_potential,
)


def test_energy_point_quasimomentum():
    ep = make_energy_point(1.0)
    assert ep.k == pytest.approx(1 / 3, abs=1e-15)
    assert ep.s == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    assert make_energy_point(0.0).k == 0.5
    assert 2 * math.cos(math.pi * ep.k) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("E", [2.0, -2.0, 1.9995, -1.9999, 3.0])
def test_edge_energies_rejected(E):
    with pytest.raises(EdgeEnergyError):
        make_energy_point(E)


def test_boundary_angle_range():
    BoundaryAngle(0.0)
    with pytest.raises(ValueError):
        BoundaryAngle(math.pi)
    with pytest.raises(ValueError):
        BoundaryAngle(-0.1)


def test_resonance_classes_group_pairs():
    pts = [make_energy_point(E) for E in (-1.0, 0.5, 1.0, 0.0)]
    classes = resonance_classes(pts)
    assert [[p.E for p in c] for c in classes] == [[1.0, -1.0], [0.5], [0.0]]


def test_duplicate_energy():
    with pytest.raises(DuplicateEnergyError):
        resonance_classes([make_energy_point(1.0), make_energy_point(1.0000000001)])


def _pair_piece(start=5, end=40, b=-100):
    return PotentialPiece(start, end, PieceKind.PAIR, energy=make_energy_point(1.0), K1=0.1,
                          b=b, targets=(0, 1), anchors={0: 0.25, 1: 1.5, 2: 0.75})


def test_piece_validation():
    with pytest.raises(ValueError):
        PotentialPiece(3, 3, PieceKind.ZERO)
    with pytest.raises(ValueError):
        PotentialPiece(0, 4, PieceKind.SINGLE, energy=make_energy_point(0.5), K1=1.0, b=0,
                       targets=(0,), anchors={0: 0.1})
    with pytest.raises(ValueError):
        PotentialPiece(5, 9, PieceKind.PAIR, energy=make_energy_point(0.5), K1=1.0, b=0,
                       targets=(0,), anchors={0: 0.1})


def test_potential_contiguity_and_lookup():
    z = PotentialPiece(0, 5, PieceKind.ZERO)
    p = _pair_piece()
    V = Potential((z, p), 40)
    assert evaluate(V, 2) == 0.0
    assert evaluate(V, 5) == pytest.approx(0.1 * (math.sin(0.5 * math.pi) + math.sin(3 * math.pi) + 100) / 105)
    with pytest.raises(OutOfHorizonError):
        V.piece_at(40)
    with pytest.raises(ValueError):
        Potential((PotentialPiece(0, 4, PieceKind.ZERO), p), 40)
    with pytest.raises(ValueError):
        Potential((z, p), 41)


def test_piece_values_read_only():
    v = _pair_piece().values
    with pytest.raises(ValueError):
        v[0] = 1.0


def test_document_writes_shortest_exact_reals():
    text = dump_document({"x": 0.1, "y": [1.0 / 3.0, 2], "z": None})
    back = json.loads(text)
    assert back["x"] == 0.1 and back["y"][0] == 1.0 / 3.0 and back["z"] is None
    with pytest.raises(FileFormatError):
        dump_document({"x": math.nan})


def test_potential_round_trip(tmp_path):
    V = Potential((PotentialPiece(0, 5, PieceKind.ZERO, anchors={0: 0.1}), _pair_piece()), 40,
                  c_global=3.25, meta={"note": "x"})
    path = tmp_path / "v.json"
    write_potential(path, V)
    W = read_potential(path)
    assert potential_to_dict(W) == potential_to_dict(V)
    assert np.array_equal(W.values(), V.values())
    write_potential(tmp_path / "w.json", W)
    assert (tmp_path / "w.json").read_bytes() == path.read_bytes()


def test_glued_potential_round_trip_bitwise(tmp_path):
    p = gluer.plan([1.0, -1.0, 0.5], [0.3, 0.9, 1.7])
    res = gluer.build(p, 120_000)
    path = tmp_path / "g.json"
    write_potential(path, res.potential)
    W = read_potential(path)
    assert np.array_equal(W.values(), res.potential.values())


@pytest.mark.parametrize("doc", [
    {"format": "other"},
    {"format": "embedded-eigen/potential", "version": 99},
    {"format": "embedded-eigen/potential", "version": 1, "horizon": 3},
    {"format": "embedded-eigen/potential", "version": 1, "horizon": 3,
     "pieces": [{"start": 0, "end": 3, "kind": "bogus"}]},
])
def test_malformed_documents(doc):
    with pytest.raises(FileFormatError):
        potential_from_dict(doc)


def test_unreadable_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(FileFormatError):
        read_potential(bad)


def test_zero_potential():
    V = zero_potential(10)
    assert not V.values().any()
    assert V.scaled_sup() == 0.0


def test_trace_requires_increasing_sites():
    ep = make_energy_point(0.5)
    with pytest.raises(ValueError):
        SolutionTrace(0, ep, [1, 3, 3], [0, 0, 0], [0, 0, 0])
    tr = SolutionTrace(0, ep, np.arange(5, 15), np.zeros(10), np.zeros(10))
    assert tr.is_dense(6, 12) and not tr.is_dense(6, 20)
    assert tr.window(7, 9).n.tolist() == [7, 8, 9]
