import copy

import pytest

from catprim.ainfinity import (
    SchemaError,
    clifford_model,
    deform_canonical,
    load_algebra,
    save_algebra,
    scale_pairing,
    validate,
)
from catprim.scalars import SeriesRing


def test_clifford_models_validate():
    for n in (1, 2, 3):
        cat = clifford_model(n)
        assert validate(cat) == [], f"n={n}"


def test_clifford_n1_goldens():
    cat = clifford_model(1)
    R = cat.ring
    assert len(cat.blocks) == 2
    # curvatures 2 T^{1/2}, -2 T^{1/2}
    root_t = R.monomial(2)  # T^{2/4} = T^{1/2}
    assert cat.blocks[0].curvature == 2 * root_t
    assert cat.blocks[1].curvature == -2 * root_t
    # e*e relation: m_2(e,e) = T^{1/2} eps^k
    assert cat.apply_m(0, (1, 1)) == {0: root_t}
    assert cat.apply_m(1, (1, 1)) == {0: -root_t}
    # pairing <1, e> = -i on every block
    minus_i = -R.zeta(1)
    for b in (0, 1):
        assert cat.pair(b, 0, 1) == minus_i
        assert cat.pair(b, 1, 0) == -minus_i
        assert cat.pair(b, 0, 0).is_zero()
        assert cat.pair(b, 1, 1).is_zero()


def test_clifford_n2_pairing_table():
    cat = clifford_model(2)
    R = cat.ring
    # basis order: (), (1,), (2,), (1,2); v = (-i)^3 = i
    v = R.zeta(3)
    c0 = R.monomial(2)  # T^{2/6} = T^{1/3}, block 0
    assert cat.pair(0, 0, 3) == v
    assert cat.pair(0, 3, 0) == v
    assert cat.pair(0, 1, 2) == v
    assert cat.pair(0, 2, 1) == -v
    assert cat.pair(0, 1, 1).is_zero()
    assert cat.pair(0, 2, 2).is_zero()
    assert cat.pair(0, 3, 3) == c0 * v
    # curvature 3 c_k with c_k = T^{1/3} eps^k
    eps = R.zeta(4)  # zeta_12^4 = e^{2 pi i/3}
    assert cat.blocks[1].curvature == 3 * c0 * eps


def test_strict_unit_rule():
    cat = clifford_model(2)
    one = cat.ring.one
    assert cat.apply_m(0, (0, 3)) == {3: one}
    assert cat.apply_m(0, (1, 0)) == {1: -one}  # |e_1| odd
    assert cat.apply_m(0, (3, 0)) == {3: one}  # |gamma| even
    assert cat.apply_m(0, (0,)) == {}


def test_fault_injection_pairing_sign():
    cat = clifford_model(1)
    bad = copy.deepcopy(cat)
    bad.blocks[0].pairing[(0, 1)] = -bad.blocks[0].pairing[(0, 1)]
    report = validate(bad)
    checks = {r["check"] for r in report}
    assert "pairing-antisymmetry" in checks or "cyclicity" in checks


def test_fault_injection_broken_associativity():
    cat = clifford_model(2)
    bad = copy.deepcopy(cat)
    # flip m_2(e_1, e_2); the (e_1,e_2,e_2) relation then fails
    table = bad.blocks[0].ops[2]
    table[(1, 2)] = {i: -c for i, c in table[(1, 2)].items()}
    report = validate(bad)
    assert any(r["check"] == "ainf-relation" for r in report)


def test_description_file_roundtrip(tmp_path):
    cat = clifford_model(2)
    path = tmp_path / "cp2.json"
    save_algebra(cat, str(path))
    loaded = load_algebra(str(path))
    assert loaded.parity == cat.parity
    assert len(loaded.blocks) == 3
    for b in range(3):
        assert loaded.blocks[b].curvature == cat.blocks[b].curvature
        assert loaded.blocks[b].pairing == cat.blocks[b].pairing
        assert loaded.blocks[b].ops == cat.blocks[b].ops


def test_description_file_schema_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"field_order": 4}')
    with pytest.raises(SchemaError):
        load_algebra(str(path))


def test_deform_canonical_restricts_to_base():
    cat = clifford_model(1)
    S = SeriesRing(cat.ring, tvars=("t0", "t1"), t_order=2, u_order=2, u_min=-2)
    dc = deform_canonical(cat, S)
    for k in range(2):
        curv = dc.blocks[k].curvature
        assert curv.constant_term() == cat.blocks[k].curvature
        assert curv.coefficient(0, (1, 0) if k == 0 else (0, 1)) == -cat.ring.one


def test_scale_pairing():
    cat = clifford_model(1)
    scaled = scale_pairing(cat, cat.ring.rational(3))
    assert scaled.pair(0, 0, 1) == 3 * cat.pair(0, 0, 1)
    assert validate(scaled) == []
