import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sccphybrid.lang import parse_program
from sccphybrid.rts import prepare
from sccphybrid.tdsha import (InconsistentKappa, KappaVector, approximability, bottom_family,
                              bottom_kappa, check_kappa, compile_component, compile_program,
                              format_tdsha, identity_tdsha, is_continuously_approximable,
                              kappa_leq, product, quotient, top_family, top_kappa, vector_field)

GOLDEN = Path(__file__).parent / "golden"
KAPPA_EXAMPLE = KappaVector.parse("gene0=100111,deg=1,dimer=11")


def small(src):
    return prepare(parse_program("sccp v1\n" + src))


def test_approximability_examples(gene):
    deg = gene.rts[1].edges[0]
    bind = gene.rts[0].edges[1]
    assert is_continuously_approximable(deg, gene.params)
    assert is_continuously_approximable(bind, gene.params)
    ext = small("var X = 0 end a = [X > 5 -> X' = X - 1]{1}.a system a")
    ok, reason = approximability(ext.rts[0].edges[0], ext.params)
    assert not ok and "vanish" in reason
    assert top_kappa(ext.rts[0], ext.params) == (0,)


@pytest.mark.parametrize("src, expected", [
    ("var X = 0 end a = [X > 2 -> X' = X - 1]{X - 2}.a system a", True),
    ("var X = 0 end a = [X >= 2 -> X' = X - 1]{3 * (X - 2) ^ 2}.a system a", True),
    ("var X = 0 end a = [0 < X -> X' = X - 1]{X}.a system a", True),
    ("var X = 0 end a = [X > 0 -> X' = X - 1]{min(X, 1)}.a system a", False),
    ("var X = 0 end a = [X > 0 -> X' = 0]{X}.a system a", False),
    ("var X = 0 end a = [X > 0 or X < -1 -> X' = X - 1]{X}.a system a", False),
    ("var X = 0 end a = [true -> X' = X + 1]{X ^ 0.5}.a system a", False),
])
def test_approximability_patterns(src, expected):
    ext = small(src)
    assert is_continuously_approximable(ext.rts[0].edges[0], ext.params) is expected


def test_quotient_examples(gene):
    r = gene.rts[0]
    assert quotient(r, (1, 0, 0, 1, 1, 1), gene.params) == (frozenset({"gene0"}), frozenset({"gene1", "gene2"}))
    assert quotient(r, (0,) * 6) == tuple(frozenset({s}) for s in r.states)
    assert quotient(r, (1,) * 6, gene.params) == (frozenset(r.states),)


def test_inconsistent_kappa():
    ext = small("var X = 0 end a = [X > 5 -> X' = X - 1]{1}.a system a")
    with pytest.raises(InconsistentKappa):
        quotient(ext.rts[0], (1,), ext.params)
    with pytest.raises(InconsistentKappa):
        check_kappa(ext.rts[0], (0, 0))


def test_compile_component_gene(gene):
    T = compile_component(gene, "gene0", (1, 0, 0, 1, 1, 1))
    assert len(T.modes) == 2
    assert len(T.tc) == 4
    # one jump per discrete edge: e1 (bind at gene0) and e2 (unbind at gene1)
    assert len(T.ts) == 2
    assert T.td == ()
    # every reset puts the whole counter mass on the entered state
    idx = {v: i for i, v in enumerate(T.variables)}
    for t in T.ts:
        d = t.reset.as_dict()
        assert {v for v in d if v.startswith("P_gene")} == {"P_gene0", "P_gene1", "P_gene2"}
        assert sum(d[f"P_{s}"].value for s in ("gene0", "gene1", "gene2")) == 1
        assert idx  # variables present


def test_compile_component_deg(gene):
    T0 = compile_component(gene, "deg", (0,))
    assert len(T0.modes) == 1 and len(T0.ts) == 1 and T0.tc == ()
    assert T0.ts[0].exit == T0.ts[0].enter
    T1 = compile_component(gene, "deg", (1,))
    assert len(T1.modes) == 1 and len(T1.tc) == 1 and T1.ts == ()


def test_golden_dump(gene):
    T = compile_program(gene, KAPPA_EXAMPLE)
    assert format_tdsha(T) == (GOLDEN / "gene_tdsha.txt").read_text()


def test_bottom_is_ctmc(gene):
    T = compile_program(gene, bottom_family(gene))
    assert T.tc == () and T.td == ()
    assert len(T.modes) == 3  # product of singleton classes: 3 * 1 * 1
    actions = [(r.component, e) for r in gene.rts for e in r.edges]
    # every action appears once per product mode where its exit state is current
    for comp, e in actions:
        lifted = [t for t in T.ts if t.label == f"{comp}:e{e.id}"]
        assert lifted and all(t.guard == e.guard for t in lifted)
        assert all(t.rate.right == e.rate for t in lifted)


def test_top_is_fluid_limit():
    ext = small("param k = 3 kd = 0.5 end var X = 2 Y = 1 end "
                "a = [true -> X' = X + 1]{k}.a + [X > 0 -> X' = X - 1 and Y' = Y + 1]{kd * X}.a "
                "system a")
    T = compile_program(ext, top_family(ext))
    assert T.ts == () and len(T.modes) == 1
    f = vector_field(T, T.init_mode)
    got = f({"X": 2.0, "Y": 1.0, "P_a": 1.0})
    np.testing.assert_allclose(got, [3 - 1.0, 1.0, 0.0])


def test_vector_field_examples():
    ext = small("param kd = 1 end var Xp = 10 end deg = [true -> Xp' = Xp - 1]{kd * Xp}.deg system deg")
    T = compile_program(ext, top_family(ext))
    assert vector_field(T, T.init_mode)({"Xp": 10.0, "P_deg": 1.0})[0] == -10
    ext = small("param kx = 1 kmx = 2 end var Xp = 4 Xp2 = 1 end "
                "dimer = [true -> Xp' = Xp - 2 and Xp2' = Xp2 + 1]{kx * Xp * (Xp - 1) / 2}.dimer "
                "+ [true -> Xp' = Xp + 2 and Xp2' = Xp2 - 1]{kmx * Xp2}.dimer system dimer")
    T = compile_program(ext, top_family(ext))
    assert list(vector_field(T, T.init_mode)(T.init)[:2]) == [-8, 4]
    B = compile_program(ext, bottom_family(ext))
    assert not vector_field(B, B.init_mode)(B.init).any()


def test_negative_rate_clamped():
    ext = small("var X = 1 end a = [true -> X' = X + 1]{X - 5}.a system a")
    T = compile_program(ext, {"a": (1,)})
    assert vector_field(T, T.init_mode)([1.0, 1.0])[0] == 0


def test_product_laws(gene):
    g = compile_component(gene, "gene0", (1, 0, 0, 1, 1, 1))
    d = compile_component(gene, "deg", (0,))
    unit = identity_tdsha(gene.variables, gene.init)
    gu = product(g, unit)
    assert [m[:1] for m in gu.modes] == list(g.modes) and len(gu.ts) == len(g.ts) and len(gu.tc) == len(g.tc)
    gd, dg = product(g, d), product(d, g)
    assert len(gd.modes) == len(g.modes) * len(d.modes)
    swap = lambda m: m[::-1]
    assert {swap(m) for m in gd.modes} == set(dg.modes)
    assert {(swap(t.exit), swap(t.enter), t.label) for t in gd.ts} == {(t.exit, t.enter, t.label) for t in dg.ts}
    assert {(swap(t.mode), t.label) for t in gd.tc} == {(t.mode, t.label) for t in dg.tc}
    with pytest.raises(ValueError):
        product(g, identity_tdsha(("Z",), {"Z": 0}))


def test_single_component_program(birth_death):
    k = (1, 1)
    T = compile_program(birth_death, {"bd": k})
    C = compile_component(birth_death, "bd", k)
    assert T.modes == C.modes and T.tc == C.tc and T.ts == C.ts


def test_kappa_examples():
    assert kappa_leq((0, 0, 0), (1, 0, 1))
    assert not kappa_leq((1, 0), (0, 1)) and not kappa_leq((0, 1), (1, 0))
    assert kappa_leq((1, 0, 0, 1, 1, 1), (1,) * 6)
    with pytest.raises(ValueError):
        kappa_leq((1,), (1, 0))


def test_kappa_vector_parse():
    k = KappaVector.parse("gene0=100111, deg=1")
    assert k["gene0"] == (1, 0, 0, 1, 1, 1) and k["deg"] == (1,)
    assert KappaVector.parse(str(k)) == k
    assert k.with_bit("deg", 0, 0)["deg"] == (0,)


def test_bottom_top(gene):
    assert bottom_kappa(gene.rts[0]) == (0,) * 6
    assert top_kappa(gene.rts[2], gene.params) == (1, 1)


# lattice laws (also part of the acceptance suite)

bits = st.integers(1, 8).flatmap(lambda m: st.tuples(*[st.lists(st.integers(0, 1), min_size=m, max_size=m)] * 3))


@given(bits)
def test_kappa_leq_partial_order(triple):
    a, b, c = triple
    assert kappa_leq(a, a)
    if kappa_leq(a, b) and kappa_leq(b, a):
        assert a == b
    if kappa_leq(a, b) and kappa_leq(b, c):
        assert kappa_leq(a, c)


def _refines(fine, coarse):
    return all(any(c <= d for d in coarse) for c in fine)


def test_quotient_monotone_exhaustive(gene):
    r = gene.rts[0]
    kappas = list(itertools.product((0, 1), repeat=6))
    for k1 in kappas:
        q1 = quotient(r, k1, gene.params)
        assert kappa_leq(bottom_kappa(r), k1) and kappa_leq(k1, top_kappa(r, gene.params))
        for k2 in kappas:
            if kappa_leq(k1, k2):
                assert _refines(q1, quotient(r, k2, gene.params))
