import math
from fractions import Fraction

import pytest

from mfzeta.errors import DepthMismatch
from mfzeta.graph import admissible_words
from mfzeta.symbolic import (SymbolicPoint, atom, common_prefix_length, completion, dgamma,
                             lemma_bound, ldistance, occupation_L, occupation_M)

E1, E2, E3 = 0, 1, 2


def test_canonical_form():
    p = SymbolicPoint((E1, E2, E1, E2), (E1, E2, E1, E2))
    assert p.preperiod == () and p.period == (E1, E2)
    q = SymbolicPoint((E2,), (E1, E2))
    assert q.preperiod == () and q.period == (E2, E1)


def test_dgamma_examples():
    assert dgamma(SymbolicPoint.periodic([E1]), SymbolicPoint.periodic([E1])) == 0.0
    assert dgamma(SymbolicPoint.periodic([E1]), SymbolicPoint.periodic([E2]), 0.5) == 1.0
    i = SymbolicPoint((E1, E1), (E2,))
    j = SymbolicPoint((E1, E1), (E1,))
    assert common_prefix_length(i, j) == 2
    assert dgamma(i, j, 0.5) == 0.25


def test_occupation_L_examples(sys_a):
    p = SymbolicPoint.periodic([E1, E2])
    m = occupation_L(p, 2, 1)
    assert m[(E1,)] == 0.5 and m[(E2,)] == 0.5
    d = occupation_L(p, 1, 3)
    assert d[(E1, E2, E1)] == 1.0 and d[(E2,)] == 0.0
    assert occupation_L(p, 5, 0)[()] == 1.0


def test_occupation_M_examples(sys_a, sys_b):
    m = occupation_M(sys_a, sys_a.word(["e1"]), 3)
    assert m[(E1,)] == 1.0 and m[(E1, E1, E1)] == 1.0
    m = occupation_M(sys_b, sys_b.word(["e2"]), 1)
    assert m[(E2,)] == 0.5 and m[(E3,)] == 0.5
    m = occupation_M(sys_a, sys_a.word(["e1", "e2"]), 2)
    assert m[(E1, E2)] == 0.5 and m[(E2, E1)] == 0.5


def test_masses_are_multiples_of_one_over_n(sys_b):
    for w in admissible_words(sys_b, 5):
        m = occupation_M(sys_b, w, 6)
        m.check()
        # one full period of the completion: 5 letters plus |ĥ| ≤ 1
        assert m.denominator in (5, 6)
        for v in m.masses.values():
            k = Fraction(v).limit_denominator(100) * m.denominator
            assert k.denominator == 1


def test_ldistance_identical_measures(sys_a):
    mu = occupation_L(SymbolicPoint.periodic([E1, E2, E2]), 7, 10)
    iv = ldistance(mu, mu, 0.5, 10)
    assert iv.lo == 0.0
    assert iv.hi == pytest.approx(0.5**10)


def test_ldistance_two_atoms(sys_a):
    a, b = atom(SymbolicPoint.periodic([E1]), 4), atom(SymbolicPoint.periodic([E2]), 4)
    iv = ldistance(a, b, 0.5, 4)
    assert iv.contains(1.0)
    assert iv.width <= 0.0625


def test_ldistance_depth_mismatch():
    a = atom(SymbolicPoint.periodic([E1]), 3)
    with pytest.raises(DepthMismatch):
        ldistance(a, a, 0.5, 4)


def test_cylinder_csv(sys_b):
    text = occupation_M(sys_b, sys_b.word(["e2"]), 1).to_csv()
    assert text.splitlines()[0] == "word,mass"
    assert "e2,0.5" in text and "e3,0.5" in text


def test_lemma_bound_value():
    assert lemma_bound(4, 1, 0.5, 24) == pytest.approx(0.5 + 0.5 + 0.5**24 / 0.5)
