from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg

from markovclt import gallery
from markovclt.chain import pi_norm
from markovclt.operators import (
    apply_sqrt,
    build_table,
    exact_range_member,
    exact_sqrt_coefficient,
    sqrt_coefficients,
    sqrt_range_membership,
)


@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_table_matches_matrix_powers(size, seed):
    chain = gallery.random_chain(np.random.default_rng(seed), size)
    K = 40
    t = build_table(chain, K)
    Qs = chain.adjoint_kernel
    for k in (0, 1, 7, K):
        np.testing.assert_allclose(t.qk_f[k], np.linalg.matrix_power(chain.kernel, k) @ chain.observable, atol=1e-12)
        np.testing.assert_allclose(t.qstar_k_f[k], np.linalg.matrix_power(Qs, k) @ chain.observable, atol=1e-12)
    np.testing.assert_allclose(t.vn_f[K], t.qk_f.sum(axis=0), atol=1e-12)
    assert not t.qk_f.flags.writeable


def test_large_state_space_path_agrees():
    chain = gallery.random_dense(80, seed=1)
    t = build_table(chain, 5)
    np.testing.assert_allclose(t.qk_f[5], np.linalg.matrix_power(chain.kernel, 5) @ chain.observable, atol=1e-12)


def test_sqrt_coefficients_exact():
    s = sqrt_coefficients(50)
    assert s.delta[0] == 0.5
    assert s.delta[1] == 0.125
    for n in (1, 2, 3, 10, 50):
        assert Fraction(s.delta[n - 1]) == pytest.approx(exact_sqrt_coefficient(n), rel=1e-14)
    assert exact_sqrt_coefficient(3) == Fraction(1, 16)
    assert s.partial_mass + s.tail_mass == pytest.approx(1.0, abs=1e-14)
    assert s.spot_check_error < 1e-12


def test_sqrt_tail_mass_decay():
    # C(2N, N) / 4^N ~ 1 / sqrt(pi N)
    s = sqrt_coefficients(4096)
    assert s.tail_mass == pytest.approx(1.0 / np.sqrt(np.pi * 4096), rel=1e-4)


def test_apply_sqrt_squares_to_one_minus_q():
    chain = gallery.random_dense(5, seed=2)
    g = chain.observable
    h, bound = apply_sqrt(chain, g, 2000)
    hh, _ = apply_sqrt(chain, h, 2000)
    target = g - chain.kernel @ g
    assert pi_norm(chain, hh - target) < 1e-8
    # agrees with a dense matrix square root on the mean-zero subspace
    ref = np.real(linalg.sqrtm(np.eye(5) - chain.kernel)) @ g
    assert pi_norm(chain, h - ref) < 1e-6
    assert bound > 0


def test_exact_range_member():
    # every mean-zero f is in the range of I - Q for an irreducible chain
    assert exact_range_member(gallery.random_dense(5, 0))[0]
    assert exact_range_member(gallery.deterministic_cycle())[0]


@pytest.mark.parametrize("which", ["Q", "Q*"])
def test_sqrt_membership_verdicts(which):
    m = sqrt_range_membership(gallery.two_state_chain(0.3), which, 4096)
    assert m.verdict.verdict == "convergent"
    assert m.exact_member
    # the 2-cycle: s_n oscillates between -f and 0 shifts, the dyadic increments vanish
    cyc = sqrt_range_membership(gallery.deterministic_cycle(), which, 4096)
    assert cyc.verdict.verdict == "convergent"
    assert cyc.dyadic_increments[-1] < 0.05


def test_sqrt_membership_short_horizon():
    m = sqrt_range_membership(gallery.two_state_chain(0.3), "Q", 32)
    assert m.verdict is None
    with pytest.raises(ValueError):
        sqrt_range_membership(gallery.two_state_chain(0.3), "Q", 8)
