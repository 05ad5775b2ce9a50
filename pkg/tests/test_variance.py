import numpy as np
import pytest
from conftest import brute_force_norms
from hypothesis import given
from hypothesis import strategies as st

from markovclt import gallery
from markovclt.exceptions import NotTotallyErgodic
from markovclt.operators import build_table
from markovclt.variance import (
    binary_blocks,
    binary_decomposition,
    dyadic_recursion,
    eta2_theta2,
    exact_variance,
    extrapolate,
    poisson_solution,
    second_moments,
    sigma2_closed_form,
    variance_profile,
    write_variance_csv,
)


def sigma2_spectral(chain):
    # independent oracle: c_0 + 2 sum_k c_k via the fundamental matrix of the mean-zero part
    S = chain.n_states
    Pi = np.outer(np.ones(S), chain.stationary)
    Z = np.linalg.inv(np.eye(S) - chain.kernel + Pi) - Pi
    f = chain.observable
    pif = chain.stationary * f
    return float(pif @ f + 2.0 * pif @ (Z - np.eye(S) + Pi) @ f)


@given(st.integers(0, 2**32 - 1))
def test_second_moments_match_path_enumeration(seed):
    chain = gallery.random_chain(np.random.default_rng(seed), 3)
    m = second_moments(chain, build_table(chain, 6), 6)
    for n in range(1, 6):
        assert m[n - 1] == pytest.approx(brute_force_norms(chain, n)[0], rel=1e-10, abs=1e-12)


@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_sigma2_closed_form_matches_oracle(size, seed):
    chain = gallery.random_chain(np.random.default_rng(seed), size)
    assert sigma2_closed_form(chain) == pytest.approx(sigma2_spectral(chain), rel=1e-9, abs=1e-12)
    g = poisson_solution(chain)
    np.testing.assert_allclose(g - chain.kernel @ g, chain.observable, atol=1e-10)


@pytest.mark.parametrize("p", [0.1, 0.3, 0.45, 0.7])
def test_two_state_closed_form(p):
    assert sigma2_closed_form(gallery.two_state_chain(p)) == pytest.approx((1 - p) / p, rel=1e-12)


def test_iid_sigma2_is_variance():
    chain = gallery.iid_chain(3)
    assert sigma2_closed_form(chain) == pytest.approx(chain.stationary @ chain.observable**2, rel=1e-12)


def test_variance_converges_to_sigma2(gallery_chains):
    for chain in gallery_chains.values():
        t = build_table(chain, 4096)
        # geometric mixing: E(S_n^2)/n - sigma^2 = O(1/n)
        assert abs(exact_variance(chain, t, 4096) - sigma2_closed_form(chain)) < 50.0 / 4096


def test_dyadic_recursion_reproduces_exact_variance(gallery_chains):
    for chain in gallery_chains.values():
        t = build_table(chain, 2**10)
        d = dyadic_recursion(chain, 10, t)
        m = second_moments(chain, t, 2**10)
        np.testing.assert_allclose(d.second_moment, m[2 ** d.r - 1], rtol=1e-10)
        assert np.all(d.diatic_holds)


def test_dyadic_recursion_random_chains():
    rng = np.random.default_rng(11)
    for _ in range(20):
        chain = gallery.random_chain(rng, int(rng.integers(2, 12)), sparse=bool(rng.random() < 0.5))
        d = dyadic_recursion(chain, 9)
        m = second_moments(chain, build_table(chain, 512), 512)
        np.testing.assert_allclose(d.second_moment, m[2 ** d.r - 1], rtol=1e-8, atol=1e-12)
        assert np.all(d.diatic_holds)


def test_binary_blocks():
    assert binary_blocks(13) == [(0, 1, 1), (2, 2, 5), (3, 6, 13)]
    assert binary_blocks(8) == [(3, 1, 8)]
    for n in range(1, 200):
        b = binary_blocks(n)
        assert sum(2**j for j, _, _ in b) == n
        assert b[0][1] == 1 and b[-1][2] == n


@pytest.mark.parametrize("n", [1, 3, 7, 13, 100, 1000, 4095])
def test_binary_decomposition(gallery_chains, n):
    for chain in gallery_chains.values():
        t = build_table(chain, 4096)
        b = binary_decomposition(chain, t, n)
        assert b.second_moment == pytest.approx(second_moments(chain, t, n)[-1], rel=1e-9, abs=1e-12)
        assert b.holder_holds


def test_extrapolate_exact_on_quadratic():
    ns = np.array([256, 512, 1024])
    v = 2.0 + 3.0 / ns - 5.0 / ns**2
    est, spread = extrapolate(ns, v)
    assert est == pytest.approx(2.0, abs=1e-10)
    assert spread > 0


def test_eta_theta_sum_to_sigma2():
    chain = gallery.two_state_chain(0.3)
    et = eta2_theta2(chain, [1024, 2048, 4096])
    assert et.eta2 + et.theta2 == pytest.approx(sigma2_closed_form(chain), abs=1e-6)
    # Pythagoras on the curves themselves
    t = build_table(chain, 4096)
    np.testing.assert_allclose(et.eta2_curve + et.theta2_curve, [exact_variance(chain, t, n) for n in et.n])


def test_eta_theta_withheld_for_periodic_chain():
    cyc = gallery.deterministic_cycle()
    et = eta2_theta2(cyc, [64, 128, 256])
    assert et.eta2 is None and not et.totally_ergodic
    with pytest.raises(NotTotallyErgodic):
        eta2_theta2(cyc, [64, 128, 256], strict=True)


def test_degenerate_cycle_profile():
    cyc = gallery.deterministic_cycle()
    p = variance_profile(cyc, 256)
    assert p.sigma2_closed == pytest.approx(0.0, abs=1e-14)
    n = np.arange(1, 257)
    np.testing.assert_allclose(p.var_seq, (n % 2) / n, atol=1e-14)
    assert p.provenance["eta2"].startswith("withheld")


def test_variance_csv(tmp_path):
    p = variance_profile(gallery.two_state_chain(0.3), 64)
    out = tmp_path / "v.csv"
    write_variance_csv(p, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "n,var_seq,eta2_curve,theta2_curve"
    assert len(lines) == 65
    assert float(lines[1].split(",")[1]) == pytest.approx(1.0)
