import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from anderson_entropy import (
    BoundViolationError,
    ConfigError,
    EntropyReport,
    LatticeSpec,
    NumericalDefectError,
    PotentialKind,
    PotentialModel,
    SubsystemCorrelation,
    assemble,
    binary_entropy,
    boundary_terms_1d,
    eigendecompose,
    entanglement_entropy,
    entropy_report,
    fermi_momentum,
    fermi_projector,
    lower_bound,
    peierls_upper,
    renyi_entropy,
    restrict,
    sample_potential,
    thermal_correlation,
    ti_projector,
    tightened_upper,
    upper_bound,
)
from anderson_entropy.spectral import CorrelationMatrix

from oracles import (
    BINARY_ENTROPY_QUARTER,
    chain_hamiltonian,
    lower_bound_sum_form,
    reduced_density_matrix,
    renyi_bits,
    sine_kernel,
    vn_entropy_bits,
)

GRID = np.linspace(0.001, 0.999, 999)


def two_site_projector():
    s = eigendecompose(assemble(LatticeSpec(1, 2, strict=False), 1.0, np.zeros(2)))
    return fermi_projector(s, 0.0)


def chain_projector(L=41, a=0.1, W=1.0, mu=-0.25, seed=0, d=1):
    spec = LatticeSpec(d, L)
    V = sample_potential(PotentialModel(PotentialKind.UNIFORM, W, seed), spec.n_sites)
    return spec, fermi_projector(eigendecompose(assemble(spec, a, V)), mu)


class TestBinaryEntropy:
    def test_endpoints_and_maximum(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == 1.0

    def test_quarter(self):
        assert binary_entropy(0.25) == pytest.approx(BINARY_ENTROPY_QUARTER, abs=1e-15)

    def test_domain(self):
        assert binary_entropy(-1e-12) == 0.0
        with pytest.raises(NumericalDefectError):
            binary_entropy(1.01)

    def test_vectorised(self):
        np.testing.assert_allclose(binary_entropy(GRID), binary_entropy(1 - GRID), atol=1e-15)

    def test_pointwise_chain(self):
        phi = 4 * GRID * (1 - GRID)
        h = binary_entropy(GRID)
        assert np.all(phi <= h)
        assert np.all(h <= phi ** math.log(2))
        assert np.all(phi ** math.log(2) <= np.sqrt(phi))


class TestTwoSite:
    """Half-filled dimer, subsystem = first site: every quantity is 1 bit."""

    def test_restriction(self):
        sc = restrict(two_site_projector(), [0])
        np.testing.assert_allclose(sc.P, [[0.5]], atol=1e-14)
        np.testing.assert_allclose(sc.gamma, [[0.25]], atol=1e-14)

    def test_all_quantities(self):
        P = two_site_projector()
        sc = restrict(P, [0])
        assert entanglement_entropy(sc) == pytest.approx(1.0, abs=1e-12)
        assert lower_bound(P, [0]) == pytest.approx(1.0, abs=1e-12)
        assert upper_bound(sc) == pytest.approx(1.0, abs=1e-12)
        assert tightened_upper(sc) == pytest.approx(1.0, abs=1e-12)
        assert peierls_upper(P, [0]) == pytest.approx(1.0, abs=1e-12)

    def test_renyi_near_one(self):
        sc = restrict(two_site_projector(), [0])
        S = entanglement_entropy(sc)
        for alpha in (1 - 1e-4, 1 + 1e-4, 0.5, 3.0):
            assert renyi_entropy(sc, alpha) == pytest.approx(S, abs=1e-3)


class TestRestriction:
    def test_whole_system_gamma_vanishes(self):
        spec, P = chain_projector()
        sc = restrict(P, np.arange(spec.n_sites))
        np.testing.assert_allclose(sc.P, P.entries)
        assert np.abs(sc.gamma).max() <= 1e-10

    def test_single_site(self):
        _, P = chain_projector(seed=3)
        c = 20
        sc = restrict(P, [c])
        p = P.entries[c, c]
        np.testing.assert_allclose(sc.P, [[p]])
        np.testing.assert_allclose(sc.gamma, [[p * (1 - p)]], atol=1e-12)

    def test_out_of_range(self):
        _, P = chain_projector()
        with pytest.raises(ConfigError):
            restrict(P, [100])

    def test_exterior_and_direct_agree(self):
        spec, P = chain_projector(L=61, a=0.5, mu=0.0, seed=2)
        sites = spec.subsystem_sites(21)
        sc = restrict(P, sites)
        direct = SubsystemCorrelation(sc.P)
        np.testing.assert_allclose(np.sort(sc.phi), np.sort(direct.phi), atol=1e-10)
        assert entanglement_entropy(sc) == pytest.approx(entanglement_entropy(direct), abs=1e-10)
        np.testing.assert_allclose(sc.gamma_diagonal, direct.gamma_diagonal, atol=1e-12)

    def test_clamping(self):
        sc = SubsystemCorrelation(np.array([[1.0 + 5e-11]]))
        assert entanglement_entropy(sc) == 0.0
        with pytest.raises(NumericalDefectError):
            SubsystemCorrelation(np.array([[1.0 + 1e-6]])).eigenvalues


class TestEntropy:
    def test_whole_system_pure(self):
        spec, P = chain_projector(L=201, seed=7)
        assert entanglement_entropy(restrict(P, np.arange(spec.n_sites))) <= 1e-8
        assert entanglement_entropy(SubsystemCorrelation(P.entries)) <= 1e-8

    def test_atomic_limit(self):
        spec, P = chain_projector(a=0.0, seed=1)
        sites = spec.subsystem_sites(11)
        sc = restrict(P, sites)
        assert entanglement_entropy(sc) == 0.0
        assert lower_bound(P, sites) == 0.0
        assert upper_bound(sc) == 0.0
        assert peierls_upper(P, sites) == 0.0

    @pytest.mark.parametrize("seed", range(4))
    def test_complement_symmetry(self, seed):
        spec, P = chain_projector(L=41, a=0.4, mu=0.1, seed=seed)
        inside = spec.subsystem_sites(13)
        outside = np.setdiff1d(np.arange(spec.n_sites), inside)
        assert entanglement_entropy(restrict(P, inside)) == pytest.approx(
            entanglement_entropy(restrict(P, outside)), abs=1e-8)

    @pytest.mark.parametrize("n,region", [(6, [0, 1, 2]), (8, [2, 3]), (10, [0, 4, 7]), (12, [5, 6, 7, 8])])
    def test_many_body_oracle(self, n, region):
        rng = np.random.default_rng(n)
        V = rng.uniform(-1, 1, n)
        H = chain_hamiltonian(V, 0.6)
        E = np.linalg.eigvalsh(H)
        mu = 0.5 * (E[min(n // 2, 6) - 1] + E[min(n // 2, 6)])
        spec = LatticeSpec(1, n, strict=False)
        P = fermi_projector(eigendecompose(assemble(spec, 0.6, V)), mu)
        sc = restrict(P, region)
        rho = reduced_density_matrix(H, mu, region)
        assert entanglement_entropy(sc) == pytest.approx(vn_entropy_bits(rho), abs=1e-8)
        for alpha in (0.5, 2.0, 3.0):
            assert renyi_entropy(sc, alpha) == pytest.approx(renyi_bits(rho, alpha), abs=1e-8)


class TestRenyi:
    def test_pure_spectrum(self):
        sc = SubsystemCorrelation(np.diag([0.0, 1.0, 1.0]))
        for alpha in (0.5, 2.0, 7.0):
            assert renyi_entropy(sc, alpha) == 0.0

    def test_invalid_index(self):
        sc = SubsystemCorrelation(np.diag([0.5]))
        for alpha in (0.0, -1.0, 1.0):
            with pytest.raises(ConfigError):
                renyi_entropy(sc, alpha)

    def test_monotone_and_continuous(self):
        spec, P = chain_projector(L=61, a=0.5, mu=0.0, seed=5)
        sc = restrict(P, spec.subsystem_sites(21))
        alphas = [0.25, 0.5, 0.9, 0.9999, 1.0001, 1.5, 2.0, 5.0]
        values = [renyi_entropy(sc, a) for a in alphas]
        assert all(x >= y - 1e-12 for x, y in zip(values, values[1:]))
        S = entanglement_entropy(sc)
        assert abs(values[3] - S) < 1e-3 and abs(values[4] - S) < 1e-3


class TestBounds:
    def test_sandwich_random_chain(self):
        spec, P = chain_projector(L=10 + 1, a=0.8, mu=0.1, seed=11)
        sites = np.array([4, 5, 6])
        sc = restrict(P, sites)
        L, S, U = lower_bound(P, sites), entanglement_entropy(sc), upper_bound(sc)
        assert L <= S <= U

    def test_lower_bound_forms(self):
        spec, P = chain_projector(L=51, a=0.5, mu=0.0, seed=4)
        for l in (1, 5, 21):
            sites = spec.subsystem_sites(l)
            assert lower_bound(P, sites) == pytest.approx(lower_bound_sum_form(P.entries, sites), abs=1e-9)

    def test_lower_bound_mismatch_detected(self):
        _, P = chain_projector(L=21, a=0.5, mu=0.0)
        broken = CorrelationMatrix(P.entries * 0.9, P.mu)
        with pytest.raises(NumericalDefectError):
            lower_bound(broken, np.arange(5, 16))

    def test_peierls_dominates(self):
        spec, P = chain_projector(L=21, a=0.7, mu=-0.2, seed=9)
        for l in (3, 7, 11):
            sc = restrict(P, spec.subsystem_sites(l))
            assert peierls_upper(sc) >= upper_bound(sc) - 1e-12

    def test_peierls_diagonal_projector(self):
        P = CorrelationMatrix(np.diag([1.0, 0.0, 1.0, 0.0, 0.0]), 0.0)
        assert peierls_upper(P, [1, 2, 3]) == 0.0

    def test_tightened_exponent_range(self):
        sc = SubsystemCorrelation(np.diag([0.5]))
        assert tightened_upper(sc, 0.3) == pytest.approx(1.0)
        with pytest.raises(ConfigError):
            tightened_upper(sc, 1.0)

    def test_report_checks_chain(self):
        EntropyReport(S=1.0, L=0.5, U=2.0, U_tight=1.5, U_peierls=3.0).check_sandwich()
        with pytest.raises(BoundViolationError):
            EntropyReport(S=1.0, L=1.5, U=2.0, U_tight=1.5, U_peierls=3.0).check_sandwich()
        with pytest.raises(BoundViolationError):
            EntropyReport(S=1.0, L=0.5, U=2.0, U_tight=2.5, U_peierls=3.0).check_sandwich()

    def test_thermal_report(self):
        spec = LatticeSpec(1, 41)
        V = sample_potential(PotentialModel(PotentialKind.UNIFORM, 1.0, 2), 41)
        K = thermal_correlation(eigendecompose(assemble(spec, 0.1, V)), -0.25, 0.5)
        rep = entropy_report(K, spec.subsystem_sites(11), renyi_alphas=(2.0,))
        rep.check_sandwich()
        # whole system is mixed at T > 0
        assert entanglement_entropy(restrict(K, np.arange(41))) > 1.0


@st.composite
def instances(draw):
    d = draw(st.sampled_from([1, 2]))
    L = draw(st.sampled_from([3, 5, 7, 9, 15, 31] if d == 1 else [3, 5, 7]))
    l = draw(st.sampled_from(list(range(1, L + 1, 2))))
    spec = LatticeSpec(d, L, l, boundary=draw(st.sampled_from(["open", "periodic"])))
    a = draw(st.floats(0.0, 2.0))
    W = draw(st.floats(0.01, 3.0))
    seed = draw(st.integers(0, 2**32))
    V = sample_potential(PotentialModel(PotentialKind.UNIFORM, W, seed), spec.n_sites)
    s = eigendecompose(assemble(spec, a, V))
    mu = draw(st.floats(-5.0, 5.0))
    T = draw(st.sampled_from([0.0, 0.0, 0.05, 1.0]))
    P = fermi_projector(s, mu) if T == 0 else thermal_correlation(s, mu, T)
    return spec, P


@settings(max_examples=80, deadline=None)
@given(instances())
def test_bound_chain_property(inst):
    spec, P = inst
    rep = entropy_report(P, spec.subsystem_sites(), renyi_alphas=(0.5, 2.0))
    rep.check_sandwich(slack=1e-9)
    assert rep.renyi[0.5] >= rep.S - 1e-9 >= rep.renyi[2.0] - 2e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([5, 9, 13]), st.floats(0.05, 1.0))
def test_whole_system_property(seed, L, a):
    spec = LatticeSpec(1, L)
    V = sample_potential(PotentialModel(PotentialKind.UNIFORM, 1.0, seed), L)
    s = eigendecompose(assemble(spec, a, V))
    k = L // 2
    mu = 0.5 * float(s.eigenvalues[k - 1] + s.eigenvalues[k])
    assume(s.eigenvalues[k] - s.eigenvalues[k - 1] > 1e-9)
    P = fermi_projector(s, mu)
    rep = entropy_report(P, np.arange(L))
    assert max(rep.S, rep.L, rep.U, rep.U_tight, rep.U_peierls) <= 1e-8


class TestBoundaryTerms:
    def test_atomic_limit_all_zero(self):
        _, P = chain_projector(L=31, a=0.0)
        assert all(v == 0 for v in boundary_terms_1d(P, 5).as_dict().values())

    @pytest.mark.parametrize("seed", range(3))
    def test_identities(self, seed):
        spec, P = chain_projector(L=101, a=0.3, mu=-0.1, seed=seed)
        for l in (1, 11, 31):
            m = (l - 1) // 2
            bt = boundary_terms_1d(P, m)
            sites = spec.subsystem_sites(l)
            assert bt.L_total == pytest.approx(lower_bound(P, sites), abs=1e-9)
            assert bt.L_plus == pytest.approx(bt.Lcal_plus - bt.R_plus, abs=1e-12)
            assert bt.L_minus == pytest.approx(bt.Lcal_minus - bt.R_minus, abs=1e-12)
            assert bt.R_plus == pytest.approx(bt.R_minus, rel=1e-12)

    def test_hand_computed_toy(self):
        # three-site clean chain at mu between the lower two levels
        spec = LatticeSpec(1, 3)
        P = fermi_projector(eigendecompose(assemble(spec, 1.0, np.zeros(3))), -1.0)
        Q = P.entries**2
        bt = boundary_terms_1d(P, 0)
        assert bt.L_plus == pytest.approx(4 * Q[1, 2])
        assert bt.Lcal_plus == pytest.approx(4 * (Q[1, 2] + Q[0, 2]))
        assert bt.R_plus == pytest.approx(4 * Q[0, 2])
        assert bt.Ucal_plus == pytest.approx(2**1.5 * (np.sqrt(Q[1, 2]) + np.sqrt(Q[0, 2])))

    def test_cutoff_truncates(self):
        spec, P = chain_projector(L=201, a=0.1, seed=2)
        full = boundary_terms_1d(P, 30)
        cut = boundary_terms_1d(P, 30, cutoff=20)
        assert cut.L_plus == full.L_plus
        assert cut.Lcal_plus == pytest.approx(full.Lcal_plus, rel=1e-12)
        assert cut.Lcal_plus <= full.Lcal_plus

    def test_uncovered_interval(self):
        _, P = chain_projector(L=21)
        with pytest.raises(ConfigError):
            boundary_terms_1d(P, 11)


class TestCleanChain:
    def test_fermi_momentum(self):
        assert fermi_momentum(0.0, 0.1) == pytest.approx(math.pi / 2)
        with pytest.raises(ConfigError):
            fermi_momentum(-0.25, 0.1)

    def test_kernel_matches_oracle(self):
        np.testing.assert_allclose(ti_projector(1.1, 12).entries, sine_kernel(1.1, 12), atol=1e-15)

    def test_diagonal_and_zeros(self):
        K = ti_projector(math.pi / 2, 9).entries
        np.testing.assert_allclose(np.diag(K), 0.5)
        j, k = np.indices(K.shape)
        even = ((j - k) % 2 == 0) & (j != k)
        assert np.abs(K[even]).max() < 1e-15

    def test_kernel_is_finite_projector_limit(self):
        # long clean ring at the matching filling reproduces the kernel in its middle
        L = 2001
        spec = LatticeSpec(1, L, boundary="periodic")
        s = eigendecompose(assemble(spec, 1.0, np.zeros(L)))
        mu = -2.0 * math.cos(math.pi * 500.5 / L * 2)  # between levels
        P = fermi_projector(s, mu).entries
        n_occ = int(np.count_nonzero(s.eigenvalues < mu))
        kappa = math.pi * n_occ / L
        K = ti_projector(kappa, 9).entries
        mid = np.arange(996, 1005)
        np.testing.assert_allclose(np.abs(P[np.ix_(mid, mid)]), np.abs(K), atol=1e-3)

    def test_lower_bound_grows_logarithmically(self):
        sizes = [41, 161, 641]
        L = [lower_bound(ti_projector(math.pi / 2, n), np.arange(n)) for n in sizes]
        slope = np.polyfit(np.log(sizes), L, 1)[0]
        assert slope == pytest.approx(4 / math.pi**2, rel=0.05)

    def test_invalid_kappa(self):
        with pytest.raises(ConfigError):
            ti_projector(0.0, 5)
