import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from degenlab.assembly import WeightedOperatorSet
from degenlab.coefficients import DiffusionCoefficient, ProblemParams, ValidationError
from degenlab.geometry import DomainSpec, build_mesh
from degenlab.spectral import (EigenSolverError, capacity_limit, eigen_modes, inner_truncation_study,
                               linearized_spectrum, outer_truncation_study, principal_eigenpair,
                               rayleigh_quotient, richardson_limit, subspace_iteration)
from oracles import J01_SQ, bessel_lambda1, radial_lambda1


def test_principal_pair_contract(disk3):
    ops, eig, _, _ = disk3
    assert eig.residual <= 1e-10
    assert eig.u.min() >= -1e-10
    assert eig.u @ ops.M @ eig.u == pytest.approx(1.0, abs=1e-12)
    assert abs(rayleigh_quotient(eig.u, ops) - eig.lam) <= 10 * 1e-10 * eig.lam
    assert np.all(eig.u[ops.mesh.boundary_flags] == 0)


def test_matches_dense_eigensolve(disk2):
    ops, eig = disk2
    w = sla.eigh(ops.K_int.toarray(), ops.M_int.toarray(), eigvals_only=True, subset_by_index=[0, 2])
    modes = eigen_modes(ops, 3)
    assert np.allclose([m.lam for m in modes], w, rtol=1e-9)
    assert modes[1].lam - modes[0].lam > 0
    assert modes[0].lam == pytest.approx(eig.lam, rel=1e-10)
    U = np.column_stack([m.u for m in modes])
    assert np.allclose(U.T @ ops.M @ U, np.eye(3), atol=1e-8)


def test_bessel_validation_mode():
    ops = WeightedOperatorSet(build_mesh(DomainSpec.disk(1.0), 4), DiffusionCoefficient.power(0.0))
    lam = principal_eigenpair(ops).lam
    assert abs(lam - J01_SQ) <= 5e-3 * J01_SQ
    assert lam >= J01_SQ  # conforming Galerkin on an inscribed polygon bounds from above


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_galerkin_monotone_and_converging(alpha):
    lams = [principal_eigenpair(WeightedOperatorSet(build_mesh(DomainSpec.disk(1.0), L),
                                                    DiffusionCoefficient.power(alpha))).lam for L in (1, 2, 3)]
    assert lams[0] > lams[1] > lams[2] > bessel_lambda1(alpha)
    errs = np.array(lams) - radial_lambda1(alpha)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_solver_stagnation_reports_history():
    A = sp.diags(np.linspace(1.0, 1.001, 200)).tocsr()  # clustered spectrum, too few iterations
    with pytest.raises(EigenSolverError) as exc:
        subspace_iteration(A, sp.identity(200, format="csr"), 1, tol=1e-14, maxiter=2, guard=0)
    assert len(exc.value.history) > 0


def test_invalid_k(disk2):
    with pytest.raises(ValidationError):
        subspace_iteration(disk2[0].K_int, disk2[0].M_int, 0)


def test_richardson_and_capacity_on_synthetic_data():
    r = np.array([0.4, 0.2, 0.1, 0.05])
    lim, rate = richardson_limit(r, 3.0 + 2.0 * r ** 1.5)
    assert lim == pytest.approx(3.0, abs=1e-10) and rate == pytest.approx(1.5, abs=1e-8)
    g = 1 / (r ** -0.5 - 1)
    assert capacity_limit(r, 3.0 + 2.0 * g - 0.7 * g * g, 0.5) == pytest.approx(3.0, abs=1e-10)


def test_inner_truncation_level3():
    st_ = inner_truncation_study(DomainSpec.disk(1.0), DiffusionCoefficient.power(1.0),
                                 [0.2, 0.1, 0.05, 0.025], 3, extend=True)
    lams = [r.lambda_1_trunc for r in st_.records]
    assert st_.monotone_ok and all(l >= st_.lambda_full - 1e-8 for l in lams)
    # annulus shooting oracle for the largest hole
    assert lams[0] == pytest.approx(radial_lambda1(1.0, r=0.2), rel=5e-3)
    ext = st_.records[0].extended
    assert ext is not None and np.all(ext[build_mesh(DomainSpec.disk(1.0), 3).origin_distance < 0.19] == 0)
    rows = st_.rows()
    assert rows[0][3] is True and len(rows) == 4


def test_inner_truncation_needs_disk():
    with pytest.raises(ValidationError):
        inner_truncation_study(DomainSpec.annulus(1.0, 0.5), DiffusionCoefficient.power(1.0), [0.2, 0.1], 1)


def test_outer_truncation_and_oracle():
    st_ = outer_truncation_study(DiffusionCoefficient.power_sum(0.5, 3.0), [2.0, 4.0, 8.0], 2)
    assert st_.monotone_ok and st_.stabilizing_ok
    for rec in st_.records:
        assert rec.lambda_1_trunc == pytest.approx(radial_lambda1(0.5, 3.0, R=rec.radius), rel=1e-2)
    with pytest.raises(ValidationError):
        outer_truncation_study(DiffusionCoefficient.power(0.5), [2.0, 4.0], 1)


def test_linearized_spectrum_trivial_state(disk3):
    ops, eig, params, _ = disk3
    z = np.zeros(ops.mesh.nv)
    for lam in (0.5 * eig.lam, 2.0 * eig.lam):
        st_ = linearized_spectrum(z, params.with_lambda(lam), ops)
        assert st_.mu_1 == pytest.approx(eig.lam - lam, rel=1e-9, abs=1e-9)


def test_linearized_spectrum_on_branch(disk3):
    ops, eig, params, u = disk3
    st_ = linearized_spectrum(u, params, ops)
    assert st_.mu_1 > 0 and st_.identity_residual <= 1e-6
    assert st_.psi_1.min() >= -1e-10
    # Garding: mu_1 >= lambda_1 - lambda
    assert st_.mu_1 >= eig.lam - params.lam - 1e-8


def test_linearized_spectrum_rejects_non_equilibrium(disk3):
    ops, eig, params, _ = disk3
    with pytest.raises(ValidationError):
        linearized_spectrum(0.5 * eig.u, params, ops)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 5.0), st.integers(0, 1000))
def test_garding_bound_random_potentials(lam_ratio, seed):
    # for any nonnegative potential the linearised principal value dominates lambda_1 - lambda
    from degenlab.spectral import subspace_iteration as si
    ops = WeightedOperatorSet(build_mesh(DomainSpec.disk(1.0), 1), DiffusionCoefficient.power(0.5))
    lam1 = principal_eigenpair(ops).lam
    u = ops.extend(np.abs(np.random.default_rng(seed).normal(size=ops.n_interior)))
    A = ops.K_int + 3 * ops.weight_matrix(u, 2.0)
    mu = si(A.tocsr(), ops.M_int, 1)[0][0] - lam_ratio * lam1
    assert mu >= lam1 - lam_ratio * lam1 - 1e-8
