"""Command-line entry point: ``degenlab {eigen,truncation,branch,evolve,verify}``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid input,
3 a solver failed.
"""
import argparse
import os
import sys
import time

import numpy as np

from . import assembly
from .assembly import AssemblyError, WeightedOperatorSet, p1_gradients, write_field
from .coefficients import ValidationError, validate_assumptions
from .config import RunConfig
from .dynamics import (EvolutionConfig, StepFailure, constant_interior, evolve, fit_decay_rate,
                       lyapunov_dissipation_check, positivity_check, random_positive,
                       scaled_eigenfunction)
from .geometry import MeshError, build_mesh, write_mesh
from .inequalities import AscentError, picone_check, picone_terms
from .io import write_csv, write_report
from .spectral import (EigenSolverError, eigen_modes, inner_truncation_study, linearized_spectrum,
                       outer_truncation_study, principal_eigenpair)
from .stationary import (BranchError, NewtonConfig, NewtonError, amplitude_seed, continue_branch,
                         solve_stationary, uniqueness_probe)

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
SOLVER_ERRORS = (EigenSolverError, NewtonError, BranchError, StepFailure, AssemblyError, AscentError)
TRAJECTORY_HEADER = ["t", "J", "l2_norm", "min_value", "dissipation", "dist_trivial", "dist_equilibrium"]
BRANCH_HEADER = ["lambda", "l2_norm", "h1_sigma_norm", "J", "mu_1", "min_u", "newton_iters"]
STUDY_HEADER = ["radius", "lambda_1", "residual", "monotone_ok"]


class SolverFailure(RuntimeError):
    """Raised by a command after writing partial output when a solver gave up."""


def _setup(cfg):
    spec = cfg.domain()
    coeff = cfg.coefficient()
    mesh = build_mesh(spec, cfg.level)
    ops = WeightedOperatorSet(mesh, coeff, rule=cfg.quadrature())
    return spec, coeff, mesh, ops


def _eig(cfg, ops):
    return principal_eigenpair(ops, cfg.data["discretization"]["eigen_tol"])


def _newton_cfg(cfg):
    return NewtonConfig(tol=cfg.data["discretization"]["newton_tol"])


def _validation(cfg, coeff, spec, lam=1.0):
    rep = validate_assumptions(coeff, cfg.params(value=lam) if cfg.data["problem"]["lambda_mode"] == "absolute"
                               else cfg.params(1.0, lam), spec)
    if rep.violations:
        raise ValidationError("; ".join(rep.violations))
    return {"notes": rep.notes, "attractor_regime": rep.attractor_regime,
            "bifurcation_regime": rep.bifurcation_regime}


def _mesh_meta(mesh):
    return {"level": mesh.level, "n_vertices": mesh.nv, "n_triangles": mesh.nt, "h": mesh.h}


def cmd_eigen(cfg, out):
    spec, coeff, mesh, ops = _setup(cfg)
    val = _validation(cfg, coeff, spec)
    k = int(cfg.data["eigen"]["modes"])
    modes = eigen_modes(ops, k, cfg.data["discretization"]["eigen_tol"])
    u1 = modes[0]
    write_field(u1.u, os.path.join(out, "u1.field"))
    write_mesh(mesh, os.path.join(out, "mesh.mesh"))
    write_report(os.path.join(out, "eigen.json"), cfg.to_dict(), {
        "lambda_1": u1.lam, "residual": u1.residual, "iterations": u1.iterations,
        "modes": [{"lambda": m.lam, "residual": m.residual} for m in modes],
        "mesh": _mesh_meta(mesh), "validation": val})
    return EXIT_OK


def cmd_truncation(cfg, out):
    spec, coeff = cfg.domain(), cfg.coefficient()
    tr = cfg.data["truncation"]
    tol = cfg.data["discretization"]["eigen_tol"]
    if tr["family"] == "inner":
        study = inner_truncation_study(spec, coeff, tr["radii"], cfg.level, tol)
    else:
        study = outer_truncation_study(coeff, tr["radii"], cfg.level, tol)
    write_csv(os.path.join(out, "truncation.csv"), STUDY_HEADER, study.rows())
    for i, rec in enumerate(study.records):
        write_field(rec.u, os.path.join(out, f"u1_{i}.field"))
        write_mesh(rec.mesh, os.path.join(out, f"mesh_{i}.mesh"))
    write_report(os.path.join(out, "truncation.json"), cfg.to_dict(), {
        "family": study.kind, "monotone_ok": study.monotone_ok, "differences": study.differences,
        "stabilizing_ok": study.stabilizing_ok, "lambda_full": study.lambda_full,
        "extrapolated": study.extrapolated, "empirical_rate": study.empirical_rate})
    return EXIT_OK


def cmd_branch(cfg, out):
    spec, coeff, mesh, ops = _setup(cfg)
    br = cfg.data["branch"]
    val = _validation(cfg, coeff, spec)
    eig = _eig(cfg, ops)
    params = cfg.params(eig.lam)
    lam_max = cfg.resolve_lambda(br["lambda_max"], eig.lam)
    branch = continue_branch(lam_max, int(br["steps"]), params, ops, eig, _newton_cfg(cfg), br["delta0"])
    write_csv(os.path.join(out, "branch.csv"), BRANCH_HEADER, branch.rows())
    if br["dump_fields"]:
        for i, p in enumerate(branch.points):
            write_field(p.u, os.path.join(out, f"branch_{i:03d}.field"))
    probe_lam = cfg.resolve_lambda(br["probe_lambda"], eig.lam)
    probe = uniqueness_probe(params.with_lambda(probe_lam), ops, eig, int(br["probe_starts"]),
                             _newton_cfg(cfg), seed=cfg.seed)
    mus = [p.mu_1 for p in branch.points]
    write_report(os.path.join(out, "branch.json"), cfg.to_dict(), {
        "lambda_1": eig.lam, "lambda_max": lam_max, "fit_exponent": branch.fit_exponent,
        "fit_expected": 1.0 / (2.0 * params.gamma), "fit_prefactor": branch.fit_prefactor,
        "supercritical_ok": branch.supercritical_ok, "mu_1": mus, "min_mu_1": min(mus),
        "min_u": min(p.min_u for p in branch.points),
        "max_residual": max(p.residual for p in branch.points),
        "uniqueness_probe": {"lambda": probe_lam, "max_distance": probe.max_distance,
                             "relative_distance": probe.relative_distance,
                             "n_nontrivial": probe.n_nontrivial, "n_trivial": probe.n_trivial,
                             "n_failed": probe.n_failed, "n_not_nonnegative": probe.n_sign_changing},
        "mesh": _mesh_meta(mesh), "validation": val})
    return EXIT_OK


def initial_field(spec, ops, eig):
    g = spec["generator"]
    if g == "scaled_eigenfunction":
        return scaled_eigenfunction(spec.get("t", 1.0), eig)
    if g == "random_positive":
        return random_positive(ops, int(spec.get("seed", 0)), float(spec.get("amplitude", 1.0)))
    return constant_interior(ops, float(spec.get("c", 1.0)))


def _evolution_cfg(cfg):
    ev = cfg.data["evolve"]
    try:
        return EvolutionConfig(dt=ev["dt"], t_max=ev["t_max"], dt_min=ev["dt_min"], dt_max=ev["dt_max"],
                               newton_tol=cfg.data["discretization"]["newton_tol"],
                               snapshot_stride=int(ev["snapshot_stride"]))
    except ValidationError as exc:
        raise ValidationError(f"evolve: {exc}") from None


def trajectory_rows(rec):
    n = len(rec.times)
    dt = rec.distances.get("trivial", [np.nan] * n)
    de = rec.distances.get("nonneg_equilibrium", [np.nan] * n)
    return list(zip(rec.times, rec.J, rec.l2, rec.min_value, rec.dissipation, dt, de))


def cmd_evolve(cfg, out):
    spec, coeff, mesh, ops = _setup(cfg)
    val = _validation(cfg, coeff, spec)
    ecfg = _evolution_cfg(cfg)
    eig = _eig(cfg, ops)
    params = cfg.params(eig.lam)
    eqs = {}
    if params.lam > eig.lam:
        t = amplitude_seed(params.lam, eig, params, ops)
        res = solve_stationary(params, t * eig.u, ops, _newton_cfg(cfg), lambda_1=eig.lam)
        if not res.trivial:
            eqs["nonneg_equilibrium"] = res.u
            write_field(res.u, os.path.join(out, "equilibrium.field"))
    runs, failed = [], False
    for i, init in enumerate(cfg.data["evolve"]["initial"]):
        phi0 = initial_field(init, ops, eig)
        rec = evolve(phi0, params, ops, ecfg, eqs)
        write_csv(os.path.join(out, f"trajectory_{i}.csv"), TRAJECTORY_HEADER, trajectory_rows(rec))
        for k, (ts, snap) in enumerate(rec.snapshots):
            write_field(snap, os.path.join(out, f"snapshot_{i}_{k:04d}.field"))
        entry = {"initial": init, "classification": rec.classification, "undecided": rec.classification == "undecided",
                 "stationary": rec.stationary, "failed": rec.failed, "message": rec.message,
                 "final_time": rec.times[-1], "steps": len(rec.times) - 1, "rejected_steps": rec.rejected_steps,
                 "final_distance": rec.final_distance, "J_monotone": bool(np.all(np.diff(rec.J) <= 1e-12))}
        pos = positivity_check(rec)
        entry["positivity"] = {"applicable": pos.applicable, "min_value": pos.min_value, "passed": pos.passed}
        if rec.classification == "trivial" and params.lam < eig.lam:
            try:
                entry["decay_exponent"] = fit_decay_rate(rec)
                entry["decay_expected"] = -(eig.lam - params.lam)
            except ValueError:
                entry["decay_exponent"] = None
        runs.append(entry)
        failed |= rec.failed
    write_report(os.path.join(out, "evolve.json"), cfg.to_dict(), {
        "lambda_1": eig.lam, "lambda": params.lam, "runs": runs, "mesh": _mesh_meta(mesh), "validation": val})
    if failed:
        raise SolverFailure("time step floor reached; partial trajectories written")
    return EXIT_OK


def verify_checks(cfg):
    """Run the invariant suite; returns a list of {name, passed, ...} entries."""
    spec, coeff, mesh, ops = _setup(cfg)
    vcfg = cfg.data["verify"]
    eig = _eig(cfg, ops)
    params = cfg.params(eig.lam)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    checks = []

    def add(name, passed, **kw):
        checks.append({"name": name, "passed": bool(passed), **kw})

    # Picone: pointwise nonnegativity and the proportional case
    v = eig.u
    worst = np.inf
    for s in range(vcfg["n_fields"]):
        _, mn = picone_check(random_positive(ops, cfg.seed + s), v, mesh)
        worst = min(worst, mn)
    L3 = picone_check(3.0 * v, v, mesh)[1]
    Lmax = float(np.max(picone_terms(3.0 * v, v, mesh)[0]))
    # the three-term form of L cancels; roundoff scales with |grad u|^2
    gmax = float(np.max(np.sum(np.einsum("tij,ti->tj", p1_gradients(mesh), 3.0 * v[mesh.triangles]) ** 2, axis=1)))
    tol = 1e-12 * max(1.0, gmax)
    add("picone", worst >= -tol and Lmax <= tol, min_L=worst, max_L_proportional=Lmax,
        min_L_proportional=L3, threshold=tol)

    # Poincare: Rayleigh bound on random interior fields
    c = 1.0 / eig.lam
    ratio = 0.0
    for _ in range(100):
        w = rng.normal(size=ops.n_interior)
        ratio = max(ratio, (w @ (ops.M_int @ w)) / (c * (w @ (ops.K_int @ w))))
    add("poincare", ratio <= 1 + 1e-10, poincare_c=c, max_ratio=ratio)

    # gradient consistency of residual, Jacobian and energy
    ge, je = assembly.gradient_consistency(params, ops, int(vcfg["n_fields"]), cfg.seed)
    add("gradient_consistency", ge <= 1e-6 and je <= 1e-6, grad_error=ge, jacobian_error=je, threshold=1e-6)

    # equilibrium, stability identity and Garding bound
    if params.lam > eig.lam:
        t = amplitude_seed(params.lam, eig, params, ops)
        u = solve_stationary(params, t * eig.u, ops, _newton_cfg(cfg), lambda_1=eig.lam).u
    else:
        u = np.zeros(mesh.nv)
    st = linearized_spectrum(u, params, ops)
    if np.any(u):
        add("stationarity_identity", st.mu_1 > 0 and st.identity_residual <= 1e-6,
            mu_1=st.mu_1, identity_residual=st.identity_residual, threshold=1e-6)
    else:
        add("stationarity_identity", abs(st.mu_1 - (eig.lam - params.lam)) <= 1e-8 * eig.lam,
            mu_1=st.mu_1, expected=eig.lam - params.lam, note="trivial equilibrium")
    add("garding_bound", st.mu_1 >= eig.lam - params.lam - 1e-8, mu_1=st.mu_1, lower=eig.lam - params.lam)

    # dissipation identity at two fixed time steps
    phi0 = scaled_eigenfunction(0.5, eig)
    dts = [vcfg["dt"], vcfg["dt"] / 2]
    defects, mono = [], True
    for dt in dts:
        rec = evolve(phi0, params, ops, EvolutionConfig(dt=dt, t_max=vcfg["t_short"], adaptive=False,
                                                        dt_min=min(dt, 1e-6)))
        rep = lyapunov_dissipation_check(rec)
        defects.append(rep.max_defect)
        mono &= rep.monotone_ok and not rec.failed
    add("dissipation", mono and defects[1] <= 0.55 * defects[0], defects=defects, dts=dts,
        monotone_ok=mono)

    # positivity from nonnegative data
    mins = []
    for s in range(2):
        rec = evolve(random_positive(ops, cfg.seed + s, 2.0), params, ops,
                     EvolutionConfig(dt=vcfg["dt"], t_max=vcfg["t_short"]))
        mins.append(positivity_check(rec).min_value)
    add("positivity", min(mins) >= -1e-8, min_value=min(mins), threshold=-1e-8)
    return checks, {"lambda_1": eig.lam, "lambda": params.lam, "mesh": _mesh_meta(mesh)}


def cmd_verify(cfg, out):
    t0 = time.perf_counter()
    spec, coeff = cfg.domain(), cfg.coefficient()
    val = _validation(cfg, coeff, spec)
    checks, meta = verify_checks(cfg)
    ok = all(c["passed"] for c in checks)
    write_report(os.path.join(out, "verify.json"), cfg.to_dict(), {
        "passed": ok, "checks": checks, "runtime_s": time.perf_counter() - t0, "validation": val, **meta})
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}")
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"eigen": cmd_eigen, "truncation": cmd_truncation, "branch": cmd_branch,
            "evolve": cmd_evolve, "verify": cmd_verify}


def build_parser():
    ap = argparse.ArgumentParser(prog="degenlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration (defaults used when omitted)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--level", type=int, help="override discretization.level")
        p.add_argument("--seed", type=int, help="override seed")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
        cfg = cfg.override(args.level, args.seed)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out)
    except (ValidationError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SOLVER_ERRORS + (SolverFailure,) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
