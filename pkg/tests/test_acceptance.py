"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest

from conicbenders import cli, cones, verify
from conicbenders.gbd import GbdStatus
from conicbenders.subsolver import feasibility_certificate, minimize_lagrangian, solve_primal

from conftest import ACCEPTANCE_LINES, CORPUS_EPS, INSTANCES


def report(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_example_golden(tmp_path):
    import cvxpy  # noqa: F401  # library import is not part of the solve time

    out = tmp_path / "report.json"
    start = time.perf_counter()
    code = cli.main(["solve", str(INSTANCES / "toy.json"), "--eps", "0.5", "--out", str(out)])
    elapsed = time.perf_counter() - start
    rep = json.loads(out.read_text())
    trace = rep["trace"]
    checks = {
        "exit 0": code == 0,
        "EpsOptimal": rep["status"] == "EpsOptimal",
        "value -1": abs(rep["best_value"] + 1.0) <= 1e-4,
        "point (1,1)": abs(rep["best_x"][0] - 1.0) <= 1e-4 and abs(rep["best_y"][0] - 1.0) <= 1e-4,
        "2 primal solves": rep["primal_solves"] == 2,
        "UBD starts at 1": abs(trace[0]["ubd"] - 1.0) <= 1e-4,
        "under 1 s": elapsed < 1.0,
    }
    failed = [k for k, v in checks.items() if not v]
    report(1, "worked example golden", not failed,
           f"value={rep['best_value']:.8f} solves={rep['primal_solves']} time={elapsed:.3f}s"
           + (f" failed={failed}" if failed else ""))


def test_criterion_2_oracle_equivalence(generated_corpus, corpus_runs):
    instances, _ = generated_corpus
    reports, run_time = corpus_runs
    start = time.perf_counter()
    tol = max(CORPUS_EPS, 5e-3)
    worst, bad = 0.0, []
    for inst, rep in zip(instances, reports):
        value, _, _ = verify.brute_force_solve(inst)
        if math.isinf(value) and math.isinf(rep.best_value):
            continue
        diff = abs(rep.best_value - value)
        worst = max(worst, diff)
        if not diff <= tol:
            bad.append(inst.name)
    total = run_time + time.perf_counter() - start
    ok = not bad and total < 60.0 and len(instances) == 50
    report(2, "oracle equivalence", ok,
           f"{len(instances)} instances, worst |gbd-oracle|={worst:.2e} (tol {tol:g}), "
           f"total {total:.1f}s" + (f", mismatches {bad}" if bad else ""))


def _feasible_pairs(instances):
    pairs = []
    for inst in instances:
        for i in range(len(inst.Y)):
            if math.isfinite(verify.perturbation_value(inst, inst.y_array(i), None)):
                pairs.append((inst, i))
    return pairs


def test_criterion_3_weak_duality(generated_corpus):
    instances, _ = generated_corpus
    rng = np.random.default_rng(3)
    pairs = _feasible_pairs(instances)
    violations, worst = 0, -math.inf
    for j in rng.integers(len(pairs), size=1000):
        inst, i = pairs[j]
        y = inst.y_array(i)
        u = cones.random_member(inst.cone, rng) * 10.0 ** rng.uniform(-2, 1.5)
        _, lval = minimize_lagrangian(inst, y, u)
        gap = lval - verify.perturbation_value(inst, y, None)
        worst = max(worst, gap)
        violations += gap > 1e-6
    report(3, "weak duality", violations == 0,
           f"1000 (y,u) pairs, violations={violations}, worst L-v={worst:.2e}")


def test_criterion_4_multiplier_validity(generated_corpus):
    instances, _ = generated_corpus
    count, worst_res, worst_sub, bad = 0, 0.0, -math.inf, []
    for inst in instances:
        for i in range(len(inst.Y)):
            y = inst.y_array(i)
            sol = solve_primal(inst, y)
            if not sol.optimal:
                continue
            count += 1
            res = verify.check_optimality_conditions(inst, y, sol.x_star, sol.u_star)
            sub = verify.check_multiplier_subgradient(inst, y, sol.u_star, n_samples=100, rng_seed=i)
            worst_res = max(worst_res, res.worst)
            worst_sub = max(worst_sub, sub)
            if not (res.passes(1e-4) and sub <= 1e-4):
                bad.append((inst.name, i))
    report(4, "multiplier validity", not bad and count > 0,
           f"{count} optimal subproblems, worst residual={worst_res:.2e}, "
           f"worst subgradient violation={worst_sub:.2e}" + (f", failures {bad}" if bad else ""))


def test_criterion_5_bounds(generated_corpus, corpus_runs):
    instances, _ = generated_corpus
    reports, _ = corpus_runs
    bad = []
    for inst, rep in zip(instances, reports):
        opt, _, _ = verify.brute_force_solve(inst)
        etas = [r.eta for r in rep.iterations if r.eta is not None]
        ubds = [r.ubd for r in rep.iterations]
        problems = []
        if rep.status not in (GbdStatus.EPS_OPTIMAL, GbdStatus.INFEASIBLE):
            problems.append(rep.status.value)
        if len(rep.iterations) > 10 * len(inst.Y) + 1:
            problems.append("iteration cap")
        if any(b < a for a, b in zip(etas, etas[1:])):
            problems.append("eta decreased")
        if any(b > a for a, b in zip(ubds, ubds[1:])):
            problems.append("UBD increased")
        if rep.status is GbdStatus.EPS_OPTIMAL and not rep.final_ubd - rep.final_eta <= CORPUS_EPS + 1e-6:
            problems.append("final gap")
        for r in rep.iterations:
            if r.eta is not None and not r.eta <= opt + 1e-4:
                problems.append(f"eta above optimum at k={r.k}")
            if not opt <= r.ubd + 1e-4:
                problems.append(f"UBD below optimum at k={r.k}")
        if problems:
            bad.append((inst.name, problems))
    report(5, "bound monotonicity and sandwich", not bad,
           f"{len(reports)} runs, statuses "
           f"{sorted({r.status.value for r in reports})}" + (f", failures {bad}" if bad else ""))


def test_criterion_6_certificates(generated_corpus):
    instances, _ = generated_corpus
    emitted, unsound, incomplete = 0, [], []
    for inst in instances:
        for i in range(len(inst.Y)):
            y = inst.y_array(i)
            z = feasibility_certificate(inst, y)
            feasible = math.isfinite(verify.perturbation_value(inst, y, None))
            if z is not None:
                emitted += 1
                if not verify.grid_min_weighted_g(inst, y, z, n_points=10_000) > 0:
                    unsound.append((inst.name, i))
            if feasible and z is not None:
                incomplete.append((inst.name, i))
    report(6, "certificate soundness/completeness", not unsound and not incomplete and emitted > 0,
           f"{emitted} certificates, unsound={len(unsound)}, emitted-on-feasible={len(incomplete)}")


def test_criterion_7_projection():
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    for cone in (cones.orthant(1), cones.orthant(5), cones.soc(2), cones.soc(3), cones.soc(8)):
        z = rng.standard_normal((1000, cone.total_dim)) * rng.uniform(0.1, 10.0, (1000, 1))
        p = cones.project(cone, z)
        idem = np.max(np.abs(cones.project(cone, p) - p))
        member = np.max(np.maximum(-cones.interior_margin(cone, p), 0.0))
        ortho = np.max(np.abs(np.einsum("ij,ij->i", z - p, p)))
        worst = max(worst, idem, member, ortho)
    elapsed = time.perf_counter() - start
    report(7, "cone projection properties", worst <= 1e-8 and elapsed < 1.0,
           f"worst residual={worst:.2e}, time={elapsed:.3f}s")


def test_criterion_8_perturbation_function(generated_corpus):
    instances, _ = generated_corpus
    worst_mono = worst_conv = 0.0
    checked, bad = 0, []
    for inst in instances:
        if inst.n > 3:
            continue
        for i in range(len(inst.Y)):
            chk = verify.check_monotone_perturbation(inst, inst.y_array(i), n_pairs=50, rng_seed=i)
            checked += 1
            worst_mono = max(worst_mono, chk.monotonicity)
            worst_conv = max(worst_conv, chk.convexity)
            if chk.worst > 1e-6:
                bad.append((inst.name, i))
    report(8, "perturbation function properties", not bad,
           f"{checked} subproblems, worst monotonicity={worst_mono:.2e}, "
           f"worst convexity={worst_conv:.2e}" + (f", failures {bad}" if bad else ""))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
