import math

import numpy as np
import pytest

from conicbenders import corpus, verify
from conicbenders.errors import GridDimensionError
from conicbenders.expr import AffineX, Constant
from conicbenders.model import Instance
from conicbenders import cones


def test_perturbation_value_examples(toy):
    assert verify.perturbation_value(toy, [0.0], [0.0]) == pytest.approx(1.0, abs=1e-8)
    assert verify.perturbation_value(toy, [0.0], [1.0]) == pytest.approx(0.0, abs=1e-8)
    assert verify.perturbation_value(toy, [0.0], [-2.0]) == math.inf


def test_grid_only_oracle_agrees(toy):
    for z in (-0.5, 0.0, 0.3):
        a = verify.perturbation_value(toy, [0.0], [z], polish=False)
        b = verify.perturbation_value(toy, [0.0], [z])
        assert a == pytest.approx(b, abs=1e-8)


def test_dimension_refusal():
    inst = Instance(n=5, lower=[0] * 5, upper=[1] * 5, Y=[[0.0]], cone=cones.orthant(1),
                    objective=Constant(0.0), constraints=[AffineX([1.0] * 5)])
    with pytest.raises(GridDimensionError):
        verify.perturbation_value(inst, [0.0], [0.0])
    with pytest.raises(GridDimensionError):
        verify.brute_force_solve(inst)


def test_brute_force_examples(toy):
    value, x, y = verify.brute_force_solve(toy, 201)
    assert value == pytest.approx(-1.0, abs=1e-9)
    assert x == pytest.approx([1.0]) and y.tolist() == [1.0]
    assert verify.brute_force_solve(corpus.constant_instance(3.0))[0] == 3.0
    assert verify.brute_force_solve(corpus.infeasible_instance())[0] == math.inf
    assert verify.brute_force_solve(toy, 11, polish=False)[0] == pytest.approx(-1.0, abs=1e-9)


def test_optimality_condition_examples(toy):
    assert verify.check_optimality_conditions(toy, [0.0], [0.0], [1.0]).worst <= 1e-6
    assert verify.check_optimality_conditions(toy, [0.0], [0.0], [-1.0]).r_dual_cone == pytest.approx(1.0)


def test_multiplier_subgradient_examples(toy):
    assert verify.check_multiplier_subgradient(toy, [0.0], [1.0], 100, 0) <= 1e-6
    # constraint x - 0.5 <= 0 is inactive at the optimum x = -1 of min x
    inactive = Instance(n=1, lower=[-1.0], upper=[1.0], Y=[[0.0]], cone=cones.orthant(1),
                        objective=AffineX([1.0]), constraints=[AffineX([1.0], -0.5)])
    assert verify.check_multiplier_subgradient(inactive, [0.0], [0.0], 100, 0) <= 1e-6
    assert verify.check_multiplier_subgradient(toy, [0.0], [5.0], 200, 0) >= 3.0 - 0.1
    v0 = verify.perturbation_value(toy, [0.0], [0.0])
    vm1 = verify.perturbation_value(toy, [0.0], [-1.0])
    assert v0 - 5.0 * (-1.0) - vm1 == pytest.approx(4.0, abs=1e-6)


def test_lipschitz_examples(toy):
    assert verify.check_lipschitz_bound(toy, [0.0], 100, 0) <= 1 + 1e-6
    assert verify.check_lipschitz_bound(toy, [1.0], 100, 0) <= 1 + 1e-6
    assert verify.check_lipschitz_bound(corpus.constant_instance(), [0.0], 50, 0) == 0.0


def test_monotone_examples(toy):
    chk = verify.check_monotone_perturbation(toy, [0.0], 50, 0)
    assert chk.worst <= 1e-6
    same = verify.check_monotone_perturbation(toy, [0.0], pairs=[([0.2], [0.2])])
    assert same.worst == 0.0
    # infeasible z1 holds vacuously
    vacuous = verify.check_monotone_perturbation(toy, [0.0], pairs=[([-3.0], [1.0])])
    assert vacuous.worst == 0.0


def test_grid_min_weighted_g(toy):
    assert verify.grid_min_weighted_g(toy, [0.0], [1.0]) == pytest.approx(-1.0)


def test_run_checks_example(toy):
    results = verify.run_checks(toy)
    assert results and all(r.passed for r in results)
    assert {r.name for r in results} == set(verify.CHECKS)


def test_run_checks_subset(toy):
    results = verify.run_checks(toy, only=["weak-duality"])
    assert [r.name for r in results] == ["weak-duality"] * 3


def test_run_checks_nonslater():
    results = verify.run_checks(corpus.nonslater_instance())
    failed = [r for r in results if not r.passed]
    assert failed and all("MultiplierRadiusExceeded" in r.detail for r in failed)


def test_essential_feasibility_on_corpus():
    rng = np.random.default_rng(0)
    from conicbenders.subsolver import minimize_lagrangian

    for inst in corpus.generate_corpus(5, seed=2):
        for i in range(len(inst.Y)):
            for _ in range(20):
                u = cones.random_member(inst.cone, rng) * 50
                assert math.isfinite(minimize_lagrangian(inst, inst.y_array(i), u)[1])


def test_refined_grid_min_interior_and_boundary():
    def bowl(pts):
        return ((pts - 0.3) ** 2).sum(axis=1)

    value, x = verify.refined_grid_min(bowl, np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 21)
    assert value <= 1e-14 and x == pytest.approx([0.3, 0.3], abs=1e-7)

    # min -x1 - x2 over the unit disk: pattern search alone gets close to the
    # curved boundary but not onto it, which is what the conic polish is for
    def disk(pts):
        ok = np.einsum("ij,ij->i", pts, pts) <= 1.0
        return np.where(ok, -pts.sum(axis=1), np.inf)

    value, x = verify.refined_grid_min(disk, np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 21)
    assert -math.sqrt(2) <= value <= -math.sqrt(2) + 1e-3
