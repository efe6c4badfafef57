#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

import logging

import numpy as np
import pytest

from analysis import Preconditioner, eigen_trace, residual_ratios, w_spectrum_check
from basin import classify
from core import SolverConfig, Status
from problems import BUILTIN_NAMES, builtin
from solvers import run

from .helpers import perturbed

logger = logging.getLogger(__name__)

FIG_START = (0.1, -1.0)
ROOT_SOLVE_TOL = 1e-8
ROOT_DISTANCE = 1e-6


@pytest.mark.parametrize("name", BUILTIN_NAMES)
@pytest.mark.parametrize("method", ["nr", "dn", "w4"])
def test_roots_are_found_again(name, method):
    problem = builtin(name)
    rng = np.random.default_rng(BUILTIN_NAMES.index(name))
    # |F| < 1e-6 only bounds the distance by |J^-1| 1e-6, which exceeds 1e-6 on fproblem0
    config = SolverConfig.for_method(method, tol=ROOT_SOLVE_TOL)
    for k, root in enumerate(problem.known_roots):
        result = run(problem, config, perturbed(root, 0.1, rng))
        assert result.converged, (name, method, k)
        assert classify(result.final_state.x, problem.known_roots, result.status) == k + 1
        assert np.linalg.norm(result.final_state.x - root) < ROOT_DISTANCE, (name, method, k)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
@pytest.mark.parametrize("method", ["nr", "dn", "w4"])
def test_default_tolerance_bounds_the_distance(name, method):
    problem = builtin(name)
    rng = np.random.default_rng(50 + BUILTIN_NAMES.index(name))
    config = SolverConfig.for_method(method)
    for root in problem.known_roots:
        result = run(problem, config, perturbed(root, 0.1, rng))
        assert result.converged
        inverse_norm = np.linalg.norm(np.linalg.inv(problem.jacobian(root)), ord=2)
        bound = 1.5 * inverse_norm * np.sqrt(problem.dim) * result.final_residual + 1e-12
        assert np.linalg.norm(result.final_state.x - root) <= bound, (name, method)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_w4_local_rate(name):
    problem = builtin(name)
    dtau = 0.5
    config = SolverConfig.for_method("w4", tol=1e-12)
    for root in problem.known_roots:
        result = run(problem, config, root + 5e-4)
        assert result.converged
        residuals = result.residuals
        ratios, _ = residual_ratios(result)
        checked = 0
        for k in range(5, len(ratios)):
            if residuals[k + 1] < 1e-9:
                break
            # residuals follow (1 - dtau)^(n-1) (1 + (n-1) dtau)
            predicted = (1.0 - dtau) * (1.0 + k * dtau) / (1.0 + (k - 1) * dtau)
            assert abs(ratios[k] - predicted) < 0.05 * predicted, (name, k, ratios[k])
            checked += 1
        assert checked > 0


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_newton_local_rate(name):
    problem = builtin(name)
    rng = np.random.default_rng(100 + BUILTIN_NAMES.index(name))
    for root in problem.known_roots:
        result = run(problem, SolverConfig.for_method("nr"), perturbed(root, 1e-2, rng))
        assert result.converged
        _, quadratic = residual_ratios(result)
        assert np.all(quadratic[-3:] < 1e3), (name, quadratic)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_stable_spectrum_means_convergence(name):
    problem = builtin(name)
    for root in problem.known_roots:
        check = w_spectrum_check(problem.jacobian(root), Preconditioner.UDL, 0.5)
        assert check.passed
        assert np.all(np.abs(check.eigenvalues) < 1.0)
        result = run(problem, SolverConfig.for_method("w4"), root + 1e-4)
        assert result.converged


@pytest.mark.parametrize("method,dtau", [("nr", None), ("dn", 0.5)])
def test_newton_runs_off_to_infinity(method, dtau):
    problem = builtin("fproblem0")
    config = SolverConfig.for_method(method, dtau=dtau)
    trace = eigen_trace(problem, config, FIG_START)
    result = trace.result
    logger.info(f"{method}: {result.status.value} after {result.iterations} iterations")
    assert result.status in (Status.DIVERGED, Status.MAX_ITER_EXCEEDED)

    ys = result.positions[:, 1]
    assert not np.all(np.isfinite(ys)) or np.max(np.abs(ys)) > 1e3
    assert np.min(trace.ratios) < 1e-4
    assert trace.reconstruction_ok


def test_eigen_w4_finds_a_root():
    problem = builtin("fproblem0")
    config = SolverConfig.for_method("w4-eigen", max_iter=1000)
    trace = eigen_trace(problem, config, FIG_START)
    result = trace.result
    logger.info(f"w4-eigen converged in {result.iterations} iterations")
    assert result.converged
    assert classify(result.final_state.x, problem.known_roots, result.status) >= 1
    assert trace.records[-1].ratio > 1e-3


def test_momentum_changes_the_path():
    problem = builtin("fproblem0")
    start = (0.5, -1.0)
    for dn_method, w4_method in (("dn", "w4"), ("dn-eigen", "w4-eigen")):
        dn = run(problem, SolverConfig.for_method(dn_method, dtau=0.25, max_iter=3), start)
        w4 = run(problem, SolverConfig.for_method(w4_method, dtau=0.5, max_iter=4), start)
        np.testing.assert_allclose(dn.positions[1], w4.positions[2], rtol=0.0, atol=1e-12)
        assert np.max(np.abs(dn.positions[3] - w4.positions[4])) > 1e-6


def test_w4_single_runs_from_table():
    problem = builtin("simple1d")
    config = SolverConfig.for_method("w4")
    assert abs(run(problem, config, [-2.5]).iterations - 33) <= 2
    assert abs(run(problem, config, [1.0]).iterations - 22) <= 2
    dn = run(problem, SolverConfig.for_method("dn"), [-2.5])
    assert not dn.converged
