"""Acceptance criteria, one test per criterion, each printing PASS/FAIL."""

import itertools
import math
import time

import numpy as np
import pytest

from hfcert import cli
from hfcert import grassmann as gm
from hfcert.conditions import contraction_bound_check, measure
from hfcert.errors import ConsistencyError
from hfcert.hf import PullbackModel, commutator_residual, hessian_diagonal_closed_form
from hfcert.integrals import generate_synthetic
from hfcert.kantorovich import (certify, displacement_check, inverse_jacobian_norm,
                                lipschitz_constants, lipschitz_ratios, newton_radii,
                                newton_solve)
from hfcert.matnorm import norm_one_inf, norm_weighted
from hfcert.ortho import propagation_check, random_gram, schmidt

from conftest import pulled_back_energy, random_integrals, random_tangent, record


def rel_err(approx, exact):
    approx, exact = np.asarray(approx), np.asarray(exact)
    return float(np.abs(approx - exact).max() / max(np.abs(exact).max(), 1e-300))


# the instances used for the end-to-end and bound checks
CERTIFIED_CASES = [(10 * nu + n, nu, n) for nu, n in itertools.product((4, 6, 8), (1, 2, 3))]


def test_criterion_01_retraction_validity():
    rng = np.random.default_rng(1)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(1000):
        nu = int(rng.integers(2, 7))
        n = int(rng.integers(1, nu))
        point = gm.random_point(n, nu, rng)
        b = random_tangent(rng, (n, nu - n), rng.uniform(0.0, 10.0))
        p = gm.retract(point, b).p
        worst = max(worst, np.abs(p - p.conj().T).max(), np.abs(p @ p - p).max(),
                    abs(np.trace(p).real - n), abs(np.trace(p).imag))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 5.0
    record(1, ok, f"max invariant error {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-10
    assert elapsed < 5.0


def test_criterion_02_derivative_oracles():
    rng = np.random.default_rng(2)
    errs = {1: 0.0, 2: 0.0, 3: 0.0}
    start = time.perf_counter()
    for _ in range(100):
        nu = int(rng.integers(2, 6))
        n = int(rng.integers(1, nu))
        point = gm.random_point(n, nu, rng)
        shape = point.tangent_shape
        xi = random_tangent(rng, shape, rng.uniform(0.1, 1.0))
        z1, z2, z3 = (random_tangent(rng, shape, 1.0) for _ in range(3))

        def r(b):
            return gm.retract_matrix(point, b)

        def d1(b):
            return gm.dretract(point, b, z1)

        h = 1e-5
        fd1 = (r(xi + h * z1) - r(xi - h * z1)) / (2 * h)
        errs[1] = max(errs[1], rel_err(fd1, gm.dretract(point, xi, z1)))
        fd2 = (d1(xi + h * z2) - d1(xi - h * z2)) / (2 * h)
        errs[2] = max(errs[2], rel_err(fd2, gm.d2retract(point, xi, z1, z2)))
        h3 = 1e-3
        fd3 = (d1(xi + h3 * (z2 + z3)) - d1(xi + h3 * (z2 - z3))
               - d1(xi - h3 * (z2 - z3)) + d1(xi - h3 * (z2 + z3))) / (4 * h3 * h3)
        errs[3] = max(errs[3], rel_err(fd3, gm.d3retract(point, xi, z1, z2, z3)))

    cross = 0.0
    for nu in range(2, 6):
        for n in range(1, nu):
            point = gm.random_point(n, nu, rng)
            basis = gm.basis_vectors(point)
            zero = np.zeros(point.tangent_shape)
            for eta, eta_hat in zip(basis[0::2], basis[1::2]):
                cross = max(cross, np.abs(gm.d2retract(point, zero, eta, eta_hat)).max(),
                            np.abs(gm.d2retract_at_zero(point, eta, eta_hat)).max())
    elapsed = time.perf_counter() - start
    ok = (errs[1] <= 1e-6 and errs[2] <= 1e-4 and errs[3] <= 1e-3 and cross <= 1e-12
          and elapsed < 30.0)
    record(2, ok, f"rel errors d1 {errs[1]:.1e}, d2 {errs[2]:.1e}, d3 {errs[3]:.1e}; "
                  f"cross term {cross:.1e}; {elapsed:.1f} s")
    assert errs[1] <= 1e-6 and errs[2] <= 1e-4 and errs[3] <= 1e-3
    assert cross <= 1e-12
    assert elapsed < 30.0


def test_criterion_03_gradient_and_hessian():
    rng = np.random.default_rng(3)
    worst_g = worst_h = worst_diag = 0.0
    for trial in range(50):
        nu = int(rng.integers(2, 6))
        n = int(rng.integers(1, nu))
        integrals = random_integrals(rng, nu, n)
        point = gm.canonical_point(n, nu)
        shape = point.tangent_shape
        xi = random_tangent(rng, shape, 0.5)
        dirs = [t.b for t in gm.basis_vectors(point)]
        model = PullbackModel(integrals, point, xi)

        def f(b):
            return pulled_back_energy(integrals, point, b)

        h = 1e-5
        fd_g = np.array([(f(xi + h * d) - f(xi - h * d)) / (2 * h) for d in dirs])
        worst_g = max(worst_g, rel_err(model.gradient_real(), fd_g))

        hh = 1e-4
        dim = len(dirs)
        fd_h = np.empty((dim, dim))
        for a in range(dim):
            for c in range(a, dim):
                da, dc = hh * dirs[a], hh * dirs[c]
                fd_h[a, c] = fd_h[c, a] = (f(xi + da + dc) - f(xi + da - dc)
                                           - f(xi - da + dc) + f(xi - da - dc)) / (4 * hh * hh)
        worst_h = max(worst_h, rel_err(model.hessian_matrix(), fd_h))

        h0 = PullbackModel(integrals, point).hessian_matrix()
        worst_diag = max(worst_diag, float(np.abs(np.diag(h0)
                                                  - hessian_diagonal_closed_form(integrals)).max()))
    ok = worst_g <= 1e-6 and worst_h <= 1e-5 and worst_diag <= 1e-10
    record(3, ok, f"gradient rel {worst_g:.1e}, Hessian rel {worst_h:.1e}, "
                  f"diagonal closed form {worst_diag:.1e}")
    assert worst_g <= 1e-6
    assert worst_h <= 1e-5
    assert worst_diag <= 1e-10


def test_criterion_04_na_equivalence():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        nu = int(rng.integers(2, 6))
        n = int(rng.integers(1, nu))
        point = gm.random_point(n, nu, rng)
        shape = point.tangent_shape
        xi = random_tangent(rng, shape, rng.uniform(0.0, 1.0))
        g = rng.standard_normal((nu, nu)) + 1j * rng.standard_normal((nu, nu))

        def functional(d):
            return np.trace(g @ d)

        for order in (1, 2, 3):
            others = [random_tangent(rng, shape, 1.0) for _ in range(order - 1)]
            for j in range(shape[0]):
                for k in range(shape[1]):
                    res = gm.na_directional(point, xi, functional, j, k, others, tol=1e-9)
                    worst = max(worst, abs(res.pair - res.masked) / max(1.0, abs(res.pair)))
        integrals = random_integrals(rng, nu, n)
        model = PullbackModel(integrals, gm.canonical_point(n, nu), xi)
        worst = max(worst, float(np.abs(model.gradient() - model.gradient_masked()).max()))
    ok = worst <= 1e-9
    record(4, ok, f"max pair/masked disagreement {worst:.1e}")
    assert ok


def test_criterion_05_contraction_bounds():
    results = []
    detected = []
    for seed, nu, n in [(1, 6, 2), (2, 4, 1), (3, 8, 3)]:
        integrals, weights = generate_synthetic(seed, nu, n)
        report = measure(integrals, weights)
        check = contraction_bound_check(integrals, weights, report, trials=100, seed=seed)
        results.append(check.passed and check.trials >= 100)
        for name in report.constants():
            if name in ("eps", "delta", "gamma"):
                continue
            halved = report.scaled(**{name: 0.5})
            if getattr(halved, name) == 0:
                continue
            bad = contraction_bound_check(integrals, weights, halved, trials=100, seed=seed)
            detected.append((name, not bad.passed))
    ok = all(results) and all(d for _, d in detected)
    missed = [name for name, d in detected if not d]
    record(5, ok, f"{sum(results)}/{len(results)} instances pass; "
                  f"{sum(d for _, d in detected)}/{len(detected)} halvings detected"
                  + (f"; missed {missed}" if missed else ""))
    assert all(results)
    assert not missed


def _run_case(seed, nu, n):
    integrals, weights = generate_synthetic(seed, nu, n)
    cert = certify(measure(integrals, weights))
    trace, final = newton_solve(integrals, tol=1e-10)
    return integrals, cert, trace, final


def test_criterion_06_end_to_end():
    start = time.perf_counter()
    rows = []
    for seed, nu, n in CERTIFIED_CASES:
        integrals, cert, trace, final = _run_case(seed, nu, n)
        p0 = gm.canonical_point(n, nu)
        kappas = trace.quadratic_constants()
        quadratic = bool(kappas) and all(k <= cert.c_star * cert.big_l for k in kappas)
        steps = trace.step_norms
        shrinking = all(b < a for a, b in zip(steps, steps[1:]) if a > 1e-13)
        disp = displacement_check(final, p0, cert) if cert.valid else None
        rows.append(dict(
            case=(nu, n), certified=cert.valid, converged=trace.converged,
            grad=trace.iterates[-1].grad_norm, quadratic=quadratic and shrinking,
            residual=commutator_residual(final, integrals),
            displacement=disp is not None and disp.passed))
    elapsed = time.perf_counter() - start
    good = [r for r in rows if r["certified"] and r["converged"] and r["grad"] <= 1e-10
            and r["quadratic"] and r["residual"] <= 1e-8 and r["displacement"]]
    ok = len(good) >= 5 and len(good) == len(rows) and elapsed < 60.0
    record(6, ok, f"{len(good)}/{len(rows)} instances certified and verified, "
                  f"max residual {max(r['residual'] for r in rows):.1e}, {elapsed:.1f} s")
    for r in rows:
        assert r["certified"], r
        assert r["converged"] and r["grad"] <= 1e-10, r
        assert r["quadratic"], r
        assert r["residual"] <= 1e-8, r
        assert r["displacement"], r
    assert elapsed < 60.0


def test_criterion_07_bound_sharpness():
    worst_inv = worst_lip = 0.0
    checked = 0
    ok = True
    for seed, nu, n in CERTIFIED_CASES:
        integrals, weights = generate_synthetic(seed, nu, n)
        cert = certify(measure(integrals, weights))
        if not cert.valid:
            continue
        checked += 1
        inv = inverse_jacobian_norm(integrals)
        lips = lipschitz_ratios(integrals, cert.eps_hat, samples=8, seed=seed)
        worst_inv = max(worst_inv, inv / cert.c_star)
        worst_lip = max(worst_lip, max(lips) / cert.big_l)
        ok &= inv <= cert.c_star and max(lips) <= cert.big_l
    ok &= checked > 0
    record(7, ok, f"{checked} instances; max ||F'(0)^-1||/c* = {worst_inv:.3f}, "
                  f"max Lipschitz ratio / L = {worst_lip:.4f}")
    assert ok


def test_criterion_08_orthogonalization():
    rng = np.random.default_rng(8)
    worst_ortho = 0.0
    s_ok = norms_ok = True
    for _ in range(60):
        nu = int(rng.integers(2, 9))
        integrals, weights = generate_synthetic(int(rng.integers(1000)), nu, max(1, nu // 2))
        eps0 = rng.uniform(0.0, 0.2)
        for cplx in (False, True):
            gram = random_gram(rng, weights, eps0, complex_entries=cplx)
            res = schmidt(gram, weights)
            c = res.c
            if cplx:
                overlap = c.conj() @ gram @ c.T
            else:
                overlap = c @ gram @ c.conj().T
            worst_ortho = max(worst_ortho, float(np.abs(overlap - np.eye(nu)).max()))
            s_ok &= norm_weighted(res.s, weights) <= res.eps2
            norms_ok &= bool(np.all(np.abs(res.norms - 1.0) <= res.eps1))
    props = []
    for seed, nu, n in [(1, 6, 2), (2, 4, 1), (3, 8, 3), (4, 4, 2)]:
        integrals, weights = generate_synthetic(seed, nu, n)
        for eps0 in (0.01, 0.05, 0.2):
            gram = random_gram(np.random.default_rng(seed), weights, eps0)
            chk = propagation_check(integrals, gram, weights)
            props.append(chk.passed)
    ok = worst_ortho <= 1e-10 and s_ok and norms_ok and all(props)
    record(8, ok, f"orthonormality {worst_ortho:.1e}, ||S||_w<=eps2 {s_ok}, "
                  f"norms in band {norms_ok}, propagation {sum(props)}/{len(props)}")
    assert worst_ortho <= 1e-10
    assert s_ok and norms_ok
    assert all(props)


def test_criterion_09_certificate_arithmetic():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(2000):
        c_star = rng.uniform(0.1, 10.0)
        eps = 10 ** rng.uniform(-6, 0)
        big_l = rng.uniform(0.1, 100.0)
        if c_star**2 * eps * big_l >= 0.5:
            continue
        rad = newton_radii(c_star, eps, big_l)
        worst = max(worst, abs(rad["tau_star"] - rad["tau_star_alt"]))
    rad = newton_radii(2.0, 0.01, 5.0)
    example = abs(rad["tau_star"] - (1 - math.sqrt(0.6)) / 10)
    exact = True
    for consts in [(1.0, 1.0, 1.0, 1.0), tuple(rng.uniform(0, 3, 4))]:
        ct, ch, cb, cc = consts
        lc = lipschitz_constants(0.0, ct, ch, cb, cc)
        exact &= lc.big_c == 6 * (ct + ch + cb + cc) and lc.big_d == 4 * (ct + ch)
        exact &= lc.big_l == lc.big_c + 3 * lc.big_d
    l_unit = lipschitz_constants(0.0, 1.0, 1.0, 1.0, 1.0).big_l
    ok = worst <= 1e-12 and example <= 1e-12 and exact and l_unit == 48.0
    record(9, ok, f"tau* two-form gap {worst:.1e}; eps_hat=0 closed forms exact {exact}; "
                  f"L(unit) = {l_unit}")
    assert worst <= 1e-12 and example <= 1e-12
    assert exact and l_unit == 48.0


def test_criterion_10_determinism(tmp_path):
    outputs = []
    for run in range(2):
        out = tmp_path / f"report{run}.json"
        figs = tmp_path / f"figs{run}"
        code = cli.main(["report", "--seed", "1", "-o", str(out), "--figures", str(figs)])
        assert code == 0
        outputs.append((out.read_bytes(), (figs / "newton_convergence.png").read_bytes()))
    gen = tmp_path / "instance.json"
    assert cli.main(["generate", "--seed", "7", "--nu", "5", "--n-elec", "2", "-o", str(gen)]) == 0
    file_runs = []
    for run in range(2):
        out = tmp_path / f"file{run}.json"
        cli.main(["report", str(gen), "-o", str(out)])
        file_runs.append(out.read_bytes())
    same = outputs[0][0] == outputs[1][0] and file_runs[0] == file_runs[1]
    same_fig = outputs[0][1] == outputs[1][1]
    record(10, same and same_fig, f"report JSON byte-identical {same}, figures identical {same_fig}")
    assert same
    assert same_fig
