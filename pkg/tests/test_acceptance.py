"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (visible under ``pytest -v``)
and then asserts the criterion at its stated tolerance.
"""
import json
import time

import numpy as np
import pytest
from scipy.linalg import expm

from qpreduce.cli import EXIT_CONJUGATION, EXIT_CONSTANCY, EXIT_MEMBERSHIP, EXIT_OK, main
from qpreduce.cocycle import (DEFAULT_TIMES, Certificate, CocycleEvaluator, IntegratorSettings,
                              complex_from_json, complex_to_json, integrate_many)
from qpreduce.fixtures import (commuting_fixture, intersection_counterexample, mobius_cocycle,
                               mobius_complex_certificate)
from qpreduce.jordan import decompose_real, subbundle_intersection_dim
from qpreduce.planted import generate, planted_discrete
from qpreduce.resonance import SearchBox, detect_resonance, unimodular_complete
from qpreduce.suspension import lift_reduction, restrict_to_subtorus, suspend, verify_suspension
from qpreduce.torus import EvaluationGrid, TorusMap, hstack
from qpreduce.verify import check_derivative_relation, residual_conjugation

from conftest import CLASS_TOKENS, random_gl_recipe, random_map
from oracles import brute_force_resonance, cofactor_det, far_from_rationals


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    return emit


def read(path):
    with open(path) as fh:
        return json.load(fh)


def write(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh)


def perturb_column(cert_dict, eps=0.05):
    cert = Certificate.from_dict(cert_dict)
    d = cert.frame.d
    k = np.zeros((1, d), dtype=int)
    k[0, 0] = 1
    bump = TorusMap(np.vstack([np.zeros((1, d), int), k, -k]),
                    np.array([[[1.0]], [[eps / 2]], [[eps / 2]]]), cert.frame.period, real=True)
    cols = [cert.frame.columns([j]) for j in range(cert.n)]
    cols[0] = cols[0].multiply(bump)
    return cert.with_(frame=hstack(cols)).to_dict()


def test_criterion_1_real_reduction_round_trip(tmp_path, report):
    rng = np.random.default_rng(101)
    classes = ("real", "half", "nonres")
    worst, failures, covered = 0.0, [], set()
    start = time.perf_counter()
    for i in range(50):
        recipe, n = random_gl_recipe(rng, max_n=6, must_include=classes[i % 3])
        d = 1 + (i // 3) % 2
        inst = generate("GL_R", n, d, recipe, seed=1000 + i)
        assert inst.certificate.group_tag == "GL_C" and inst.certificate.frame.degree <= 2
        covered.update(c for c in classes if any(t in recipe for t in CLASS_TOKENS[c]))
        job = tmp_path / f"job{i}"
        job.mkdir()
        write(job / "cert.json", inst.certificate.to_dict())
        write(job / "coc.json", inst.cocycle.to_dict())
        code = main(["reduce", "--input", str(job / "cert.json"), "--cocycle", str(job / "coc.json"),
                     "--output", str(job / "out.json")])
        if code != EXIT_OK:
            failures.append((i, recipe, f"exit {code}"))
            continue
        out = Certificate.from_dict(read(job / "out.json")["certificate"])
        rep = residual_conjugation(inst.cocycle, out, EvaluationGrid(8, out.modulus, d), DEFAULT_TIMES)
        worst = max(worst, rep.max_residual)
        expected_mod = 2 if inst.has_half else 1
        if not out.frame.real or rep.max_residual > 1e-8 or out.modulus != expected_mod:
            failures.append((i, recipe, rep.max_residual, out.modulus))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60 and covered == set(classes)
    report(1, ok, f"50 reductions, worst residual {worst:.2e}, {elapsed:.1f} s, failures {failures}")
    assert not failures
    assert covered == set(classes)
    assert elapsed < 60


NORMALIZE_CASES = [("SL_R", 2, ("hyper",)), ("Sp_R", 2, ("half",)), ("Sp_R", 4, ("half", "nonres")),
                   ("O_n", 2, ("nonres",)), ("O_n", 3, ("half", "zero")), ("U_n", 2, ("imag",) * 2),
                   ("U_n", 3, ("imag",) * 3)]


def _normalize(tmp_path, name, cert_dict, coc_dict, group):
    job = tmp_path / name
    job.mkdir()
    write(job / "cert.json", cert_dict)
    write(job / "coc.json", coc_dict)
    code = main(["normalize", "--input", str(job / "cert.json"), "--cocycle", str(job / "coc.json"),
                 "--group", group, "--output", str(job / "out.json")])
    return code, read(job / "out.json")


def test_criterion_2_group_normalizations(tmp_path, report):
    lines, bad = [], []
    for idx, (group, n, recipe) in enumerate(NORMALIZE_CASES):
        for d in (1, 2):
            inst = generate(group, n, d, recipe, seed=40 + idx)
            code, out = _normalize(tmp_path, f"{group}{n}_{d}", inst.certificate.to_dict(),
                                   inst.cocycle.to_dict(), group)
            if code != EXIT_OK:
                bad.append((group, n, d, f"exit {code}"))
                continue
            rep = out["report"]
            checks = [rep["group_residual"] <= 1e-9, rep["group_samples"] == 100,
                      rep["constancy"]["max_nonzero_mode"] <= 1e-9,
                      rep["conjugation"]["max_residual"] <= 1e-8]
            if group == "SL_R":
                checks.append(rep["trace_B"] <= 1e-9)
            if not all(checks):
                bad.append((group, n, d, rep["group_residual"], rep["constancy"]))
            lines.append(f"{group}({n}) d={d} grp {rep['group_residual']:.1e}")

    # negative controls
    controls = []
    sp = generate("Sp_R", 2, 1, ("nonres",), seed=3)
    job = tmp_path / "sp_real"
    job.mkdir()
    write(job / "cert.json", sp.certificate.to_dict())
    write(job / "coc.json", sp.cocycle.to_dict())
    assert main(["reduce", "--input", str(job / "cert.json"), "--cocycle", str(job / "coc.json"),
                 "--output", str(job / "real.json")]) == EXIT_OK
    real_cert = read(job / "real.json")["certificate"]
    code, _ = _normalize(tmp_path, "neg_frame", perturb_column(real_cert), sp.cocycle.to_dict(), "Sp_R")
    controls.append(("perturbed real frame", code, EXIT_CONSTANCY))

    un = generate("U_n", 2, 1, ("imag", "imag"), seed=3)
    code, _ = _normalize(tmp_path, "neg_unitary", perturb_column(un.certificate.to_dict()),
                         un.cocycle.to_dict(), "U_n")
    controls.append(("perturbed unitary frame", code, EXIT_CONSTANCY))

    coc = sp.cocycle.to_dict()
    coc["B"] = complex_to_json(complex_from_json(coc["B"]) + 0.01 * np.eye(2))
    code, _ = _normalize(tmp_path, "neg_cocycle", sp.certificate.to_dict(), coc, "Sp_R")
    controls.append(("perturbed cocycle", code, EXIT_MEMBERSHIP))

    code, _ = _normalize(tmp_path, "neg_complex", perturb_column(sp.certificate.to_dict()),
                         sp.cocycle.to_dict(), "Sp_R")
    controls.append(("perturbed complex frame", code, EXIT_CONJUGATION))

    wrong = [c for c in controls if c[1] != c[2]]
    ok = not bad and not wrong
    report(2, ok, f"{len(lines)} normalizations, failures {bad}, negative controls "
                  f"{[(c[0], c[1]) for c in controls]}")
    assert not bad
    assert not wrong


def test_criterion_3_suspension_fidelity(report):
    worst = {"verify": 0.0, "periodicity": 0.0, "conjugation": 0.0, "restrict": 0.0}
    for seed in range(20):
        n = 2 + seed % 2
        d = 1 + (seed // 2) % 2
        dc, cert, _ = planted_discrete(seed, n=n, d=d)
        ev = suspend(dc)
        worst["verify"] = max(worst["verify"], verify_suspension(ev, n_max=5))
        lift = lift_reduction(dc, cert, ev)
        worst["periodicity"] = max(worst["periodicity"], lift.periodicity_defect)
        worst["conjugation"] = max(worst["conjugation"], lift.conjugation_defect)
        rc = restrict_to_subtorus(lift)
        assert rc.modulus == cert.modulus
        worst["restrict"] = max(worst["restrict"], rc.residual)
    ok = all(v <= 1e-8 for v in worst.values())
    report(3, ok, "20 suspensions, worst " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_4_resonance_oracle_and_completion(report):
    rng = np.random.default_rng(404)
    box = SearchBox(8, 1e-9)
    mismatches = 0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        N = int(rng.integers(1, 3))
        w = far_from_rationals(rng, d)
        k_star = rng.integers(-8, 9, size=d)
        beta = 2 * np.pi * float(np.dot(k_star, w / N))
        hit = detect_resonance(beta, w, N, box)
        oracle = brute_force_resonance(beta, w / N, 8, 1e-9)
        if hit is None or not oracle or tuple(hit.k) != tuple(oracle[0]) \
                or tuple(hit.k) != tuple(int(x) for x in k_star):
            mismatches += 1
    bad_det = 0
    for _ in range(200):
        dim = int(rng.integers(2, 7))
        while True:
            v = [int(x) for x in rng.integers(-30, 31, size=dim)]
            if np.gcd.reduce(np.abs(v)) == 1:
                break
        M = unimodular_complete(v)
        if cofactor_det(M) != 1 or list(M[0]) != v:
            bad_det += 1
    ok = mismatches == 0 and bad_det == 0
    report(4, ok, f"100 resonances ({mismatches} mismatches), 200 completions ({bad_det} bad)")
    assert ok


def test_criterion_5_fixtures(report):
    dc = mobius_cocycle()
    dec = decompose_real(mobius_complex_certificate(), cocycle=dc.evaluator())
    rep = residual_conjugation(dc.evaluator(), dec.certificate, EvaluationGrid(8, 2, 1),
                               dec.certificate.time_samples)
    V, W = intersection_counterexample()
    _, constant = subbundle_intersection_dim([V], [W], EvaluationGrid(8, 1, 1))
    ok = (dec.modulus == 2 and dec.certificate.frame.real and rep.max_residual <= 1e-8
          and constant is False)
    report(5, ok, f"rotation fixture modulus {dec.modulus}, residual {rep.max_residual:.1e}; "
                  f"intersection dimension constant: {constant}")
    assert ok


def test_criterion_6_numerical_sanity(report, rng):
    M = np.array([[0.5, -2.0], [1.5, -0.3]])
    A = TorusMap.constant(M, 1)
    errs = []
    for h in (1e-2, 5e-3):
        X = integrate_many(A, [np.sqrt(2)], [[0.0]], 1.0, IntegratorSettings(step=h),
                           estimate_error=False).value[0]
        errs.append(np.abs(X - expm(M)).max())
    ratio = errs[0] / errs[1]

    m = random_map(rng, 2, 2, 2, 4, scale=1.0 / 81)
    w = np.array([np.sqrt(2), np.sqrt(3) - 1])
    th = rng.uniform(0, 1, (16, 2))
    h = 1e-5
    fd = (m.evaluate_many(th + h * w) - m.evaluate_many(th - h * w)) / (2 * h)
    fd_err = float(np.abs(fd - m.directional_derivative(w).evaluate_many(th)).max())

    _, cert, A_field = commuting_fixture()
    rel = check_derivative_relation(cert, A_field)
    ok = 12 <= ratio <= 20 and fd_err <= 1e-6 and rel <= 1e-8
    report(6, ok, f"order ratio {ratio:.2f}, finite difference {fd_err:.1e}, "
                  f"derivative relation {rel:.1e}")
    assert ok
