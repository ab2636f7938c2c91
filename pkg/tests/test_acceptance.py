"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line with the measured
numbers; the lines are also collected into the pytest terminal summary.
Run standalone with ``python tests/test_acceptance.py``.
"""

import copy
import time
import warnings

import numpy as np
import pytest

from twinforge import cofactor, field, habit, hull, lin3, mask, twin
from twinforge.errors import MuEqualsOne, ParseError, TheoremViolation
from twinforge.field import GradientField
from twinforge.profiles import Profile

from corpus import CORPUS, small_field

TOL = {
    "twin_residual": 1e-9,
    "compound_identity": 1e-9,
    "twin_runtime_s": 1.0,
    "cc1": 1e-12,
    "cc2": 1e-12,
    "cc3_value": 2.96e-4,
    "cc3": 1e-6,
    "scan_points": 21,
    "scan_residual": 1e-7,
    "sigma_mid_deviation": 0.02,
    "sigma_mid": 1e-9,
    "sistemone": 1e-10,
    "a_norm": 0.233333,
    "n3_sq": 0.400468,
    "closed_form": 1e-6,
    "pairs": 100,
    "quadratic": 1e-9,
    "symmetry": 1e-9,
    "c1_cc2": 1e-8,
    "cof": 1e-12,
    "closure": 1e-10,
    "curve_rel": 1e-8,
    "gamma_cells": 1.0,
    "halving": 0.5,
    "halving_band": 0.2,
    "pipeline_runtime_s": 60.0,
    "counterexample_ratio": 100.0,
    "corpus_size": 20,
}

RESULTS = {}


def record(number, title, checks):
    """Print and store one line; ``checks`` is a list of (label, value, ok)."""
    ok = all(c[2] for c in checks)
    detail = "; ".join(f"{label}={value}" for label, value, _ in checks)
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} ({detail})"
    RESULTS[number] = line
    print(line)
    failed = [label for label, _, good in checks if not good]
    assert ok, f"criterion {number} failed: {', '.join(failed)}"


def g(x):
    return format(float(x), ".3g")


# -- 1 ---------------------------------------------------------------------------

def test_criterion_1_twin_round_trip():
    start = time.perf_counter()
    U1, U2 = twin.compound_pair(0.9, 1.1)
    res = twin.analyze_pair(U1, U2)
    elapsed = time.perf_counter() - start
    axes_ok = len(res.axes) == 2 and all(
        any(abs(abs(a @ e) - 1.0) <= 1e-12 for a in res.axes) for e in np.eye(3)[:2]
    )
    worst = max(lin3.norm(s.R_hat @ U2 - U1 - np.outer(s.b, s.m)) for s in res.systems)
    bI_e1, _ = twin.twin_solutions(U1, np.eye(3)[0])
    _, bII_e2 = twin.twin_solutions(U1, np.eye(3)[1])
    identity = lin3.norm(np.outer(bI_e1.b, bI_e1.m) - np.outer(bII_e2.b, bII_e2.m))
    record(1, "twin round trip", [
        ("axes={e1,e2}", axes_ok, axes_ok),
        ("max_twin_residual", g(worst), worst <= TOL["twin_residual"]),
        ("compound_identity", g(identity), identity <= TOL["compound_identity"]),
        ("runtime_s", g(elapsed), elapsed < TOL["twin_runtime_s"]),
    ])


# -- 2 ---------------------------------------------------------------------------

def test_criterion_2_cofactor_values():
    U1, U2 = twin.compound_pair(0.9, 1.1)
    res = twin.analyze_pair(U1, U2)
    checks = []
    for k, s in enumerate(res.systems):
        r = cofactor.check_cofactor(U1, s.b, s.m)
        # independent direct evaluation of the third condition
        U2sq = U1 @ U1
        direct = np.trace(U2sq) - np.linalg.det(U2sq) - 0.25 * (s.b @ s.b) * (s.m @ s.m) - 2.0
        checks += [
            (f"cc1[{k}]", g(r.cc1_residual), r.cc1_residual <= TOL["cc1"]),
            (f"cc2[{k}]", g(r.cc2_value), abs(r.cc2_value) <= TOL["cc2"]),
            (f"cc3[{k}]", g(r.cc3_value), abs(r.cc3_value - TOL["cc3_value"]) <= TOL["cc3"] and abs(r.cc3_value - direct) <= 1e-12),
        ]
    record(2, "cofactor evaluation", checks)


# -- 3 ---------------------------------------------------------------------------

def test_criterion_3_habit_scan():
    U1, U2 = twin.compound_pair(0.9, 1.1)
    s = twin.analyze_pair(U1, U2).systems[0]
    rows = habit.lambda_scan(U1, s.b, s.m, TOL["scan_points"])
    solvable = sum(r.solvable for r in rows)
    worst = max(r.best_residual for r in rows)
    V = np.diag([0.9, 1.02, 1.1])
    sv, _ = twin.twin_solutions(V, lin3.unit([1.0, 1.0, 0.0]))
    bad = habit.lambda_scan(V, sv.b, sv.m, 5)[0]
    dev = abs(bad.sigma_mid - 1.0)
    record(3, "habit solvability scan", [
        ("solvable", f"{solvable}/{len(rows)}", solvable == len(rows) == TOL["scan_points"]),
        ("max_residual", g(worst), worst <= TOL["scan_residual"]),
        ("violator_lambda0_solvable", bad.solvable, not bad.solvable),
        ("sigma_mid_deviation", g(dev), abs(dev - TOL["sigma_mid_deviation"]) <= TOL["sigma_mid"]),
    ])


# -- 4 ---------------------------------------------------------------------------

def test_criterion_4_rigidity_closed_forms():
    sol = hull.solve_sistemone(1.02, 0.9)
    worst = max(float(np.abs(sol.residuals).max()), abs(sol.constraint_residual), sol.det_residual)
    a_norm = float(np.linalg.norm(sol.a))
    n3_sq = float(sol.n[2] ** 2)
    record(4, "rigidity closed forms", [
        ("max_equation_residual", g(worst), worst <= TOL["sistemone"]),
        ("|a|", f"{a_norm:.6f}", abs(a_norm - TOL["a_norm"]) <= TOL["closed_form"]),
        ("n3^2", f"{n3_sq:.6f}", abs(n3_sq - TOL["n3_sq"]) <= TOL["closed_form"]),
    ])


# -- 5 ---------------------------------------------------------------------------

def direct_f(U, S, mu):
    F = U + mu * S
    return np.linalg.det(F.T @ F - np.eye(3))


def test_criterion_5_two_well_polynomial():
    rng = np.random.default_rng(5)
    quad = sym = c1 = 0.0
    grid = np.linspace(0.0, 1.0, 5)
    for _ in range(TOL["pairs"]):
        U = lin3.random_spd(rng)
        s, _ = twin.twin_solutions(U, lin3.unit(rng.normal(size=3)))
        S = np.outer(s.b, s.m)
        poly = hull.two_well_polynomial(U, s.b, s.m)
        quad = max(quad, poly.quadratic_deviation)
        sym = max(sym, max(abs(direct_f(U, S, m) - direct_f(U, S, 1.0 - m)) for m in grid))
        c1 = max(c1, abs(poly.c1 - 2.0 * cofactor.check_cofactor(U, s.b, s.m).cc2_value))
    record(5, "two-well polynomial", [
        ("quadratic_deviation", g(quad), quad <= TOL["quadratic"]),
        ("symmetry_residual", g(sym), sym <= TOL["symmetry"]),
        ("|c1-2cc2|", g(c1), c1 <= TOL["c1_cc2"]),
    ])


# -- 6 ---------------------------------------------------------------------------

def gamma_distance_cells(gen, family):
    truth = copy.deepcopy(gen.truth)
    G = truth.potential(family.displacement.x.reshape(-1, 3))
    truth.set_range(G.min() - 0.1, G.max() + 0.1)
    worst = 0.0
    for surf in family.gamma:
        if len(surf):
            level = truth.level_of(family.curve.point(surf.t))[0]
            worst = max(worst, float(truth.level_distance(surf.vertices, level).max()))
    return worst / float(gen.field.spacing.max())


def pipeline(fam, n):
    gen = mask.gen_typeI_curved(fam, Profile.sine(), (n, n, n))
    family = mask.reconstruct_interfaces(gen.field)
    recs = mask.interface_velocity(family)
    return gen, family, recs


def test_criterion_6_generator_analyzer_closure(family_I):
    start = time.perf_counter()
    gen, family, recs = pipeline(family_I, 64)
    elapsed = time.perf_counter() - start
    _, _, recs32 = pipeline(family_I, 32)
    cof = float(np.nanmax(field.analyze_cells(gen.field).cof_deviation))
    closure = family.displacement.closure_residual
    curve_rel = family.curve.residual / family.curve.diameter
    gamma = gamma_distance_cells(gen, family)
    nonempty = sum(len(s) > 0 for s in family.gamma)
    # the algebraic speed satisfies the identity to round-off at any resolution;
    # the level-set speed 1/|∇t| carries the discretisation error that must halve
    kin32 = max(float(r.residual_kinematic.max()) for r in recs32)
    kin64 = max(float(r.residual_kinematic.max()) for r in recs)
    ratio = kin64 / kin32
    alg = max(r.consistency_residual for r in recs)
    record(6, "generator/analyzer closure at 64^3", [
        ("max_cof", g(cof), cof <= TOL["cof"]),
        ("closure", g(closure), closure <= TOL["closure"]),
        ("curve_residual/diameter", g(curve_rel), curve_rel <= TOL["curve_rel"]),
        ("gamma_distance_cells", g(gamma), gamma <= TOL["gamma_cells"] and nonempty == 64),
        ("kinematic_residual_ratio", g(ratio), abs(ratio - TOL["halving"]) <= TOL["halving_band"] * TOL["halving"]),
        ("algebraic_residual", g(alg), alg <= 1e-9),
        ("runtime_s", g(elapsed), elapsed < TOL["pipeline_runtime_s"]),
    ])


# -- 7 ---------------------------------------------------------------------------

def test_criterion_7_divergence_identities(family_I):
    sizes = (16, 32, 64)
    l2 = [
        field.discrete_compatibility(mask.gen_typeI_curved(family_I, Profile.sine(), (n, n, n)).field).summary()["div_na_l2"]
        for n in sizes
    ]
    h = [1.0 / n for n in sizes]
    C = l2[0] / h[0]
    bounded = all(v <= C * hh * (1 + 1e-9) for v, hh in zip(l2, h))
    orders = [float(np.log2(l2[i] / l2[i + 1])) for i in range(2)]
    cx = mask.gen_opposing_interfaces((16, 4, 4))
    res = field.discrete_compatibility(cx.field, cx.a, cx.n)
    div_a = np.abs(np.nan_to_num(res.div_a))
    k = int(np.floor(cx.plane / cx.field.spacing[0]))
    plane = float(div_a[k - 1:k + 1].max())
    interior = float(max(np.abs(np.nan_to_num(res.div_na)).max(), div_a[:k - 1].max(), div_a[k + 1:].max()))
    ratio = plane / interior if interior > 0 else np.inf
    record(7, "divergence identities", [
        ("div_na_l2", "/".join(g(v) for v in l2), bounded),
        ("observed_orders", "/".join(f"{o:.2f}" for o in orders), min(orders) >= 1.0 - 0.2),
        ("plane_to_interior", g(ratio), ratio > TOL["counterexample_ratio"]),
    ])


# -- 8 ---------------------------------------------------------------------------

def test_criterion_8_rigidity_detector():
    wells = hull.compound_wells(1.02, 0.9, 0.8)
    F = np.empty((8, 8, 8, 3, 3))
    F[:4] = hull.solve_sistemone(1.02, 0.9, 0.0).gradient
    F[4:] = hull.solve_sistemone(1.02, 0.9, 1.0).gradient
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = mask.rigidity_check(GradientField(F, np.full(3, 0.125), np.zeros(3)), wells)
    flagged = rep.theorem_violation and any(issubclass(w.category, TheoremViolation) for w in caught)
    gen = mask.gen_mu1_compound(Profile.sine(0.0, 0.1, 1.0), (16, 4, 4))
    mu1 = hull.CompoundWellSet.from_wells(mask.mu1_wells())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            mask.rigidity_check(gen.field, mu1)
            path = "none"
        except MuEqualsOne:
            path = "MuEqualsOne"
    quiet = not any(issubclass(w.category, TheoremViolation) for w in caught)
    record(8, "rigidity theorem as detector", [
        ("mu!=1_violation_flagged", flagged, flagged),
        ("mu=1_path", path, path == "MuEqualsOne" and quiet),
        ("mu=1_hull_violations", gen.truth.params["hull_violations"], gen.truth.params["hull_violations"] == 0),
    ])


# -- 9 ---------------------------------------------------------------------------

def test_criterion_9_field_format():
    fld = small_field(seed=9)
    identical = True
    for write, read in ((field.field_to_csv, field.parse_field_csv), (field.field_to_json, field.parse_field_json)):
        text = write(fld)
        identical &= write(read(text)) == text
    with_lines = 0
    for name, (text, _) in CORPUS.items():
        parse = field.parse_field_json if name.startswith("json") else field.parse_field_csv
        try:
            parse(text)
        except ParseError as exc:
            with_lines += exc.line is not None
        except Exception:
            pass
    record(9, "field format", [
        ("byte_identical", identical, identical),
        ("corpus_parse_errors_with_line", f"{with_lines}/{len(CORPUS)}", with_lines == len(CORPUS) == TOL["corpus_size"]),
    ])


if __name__ == "__main__":
    import sys

    U1, _, s = cofactor.supercompatible_example("I")
    fam = cofactor.build_typeI_family(U1, s.b, s.m)
    tests = [
        test_criterion_1_twin_round_trip,
        test_criterion_2_cofactor_values,
        test_criterion_3_habit_scan,
        test_criterion_4_rigidity_closed_forms,
        test_criterion_5_two_well_polynomial,
        lambda: test_criterion_6_generator_analyzer_closure(fam),
        lambda: test_criterion_7_divergence_identities(fam),
        test_criterion_8_rigidity_detector,
        test_criterion_9_field_format,
    ]
    failures = 0
    for t in tests:
        try:
            t()
        except AssertionError:
            failures += 1
    sys.exit(1 if failures else 0)
