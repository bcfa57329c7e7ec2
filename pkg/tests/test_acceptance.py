"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -v -s``) or directly
(``python3 tests/test_acceptance.py``) for the summary lines alone.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from fopid_avr.avr import SimProtocol, simulate_tracking
from fopid_avr.cli import robustness_grid
from fopid_avr.folib import ControllerGenes, gene_bounds, gl_differint, oustaloup_filter
from fopid_avr.lti import (
    TransferFunction,
    simulate,
    step_metrics,
    tf_to_statespace,
    time_grid,
)
from fopid_avr.moea import (
    ChaoticRngState,
    NsgaConfig,
    dominates,
    hypervolume,
    logistic_next,
    non_dominated_sort,
    nsga2_run,
)
from fopid_avr.objectives import CaseEvaluator, EvalSettings, evaluate
from fopid_avr.tables import load_table, table_row

DESK = NsgaConfig(pop_size=40, max_generations=80)


def _report(number: int, ok: bool, detail: str, elapsed: float) -> None:
    print(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail} [{elapsed:.2f} s]")


def _fraction_dominated(front, by) -> float:
    hit = sum(any(dominates(b, f) or np.array_equal(b, f) for b in by) for f in front)
    return hit / len(front)


def _desk_front(case: str, mode: str) -> np.ndarray:
    lo, hi = gene_bounds(mode)
    res = nsga2_run(CaseEvaluator(EvalSettings(case), mode), lo, hi, DESK, ChaoticRngState())
    return res.front_objectives


# --------------------------------------------------------------------------


def criterion_1():
    w = np.logspace(-1, 1, 81)
    worst = []
    for alpha in (0.3, 0.5, 0.7, 1.0, 1.3):
        h = oustaloup_filter(alpha).freqresp(w)
        ideal = (1j * w) ** alpha
        mag = np.max(np.abs(20 * np.log10(np.abs(h) / np.abs(ideal))))
        ph = np.max(np.abs(np.degrees(np.angle(h) - np.angle(ideal))))
        worst.append((alpha, mag, ph))
    ok = all(m < 2.0 and p < 5.0 for _, m, p in worst)
    detail = "Oustaloup fidelity " + ", ".join(f"a={a}: {m:.2f} dB/{p:.2f} deg" for a, m, p in worst)
    return ok, detail


def criterion_2():
    dt = 1e-3
    t = time_grid(5.0, dt)
    step = np.ones_like(t)
    y = simulate(tf_to_statespace(oustaloup_filter(0.5)), step, dt)
    gl = gl_differint(step, 0.5, dt)
    window = (t >= 0.5) & (t <= 5.0)
    rel = np.max(np.abs(y[window] - gl[window]) / np.abs(gl[window]))
    return rel < 0.05, f"filter step vs GL max relative error {rel:.4f} (limit 0.05)"


def criterion_3():
    checks = []
    tr = simulate_tracking(ControllerGenes(1.0, 0.0, 0.0), proto=SimProtocol(20.0))
    dc = step_metrics(tr).steady_state_value
    checks.append(("DC gain", abs(dc - 10 / 11) <= 1e-3, f"{dc:.6f}"))

    ss = tf_to_statespace(TransferFunction([1.0], [1.0, 1.0]))
    errs = []
    for h in (0.2, 0.1, 0.05):
        tt = time_grid(5.0, h)
        errs.append(np.max(np.abs(simulate(ss, np.ones_like(tt), h) - (1 - np.exp(-tt)))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    checks.append(("RK4 order", all(3.8 < p < 4.2 for p in orders), "/".join(f"{p:.2f}" for p in orders)))

    dt = 1e-3
    ramp = time_grid(1.0, dt)
    half = gl_differint(ramp, 0.5, dt)[-1]
    checks.append(("D^0.5 t at 1", abs(half - 1.1284) / 1.1284 < 0.01, f"{half:.5f}"))
    ok = all(c[1] for c in checks)
    return ok, "; ".join(f"{n} {v} {'ok' if good else 'bad'}" for n, good, v in checks)


def criterion_4():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(200):
        n, m = int(rng.integers(1, 51)), int(rng.choice([2, 3]))
        objs = rng.integers(0, 8, size=(n, m)).astype(float)
        fronts = [f.tolist() for f in non_dominated_sort(objs)]
        remaining, oracle = set(range(n)), []
        while remaining:
            front = sorted(
                i for i in remaining if not any(dominates(objs[j], objs[i]) for j in remaining if j != i)
            )
            oracle.append(front)
            remaining -= set(front)
        mismatches += fronts != oracle
    return mismatches == 0, f"sort vs brute force, {mismatches}/200 populations differ"


def criterion_5(tmp_path):
    from fopid_avr.cli import main

    x1, s = logistic_next(ChaoticRngState())
    x2, _ = logistic_next(s)
    ok1 = abs(x1 - 0.6464508) <= 1e-6
    ok2 = abs(x2 - 0.9141910) <= 1e-6
    a, b = tmp_path / "a", tmp_path / "b"
    main(["optimize", "--case", "II", "--mode", "fopid", "--pop", "10", "--max-gens", "3", "--out-dir", str(a)])
    main(["optimize", "--manifest", str(a / "manifest.json"), "--out-dir", str(b)])
    same = (a / "front.csv").read_bytes() == (b / "front.csv").read_bytes()
    detail = (
        f"x1={x1:.7f} ({'ok' if ok1 else 'bad'}), x2={x2:.7f} vs 0.9141910 "
        f"({'ok' if ok2 else 'bad'}), manifest rerun {'identical' if same else 'differs'}"
    )
    return ok1 and ok2 and same, detail


def criterion_6():
    s1, s2 = EvalSettings("I"), EvalSettings("II")
    groups = [(1, s1, ("A1", "B1", "C1")), (1, s1, ("A2", "B2", "C2")),
              (2, s2, ("A3", "B3", "C3")), (2, s2, ("A4", "B4", "C4"))]
    parts, ok = [], True
    for table, settings, labels in groups:
        vals = np.array([evaluate(table_row(table, lab).genes, settings).values for lab in labels])
        up = bool(np.all(np.diff(vals[:, 0]) > 0))
        down = bool(np.all(np.diff(vals[:, 1]) < 0))
        ok &= up and down
        second = "J2" if table == 1 else "J3"
        parts.append(f"{labels[0]}-{labels[2]}: J1 {'up' if up else 'NOT up'}, {second} {'down' if down else 'NOT down'}")
    return ok, "table orderings " + "; ".join(parts)


def criterion_7():
    pid, fopid = _desk_front("II", "pid"), _desk_front("II", "fopid")
    frac = _fraction_dominated(pid, fopid)
    return frac >= 0.7, f"case II: {frac:.0%} of {len(pid)} PID front points weakly dominated by FOPID (need 70%)"


def criterion_8():
    pid, fopid = _desk_front("I", "pid"), _desk_front("I", "fopid")
    frac = _fraction_dominated(fopid, pid)
    ref = 1.1 * np.vstack([pid, fopid]).max(axis=0)
    hv_pid, hv_fo = hypervolume(pid, ref), hypervolume(fopid, ref)
    ok = frac >= 0.5 or hv_pid > hv_fo
    return ok, (
        f"case I: {frac:.0%} of FOPID front dominated by PID; "
        f"HV PID {hv_pid:.6g} vs FOPID {hv_fo:.6g}"
    )


def criterion_9():
    bad, spread = [], {}
    for row in load_table(2):
        cells = list(robustness_grid(row.genes))
        bad += [(row.label, kg, tg) for kg, tg, _, stable in cells if not stable]
        if row.label == "B3":
            ts = [m.settling_time_2pct for *_, m, _ in cells if m is not None]
            nominal = step_metrics(simulate_tracking(row.genes, proto=SimProtocol(20.0))).settling_time_2pct
            spread["B3"] = (max(ts) - min(ts)) / nominal
    detail = f"{96 - len(bad)}/96 cells stable; B3 settling spread {spread['B3']:.2f}x nominal (diagnostic)"
    return not bad, detail


def criterion_10():
    cfg = NsgaConfig(pop_size=40, max_generations=100)
    res = nsga2_run(lambda x: np.array([x[0] ** 2, (x[0] - 2) ** 2]), [0.0], [100.0], cfg, ChaoticRngState())
    x = np.sort(res.front_genes[:, 0])
    gap = float(np.max(np.diff(np.concatenate([[0.0], x, [2.0]]))))
    inside = bool(np.all((x >= -1e-9) & (x <= 2 + 1e-9)))
    return gap < 0.3 and inside, f"bi-quadratic front {x.size} points in [{x[0]:.3f}, {x[-1]:.3f}], max gap {gap:.3f}"


CRITERIA = {
    1: (criterion_1, 1.0),
    2: (criterion_2, 10.0),
    3: (criterion_3, 10.0),
    4: (criterion_4, 10.0),
    5: (criterion_5, 60.0),
    6: (criterion_6, 60.0),
    7: (criterion_7, 600.0),
    8: (criterion_8, 600.0),
    9: (criterion_9, 120.0),
    10: (criterion_10, 30.0),
}


def _run(number, *args):
    fn, budget = CRITERIA[number]
    start = time.perf_counter()
    ok, detail = fn(*args)
    elapsed = time.perf_counter() - start
    if elapsed > budget:
        detail += f"; over runtime budget {budget:g} s"
        ok = False
    _report(number, ok, detail, elapsed)
    return ok, detail


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys, tmp_path):
    args = (tmp_path,) if number == 5 else ()
    with capsys.disabled():
        print()
        ok, detail = _run(number, *args)
    assert ok, detail


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    results = []
    for number in sorted(CRITERIA):
        with tempfile.TemporaryDirectory() as tmp:
            args = (Path(tmp),) if number == 5 else ()
            results.append(_run(number, *args)[0])
    print(f"{sum(results)}/{len(results)} criteria pass")
