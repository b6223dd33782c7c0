"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``. Every test checks its
bound at full strength and also enforces its wall-clock budget.
"""
import csv
import io
import itertools
import time

import numpy as np
import pytest

from msched import cli, qsim
from msched.baselines import exhaustive_best, greedy_pf, random_policy
from msched.chanmod import (dft_matrix, generate_channel, make_config, select_beams, steering_vector)
from msched.grover import GroverPlan, grover_search, optimal_iterations, success_probability
from msched.harness import parse_config, run_sweep
from msched.qrl import TrainConfig, grover_schedule, train
from msched.ratemod import (PFState, RateReport, candidate_rewards, instantaneous_rates, pf_update,
                            policy_bits, policy_index)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed=None, budget=None):
        if budget is not None:
            ok = ok and elapsed < budget
            detail += f"; {elapsed:.1f}s (budget {budget:g}s)"
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} :: {detail}")
        assert ok, detail
    return emit


def test_criterion_1_grover_closed_form(report):
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    for n in range(2, 11):
        for m in (1, 2, 4):
            marked = list(np.random.default_rng(100 * n + m).choice(1 << n, size=m, replace=False))
            for k in range(3 * optimal_iterations(n, m) + 1):
                p = qsim.probabilities(grover_search(GroverPlan(n, frozenset(map(int, marked)), k)))
                worst = max(worst, abs(p[marked].sum() - success_probability(n, m, k)))
                cases += 1
    elapsed = time.perf_counter() - t0
    report(1, "Grover closed form", worst <= 1e-9, f"{cases} cases, max error {worst:.2e}",
           elapsed, 5)


def test_criterion_2_circuit_identities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    uniform_err = 0.0
    for n in range(1, 13):
        sv = qsim.apply_hadamard_all(qsim.init_zero(n))
        uniform_err = max(uniform_err, np.abs(sv.amplitudes - 1 / np.sqrt(2.0 ** n)).max())
    involution_err = 0.0
    for n in range(1, 11):
        amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
        sv = qsim.StateVector(amps / np.linalg.norm(amps))
        marked = set(rng.choice(1 << n, size=max(1, (1 << n) // 3), replace=False).tolist())
        twice_o = qsim.apply_phase_oracle(qsim.apply_phase_oracle(sv, marked), marked)
        twice_d = qsim.apply_diffusion(qsim.apply_diffusion(sv))
        involution_err = max(involution_err, np.abs(twice_o.amplitudes - sv.amplitudes).max(),
                             np.abs(twice_d.amplitudes - sv.amplitudes).max())
    amps = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    probe = qsim.StateVector(amps / np.linalg.norm(amps))
    exact = 0
    for bits in itertools.product("01", repeat=5):
        pattern = "".join(bits)
        gates = qsim.run_circuit(probe, qsim.oracle_from_pattern(pattern))
        diag = qsim.apply_phase_oracle(probe, {int(pattern, 2)})
        exact += np.array_equal(gates.amplitudes, diag.amplitudes)
    elapsed = time.perf_counter() - t0
    ok = uniform_err <= 1e-12 and involution_err <= 1e-10 and exact == 32
    report(2, "circuit identities", ok,
           f"uniform err {uniform_err:.1e}, involution err {involution_err:.1e}, "
           f"pattern oracles exact {exact}/32", elapsed, 5)


def test_criterion_3_optimality_recovery(report):
    t0 = time.perf_counter()
    T, slots = 8, 100
    cfg = make_config(16, T, 20.0, seed=7)
    rng = np.random.default_rng(3)
    pf = PFState.initial(T)
    hits = near = 0
    for s in range(slots):
        ch = generate_channel(cfg, s)
        beams = select_beams(ch)
        theta, info = grover_schedule(ch, beams, pf, rng)  # tau at the slot max, K = k_opt
        best_theta, best = exhaustive_best(ch, beams, pf)
        hits += np.array_equal(theta, best_theta)
        near += info["reward"] >= 0.95 * best
        pf = pf_update(pf, instantaneous_rates(ch, beams, theta), theta)
    elapsed = time.perf_counter() - t0
    report(3, "optimality recovery", hits >= 0.9 * slots and near == slots,
           f"exact optimum {hits}/{slots}, within 95% {near}/{slots}", elapsed, 30)


def _moving_average(x, w=50):
    return np.convolve(x, np.ones(w) / w, mode="valid")


def test_criterion_4_convergence(report):
    t0 = time.perf_counter()
    seeds = 20
    growth = stable = 0
    for seed in range(seeds):
        cfg = TrainConfig(channel=make_config(16, 6, 20.0, seed=seed), seed=seed)
        assert cfg.epochs == 500
        _, log = train(cfg)
        v = log.validation_rewards()
        ma = _moving_average(v)
        tail = v[-100:]
        growth += ma[-1] >= ma[0]
        stable += tail.std() <= 0.15 * tail.mean()
    elapsed = time.perf_counter() - t0
    ok = growth >= 0.95 * seeds and stable >= 0.95 * seeds
    report(4, "convergence", ok,
           f"end MA >= start MA in {growth}/{seeds} seeds, last-100 std <= 15% of mean in "
           f"{stable}/{seeds}", elapsed, 120)


def _by_method(rows):
    out = {}
    for r in rows:
        out.setdefault(r.method, []).append(r.mean_sum_rate)
    return {k: np.array(v) for k, v in out.items()}


def test_criterion_5_trends(report):
    t0 = time.perf_counter()
    sweeps = {
        "antennas (T=6, 20 dB)": ("antennas=8,16,32,64 users=6 snr_db=20", True),
        "snr (T=6, A=16)": ("axis=snr users=6 antennas=16", True),
        "users (A=32, 20 dB)": ("axis=users antennas=32 snr_db=20", False),
    }
    problems, notes = [], []
    for name, (text, monotone) in sweeps.items():
        spec = parse_config(text + " realizations=200 methods=qrl,greedy,random")
        rates = _by_method(run_sweep(spec))
        q = rates["qrl"]
        if monotone and np.any(np.diff(q) < 0):
            problems.append(f"{name}: qrl not non-decreasing {np.round(q, 3).tolist()}")
        if np.any(q < rates["random"]):
            problems.append(f"{name}: qrl below random")
        if np.any(q < rates["greedy"]):
            problems.append(f"{name}: qrl below greedy")
        notes.append(f"{name} qrl {np.round(q, 2).tolist()}")
    elapsed = time.perf_counter() - t0
    report(5, "trend reproduction", not problems, "; ".join(problems or notes), elapsed, 300)


def test_criterion_6_baseline_ordering(report):
    t0 = time.perf_counter()
    configs = [(2, 8, 10.0), (4, 16, 0.0), (6, 16, 20.0), (8, 32, 20.0), (10, 32, 25.0), (6, 8, 5.0)]
    slots = 200
    problems, notes = [], []
    for T, A, snr in configs:
        cfg = make_config(A, T, snr, seed=T * 1000 + A)
        rng = np.random.default_rng(T)
        pf = PFState.initial(T)
        values = {"exhaustive": [], "greedy": [], "random": []}
        for s in range(slots):
            ch = generate_channel(cfg, s)
            beams = select_beams(ch)
            rewards = candidate_rewards(ch, beams, pf)
            best_theta, best = exhaustive_best(ch, beams, pf)
            values["exhaustive"].append(best)
            for name, theta in (("greedy", greedy_pf(ch, beams, pf)), ("random", random_policy(T, rng))):
                values[name].append(rewards[policy_index(theta)])
            # all three methods are scored against a common PF history
            pf = pf_update(pf, instantaneous_rates(ch, beams, best_theta), best_theta)
        m = {k: float(np.mean(v)) for k, v in values.items()}
        if not m["exhaustive"] >= m["greedy"] >= m["random"]:
            problems.append(f"T={T} A={A} {snr:g}dB: {m}")
        notes.append(f"T={T},A={A},{snr:g}dB {m['exhaustive']:.3f}>={m['greedy']:.3f}>={m['random']:.3f}")
    elapsed = time.perf_counter() - t0
    report(6, "baseline ordering", not problems, "; ".join(problems or notes), elapsed, 60)


def test_criterion_7_determinism(report, tmp_path):
    cases = {
        "converge": "epochs=40 batch_size=4 users=4 antennas=8 validation_slots=8",
        "sweep": "snr_db=0,10,20 realizations=6 validation_slots=6",
    }
    problems = []
    for command, text in cases.items():
        cfg = tmp_path / f"{command}.cfg"
        cfg.write_text(text)
        outputs = []
        for run in range(2):
            out = tmp_path / f"{command}_{run}.csv"
            code = cli.main([command, "--config", str(cfg), "--out", str(out), "--seed", "2024"])
            if code != 0:
                problems.append(f"{command} exited {code}")
            outputs.append((out.read_bytes(), out.with_suffix(".json").read_bytes()))
        if outputs[0] != outputs[1]:
            problems.append(f"{command} outputs differ")
        rows = list(csv.DictReader(io.StringIO(outputs[0][0].decode())))
        if not rows:
            problems.append(f"{command} wrote no rows")
    report(7, "determinism", not problems,
           "; ".join(problems) or "converge and sweep CSV+JSON byte-identical across reruns")


def test_criterion_8_model_sanity(report):
    t0 = time.perf_counter()
    checks = {}
    checks["DFT unitary"] = max(np.abs(dft_matrix(A).conj().T @ dft_matrix(A) - np.eye(A)).max()
                                for A in (1, 2, 4, 8, 16, 32, 64)) <= 1e-12
    parseval = []
    for seed in range(50):
        ch = generate_channel(make_config(16, 4, seed=seed), seed)
        energy = np.abs(dft_matrix(16).conj().T @ ch.matrix) ** 2
        norms = np.linalg.norm(ch.matrix, axis=0) ** 2
        parseval.append(np.abs(energy.sum(axis=0) - norms).max() / norms.max())
    checks["Parseval"] = max(parseval) <= 1e-10
    A = 64
    cfg = make_config(A, 3, rician_k=1e6, seed=11)
    los = np.sqrt(A) * np.stack([steering_vector(a, A) for a in cfg.user_angles], axis=1)
    rel = [np.linalg.norm(generate_channel(cfg, s).matrix - los, axis=0) / np.linalg.norm(los, axis=0)
           for s in range(1000)]
    checks["Rician LoS limit"] = float(np.mean(rel)) <= 1e-3
    cfg = make_config(16, 1, rician_k=0.0, seed=2)
    power = np.mean([np.linalg.norm(generate_channel(cfg, s).matrix) ** 2 for s in range(10_000)])
    checks["NLoS power"] = abs(power - 16) <= 0.05 * 16
    mono = True
    for seed in range(30):
        base = make_config(16, 5, 15.0, seed=seed)
        ch = generate_channel(base, 0)
        beams = select_beams(ch)
        worse = type(ch)(matrix=ch.matrix, config=make_config(16, 5, 5.0, seed=seed))
        theta = policy_bits(1 + seed % 31, 5)
        r1 = instantaneous_rates(ch, beams, theta).per_user_rates
        r2 = instantaneous_rates(worse, beams, theta).per_user_rates
        mono &= bool(np.all(r2 <= r1 + 1e-12) and np.all(r1 >= 0))
    checks["rate monotone in noise"] = mono
    pf = pf_update(PFState(np.array([2.0, 2.0]), forgetting=0.1),
                   RateReport(np.array([4.0, 3.0]), 7.0), [1, 0])
    checks["PF update"] = abs(pf.avg_rates[0] - 2.2) <= 1e-12 and pf.avg_rates[1] == 2.0
    elapsed = time.perf_counter() - t0
    failed = [k for k, v in checks.items() if not v]
    report(8, "model sanity", not failed,
           f"failed: {failed}" if failed else f"{len(checks)} invariants hold", elapsed, 10)
