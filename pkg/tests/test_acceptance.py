"""Acceptance criteria 1-12.

Each test records one PASS/FAIL line; the lines are printed as they happen
(visible with ``-s``) and again as a block at the end of the pytest run.
Run just this file with ``pytest tests/test_acceptance.py -v``.
"""

import time

import numpy as np
import pytest

from semlink import dppo, phy
from semlink.alloc import allocate_subcarriers
from semlink.dppo import (STATE_DIM, ActionSpace, DppoHyper, Trajectory, actor_forward, clipped_surrogate,
                          finish_trajectory, init_policy, masked_log_softmax, total_loss)
from semlink.harness import cli
from semlink.harness.config import make_config
from semlink.harness.experiment import load_artifacts, run_sweep, compare_allocators, train_policy
from semlink.quant import DitherSource, QuantizerSpec, dithered_quantize, uniform_quantize
from semlink.semcodec import _head_loss_and_grads, grad_logits_wrt_features, init_codec, task_logits

RESULTS = {}


def record(n, ok, detail):
    line = f"criterion {n:>3}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def rel_err(a, b, floor=1e-6):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


# --------------------------------------------------------------- 1 quantizer

def test_c01_quantizer():
    t = time.time()
    s2, s1 = QuantizerSpec(2), QuantizerSpec(1)
    worked = (uniform_quantize(0.3, s2) == 0.25 and uniform_quantize(1.5, s2) == 0.75
              and uniform_quantize(-0.4, s1) == -0.5)
    s = QuantizerSpec(4)
    n, y = 100_000, 0.37
    _, v = dithered_quantize(np.full(n, y), s, DitherSource(11, s))
    bias = abs(v.mean() - y)
    bound = 3 * s.step / np.sqrt(12 * n) + 0.005 * s.step
    dt = time.time() - t
    record(1, worked and bias <= bound and dt < 2,
           f"worked examples exact={worked}; |mean-y|={bias:.2e} <= {bound:.2e}; {dt:.2f}s")


# ---------------------------------------------------------- 2 OFDM loopback

def test_c02_ofdm_loopback():
    t = time.time()
    cfg = phy.OfdmConfig()
    rng = np.random.default_rng(2)
    n_sym = -(-10_000 // cfg.n_data)
    bits = rng.integers(0, 2, 6 * n_sym * cfg.n_data)
    g = phy.qam64_modulate(bits).reshape(n_sym, cfg.n_data)
    tx = phy.ofdm_modulate(g, cfg).ravel()
    rx = phy.apply_channel(tx, phy.ChannelRealization.identity(cfg.n_sub), phy.NoiseConfig())
    data, _ = phy.ofdm_demodulate(rx.reshape(n_sym, -1), cfg)
    errs = int(np.sum(phy.qam64_demodulate(data) != bits))
    max_err = float(np.max(np.abs(data - g)))
    dt = time.time() - t
    record(2, errs == 0 and max_err < 1e-9 and dt < 5,
           f"{g.size} symbols, bit errors {errs}, max symbol error {max_err:.1e}; {dt:.2f}s")


# ------------------------------------------------------------ 3 ISI immunity

def test_c03_isi_immunity():
    cfg = phy.OfdmConfig()
    rng = np.random.default_rng(3)
    wrong = total = 0
    for seed in range(4):
        ch = phy.make_sui5(seed, cfg)
        n_sym = 10
        g = phy.qam64_modulate(rng.integers(0, 2, 6 * n_sym * cfg.n_data)).reshape(n_sym, -1)
        rx = phy.apply_channel(phy.ofdm_modulate(g, cfg).ravel(), ch, phy.NoiseConfig())
        data, _ = phy.ofdm_demodulate(rx.reshape(n_sym, -1), cfg)
        eq = phy.equalize(data, ch.freq_response[cfg.data_index])
        dec = phy.qam64_modulate(phy.qam64_demodulate(eq)).reshape(g.shape)
        wrong += int(np.sum(np.abs(dec - g) > 1e-9))
        total += g.size
    record(3, wrong == 0 and total >= 10_000, f"SUI-5 noiseless, known CSI: {wrong}/{total} symbol errors")


# ------------------------------------------------- 4 channel-estimation trend

@pytest.mark.parametrize("estimator", ["ls_interp", "mmse"])
def test_c04_pilot_trend(estimator):
    t = time.time()
    cfg = make_config({"C": 16, "B": 48, "trials": 200, "axis": "n_pilots", "values": (4, 8, 16, 32),
                       "estimator": estimator, "allocators": ["eam"]})
    _, res = run_sweep(cfg)
    mse = [np.array([r.chest_mse for r in res[(p, "eam")]]) for p in cfg.values]
    means = [m.mean() for m in mse]
    se = [m.std() / np.sqrt(m.size) for m in mse]
    drops_ok = all(means[k] - means[k + 1] > np.hypot(se[k], se[k + 1]) for k in range(3))
    dt = time.time() - t
    record(f"4{estimator[0]}", drops_ok and dt < 60,
           f"{estimator} MSE over pilots {cfg.values}: " + ", ".join(f"{m:.2e}" for m in means)
           + f"; {dt:.1f}s")


# ----------------------------------------------- 5 greedy matching optimality

def test_c05_greedy_matching():
    import itertools
    rng = np.random.default_rng(5)
    bad = 0
    for _ in range(100):
        C = int(rng.integers(2, 8))
        w = rng.dirichlet(np.ones(C))
        gains = rng.rayleigh(size=int(rng.integers(C, 9)))
        greedy = float(np.sum(w * gains[allocate_subcarriers(w, gains).rho]))
        best = max(float(np.sum(w * gains[list(p)])) for p in itertools.permutations(range(gains.size), C))
        bad += not np.isclose(greedy, best, rtol=0, atol=1e-12)
    record(5, bad == 0, f"greedy == exhaustive maximum on {100 - bad}/100 instances")


# --------------------------------------------------------- 6 gradient oracles

def _fd(f, x, h):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (f(up) - f(dn)) / (2 * h)
    return g


def test_c06_gradient_oracles():
    t = time.time()
    rng = np.random.default_rng(6)
    worst_feat = worst_head = worst_ppo = 0.0
    for trial in range(5):
        p = init_codec(5, (3, 2, 2), n_classes=4, hidden=6, seed=trial)
        A = rng.uniform(-1, 1, (3, 2, 2))
        an = grad_logits_wrt_features(A, p)
        for n in range(4):
            fd = _fd(lambda a: task_logits(a, p)[n], A, 1e-4)
            worst_feat = max(worst_feat, rel_err(an[n], fd))
        a = rng.uniform(-1, 1, (7, 12))
        labels = rng.integers(0, 4, 7)
        _, grads, _ = _head_loss_and_grads(a, labels, p)
        for name, g in zip(("w1", "b1", "w2", "b2"), grads):
            def loss_of(val, name=name):
                q = p.copy()
                setattr(q, name, val)
                return _head_loss_and_grads(a, labels, q)[0]
            worst_head = max(worst_head, rel_err(g, _fd(loss_of, getattr(p, name), 1e-5)))

    hyper = DppoHyper()
    for trial in range(3):
        params = init_policy(4, (5, 5), seed=trial, value_scale=2.0)
        for arr in params.actor:
            arr += 0.5 * rng.standard_normal(arr.shape)
        S = rng.standard_normal((3, STATE_DIM))
        upper = rng.integers(1, 5, 3)
        act = np.array([rng.integers(1, u + 1) for u in upper])
        lg, _ = dppo._mlp_forward(params.actor, S)
        lp = masked_log_softmax(lg, upper)[np.arange(3), act - 1]
        traj = Trajectory(S, act, rng.standard_normal(3), rng.standard_normal(3),
                          lp + rng.uniform(-0.4, 0.4, 3), upper, np.ones(3, dtype=np.int64))
        finish_trajectory(traj, 0.99)
        _, grads, _ = total_loss(traj, params, hyper)
        an = np.concatenate([g.ravel() for g in grads])
        fd = _fd(lambda v: total_loss(traj, params.with_flat(v), hyper)[0], params.flat(), 1e-6)
        worst_ppo = max(worst_ppo, rel_err(an, fd, 1e-4))
    dt = time.time() - t
    ok = max(worst_feat, worst_head, worst_ppo) < 1e-4 and dt < 30
    record(6, ok, f"max rel. error: feature Jacobian {worst_feat:.1e}, head params {worst_head:.1e}, "
                  f"PPO loss {worst_ppo:.1e}; {dt:.1f}s")


# ---------------------------------------------------------- 7 PPO unit cases

def test_c07_ppo_cases():
    cases = (clipped_surrogate(1.1, 3.0, 0.25) == 1.1 * 3.0,
             clipped_surrogate(2.0, 1.0, 0.25) == 1.25,
             clipped_surrogate(0.5, -1.0, 0.25) == -0.75)
    params = init_policy(8, (6, 6), seed=7)
    for arr in params.actor:
        arr += np.random.default_rng(7).standard_normal(arr.shape)
    pr = actor_forward(np.ones(STATE_DIM), params, ActionSpace(8, 3))
    masked = bool(np.all(pr[3:] == 0.0)) and abs(pr.sum() - 1) < 1e-12
    record(7, all(cases) and masked, f"surrogate cases {cases}; invalid-action mass {pr[3:].sum()}")


# ------------------------------------------------------------ 8 DPPO efficacy

DESK = {"C": 16, "B": 48, "channel": "sui5", "snr_db": 10.0, "trials": 200}
TRAIN_SEEDS = (1, 2, 3, 4, 5)


@pytest.fixture(scope="module")
def desk():
    cfg = make_config(DESK)
    return cfg, load_artifacts(cfg)


@pytest.fixture(scope="module")
def trained(desk):
    cfg, art = desk
    runs = {}
    t = time.time()
    for s in TRAIN_SEEDS:
        scfg = cfg.replace(dppo={"seed": s})
        res = dppo.train(art.codec, art.g, art.train, scfg.link(), scfg.hyper(), cfg.B,
                         iterations=cfg.dppo_iterations)
        last = [(n, e) for it, n, e in res.episodes if it >= cfg.dppo_iterations - 50]
        eam = dppo.eam_reference_reward(art.codec, art.g, art.train, scfg.link(), scfg.hyper(), cfg.B, last)
        runs[s] = (res, eam)
    return runs, time.time() - t


@pytest.mark.slow
def test_c08a_dppo_vs_eam(trained):
    runs, dt = trained
    wins, parts = 0, []
    for s, (res, eam) in runs.items():
        r = res.rewards()[-50:].mean()
        wins += r >= eam
        parts.append(f"seed {s}: {r:.4f} vs {eam:.4f}")
    record("8a", wins >= 4 and dt < 900, f"{wins}/5 runs >= EAM ({'; '.join(parts)}); {dt:.0f}s")


@pytest.mark.slow
def test_c08b_distortion_ordering(desk, trained):
    cfg, art = desk
    runs, _ = trained
    art.policies["dppo"] = runs[TRAIN_SEEDS[0]][0].params
    _, res = compare_allocators(cfg, art, allocators=("dppo", "eam", "rbam", "ram"))
    d = {a: np.array([r.weighted_distortion for r in v]) for a, v in res.items()}
    m = {a: v.mean() for a, v in d.items()}
    se = {a: v.std() / np.sqrt(v.size) for a, v in d.items()}
    ram_worst = all(m["ram"] - m[a] > se["ram"] for a in ("dppo", "eam", "rbam"))
    ok = m["dppo"] <= m["rbam"] and ram_worst
    record("8b", ok, ", ".join(f"{a} {m[a]:.3f}+-{se[a]:.3f}" for a in d) + " (200 paired episodes)")


# ---------------------------------------------------- 9 budget monotonicity

@pytest.mark.slow
def test_c09a_budget_reward(desk, trained):
    cfg, art = desk
    runs, _ = trained
    s = TRAIN_SEEDS[0]
    big = cfg.replace(B=64, dppo={"seed": s})
    res64 = dppo.train(art.codec, art.g, art.train, big.link(), big.hyper(), 64,
                       iterations=cfg.dppo_iterations)
    r48 = runs[s][0].rewards()[-50:].mean()
    r64 = res64.rewards()[-50:].mean()
    record("9a", r64 >= r48, f"final-50 reward B=64 {r64:.4f} vs B=48 {r48:.4f} (training seed {s})")


def test_c09b_budget_gap():
    cfg = make_config({"axis": "budget", "values": (128, 256), "trials": 200})
    _, res = run_sweep(cfg)
    gap = {}
    for B in cfg.values:
        acc = [np.mean([r.top1_correct for r in res[(B, a)]]) for a in cfg.allocators]
        gap[B] = max(acc) - min(acc)
    record("9b", gap[256] < gap[128], f"accuracy gap across {cfg.allocators}: "
                                      f"B=128 {gap[128]:.3f}, B=256 {gap[256]:.3f}")


# ------------------------------------------------------------- 10 BSC trend

@pytest.mark.slow
def test_c10_bsc_trend(desk):
    cfg, art = desk
    bcfg = cfg.replace(channel="bsc", bsc_p=0.03, axis="bsc_p", values=(0.01, 0.03, 0.05), trials=100,
                       allocators=("dppo", "eam", "rbam", "ram"))
    art = load_artifacts(bcfg)
    train_policy(bcfg, art, "dppo")
    _, res = run_sweep(bcfg, art)
    m = {(p, a): np.mean([r.weighted_distortion for r in res[(p, a)]]) for p in bcfg.values
         for a in bcfg.allocators}
    mono = all(m[(0.01, a)] < m[(0.03, a)] < m[(0.05, a)] for a in bcfg.allocators)
    best = all(m[(p, "dppo")] <= m[(p, a)] for p in bcfg.values for a in ("eam", "rbam", "ram"))
    detail = "; ".join(f"p={p}: " + " ".join(f"{a} {m[(p, a)]:.3f}" for a in bcfg.allocators)
                       for p in bcfg.values)
    record(10, mono and best, f"increasing in p={mono}, dppo lowest={best} ({detail})")


# -------------------------------------------------------- 11 multipath trend

def test_c11_multipath():
    base = make_config({"snr_db": 20.0, "axis": "n_paths", "values": (1, 3, 5), "trials": 50,
                        "allocators": ["eam", "analog_baseline"]})
    art = load_artifacts(base)
    acc = {}
    for s in range(20):
        _, res = run_sweep(base.replace(seed=1000 + s), art)
        for key, eps in res.items():
            acc.setdefault(key, []).append(np.mean([r.top1_correct for r in eps]))
    mean = {k: np.mean(v) for k, v in acc.items()}
    se = {k: np.std(v) / np.sqrt(len(v)) for k, v in acc.items()}
    dig = [mean[(n, "eam")] for n in base.values]
    spread = 100 * (max(dig) - min(dig))
    drop = mean[(1, "analog_baseline")] - mean[(5, "analog_baseline")]
    ok = spread < 3 and drop > se[(1, "analog_baseline")]
    record(11, ok, f"digital accuracy {['%.3f' % a for a in dig]} (spread {spread:.2f} pts); analog "
                   f"{mean[(1, 'analog_baseline')]:.3f} -> {mean[(5, 'analog_baseline')]:.3f} "
                   f"(SE {se[(1, 'analog_baseline')]:.3f})")


# ------------------------------------------------------------ 12 determinism

def test_c12_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["selftest", "--out", str(out), "--seed", "12"]) == 0
        assert cli.main(["run-sweep", "--out", str(out), "--seed", "12", "--axis", "snr_db",
                         "--values", "0,10", "--trials", "20", "--allocator", "eam,rbam,ram,analog_baseline",
                         "--kb", str(out / "kb.bin")]) == 0
        outs.append(((out / "selftest.csv").read_bytes(), (out / "sweep_snr_db.csv").read_bytes()))
    same = outs[0] == outs[1]
    record(12, same, f"selftest.csv and sweep_snr_db.csv byte-identical across reruns: {same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
