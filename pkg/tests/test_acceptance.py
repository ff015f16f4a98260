"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line; the lines are
repeated in the terminal summary. The long wall-clock runs (criteria 7 and
8) take ten and thirty minutes per run.
"""

import math

import numpy as np
from scipy import stats

from anytime_pt.abc import (AbcChainState, LotkaVolterraState, NormalPrior,
                            gillespie_simulate, lv_total_rate, normal_abc_model,
                            swap_indicator)
from anytime_pt.anytime import (GammaMixtureTarget, HoldTimeModel, JumpProcessState,
                                VirtualClock, advance_jump_process, anytime_distribution,
                                anytime_phi)
from anytime_pt.diagnostics import (autocorrelation, density_distance, iat,
                                    reference_on_grid)
from anytime_pt.harness import get_preset, preset_names, run_experiment
from anytime_pt.scheduler import IDLE
from anytime_pt.tempering import TemperatureLadder, TemperedFamily

TARGET = GammaMixtureTarget(3.0, 0.15, 20.0, 0.25)
EDGES = np.arange(0.0, 15.25, 0.25)
SEED = 1


def run(name, **changes):
    cfg = get_preset(name).with_(seed=SEED, **changes)
    return run_experiment(cfg)


def test_criterion_01_anytime_length_bias(criterion):
    # a single chain interrupted every 50 time units, about 18 moves per epoch
    fam = TemperedFamily(TARGET.log_density, TemperatureLadder.uniform(1, 0.5))
    model = HoldTimeModel.explicit(0.15, 0.25, 1)
    state, clock = JumpProcessState([1.0]), VirtualClock()
    rng, hold_rng = np.random.default_rng([SEED, 0]), np.random.default_rng([SEED, 1])
    kernel = lambda j, x, r: fam.local_move(0, x, r)
    delta, n = 50.0, 10**5
    seen = np.empty(n)
    for e in range(n):
        advance_jump_process(state, clock, kernel, model, (e + 1) * delta, rng,
                             hold_rng=hold_rng)
        seen[e] = state.states[0]
    alpha = anytime_distribution(TARGET, 1)
    tv = density_distance(seen, EDGES, reference_on_grid(EDGES, alpha.cdf))
    tv_pi = density_distance(seen, EDGES, reference_on_grid(EDGES, TARGET.cdf))
    criterion(1, tv < 0.03, f"TV(interrupted, anytime density) = {tv:.4f} < 0.03 "
                            f"(TV to the target itself: {tv_pi:.3f})")


def _rejection_phi(degree, rng, n=5 * 10**7, chunk=5 * 10**6):
    """Length-biased rejection sampling, one envelope per mixture component."""
    weights = (TARGET.weight, 1.0 - TARGET.weight)
    comps = ((TARGET.k1, TARGET.theta1), (TARGET.k2, TARGET.theta2))
    mass = []
    for w, (k, theta) in zip(weights, comps):
        cap = stats.gamma.ppf(1 - 1e-9, k, scale=theta)
        accepted = 0
        for _ in range(n // chunk):
            x = rng.gamma(k, theta, chunk)
            accepted += int(np.sum(rng.random(chunk) < np.minimum(1.0, (x / cap) ** degree)))
        mass.append(w * accepted / n * cap ** degree)
    return mass[0] / (mass[0] + mass[1])


def test_criterion_02_phi_formula(criterion):
    rng = np.random.default_rng(SEED)
    errors = {p: abs(anytime_phi(p, TARGET) / _rejection_phi(p, rng) - 1) for p in (1, 2, 3)}
    half = anytime_phi(0, TARGET) == 0.5
    ok = half and all(e < 0.01 for e in errors.values())
    detail = ", ".join(f"p={p} rel.err {e:.4f}" for p, e in errors.items())
    criterion(2, ok, f"{detail} (< 0.01); phi(0) == 1/2: {half}")


def _bias_run(p, corrected):
    kind = "corrected" if corrected else "uncorrected"
    return run(f"gamma-p{p}-{kind}-1proc", export_traces=False,
               timeline=False).report["density"]


def test_criterion_03_bias_correction(criterion):
    rows, ok = [], True
    unc_tv = []
    for p in (1, 2, 3):
        c, u = _bias_run(p, True), _bias_run(p, False)
        unc_tv.append(u["tv_target"])
        target_mass = c["second_component_mass_target"]
        checks = (c["tv_target"] < 0.03,
                  u["tv_target"] - c["tv_target"] >= 0.05,
                  u["second_component_mass"] > max(target_mass, c["second_component_mass"]))
        ok &= all(checks)
        rows.append(f"p={p} TV corr {c['tv_target']:.4f} unc {u['tv_target']:.4f} "
                    f"comp2 mass corr {c['second_component_mass']:.3f} "
                    f"unc {u['second_component_mass']:.3f} {'ok' if all(checks) else 'MISS'}")
    increasing = all(a < b for a, b in zip(unc_tv, unc_tv[1:]))
    ok &= increasing
    criterion(3, ok, "; ".join(rows) + f"; uncorrected TV increasing in p: {increasing}")


def test_criterion_04_null_case(criterion):
    tv = {kind: _bias_run(0, kind == "corrected")["tv_target"]
          for kind in ("corrected", "uncorrected")}
    criterion(4, all(v < 0.03 for v in tv.values()),
              ", ".join(f"{k} TV {v:.4f}" for k, v in tv.items()) + " (< 0.03)")


def _perf(p, algo):
    cfg = get_preset(f"gamma-perf-p{p}-{algo}")
    budget = cfg.paper_budget
    result = run(f"gamma-perf-p{p}-{algo}", budget=budget, burn_in=0.1 * budget,
                 export_traces=False, timeline=False)
    return result.report["diagnostics"]["parameters"][0]


def test_criterion_05_efficiency_ordering(criterion):
    rows, ok = [], True
    for p in (0, 1, 2):
        algos = ("mcmc", "aptmc1", "aptmcw") if p < 2 else ("mcmc", "aptmc1")
        d = {a: _perf(p, a) for a in algos}
        good = d["aptmc1"]["iat"] < d["mcmc"]["iat"]
        if p < 2:
            good &= d["aptmcw"]["ess"] > d["aptmc1"]["ess"] > d["mcmc"]["ess"]
        ok &= good
        rows.append(f"p={p} " + " ".join(f"{a} iat {v['iat']:.1f} ess {v['ess']:.0f}"
                                         for a, v in d.items()))
    criterion(5, ok, "; ".join(rows))


def _ar1(rho, n, rng):
    from scipy import signal

    e = rng.standard_normal(n)
    e[0] /= math.sqrt(1 - rho ** 2)
    return signal.lfilter([1.0], [1.0, -rho], e)


def test_criterion_06_iat_oracle(criterion):
    rng = np.random.default_rng(SEED)
    rows, ok = [], True
    for rho, tol in ((0.5, 0.15), (0.9, 0.20)):
        truth = (1 + rho) / (1 - rho)
        est = iat(autocorrelation(_ar1(rho, 10**6, rng))).value
        err = abs(est - truth) / truth
        ok &= err < tol
        rows.append(f"rho={rho} IAT {est:.3f} vs {truth:.0f} (rel.err {err:.4f} < {tol})")
    criterion(6, ok, "; ".join(rows))


def _abc_exchange_chisquare():
    prior = NormalPrior(0.0, 5.0)
    y, thetas = 3.0, np.linspace(-1.0, 7.0, 5)
    xs = y + np.linspace(-1.5, 1.5, 7)
    radii = (0.5, 1.5)

    def joint(eps):
        w = np.array([[prior.pdf(t) * stats.norm.pdf(x, t, 1.0) * (abs(x - y) <= eps)
                       for x in xs] for t in thetas])
        return w / w.sum()

    pc, pw = joint(radii[0]), joint(radii[1])
    cold, warm = (normal_abc_model(y, 1.0, e, prior, 0.5) for e in radii)
    rng = np.random.default_rng(SEED)
    n = 10**5
    c = rng.choice(pc.size, n, p=pc.ravel())
    w = rng.choice(pw.size, n, p=pw.ravel())
    pairs = np.empty((n, 2), dtype=int)
    for r in range(n):
        a = AbcChainState([thetas[c[r] // 7]], xs[c[r] % 7])
        b = AbcChainState([thetas[w[r] // 7]], xs[w[r] % 7])
        pairs[r] = (w[r], c[r]) if swap_indicator(a, b, cold, warm) else (c[r], w[r])
    expected = np.outer(pc.ravel(), pw.ravel()).ravel() * n
    observed = np.bincount(pairs[:, 0] * pw.size + pairs[:, 1], minlength=expected.size)
    if observed[expected == 0].any():
        return 0.0
    # cells with expected count below 5 are pooled into one
    small = expected < 5
    obs = np.append(observed[~small], observed[small].sum())
    exp = np.append(expected[~small], expected[small].sum())
    return stats.chisquare(obs, exp).pvalue


def test_criterion_07_normal_abc(criterion):
    corr = run("normal-abc-corrected", export_traces=False).report["density"]["chains"]
    unc = run("normal-abc-uncorrected", export_traces=False).report["density"]["chains"]
    tv_ok = all(c["tv"] < 0.05 for c in corr)
    peak_ok = all(c["peak"] > c["reference_peak"] for c in unc)
    pvalue = _abc_exchange_chisquare()
    worst = max(corr, key=lambda c: c["tv"])
    low = [c["chain"] for c in unc if c["peak"] <= c["reference_peak"]]
    criterion(7, tv_ok and peak_ok and pvalue > 0.01,
              f"corrected max TV {worst['tv']:.4f} (chain {worst['chain']}, < 0.05); "
              f"uncorrected peak above quadrature on all chains: {peak_ok}"
              f"{' (not on ' + str(low) + ')' if low else ''}; "
              f"exchange chi-square p = {pvalue:.3f} (> 0.01); "
              f"uncorrected TV {min(c['tv'] for c in unc):.3f}-{max(c['tv'] for c in unc):.3f}, "
              f"largest mean shift {max(abs(c['mean'] - c['reference_mean']) for c in unc):.3f}")


def test_criterion_08_lotka_volterra(criterion):
    rate = lv_total_rate((1.0, 0.005, 0.6), LotkaVolterraState(50, 100))
    rng = np.random.default_rng(SEED)
    theta1, times = 0.3, np.array([1.0, 3.0])
    sims = np.array([gillespie_simulate((theta1, 0.0, 0.0), (50, 100), times, rng)
                     for _ in range(4000)])
    z = np.abs(sims.mean(0) - 50 * np.exp(theta1 * times)) / (sims.std(0) / math.sqrt(4000))
    abc = run("lv-table2-abc", export_traces=False).report["diagnostics"]["parameters"]
    ptmc = run("lv-table2-ptmc1", export_traces=False).report["diagnostics"]["parameters"]
    order = {a["name"]: (b["iat"], a["iat"]) for a, b in zip(abc, ptmc)}
    ok = rate == 135.0 and np.all(z < 3) and all(p < s for p, s in order.values())
    detail = " ".join(f"{k} IAT ptmc {p:.1f} < abc {s:.1f}" for k, (p, s) in order.items())
    criterion(8, ok, f"rate {rate:g}; pure-birth |z| max {z.max():.2f} (< 3); {detail}")


def test_criterion_09_idle_time(criterion):
    ptmc = run("idle-w4k5-ptmcw", export_traces=False)
    aptmc = run("idle-w4k5-aptmcw", export_traces=False)
    idle_p = ptmc.report["timeline"]["idle"]
    idle_a = aptmc.report["timeline"]["idle"]
    stray = sum(len(t.timeline.records(kind=IDLE)) for t in aptmc.traces)
    consistent = all(t.timeline.is_consistent() for t in aptmc.traces + ptmc.traces)
    criterion(9, idle_a < idle_p and stray == 0 and consistent,
              f"idle APTMC-W {idle_a:g} < PTMC-W {idle_p:g}; APTMC-W idle records {stray}; "
              f"timelines consistent: {consistent}")


VIRTUAL_PRESETS = [n for n in preset_names() if get_preset(n).mode == "virtual"]


def test_criterion_10_determinism(criterion, tmp_path):
    # every virtual preset at a short budget, twice, compared byte for byte
    differ = []
    for name in VIRTUAL_PRESETS:
        cfg = get_preset(name)
        short = cfg.with_(budget=2e4, burn_in=min(cfg.burn_in, 1e3), record="all")
        dirs = [tmp_path / name / tag for tag in ("a", "b")]
        reports = [run_experiment(short, out_dir=d).report for d in dirs]
        files = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*")
                       if p.is_file() and p.name != "runtime.json")
        same = reports[0] == reports[1] and all(
            (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files)
        if not same:
            differ.append(name)
    criterion(10, not differ, f"{len(VIRTUAL_PRESETS)} virtual presets re-run with the "
                              f"same seed; differing: {differ or 'none'}")
