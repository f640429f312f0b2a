"""Acceptance checks, each returning one or more :class:`~ewens_coupling.stats.Verdict`.

Sample sizes are those of the acceptance criteria at ``scale=1``; thresholds
never depend on ``scale``.  Every check draws from its own derived stream of
the suite seed, so checks are reproducible individually.
"""

from __future__ import annotations

import io
import itertools
import math
from typing import Callable

import numpy as np

from .cli import RunConfig, generate_lines
from .ewens import exact_distribution, ewens_pmf, num_cycles_pmf, pgf_check
from .feller import (
    coupling_inequality_check,
    sample_bernoulli,
    sample_feller,
    sample_feller_batch,
    spacing_counts,
    spacing_lengths_batch,
)
from .perm import Permutation, enumerate_permutations
from .ppp import LevelWindow, dynamic_sample, infinite_cycle_counts, ppp_above_level, restrict
from .records import (
    log_density_ratio_batch,
    record_mask,
    record_permutation,
    record_permutation_batch,
    sample_ptheta,
    sample_ptheta_batch,
    sample_ptheta_until,
    spacing_counts_from_records,
)
from .rng import make_rng
from .shepp_lloyd import negbin_support, sample_random_size_batch
from .stats import (
    EmpiricalDistribution,
    Verdict,
    bernoulli_z,
    chi_square_homogeneity,
    independence_check,
    poisson_gof,
    tv_distance,
)

THETA_GRID = (0.5, 1.0, 2.0, 3.7)
ALPHA = 1e-3
TV_MAX = 0.01
Z_MAX = 4.0


def _n(base: int, scale: float) -> int:
    return max(1, int(round(base * scale)))


def _batched(total: int, chunk: int):
    done = 0
    while done < total:
        k = min(chunk, total - done)
        yield k
        done += k


# -- 1, 2: exact enumeration -----------------------------------------------------


def check_normalization(seed: int, scale: float) -> list[Verdict]:
    worst = 0.0
    for n in range(1, 8):
        perms = list(enumerate_permutations(n))
        for theta in THETA_GRID:
            total = math.fsum(ewens_pmf(p, theta) for p in perms)
            worst = max(worst, abs(total - 1.0))
    return [Verdict("1 exact pmf normalization", worst, None, worst <= 1e-12,
                    {"n": "1..7", "theta": list(THETA_GRID), "tol": 1e-12},
                    f"max |sum - 1| = {worst:.3g}")]


def check_pgf(seed: int, scale: float) -> list[Verdict]:
    worst = 0.0
    for n in range(1, 8):
        for theta in THETA_GRID:
            lhs, rhs = pgf_check(n, theta)
            worst = max(worst, abs(lhs - rhs))
    return [Verdict("2 pgf identity E_1[theta^K] = (theta)_n/n!", worst, None, worst <= 1e-10,
                    {"n": "1..7", "theta": list(THETA_GRID), "tol": 1e-10},
                    f"max abs difference = {worst:.3g}")]


# -- 3, 4: samplers against the exact table ----------------------------------------


def _feller_empirical(size: int, n: int, theta: float, rng) -> EmpiricalDistribution:
    counts: dict = {}
    for k in _batched(size, 200_000):
        _, images = sample_feller_batch(k, n, theta, rng)
        for key, c in EmpiricalDistribution.from_rows(images).counts.items():
            counts[key] = counts.get(key, 0) + c
    return EmpiricalDistribution(counts, size)


def _record_empirical(size: int, n: int, theta: float, rng) -> EmpiricalDistribution:
    counts: dict = {}
    for k in _batched(size, 200_000):
        images = record_permutation_batch(sample_ptheta_batch(k, n, theta, rng))
        for key, c in EmpiricalDistribution.from_rows(images).counts.items():
            counts[key] = counts.get(key, 0) + c
    return EmpiricalDistribution(counts, size)


def check_feller_law(seed: int, scale: float) -> list[Verdict]:
    n, theta, size = 5, 2.0, _n(10**6, scale)
    emp = _feller_empirical(size, n, theta, make_rng(seed, 3))
    tv = tv_distance(emp, exact_distribution(n, theta))
    return [Verdict("3 Feller sampler vs exact Ewens (TV)", tv, None, tv <= TV_MAX,
                    {"n": n, "theta": theta, "samples": size, "tv_max": TV_MAX})]


def check_record_law(seed: int, scale: float) -> list[Verdict]:
    n, theta, size = 5, 2.0, _n(10**6, scale)
    rec = _record_empirical(size, n, theta, make_rng(seed, 4))
    fel = _feller_empirical(size, n, theta, make_rng(seed, 104))
    tv = tv_distance(rec, exact_distribution(n, theta))
    tv2 = tv_distance(rec, fel)
    cfg = {"n": n, "theta": theta, "samples": size, "tv_max": TV_MAX}
    return [
        Verdict("4a record permutation vs exact Ewens (TV)", tv, None, tv <= TV_MAX, cfg),
        Verdict("4b record vs Feller empirical laws (TV)", tv2, None, tv2 <= TV_MAX, cfg),
    ]


# -- 5: pathwise identities ---------------------------------------------------------


def check_pathwise(seed: int, scale: float) -> list[Verdict]:
    rng = make_rng(seed, 5)
    paths = _n(10**5, scale)
    violations = 0
    rec_violations = 0
    # scalar sampler over a spread of orders and parameters
    for k in range(paths):
        n = 1 + k % 12
        theta = (0.5, 1.0, 2.0, 3.7)[k % 4]
        trace, perm = sample_feller(n, theta, rng)
        if perm.cycle_counts() != spacing_counts(trace.bits, n):
            violations += 1
    # vectorised sampler
    n = 8
    bits, images = sample_feller_batch(paths, n, 1.5, rng)
    appended = np.concatenate([bits, np.ones((paths, 1), dtype=bool)], axis=1)
    spac = spacing_lengths_batch(appended, n)
    for row in range(paths):
        counts = Permutation(tuple(images[row])).cycle_counts().as_list(n)
        if counts != spac[row].tolist():
            violations += 1
    # record construction: cycles of pi_n vs spacings in (1, B_n, ..., B_1)
    for k in range(_n(10**4, scale)):
        n = 1 + k % 12
        trace = sample_ptheta(n, 1.5, rng)
        rev = (1,) + tuple(reversed(trace.indicators))
        ones = [i for i, b in enumerate(rev) if b]
        gaps = sorted(b - a for a, b in zip(ones, ones[1:]))
        cyc = sorted(len(c) for c in record_permutation(trace).cycles())
        if gaps != cyc or spacing_counts_from_records(trace) != record_permutation(trace).cycle_counts():
            rec_violations += 1
    decided = undecided = failures = 0
    target = _n(10**4, scale)
    while decided < target:
        trace = sample_bernoulli(400, 1.0, rng)
        ok = coupling_inequality_check(trace.bits, 20)
        if ok is None:
            undecided += 1
            continue
        decided += 1
        failures += not ok
    return [
        Verdict("5a cycle counts = spacing counts (Feller)", float(violations), None, violations == 0,
                {"paths": 2 * paths}, f"{violations} violations"),
        Verdict("5b record cycles = spacings of (1,B_n..B_1)", float(rec_violations), None,
                rec_violations == 0, {"paths": _n(10**4, scale)}, f"{rec_violations} violations"),
        Verdict("5c coupling inequality on decided paths", float(failures), None, failures == 0,
                {"decided": decided, "undecided": undecided, "n": 20, "window": 400, "theta": 1.0},
                f"{failures} violations"),
    ]


# -- 6: record indicators -----------------------------------------------------------


def check_record_indicators(seed: int, scale: float) -> list[Verdict]:
    rng = make_rng(seed, 6)
    theta, n, size = 1.5, 50, _n(10**5, scale)
    marks = np.concatenate([record_mask(sample_ptheta_batch(k, n, theta, rng))
                            for k in _batched(size, 25_000)])
    freq_z = [bernoulli_z(int(marks[:, i - 1].sum()), size, theta / (i - 1 + theta)) for i in range(1, n + 1)]
    worst = max(abs(z) for z in freq_z)
    pairs = make_rng(seed, 1006).choice(list(itertools.combinations(range(2, n + 1), 2)), 20, replace=False)
    cov_z = [independence_check(marks[:, i - 1], marks[:, j - 1])[1] for i, j in pairs]
    worst_cov = max(abs(z) for z in cov_z)
    cfg = {"theta": theta, "indices": "1..50", "traces": size, "z_max": Z_MAX}
    return [
        Verdict("6a record indicator frequencies", worst, None, worst <= Z_MAX, cfg,
                "max |z| over i=1..50"),
        Verdict("6b record indicator pairwise independence", worst_cov, None, worst_cov <= Z_MAX,
                {**cfg, "pairs": [list(map(int, p)) for p in pairs]}, "max |z| over 20 pairs"),
    ]


# -- 7: Poisson spacings in the infinite trial sequence --------------------------


def check_poisson_spacings(seed: int, scale: float) -> list[Verdict]:
    from .feller import sample_bernoulli_batch

    rng = make_rng(seed, 7)
    theta, m, reps, lmax = 1.5, 2000, _n(10**5, scale), 5
    counts = np.concatenate([spacing_lengths_batch(sample_bernoulli_batch(k, m, theta, rng), lmax)
                             for k in _batched(reps, 5_000)])
    out = []
    for ell in range(1, lmax + 1):
        stat, p = poisson_gof(counts[:, ell - 1], theta / ell)
        out.append(Verdict(f"7 spacing count l={ell} ~ Poisson(theta/l)", stat, p, p >= ALPHA,
                           {"theta": theta, "m": m, "reps": reps, "lambda": theta / ell}))
    worst = max(abs(independence_check(counts[:, a], counts[:, b])[1])
                for a, b in itertools.combinations(range(lmax), 2))
    out.append(Verdict("7 spacing counts pairwise independence", worst, None, worst <= Z_MAX,
                       {"l": "1..5", "reps": reps}, "max |z| over 10 pairs"))
    return out


# -- 8, 9, 11: the stretch process above a level -----------------------------------


def _window_counts(stretch_lists, lmax):
    out = np.zeros((len(stretch_lists), lmax + 1), dtype=np.int64)
    for i, sts in enumerate(stretch_lists):
        out[i, 0] = len(sts)
        for st in sts:
            if len(st) <= lmax:
                out[i, len(st)] += 1
    return out


def check_window_laws(seed: int, scale: float) -> list[Verdict]:
    rng = make_rng(seed, 8)
    s, theta, size, lmax = 0.3, 2.0, _n(10**5, scale), 4
    w = LevelWindow(s, theta)
    counts = _window_counts([ppp_above_level(w, rng) for _ in range(size)], lmax)
    stat, p = poisson_gof(counts[:, 0], w.intensity)
    out = [Verdict("8 stretch count ~ Poisson(-theta log s)", stat, p, p >= ALPHA,
                   {"s": s, "theta": theta, "windows": size, "lambda": w.intensity})]
    for ell in range(1, lmax + 1):
        lam = w.expected_length_count(ell)
        stat, p = poisson_gof(counts[:, ell], lam)
        out.append(Verdict(f"8 length-{ell} count ~ Poisson(theta(1-s)^l/l)", stat, p, p >= ALPHA,
                           {"s": s, "theta": theta, "windows": size, "lambda": lam}))
    return out


def _joint_key(counts: list[int]) -> tuple[int, ...]:
    return tuple(min(c, 6) for c in counts)


def check_cross_construction(seed: int, scale: float) -> list[Verdict]:
    rng = make_rng(seed, 9)
    s, theta, size = 0.3, 2.0, _n(10**5, scale)
    w = LevelWindow(s, theta)
    a: dict = {}
    for _ in range(size):
        key = _joint_key(infinite_cycle_counts(ppp_above_level(w, rng)).as_list(4))
        a[key] = a.get(key, 0) + 1
    b: dict = {}
    for _ in range(size):
        trace, _ = sample_ptheta_until(s, theta, rng)
        key = _joint_key(spacing_counts_from_records(trace).as_list(4))
        b[key] = b.get(key, 0) + 1
    res = chi_square_homogeneity(a, b)
    return [Verdict("9 window PPP vs stopped P_theta records (joint)", res.statistic, res.p_value,
                    res.p_value >= ALPHA, {"s": s, "theta": theta, "samples": size, "dof": res.dof,
                                           "lengths": "1..4", "cap": 6})]


def check_superposition(seed: int, scale: float) -> list[Verdict]:
    rng = make_rng(seed, 11)
    s, t1, t2, size = 0.3, 0.7, 1.3, _n(10**5, scale)
    summed = np.zeros((size, 2), dtype=np.int64)
    single = np.zeros((size, 2), dtype=np.int64)
    w2, w12 = LevelWindow(s, t2), LevelWindow(s, t1 + t2)
    for i in range(size):
        part1 = restrict(dynamic_sample(t1 + t2, s, rng), t1)
        part2 = ppp_above_level(w2, rng)
        summed[i] = (infinite_cycle_counts(part1) + infinite_cycle_counts(part2)).as_list(2)
        single[i] = infinite_cycle_counts(ppp_above_level(w12, rng)).as_list(2)
    out = []
    for ell in (1, 2):
        ta = dict(zip(*np.unique(summed[:, ell - 1], return_counts=True)))
        tb = dict(zip(*np.unique(single[:, ell - 1], return_counts=True)))
        res = chi_square_homogeneity({int(k): int(v) for k, v in ta.items()},
                                     {int(k): int(v) for k, v in tb.items()})
        out.append(Verdict(f"11 superposition theta1+theta2 vs theta, K_{ell}", res.statistic, res.p_value,
                           res.p_value >= ALPHA, {"s": s, "theta1": t1, "theta2": t2, "samples": size,
                                                  "dof": res.dof}))
    return out


# -- 10: random-size Ewens -------------------------------------------------------------


def check_shepp_lloyd(seed: int, scale: float) -> list[Verdict]:
    rng = make_rng(seed, 10)
    theta, p, size = 2.5, 0.4, _n(10**6, scale)
    parts = [sample_random_size_batch(k, theta, p, rng, max_len=4) for k in _batched(size, 100_000)]
    sizes = np.concatenate([q[0] for q in parts])
    counts = np.concatenate([q[1] for q in parts])
    levy_bad = int(sum(np.count_nonzero(q[2] != q[0]) for q in parts))
    pmf = negbin_support(theta, p)
    exact = {n: float(v) for n, v in enumerate(pmf)}
    exact[0] += 1.0 - math.fsum(exact.values())  # tail mass < 1e-12, keeps the table summing to 1
    tv = tv_distance(EmpiricalDistribution.from_samples(sizes.tolist()), exact)
    cfg = {"theta": theta, "p": p, "samples": size}
    out = [Verdict("10a size law vs NegBin(theta, p) (TV)", tv, None, tv <= TV_MAX, {**cfg, "tv_max": TV_MAX})]
    for ell in range(1, 5):
        lam = theta * (1 - p) ** ell / ell
        stat, pv = poisson_gof(counts[:, ell - 1], lam)
        out.append(Verdict(f"10b K_{ell} ~ Poisson(theta(1-p)^l/l)", stat, pv, pv >= ALPHA, {**cfg, "lambda": lam}))
    out.append(Verdict("10c size = sum l*K_l on every sample", float(levy_bad), None, levy_bad == 0, cfg,
                       f"{levy_bad} violations"))
    sizes1 = np.concatenate([sample_random_size_batch(k, 1.0, p, rng, max_len=1)[0]
                             for k in _batched(size, 100_000)])
    geo = {n: (1 - p) ** n * p for n in range(int(sizes1.max()) + 200)}
    geo[0] += 1.0 - math.fsum(geo.values())
    tv1 = tv_distance(EmpiricalDistribution.from_samples(sizes1.tolist()), geo)
    out.append(Verdict("10d theta=1 size law vs Geometric(p) (TV)", tv1, None, tv1 <= TV_MAX,
                       {"theta": 1.0, "p": p, "samples": size, "tv_max": TV_MAX}))
    return out


# -- 12: change of measure ------------------------------------------------------------


def check_importance_sampling(seed: int, scale: float) -> list[Verdict]:
    rng = make_rng(seed, 12)
    n, theta, k_target, size = 6, 2.0, 2, _n(10**6, scale)
    weighted = []
    direct = []
    for k in _batched(size, 250_000):
        u1 = sample_ptheta_batch(k, n, 1.0, rng)
        hit1 = record_mask(u1).sum(axis=1) == k_target
        weighted.append(np.where(hit1, np.exp(log_density_ratio_batch(u1, theta)), 0.0))
        ut = sample_ptheta_batch(k, n, theta, rng)
        direct.append(record_mask(ut).sum(axis=1) == k_target)
    weighted = np.concatenate(weighted)
    direct = np.concatenate(direct)
    est_is, se_is = weighted.mean(), weighted.std(ddof=1) / math.sqrt(size)
    est_d = direct.mean()
    se_d = math.sqrt(est_d * (1 - est_d) / size)
    diff = abs(est_is - est_d)
    bound = Z_MAX * math.hypot(se_is, se_d)
    exact = num_cycles_pmf(n, theta)[k_target]
    return [Verdict("12 P_1-weighted vs direct P_theta, P(K_6=2)", diff, None, diff <= bound,
                    {"n": n, "theta": theta, "samples": size, "event": "K_6 = 2"},
                    f"IS {est_is:.5f}+-{se_is:.5f}, direct {est_d:.5f}+-{se_d:.5f}, "
                    f"bound {bound:.5f}, exact {exact:.5f}")]


# -- 13: determinism ------------------------------------------------------------------


DETERMINISM_CONFIGS = [
    RunConfig("sample-feller", theta=2.0, n=5, samples=1000, seed=42),
    RunConfig("sample-records", theta=1.5, n=6, samples=500, seed=42),
    RunConfig("sample-ppp", theta=2.0, s=0.3, samples=500, seed=42),
    RunConfig("dynamic", theta=2.0, s=0.3, samples=500, seed=42),
    RunConfig("sample-shepp-lloyd", theta=1.0, p=0.4, samples=1000, seed=42),
]


def _render(cfg: RunConfig) -> bytes:
    buf = io.StringIO()
    for line in generate_lines(cfg):
        buf.write(line + "\n")
    return buf.getvalue().encode()


def check_determinism(seed: int, scale: float) -> list[Verdict]:
    from dataclasses import replace

    out = []
    for base in DETERMINISM_CONFIGS:
        for fmt in ("json", "csv"):
            cfg = replace(base, format=fmt)
            same = _render(cfg) == _render(cfg)
            serial = replace(cfg, streams=3, jobs=1)
            parallel = replace(cfg, streams=3, jobs=3)
            agree = _render(serial) == _render(parallel)
            out.append(Verdict(f"13 determinism {cfg.command} ({fmt})", None, None, same and agree,
                               {"seed": cfg.seed, "samples": cfg.samples, "streams": 3},
                               f"repeat identical={same}, serial==parallel={agree}"))
    return out


CHECKS: dict[str, Callable[[int, float], list[Verdict]]] = {
    "normalization": check_normalization,
    "pgf": check_pgf,
    "feller-law": check_feller_law,
    "record-law": check_record_law,
    "pathwise": check_pathwise,
    "record-indicators": check_record_indicators,
    "poisson-spacings": check_poisson_spacings,
    "window-laws": check_window_laws,
    "cross-construction": check_cross_construction,
    "shepp-lloyd": check_shepp_lloyd,
    "superposition": check_superposition,
    "importance-sampling": check_importance_sampling,
    "determinism": check_determinism,
}

SUITES = {
    "exact": ["normalization", "pgf"],
    "monte-carlo": ["feller-law", "record-law", "pathwise", "record-indicators", "poisson-spacings",
                    "window-laws", "cross-construction", "shepp-lloyd", "superposition",
                    "importance-sampling"],
    "determinism": ["determinism"],
}
SUITES["all"] = SUITES["exact"] + SUITES["monte-carlo"] + SUITES["determinism"]


def run_suite(name: str, seed: int = 20240601, scale: float = 1.0) -> list[Verdict]:
    verdicts = []
    for check in SUITES[name]:
        verdicts.extend(CHECKS[check](seed, scale))
    return verdicts
