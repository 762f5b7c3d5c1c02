"""Reference implementations kept independent of the package code paths."""

import math


def brute_metrics(taps, threshold_db):
    """
    Delay metrics by direct summation over (delay_ns, power_db) pairs that
    may be in any power frame.

    Returns (rms_weighted, mean_weighted, mean_unweighted, eff_max, n_kept).
    """
    peak = max(p for _, p in taps)
    kept = sorted((d, p - peak) for d, p in taps if p - peak >= threshold_db)
    t0 = kept[0][0]
    tau = [d - t0 for d, _ in kept]
    w = [10 ** (p / 10) for _, p in kept]
    wsum = math.fsum(w)
    mean_w = math.fsum(wi * ti for wi, ti in zip(w, tau)) / wsum
    var_w = math.fsum(wi * (ti - mean_w) ** 2 for wi, ti in zip(w, tau)) / wsum
    mean_u = math.fsum(tau) / len(tau)
    return math.sqrt(var_w), mean_w, mean_u, tau[-1] - tau[0], len(kept)


def kl_direct(p, q):
    total = 0.0
    for pi, qi in zip(p, q):
        total += pi * (math.log(pi) - math.log(qi)) / math.log(2)
    return total
