"""Literal loop re-implementations used as independent checks."""
import math


def naive_metrics(y_true, y_pred):
    n = len(y_true)
    errs = [t - p for t, p in zip(y_true, y_pred)]
    mse = sum(e * e for e in errs) / n
    mae = sum(abs(e) for e in errs) / n
    pct, excluded = [], 0
    for t, e in zip(y_true, errs):
        if t > 1e-8:
            pct.append(abs(e) / t)
        else:
            excluded += 1
    mape = sum(pct) / len(pct) if pct else math.nan
    msle = 0.0
    for t, p in zip(y_true, y_pred):
        d = math.log(1 + t) - math.log(1 + max(p, 0.0))
        msle += d * d
    msle /= n
    a = sorted(abs(e) for e in errs)
    medae = a[n // 2] if n % 2 else (a[n // 2 - 1] + a[n // 2]) / 2
    mean_t = sum(y_true) / n
    ss_tot = sum((t - mean_t) ** 2 for t in y_true)
    mean_e = sum(errs) / n
    var_e = sum((e - mean_e) ** 2 for e in errs) / n
    if ss_tot == 0:
        r2 = evs = None
    else:
        r2 = 1 - sum(e * e for e in errs) / ss_tot
        evs = 1 - var_e / (ss_tot / n)
    return dict(mse=mse, rmse=math.sqrt(mse), mae=mae, mape=mape, msle=msle, medae=medae,
                r2=r2, evs=evs, n=n, n_excluded_mape=excluded)


def prefix_min_vocab(counts, threshold):
    total = sum(counts)
    running = 0
    for k, c in enumerate(counts, start=1):
        running += c
        if running / total >= threshold:
            return k
    return len(counts)
