"""Timing study: how long ML fitting takes under CNcDir versus NcDir.

For every stratum (shapes, non-centralities, series size N) a series is
simulated from each model and the matching model is fitted to it; the
fit times are compared with a one-tailed two-sample Z test of
H0: mean_cncdir - mean_ncdir >= 0.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import CNcDirError, DomainError
from .inference import Dataset2D, FitOptions, ModelSpec, fit_ml
from .models import CNcDirParams, NcDirParams
from .sampling import sample_cncdir_mixture, sample_ncdir, spawn_rngs

__all__ = [
    "BenchStratum",
    "BenchResult",
    "GRID_PARAMS",
    "GRID_SIZES",
    "BENCH_OPTIONS",
    "grid_strata",
    "z_test_one_tailed",
    "run_stratum",
    "run_grid",
    "aggregate_speedup",
    "results_to_markdown",
    "results_to_json",
]

# (alpha, lambda) rows of the standard timing grid
GRID_PARAMS = (
    ((1.8, 1.2, 1.5), (0.7, 1.0, 0.9)),
    ((0.7, 1.3, 1.9), (4.6, 0.5, 3.8)),
    ((2.1, 0.2, 0.6), (0.8, 2.9, 4.2)),
    ((0.8, 0.9, 0.4), (2.4, 1.7, 2.8)),
)
GRID_SIZES = (25, 50, 100)

# optimizer settings shared by both models in timed fits
BENCH_OPTIONS = FitOptions(n_starts=2, compute_se=False)


@dataclass(frozen=True)
class BenchStratum:
    alpha: tuple
    lam: tuple
    N: int
    n: int = 30

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "lam", tuple(float(v) for v in self.lam))
        if len(self.alpha) != 3 or len(self.lam) != 3:
            raise DomainError("bench strata are bivariate: three shapes and three non-centralities")
        if min(self.alpha) <= 0 or min(self.lam) < 0:
            raise DomainError("invalid stratum parameters")
        if self.N < 2 or self.n < 2:
            raise DomainError("need N >= 2 and n >= 2")


@dataclass(frozen=True)
class BenchResult:
    stratum: BenchStratum
    mean_cncdir: float
    sd_cncdir: float
    mean_ncdir: float
    sd_ncdir: float
    z_stat: float
    p_value: float
    speedup_ratio: float
    n_ok: int
    n_failed: int
    valid: bool

    def to_json(self):
        out = asdict(self)
        out["stratum"] = asdict(self.stratum)
        return out


def grid_strata(sizes=GRID_SIZES, n=30):
    return [BenchStratum(a, l, N, n) for a, l in GRID_PARAMS for N in sizes]


def z_test_one_tailed(t_c, t_n):
    """Unpooled two-sample Z statistic and P(Z <= z) for H0: mu_c - mu_n >= 0."""
    t_c = np.asarray(t_c, dtype=float)
    t_n = np.asarray(t_n, dtype=float)
    diff = t_c.mean() - t_n.mean()
    se = math.sqrt(t_c.var(ddof=1) / t_c.size + t_n.var(ddof=1) / t_n.size)
    if se == 0:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    else:
        z = diff / se
    p = 0.5 * math.erfc(-z / math.sqrt(2.0))
    return z, p


def _timed(fitter, model, data, opts, timer):
    t0 = timer()
    fitter(model, data, opts)
    return timer() - t0


def run_stratum(stratum, seed, opts=None, timer=time.perf_counter, fitter=fit_ml):
    """Time paired CNcDir and NcDir fits over ``stratum.n`` replications.

    Data generation happens outside the timed sections; one warm-up fit per
    model is discarded.  A replication whose fit fails on either side is
    dropped from both samples; more than 10% failures marks the result
    invalid.
    """
    opts = opts or BENCH_OPTIONS
    pc = CNcDirParams(stratum.alpha, stratum.lam)
    pn = NcDirParams(stratum.alpha, stratum.lam)
    mc, mn = ModelSpec("cncdir"), ModelSpec("ncdir")
    rngs = spawn_rngs(seed, 2 * stratum.n + 2)
    series = []
    for r in range(stratum.n + 1):
        xc = Dataset2D(sample_cncdir_mixture(pc, rngs[2 * r], stratum.N))
        xn = Dataset2D(sample_ncdir(pn, rngs[2 * r + 1], stratum.N))
        series.append((xc, xn))
    # warm-up, not timed
    for model, data in ((mc, series[0][0]), (mn, series[0][1])):
        try:
            fitter(model, data, opts)
        except CNcDirError:
            pass
    t_c, t_n = [], []
    failed = 0
    for xc, xn in series[1:]:
        try:
            dc = _timed(fitter, mc, xc, opts, timer)
            dn = _timed(fitter, mn, xn, opts, timer)
        except CNcDirError:
            failed += 1
            continue
        t_c.append(dc)
        t_n.append(dn)
    valid = failed <= 0.1 * stratum.n and len(t_c) >= 2
    if len(t_c) >= 2:
        z, p = z_test_one_tailed(t_c, t_n)
        mean_c, mean_n = float(np.mean(t_c)), float(np.mean(t_n))
        sd_c, sd_n = float(np.std(t_c, ddof=1)), float(np.std(t_n, ddof=1))
    else:
        z = p = mean_c = mean_n = sd_c = sd_n = math.nan
    ratio = mean_n / mean_c if mean_c and math.isfinite(mean_c) else math.nan
    return BenchResult(
        stratum, mean_c, sd_c, mean_n, sd_n, z, p, ratio, len(t_c), failed, valid
    )


def run_grid(seed, opts=None, sizes=GRID_SIZES, n=30, strata=None, progress=None):
    """Run the full timing grid sequentially; returns a list of BenchResult."""
    strata = strata or grid_strata(sizes, n)
    out = []
    for k, s in enumerate(strata):
        res = run_stratum(s, [seed, k], opts)
        if progress:
            progress(res)
        out.append(res)
    return out


def aggregate_speedup(results):
    """Ratio of summed mean NcDir times to summed mean CNcDir times."""
    ok = [r for r in results if r.valid]
    return sum(r.mean_ncdir for r in ok) / sum(r.mean_cncdir for r in ok)


def results_to_markdown(results):
    head = (
        "| alpha | lambda | N | n | CNcDir mean (SD) s | NcDir mean (SD) s | ratio | Z | p |\n"
        "|---|---|---|---|---|---|---|---|---|\n"
    )
    rows = []
    for r in results:
        s = r.stratum
        p = "<.0001" if r.p_value < 1e-4 else f"{r.p_value:.4f}"
        rows.append(
            f"| {s.alpha} | {s.lam} | {s.N} | {r.n_ok} | {r.mean_cncdir:.4f} ({r.sd_cncdir:.4f}) "
            f"| {r.mean_ncdir:.4f} ({r.sd_ncdir:.4f}) | {r.speedup_ratio:.1f} | {r.z_stat:.2f} | {p} |"
        )
    tail = f"\nAggregate speedup (NcDir / CNcDir): {aggregate_speedup(results):.1f}\n" if results else ""
    return head + "\n".join(rows) + "\n" + tail


def results_to_json(results, **meta):
    return json.dumps(
        {
            "meta": meta,
            "results": [r.to_json() for r in results],
            "aggregate_speedup": aggregate_speedup(results) if results else None,
        },
        indent=2,
    )
