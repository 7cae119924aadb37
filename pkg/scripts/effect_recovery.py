"""Monte-Carlo check that the pipeline recovers a known crowdfunding effect.

Two arms over many seeds:
  * boost arm: corpora generated with novelty_boost > 0; count how often the
    crowdfunded coefficient is positive and significant in all three models
    (distinctiveness OLS, binary-novelty logistic, count-novelty Poisson).
  * null arm: novelty_boost = 0; the share of significant crowdfunded
    coefficients in the distinctiveness OLS estimates the false-positive rate,
    which should sit near alpha.

Seeds run in parallel across processes; NOVASCAPE_THREADS caps the workers.

Usage:
    NOVASCAPE_THREADS=4 python3 scripts/effect_recovery.py --seeds 100 --null-seeds 200
"""

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from novascape.cli import thread_cap
from novascape.corpus import FilterConfig, apply_filters
from novascape.metrics import score_corpus
from novascape.stats import (
    COUNT_NOVELTY_MODEL,
    STANDARD_MODELS,
    build_design,
    fit_model,
    join_scores,
)
from novascape.synth import SynthConfig, generate_corpus

SPECS = dict(STANDARD_MODELS)
BOOST_MODELS = (
    ("distinctiveness_ols", SPECS["Distinctiveness"]),
    ("novelty_logistic", SPECS["Novelty"]),
    ("novelty_count_poisson", COUNT_NOVELTY_MODEL[1]),
)


def one_seed(task):
    seed, boost, games_per_year, years, share, span = task
    cfg = SynthConfig(
        year_start=2006,
        year_end=2006 + years - 1,
        games_per_year=games_per_year,
        crowdfunded_share_by_year=share,
        novelty_boost=boost,
        seed=seed,
    )
    kept, _ = apply_filters(generate_corpus(cfg), FilterConfig())
    table = score_corpus(kept, spans=(span,), last_complete_year=cfg.year_end)
    data = join_scores(kept, table, span=span)
    out = {}
    for name, spec in BOOST_MODELS:
        fit = fit_model(build_design(data, spec))
        out[name] = (fit.coefficients["crowdfunded"], fit.p_values["crowdfunded"])
    return seed, out


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=100, help="boost-arm seed count")
    parser.add_argument("--null-seeds", type=int, default=200, help="null-arm seed count")
    parser.add_argument("--boost", type=float, default=2.0)
    parser.add_argument("--games-per-year", type=int, default=500)
    parser.add_argument("--years", type=int, default=10)
    parser.add_argument("--share", type=float, default=0.3)
    parser.add_argument("--span", type=int, default=2)
    parser.add_argument("--alpha", type=float, default=0.05)
    parser.add_argument("--p-threshold", type=float, default=0.001,
                        help="significance bar for the boost arm")
    return parser.parse_args(argv)


def run(argv=None) -> int:
    args = parse_args(argv)
    workers = thread_cap()
    print(f"workers={workers} games/yr={args.games_per_year} years={args.years} "
          f"share={args.share} span={args.span}")

    t0 = time.time()
    boost_tasks = [(s, args.boost, args.games_per_year, args.years, args.share, args.span)
                   for s in range(args.seeds)]
    null_tasks = [(s, 0.0, args.games_per_year, args.years, args.share, args.span)
                  for s in range(args.null_seeds)]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            boost_results = list(pool.map(one_seed, boost_tasks))
            null_results = list(pool.map(one_seed, null_tasks))
    else:
        boost_results = [one_seed(t) for t in boost_tasks]
        null_results = [one_seed(t) for t in null_tasks]

    recovered = 0
    worst = {name: 0.0 for name, _ in BOOST_MODELS}
    for _, fits in boost_results:
        ok = all(c > 0 and p < args.p_threshold for c, p in fits.values())
        recovered += ok
        for name, (_, p) in fits.items():
            worst[name] = max(worst[name], p)
    print(f"boost={args.boost}: all three models significant in "
          f"{recovered}/{args.seeds} seeds")
    for name, p in worst.items():
        print(f"  worst {name} p = {p:.3g}")

    false_pos = sum(fits["distinctiveness_ols"][1] < args.alpha for _, fits in null_results)
    fpr = false_pos / args.null_seeds if args.null_seeds else float("nan")
    print(f"boost=0: distinctiveness-OLS false-positive rate at alpha={args.alpha}: "
          f"{false_pos}/{args.null_seeds} = {fpr:.3f}")
    print(f"elapsed {time.time() - t0:.1f}s")

    ok = recovered >= 0.95 * args.seeds and 0.02 <= fpr <= 0.08
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(run())
