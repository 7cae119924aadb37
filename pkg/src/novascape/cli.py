"""Command-line pipeline: ingest, score, landscape, stats, synth, report.

One JSON config describes a full run; flags override the common knobs. A
typical flow over a synthetic corpus:

    novascape synth  --config run.json --out runs/demo
    novascape report --config run.json --out runs/demo

All randomness flows from seeds in the config (logged at run time). Outputs
are written atomically (temp file + rename) and contain no timestamps, so a
rerun with the same config and seeds reproduces the directory byte for byte.

Exit codes: 0 success, 2 input error, 3 empty result, 4 numeric failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .corpus import (
    FilterConfig,
    RecordSet,
    apply_filters,
    canonical_registry,
    load_registry,
    parse_records,
    write_records_csv,
    write_registry,
)
from .errors import (
    ConfigError,
    EmptyGraph,
    EmptySample,
    EmptyWindow,
    NovascapeError,
    NumericError,
    ParseError,
    RankDeficient,
)
from .landscape import (
    build_landscape,
    centroids,
    classify_snapshots,
    export_graph,
    layout,
    render_svg,
)
from .metrics import SPAN_PRESETS, read_scores_csv, score_corpus
from .stats import (
    COUNT_NOVELTY_MODEL,
    REFERENCE_CROWDFUNDED,
    STANDARD_MODELS,
    ModelSpec,
    build_design,
    describe,
    fit_model,
    fit_rows,
    format_model_table,
    group_test_battery,
    join_scores,
    marginal_means,
)
from .synth import SynthConfig, generate_corpus

log = logging.getLogger("novascape")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_NUMERIC = 4

EXPORT_FORMATS = ("csv", "json", "graphml", "svg")
MODEL_PRESETS = dict(STANDARD_MODELS + (COUNT_NOVELTY_MODEL,))

# cache file names inside the output directory; score/landscape/stats read
# what ingest wrote so the pipeline stays restartable per subcommand
CORPUS_CACHE = "corpus_filtered.csv"
REGISTRY_CACHE = "registry.txt"


def thread_cap() -> int:
    """Parallelism bound from NOVASCAPE_THREADS (default 1, floor 1)."""
    raw = os.environ.get("NOVASCAPE_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@contextmanager
def atomic_write(path: Path):
    """Yield a temp path in the target directory; rename over `path` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; serializable so one JSON captures the run."""

    corpus_path: Optional[str] = None
    registry_path: Optional[str] = None
    out_dir: str = "out"
    spans: Tuple[int, ...] = SPAN_PRESETS
    stats_span: int = 2
    last_complete_year: Optional[int] = None
    filters: FilterConfig = field(default_factory=FilterConfig)
    snapshot_years: Tuple[int, ...] = ()
    min_type_count: int = 6
    cf_share_threshold: float = 0.5
    seed: int = 42
    formats: Tuple[str, ...] = ("graphml", "json", "svg")
    models: Tuple[Tuple[str, ModelSpec], ...] = STANDARD_MODELS
    synth: Optional[SynthConfig] = None

    def __post_init__(self):
        if not self.spans:
            raise ConfigError("spans must be non-empty")
        if any(s < 1 for s in self.spans):
            raise ConfigError(f"spans must be positive, got {self.spans}")
        if self.stats_span not in self.spans:
            raise ConfigError(f"stats_span {self.stats_span} not among spans {self.spans}")
        bad = [f for f in self.formats if f not in EXPORT_FORMATS]
        if bad:
            raise ConfigError(f"unknown formats {bad}; choose from {EXPORT_FORMATS}")

    @classmethod
    def from_dict(cls, payload: Mapping) -> "PipelineConfig":
        known = {
            "corpus_path", "registry_path", "out_dir", "spans", "stats_span",
            "last_complete_year", "filters", "landscape", "seed", "formats",
            "models", "synth",
        }
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        kwargs: dict = {}
        for key in ("corpus_path", "registry_path", "out_dir", "stats_span",
                    "last_complete_year", "seed"):
            if key in payload:
                kwargs[key] = payload[key]
        if "spans" in payload:
            kwargs["spans"] = tuple(int(s) for s in payload["spans"])
        if "formats" in payload:
            kwargs["formats"] = tuple(payload["formats"])
        if "filters" in payload:
            try:
                kwargs["filters"] = FilterConfig(**payload["filters"])
            except TypeError as exc:
                raise ConfigError(f"bad filters section: {exc}") from exc
        if "landscape" in payload:
            ls = dict(payload["landscape"])
            if "snapshot_years" in ls:
                kwargs["snapshot_years"] = tuple(int(y) for y in ls.pop("snapshot_years"))
            for key in ("min_type_count", "cf_share_threshold", "seed"):
                if key in ls:
                    kwargs[key] = ls.pop(key)
            if ls:
                raise ConfigError(f"unknown landscape keys {sorted(ls)}")
        if "models" in payload:
            try:
                kwargs["models"] = tuple(
                    (name, ModelSpec.from_dict(spec)) for name, spec in payload["models"].items()
                )
            except (TypeError, ValueError, KeyError) as exc:
                raise ConfigError(f"bad models section: {exc}") from exc
        if "synth" in payload:
            kwargs["synth"] = SynthConfig.from_dict(payload["synth"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(payload)

    def to_dict(self) -> dict:
        out = {
            "corpus_path": self.corpus_path,
            "registry_path": self.registry_path,
            "out_dir": self.out_dir,
            "spans": list(self.spans),
            "stats_span": self.stats_span,
            "last_complete_year": self.last_complete_year,
            "filters": {
                "min_mechanisms": self.filters.min_mechanisms,
                "min_ratings": self.filters.min_ratings,
                "require_designer": self.filters.require_designer,
                "drop_trivial_expansions": self.filters.drop_trivial_expansions,
                "year_min": self.filters.year_min,
                "year_max": self.filters.year_max,
            },
            "landscape": {
                "snapshot_years": list(self.snapshot_years),
                "min_type_count": self.min_type_count,
                "cf_share_threshold": self.cf_share_threshold,
                "seed": self.seed,
            },
            "formats": list(self.formats),
            "models": {
                name: {
                    "outcome": spec.outcome,
                    "family": spec.family,
                    "terms": [list(t) for t in spec.terms],
                    "fixed_effects": list(spec.fixed_effects),
                    "robust_se": spec.robust_se,
                }
                for name, spec in self.models
            },
        }
        if self.synth is not None:
            out["synth"] = self.synth.to_dict()
        return out


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    overrides: dict = {}
    if args.spans:
        try:
            overrides["spans"] = tuple(int(s) for s in args.spans.split(","))
        except ValueError as exc:
            raise ConfigError(f"--spans expects comma-separated integers: {args.spans!r}") from exc
        if cfg.stats_span not in overrides["spans"]:
            overrides["stats_span"] = overrides["spans"][0]
    if args.out:
        overrides["out_dir"] = args.out
    if args.format:
        overrides["formats"] = (args.format,)
    if getattr(args, "corpus", None):
        overrides["corpus_path"] = args.corpus
    if getattr(args, "registry", None):
        overrides["registry_path"] = args.registry
    if args.seed is not None:
        overrides["seed"] = args.seed
        if cfg.synth is not None:
            overrides["synth"] = replace(cfg.synth, seed=args.seed)
    return replace(cfg, **overrides) if overrides else cfg


def _load_cache(cfg: PipelineConfig) -> RecordSet:
    corpus = Path(cfg.out_dir) / CORPUS_CACHE
    registry = Path(cfg.out_dir) / REGISTRY_CACHE
    if not corpus.exists() or not registry.exists():
        raise ConfigError(
            f"no ingested corpus under {cfg.out_dir!r} (expected {CORPUS_CACHE} "
            f"and {REGISTRY_CACHE}); run the ingest subcommand first"
        )
    return parse_records(corpus, load_registry(registry))


def _last_complete_year(cfg: PipelineConfig, records: RecordSet) -> int:
    if cfg.last_complete_year is not None:
        return cfg.last_complete_year
    inferred = max(int(y) for y in records.years)
    log.info("last_complete_year not set; assuming final corpus year %d is complete", inferred)
    return inferred


def cmd_ingest(cfg: PipelineConfig) -> int:
    if not cfg.corpus_path:
        raise ConfigError("ingest needs corpus_path (config key or --corpus)")
    registry = load_registry(cfg.registry_path) if cfg.registry_path else canonical_registry()
    records = parse_records(cfg.corpus_path, registry)
    kept, report = apply_filters(records, cfg.filters)
    out = Path(cfg.out_dir)
    with atomic_write(out / CORPUS_CACHE) as tmp:
        write_records_csv(kept, tmp)
    with atomic_write(out / REGISTRY_CACHE) as tmp:
        write_registry(registry, tmp)
    with atomic_write(out / "filter_report.json") as tmp:
        tmp.write_text(report.to_json() + "\n", encoding="utf-8")
    log.info("ingested %d records, kept %d after filters", len(records.records), len(kept.records))
    return EXIT_OK


def cmd_score(cfg: PipelineConfig) -> int:
    records = _load_cache(cfg)
    last_year = _last_complete_year(cfg, records)
    table = score_corpus(records, spans=cfg.spans, last_complete_year=last_year)
    with atomic_write(Path(cfg.out_dir) / "scores.csv") as tmp:
        table.write_csv(tmp)
    if len(table) == 0:
        log.warning(
            "no record has a non-empty comparison window for spans %s; scores.csv is empty",
            cfg.spans,
        )
    elif table.unscored:
        log.info("%d (record, span) pairs had empty windows and were not scored", len(table.unscored))
    log.info("wrote %d score rows for spans %s", len(table), cfg.spans)
    return EXIT_OK


def cmd_landscape(cfg: PipelineConfig) -> int:
    records = _load_cache(cfg)
    years = tuple(sorted(cfg.snapshot_years)) or (max(int(y) for y in records.years),)
    graphs = [
        build_landscape(records, up_to_year=y, min_type_count=cfg.min_type_count,
                        cf_share_threshold=cfg.cf_share_threshold)
        for y in years
    ]
    final = graphs[-1]
    log.info("landscape layout seed: %d", cfg.seed)
    positions = layout(final, seed=cfg.seed)
    classes = classify_snapshots(graphs)
    out = Path(cfg.out_dir)

    rows = []
    for g in graphs:
        pos = layout(g, final_graph=final, seed=cfg.seed)
        for fmt in cfg.formats:
            if fmt == "csv":
                continue
            path = out / f"landscape_{g.snapshot_year}.{fmt}"
            with atomic_write(path) as tmp:
                if fmt == "svg":
                    render_svg(g, pos, tmp, classes=classes[g.snapshot_year])
                else:
                    export_graph(g, pos, fmt, tmp, seed=cfg.seed)
        for cen in centroids(g, positions, records, g.snapshot_year):
            if cen is not None:
                rows.append(
                    {
                        "year": cen.year,
                        "group": cen.group,
                        "x": f"{cen.point[0]:.6f}",
                        "y": f"{cen.point[1]:.6f}",
                    }
                )
    with atomic_write(out / "centroids.csv") as tmp:
        _write_dict_csv(tmp, rows, ["year", "group", "x", "y"])
    log.info("wrote %d snapshots (%s) and %d centroid rows", len(graphs), years, len(rows))
    return EXIT_OK


def _write_dict_csv(path, rows: List[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _fit_one(data, name: str, spec: ModelSpec):
    design = build_design(data, spec)
    return name, design, fit_model(design)


def cmd_stats(cfg: PipelineConfig) -> int:
    records = _load_cache(cfg)
    scores_path = Path(cfg.out_dir) / "scores.csv"
    if not scores_path.exists():
        raise ConfigError(f"{scores_path} missing; run the score subcommand first")
    table = read_scores_csv(scores_path)
    if len(table.for_span(cfg.stats_span)) == 0:
        raise EmptySample(f"scores.csv has no rows for span {cfg.stats_span}")
    data = join_scores(records, table, span=cfg.stats_span)
    out = Path(cfg.out_dir)

    desc = describe(data)
    with atomic_write(out / "descriptives.csv") as tmp:
        _write_dict_csv(tmp, desc, list(desc[0].keys()))

    battery = group_test_battery(data)
    test_rows = [
        {
            "feature": label,
            "n_crowdfunded": res.n[0],
            "n_traditional": res.n[1],
            "mean_crowdfunded": f"{res.group_means[0]:.6f}",
            "mean_traditional": f"{res.group_means[1]:.6f}",
            "u_statistic": f"{res.u_statistic:.1f}",
            "auc": f"{res.auc:.6f}",
            "p_value": f"{res.p_value:.6g}",
            "exact": int(res.exact),
        }
        for label, res in battery
    ]
    with atomic_write(out / "group_tests.csv") as tmp:
        _write_dict_csv(tmp, test_rows, list(test_rows[0].keys()))

    # models are independent; NOVASCAPE_THREADS>1 fits them concurrently
    fits: List[Tuple[str, Optional[object]]] = []
    designs: Dict[str, object] = {}
    failures: List[Tuple[str, Exception]] = []
    workers = min(thread_cap(), max(1, len(cfg.models)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_fit_one, data, name, spec) for name, spec in cfg.models]
            results = []
            for fut, (name, _) in zip(futures, cfg.models):
                try:
                    results.append(fut.result())
                except NovascapeError as exc:
                    results.append((name, None, exc))
            iterator = iter(results)
    else:
        def _serial():
            for name, spec in cfg.models:
                try:
                    yield _fit_one(data, name, spec)
                except NovascapeError as exc:
                    yield name, None, exc
        iterator = _serial()
    for name, design, fit in iterator:
        if design is None:
            failures.append((name, fit))
            fits.append((name, None))
            log.error("model %s failed: %s", name, fit)
        else:
            designs[name] = design
            fits.append((name, fit))

    model_rows = []
    for name, fit in fits:
        if fit is None:
            continue
        for row in fit_rows(fit):
            model_rows.append(
                {
                    "model": name,
                    "term": row["term"],
                    "coef": f"{row['coef']:.6g}",
                    "se": f"{row['se']:.6g}",
                    "z": f"{row['z']:.6g}",
                    "p": f"{row['p']:.6g}",
                }
            )
    with atomic_write(out / "models.csv") as tmp:
        _write_dict_csv(tmp, model_rows, ["model", "term", "coef", "se", "z", "p"])

    with atomic_write(out / "models.txt") as tmp:
        tmp.write_text(format_model_table(fits, reference=REFERENCE_CROWDFUNDED), encoding="utf-8")

    mm_rows = []
    for name, fit in fits:
        if fit is None or "crowdfunded" not in fit.columns:
            continue
        design = designs[name]
        for mm in marginal_means(fit, design.X, "crowdfunded", (0.0, 1.0)):
            mm_rows.append(
                {
                    "model": name,
                    "crowdfunded": int(mm.level),
                    "estimate": f"{mm.estimate:.6f}",
                    "se": f"{mm.se:.6f}",
                    "ci_low": f"{mm.ci_low:.6f}",
                    "ci_high": f"{mm.ci_high:.6f}",
                }
            )
    with atomic_write(out / "marginal_means.csv") as tmp:
        _write_dict_csv(tmp, mm_rows, ["model", "crowdfunded", "estimate", "se", "ci_low", "ci_high"])

    if failures:
        log.error("%d of %d models failed; remaining tables were still written",
                  len(failures), len(cfg.models))
        return EXIT_NUMERIC
    log.info("fitted %d models on %d joined rows (span %d)",
             len(cfg.models), len(data["distinctiveness"]), cfg.stats_span)
    return EXIT_OK


def cmd_synth(cfg: PipelineConfig) -> int:
    if cfg.synth is None:
        raise ConfigError("config lacks a synth section")
    log.info("synthesis seed: %d", cfg.synth.seed)
    corpus = generate_corpus(cfg.synth)
    out = Path(cfg.out_dir)
    with atomic_write(out / "synth_corpus.csv") as tmp:
        write_records_csv(corpus, tmp)
    with atomic_write(out / "synth_registry.txt") as tmp:
        write_registry(corpus.registry, tmp)
    log.info("wrote %d synthetic records over %d-%d",
             len(corpus.records), cfg.synth.year_start, cfg.synth.year_end)
    return EXIT_OK


def cmd_report(cfg: PipelineConfig) -> int:
    """Full pipeline in one command; steps share the output directory."""
    if cfg.synth is not None and cfg.corpus_path is None:
        cmd_synth(cfg)
        cfg = replace(
            cfg,
            corpus_path=str(Path(cfg.out_dir) / "synth_corpus.csv"),
            registry_path=str(Path(cfg.out_dir) / "synth_registry.txt"),
        )
    code = EXIT_OK
    for step in (cmd_ingest, cmd_score, cmd_landscape, cmd_stats):
        step_code = step(cfg)
        code = code or step_code
    with atomic_write(Path(cfg.out_dir) / "pipeline_config.json") as tmp:
        tmp.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
    return code


COMMANDS = {
    "ingest": cmd_ingest,
    "score": cmd_score,
    "landscape": cmd_landscape,
    "stats": cmd_stats,
    "synth": cmd_synth,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="novascape",
        description="Innovation metrics, landscapes, and statistics for mechanism-vector corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("ingest", "parse, validate, and filter a corpus CSV"),
        ("score", "compute windowed innovation scores for the ingested corpus"),
        ("landscape", "build and export type-landscape snapshots"),
        ("stats", "descriptives, group tests, regressions, marginal means"),
        ("synth", "generate a synthetic corpus from the config's synth section"),
        ("report", "run the full pipeline (synth if configured, then ingest..stats)"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="pipeline config JSON")
        p.add_argument("--spans", metavar="1,2,5", help="comma-separated window spans")
        p.add_argument("--seed", type=int, metavar="N", help="override layout/synthesis seed")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--format", choices=EXPORT_FORMATS, help="restrict export format")
        p.add_argument("--corpus", metavar="PATH", help="corpus CSV (overrides config)")
        p.add_argument("--registry", metavar="PATH", help="registry file (overrides config)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ParseError, ConfigError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except (EmptyGraph, EmptySample, EmptyWindow) as exc:
        log.error("empty result: %s", exc)
        return EXIT_EMPTY
    except (NumericError, RankDeficient) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
