"""Synthetic corpora with a dialled-in novelty differential between groups.

Games arrive year by year. Each new game either samples a fresh Bernoulli
feature vector or recombines: copy the vector of a uniformly chosen game
from the previous two years and flip a Poisson number of distinct bits. The
mutation mean is base_mutation_bits for traditional games plus novelty_boost
for crowdfunded ones; the boost is the knob an end-to-end recovery run must
detect, and zero boost makes the groups exchangeable by construction.

Controls are sampled independently of funding, so they cannot confound the
group effect. All draws come from one seeded generator in a fixed order,
making output byte-identical for a fixed config.
"""

import json
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .corpus import FeatureRegistry, Record, RecordSet, canonical_registry
from .errors import ConfigError

GENRES = (
    "strategy",
    "family",
    "wargames",
    "thematic",
    "party",
    "abstract/strategy",
    "childrens",
    "customizable",
)

MIN_AGES = (6, 8, 10, 12, 14, 16, 18)

BURN_IN_YEARS = 2


@dataclass(frozen=True)
class SynthConfig:
    dimension: int = 51
    year_start: int = 2006
    year_end: int = 2015
    games_per_year: int = 500
    crowdfunded_share_by_year: Union[float, Mapping[int, float]] = 0.3
    base_mechanism_rate: float = 0.15
    recombination_rate: float = 0.6
    base_mutation_bits: float = 1.0
    novelty_boost: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("dimension must be >= 1")
        if self.year_end < self.year_start:
            raise ConfigError("year_end must be >= year_start")
        if self.games_per_year < 1:
            raise ConfigError("games_per_year must be >= 1")
        if not 0.0 <= self.base_mechanism_rate <= 1.0:
            raise ConfigError("base_mechanism_rate must be in [0, 1]")
        if not 0.0 <= self.recombination_rate <= 1.0:
            raise ConfigError("recombination_rate must be in [0, 1]")
        if self.base_mutation_bits < 0:
            raise ConfigError("base_mutation_bits must be >= 0")
        if self.novelty_boost < 0:
            raise ConfigError("novelty_boost must be >= 0")
        shares = self.shares()
        for year, share in shares.items():
            if not 0.0 <= share <= 1.0:
                raise ConfigError(f"crowdfunded share for {year} must be in [0, 1]")

    def shares(self) -> dict:
        """Per-year crowdfunded share, every simulated year covered."""
        years = range(self.year_start, self.year_end + 1)
        raw = self.crowdfunded_share_by_year
        if isinstance(raw, (int, float)):
            return {y: float(raw) for y in years}
        out = {}
        for y in years:
            if y not in raw:
                raise ConfigError(f"crowdfunded_share_by_year missing year {y}")
            out[y] = float(raw[y])
        return out

    @classmethod
    def from_dict(cls, payload: Mapping) -> "SynthConfig":
        kwargs = dict(payload)
        share = kwargs.get("crowdfunded_share_by_year")
        if isinstance(share, Mapping):
            kwargs["crowdfunded_share_by_year"] = {int(y): float(s) for y, s in share.items()}
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        share = self.crowdfunded_share_by_year
        if isinstance(share, Mapping):
            share = {str(y): float(s) for y, s in sorted(share.items())}
        return {
            "dimension": self.dimension,
            "year_start": self.year_start,
            "year_end": self.year_end,
            "games_per_year": self.games_per_year,
            "crowdfunded_share_by_year": share,
            "base_mechanism_rate": self.base_mechanism_rate,
            "recombination_rate": self.recombination_rate,
            "base_mutation_bits": self.base_mutation_bits,
            "novelty_boost": self.novelty_boost,
            "seed": self.seed,
        }


def linear_share_ramp(year_start: int, year_end: int, lo: float = 0.01, hi: float = 0.30) -> dict:
    """Crowdfunded share rising linearly from lo to hi across the years."""
    years = list(range(year_start, year_end + 1))
    if len(years) == 1:
        return {years[0]: hi}
    step = (hi - lo) / (len(years) - 1)
    return {y: lo + i * step for i, y in enumerate(years)}


def synthetic_registry(dimension: int) -> FeatureRegistry:
    if dimension == 51:
        return canonical_registry()
    return FeatureRegistry(tuple(f"Mechanism {j:02d}" for j in range(dimension)))


def generate_corpus(cfg: SynthConfig) -> RecordSet:
    """Simulate one corpus; deterministic for a fixed config.

    The first two simulated years are burn-in with fresh vectors only (there
    is no recombination source yet). Recombination then copies a uniform
    game from the previous two years and flips Poisson-many distinct bits,
    truncated to the dimension.
    """
    registry = synthetic_registry(cfg.dimension)
    shares = cfg.shares()
    # separate substreams so the mutation dial cannot shift funding flags or
    # controls: the same seed gives identical covariates at any novelty_boost
    vec_seed, ctrl_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    rng_vec = np.random.default_rng(vec_seed)
    rng_ctrl = np.random.default_rng(ctrl_seed)
    dim = cfg.dimension

    records = []
    vectors_by_year = {}
    for year in range(cfg.year_start, cfg.year_end + 1):
        burn_in = year < cfg.year_start + BURN_IN_YEARS
        pool = []
        if not burn_in:
            for y in (year - 2, year - 1):
                pool.extend(vectors_by_year.get(y, ()))
        year_vectors = []
        for i in range(cfg.games_per_year):
            crowdfunded = bool(rng_ctrl.random() < shares[year])
            recombine = (not burn_in) and bool(pool) and bool(
                rng_vec.random() < cfg.recombination_rate
            )
            if recombine:
                source = pool[int(rng_vec.integers(len(pool)))]
                mean_flips = cfg.base_mutation_bits + (cfg.novelty_boost if crowdfunded else 0.0)
                n_flips = min(int(rng_vec.poisson(mean_flips)), dim)
                vector = source.copy()
                if n_flips:
                    flip = rng_vec.choice(dim, size=n_flips, replace=False)
                    vector[flip] ^= 1
            else:
                vector = (rng_vec.random(dim) < cfg.base_mechanism_rate).astype(np.uint8)
            min_players = 1 + int(rng_ctrl.integers(0, 3))
            records.append(
                Record(
                    id=f"syn-{year}-{i:04d}",
                    year=year,
                    vector=vector,
                    crowdfunded=crowdfunded,
                    genre=GENRES[int(rng_ctrl.integers(len(GENRES)))],
                    team_size=1 + int(rng_ctrl.poisson(0.6)),
                    debut=bool(rng_ctrl.random() < 0.35),
                    complexity=round(float(rng_ctrl.uniform(1.0, 4.5)), 2),
                    playing_time=float(rng_ctrl.integers(0, 241)),
                    min_players=min_players,
                    max_players=min_players + int(rng_ctrl.integers(0, 5)),
                    min_age=int(MIN_AGES[int(rng_ctrl.integers(len(MIN_AGES)))]),
                    # expansions carry no parent_id, so the trivial-expansion
                    # filter keeps them; the flag just gives the covariate spread
                    is_expansion=bool(rng_ctrl.random() < 0.10),
                    is_adult=bool(rng_ctrl.random() < 0.02),
                    num_ratings=10 + int(rng_ctrl.poisson(150.0)),
                )
            )
            year_vectors.append(vector)
        vectors_by_year[year] = year_vectors
    return RecordSet(records, registry)
