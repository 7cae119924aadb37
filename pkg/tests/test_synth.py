"""Generator determinism, config validation, and effect direction."""

import numpy as np
import pytest

from novascape.corpus import FilterConfig, apply_filters, write_records_csv
from novascape.errors import ConfigError
from novascape.metrics import score_corpus
from novascape.synth import GENRES, SynthConfig, generate_corpus, linear_share_ramp


def small_config(**over):
    base = dict(
        dimension=12,
        year_start=2006,
        year_end=2010,
        games_per_year=60,
        crowdfunded_share_by_year=0.3,
        seed=7,
    )
    base.update(over)
    return SynthConfig(**base)


class TestConfig:
    def test_defaults_valid(self):
        cfg = SynthConfig()
        assert cfg.dimension == 51
        assert cfg.shares()[2006] == 0.3

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dimension": 0},
            {"games_per_year": 0},
            {"year_end": 2000, "year_start": 2006},
            {"base_mechanism_rate": 1.5},
            {"recombination_rate": -0.1},
            {"novelty_boost": -1.0},
            {"crowdfunded_share_by_year": 2.0},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            small_config(**kwargs)

    def test_share_map_must_cover_all_years(self):
        with pytest.raises(ConfigError):
            small_config(crowdfunded_share_by_year={2006: 0.1}).shares()

    def test_share_ramp(self):
        ramp = linear_share_ramp(2006, 2010, 0.0, 0.4)
        assert ramp[2006] == 0.0
        assert ramp[2010] == pytest.approx(0.4)
        assert ramp[2008] == pytest.approx(0.2)
        cfg = small_config(crowdfunded_share_by_year=ramp)
        assert cfg.shares() == ramp

    def test_json_round_trip(self):
        cfg = small_config(crowdfunded_share_by_year={y: 0.2 for y in range(2006, 2011)})
        back = SynthConfig.from_json(
            __import__("json").dumps(cfg.to_dict())
        )
        assert back.shares() == cfg.shares()
        assert back.seed == cfg.seed


class TestGeneration:
    def test_shape_and_ranges(self):
        cfg = small_config()
        rs = generate_corpus(cfg)
        assert len(rs) == 5 * 60
        years = sorted({r.year for r in rs})
        assert years == list(range(2006, 2011))
        for rec in rs:
            assert len(rec.vector) == 12
            assert rec.num_ratings >= 10
            assert rec.team_size >= 1
            assert rec.genre in GENRES
            assert rec.min_players <= rec.max_players

    def test_deterministic_bytes(self, tmp_path):
        cfg = small_config()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_records_csv(generate_corpus(cfg), p1)
        write_records_csv(generate_corpus(cfg), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_seed_changes_output(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_records_csv(generate_corpus(small_config(seed=1)), p1)
        write_records_csv(generate_corpus(small_config(seed=2)), p2)
        assert p1.read_bytes() != p2.read_bytes()

    def test_share_roughly_respected(self):
        rs = generate_corpus(small_config(games_per_year=400, crowdfunded_share_by_year=0.3))
        share = np.mean([r.crowdfunded for r in rs])
        assert 0.25 < share < 0.35

    def test_filters_keep_nearly_everything(self):
        rs = generate_corpus(SynthConfig(games_per_year=200, year_end=2010, seed=3))
        kept, report = apply_filters(rs, FilterConfig())
        assert report.output_count >= 0.98 * report.input_count

    def test_boost_raises_crowdfunded_novelty(self):
        cfg = SynthConfig(
            dimension=51,
            year_start=2006,
            year_end=2013,
            games_per_year=250,
            crowdfunded_share_by_year=0.3,
            novelty_boost=2.0,
            seed=11,
        )
        rs = generate_corpus(cfg)
        table = score_corpus(rs, spans=(2,))
        by_id = rs.by_id
        cf = [r.novelty_count for r in table if by_id[r.record_id].crowdfunded]
        trad = [r.novelty_count for r in table if not by_id[r.record_id].crowdfunded]
        assert np.mean(cf) > np.mean(trad)

    def test_controls_independent_of_funding(self):
        # same seed, boost changes only vectors, never the control stream
        rs0 = generate_corpus(small_config(novelty_boost=0.0))
        rs2 = generate_corpus(small_config(novelty_boost=2.0))
        for a, b in zip(rs0, rs2):
            assert a.genre == b.genre
            assert a.team_size == b.team_size
            assert a.complexity == b.complexity
            assert a.crowdfunded == b.crowdfunded
