import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrtomo.errors import ConfigurationError
from qrtomo.geometry import (CONFIG_DEFAULTS, DomainConfig, build_grid,
                             domain_from_mapping, flat_index,
                             flat_index_inverse, load_config,
                             source_positions, test_domain)


def cfg(**kw):
    base = dict(R=1.0, a=1.0, b=3.0, d=3.5, T_x=4, T_alpha=4, N=2)
    base.update(kw)
    return DomainConfig(**base)


class TestGrid:
    def test_first_point_is_lower_left_corner(self):
        g = build_grid(cfg())
        assert (g.xs[0], g.ys[0]) == (-1.0, 1.0)

    def test_last_point_is_upper_right_corner(self):
        g = build_grid(cfg())
        assert (g.xs[-1], g.ys[-1]) == (1.0, 3.0)

    def test_reference_spacing(self):
        # R=1, T_x=150 gives h_x = 2/150
        g = build_grid(cfg(T_x=150))
        assert g.h_x == pytest.approx(2.0 / 150, abs=1e-15)

    def test_point_count(self):
        g = build_grid(cfg(T_x=7))
        assert g.n ** 2 == (7 + 1) ** 2

    @given(T_x=st.integers(2, 60), R=st.floats(0.1, 10), span=st.floats(0.1, 10))
    @settings(max_examples=50, deadline=None)
    def test_spacing_consistency(self, T_x, R, span):
        c = cfg(R=R, a=1.0, b=1.0 + span, T_x=T_x)
        g = build_grid(c)
        assert g.h_x * T_x == pytest.approx(2 * R, rel=1e-14)
        assert g.h_y * T_x == pytest.approx(span, rel=1e-14)

    @pytest.mark.parametrize("bad", [
        dict(R=-1.0), dict(a=0.0), dict(b=0.5), dict(d=0.0),
        dict(T_x=1), dict(T_alpha=1), dict(N=0),
    ])
    def test_invalid_config_rejected(self, bad):
        with pytest.raises(ConfigurationError):
            cfg(**bad)


class TestFlatIndex:
    def test_origin_maps_to_one(self):
        assert flat_index(1, 1, 1, cfg()) == 1

    def test_reference_value(self):
        c = cfg(T_x=150, N=15)
        assert flat_index(2, 1, 1, c) == (2 - 1) * 151 * 15 + 1 == 2266

    def test_round_trip_exhaustive_small(self):
        c = cfg(T_x=4, N=2)
        seen = set()
        for i in range(1, 6):
            for j in range(1, 6):
                for n in range(1, 3):
                    k = flat_index(i, j, n, c)
                    assert flat_index_inverse(k, c) == (i, j, n)
                    seen.add(k)
        assert seen == set(range(1, 5 ** 2 * 2 + 1))

    @given(T_x=st.integers(2, 12), N=st.integers(1, 5))
    @settings(max_examples=30, deadline=None)
    def test_bijection(self, T_x, N):
        c = cfg(T_x=T_x, N=N)
        ii, jj, nn = np.meshgrid(np.arange(1, T_x + 2), np.arange(1, T_x + 2),
                                 np.arange(1, N + 1), indexing="ij")
        ks = ((ii - 1) * (T_x + 1) * N + (jj - 1) * N + nn).ravel()
        assert len(np.unique(ks)) == (T_x + 1) ** 2 * N
        assert ks.min() == 1 and ks.max() == (T_x + 1) ** 2 * N

    @pytest.mark.parametrize("ijn", [(0, 1, 1), (1, 0, 1), (1, 1, 0),
                                     (6, 1, 1), (1, 6, 1), (1, 1, 3)])
    def test_out_of_range(self, ijn):
        with pytest.raises(IndexError):
            flat_index(*ijn, cfg(T_x=4, N=2))


class TestSources:
    def test_first_source(self):
        s = source_positions(cfg(d=3.5))
        assert s.alphas[0] == -3.5

    def test_spacing(self):
        s = source_positions(cfg(d=3.5, T_alpha=100))
        assert s.spacing == pytest.approx(0.07, abs=1e-15)

    def test_endpoint(self):
        s = source_positions(cfg(d=3.5, T_alpha=100))
        assert s.alphas[-1] == pytest.approx(3.5, abs=1e-12)


class TestConfigFile:
    def test_defaults_cover_documented_keys(self):
        assert set(CONFIG_DEFAULTS) == {"R", "a", "b", "d", "T_x", "T_alpha",
                                        "N", "eps1", "eps2", "noise", "seed",
                                        "test_id"}

    def test_parse_and_defaults(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("T_x = 20\nnoise=0.15  # override\n", encoding="utf-8")
        values = load_config(p)
        assert values["T_x"] == 20
        assert values["noise"] == 0.15
        assert values["d"] == 3.5 and values["eps1"] == 0.1

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("bogus=1\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config(p)

    def test_domain_from_mapping(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("T_x=12\nN=3\n", encoding="utf-8")
        c = domain_from_mapping(load_config(p))
        assert (c.T_x, c.N, c.R) == (12, 3, 1.0)


def test_benchmark_rectangles():
    assert (test_domain(1).a, test_domain(1).b) == (1.0, 3.0)
    assert (test_domain(2).a, test_domain(2).b) == (3.0, 5.0)
    assert (test_domain(3).a, test_domain(3).b) == (3.5, 5.5)
    assert test_domain(4).d == 3.5
    with pytest.raises(ConfigurationError):
        test_domain(9)
