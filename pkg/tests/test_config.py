import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from psi_lab.config import config_from_dict, config_hash, config_to_dict, load_config, parse_quantity
from psi_lab.errors import ConfigError
from psi_lab.physics import RB87


class TestQuantities:
    @pytest.mark.parametrize(
        "value,kind,want",
        [
            ("20 ms", "time", 0.02),
            ("0.2 mm", "length", 2e-4),
            ("6 uK", "temperature", 6e-6),
            ("6 µK", "temperature", 6e-6),
            ("3 G", "field", 3.0),
            ("1 G/cm", "gradient", 1.0),
            ("1.5e-3 s", "time", 1.5e-3),
            (0.5, "length", 0.5),
            ("2", "time", 2.0),
        ],
    )
    def test_parse(self, value, kind, want):
        assert parse_quantity(value, kind, "f") == pytest.approx(want)

    def test_wrong_unit_names_field(self):
        with pytest.raises(ConfigError) as exc:
            parse_quantity("20 mm", "time", "big_t")
        assert exc.value.field == "big_t" and "big_t" in str(exc.value)

    @pytest.mark.parametrize("value", ["fast", True, None, [1]])
    def test_garbage(self, value):
        with pytest.raises(ConfigError):
            parse_quantity(value, "time", "big_t")


class TestConfig:
    def test_bundled_style_document(self):
        cfg = config_from_dict(
            {
                "_comment": "ignored",
                "species": "87Rb",
                "lmt_order": 2,
                "big_t": "20 ms",
                "extra_intervals": ["12 ms", "6 ms"],
                "sigma_0": "0.2 mm",
                "sigma_f": "1 mm",
                "zeeman": {"b_first_half": "3 G", "b_second_half": "3.01 G"},
            }
        )
        assert cfg.species == RB87
        assert cfg.extra_intervals == pytest.approx((0.012, 0.006))
        assert cfg.extras["sigma_f"] == pytest.approx(1e-3)
        assert cfg.extras["zeeman"]["b_second_half"] == pytest.approx(3.01)

    def test_default_intervals(self):
        cfg = config_from_dict({"lmt_order": 3, "big_t": "40 ms"})
        assert cfg.extra_intervals == pytest.approx((0.03, 0.02, 0.01))

    def test_unknown_field(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict({"big_tee": 1.0})
        assert exc.value.field == "big_tee"

    def test_unknown_zeeman_field(self):
        with pytest.raises(ConfigError, match="zeeman"):
            config_from_dict({"zeeman": {"B": 1}})

    def test_sigma_0_must_be_below_sigma_f(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict({"sigma_0": "2 mm", "sigma_f": "1 mm"})
        assert exc.value.field == "sigma_0"

    def test_custom_species(self):
        doc = {
            "species": {
                "name": "X",
                "mass": "87 amu",
                "wavelength": "780 nm",
                "hyperfine_splitting": "6.8 GHz",
                "saturation_intensity": 50,
                "electron_g_factor": 2,
                "bohr_magneton_over_h": "1.4 MHz/G",
            }
        }
        cfg = config_from_dict(doc)
        assert cfg.species.wavelength == pytest.approx(780e-9)

    def test_incomplete_species(self):
        with pytest.raises(ConfigError, match="missing"):
            config_from_dict({"species": {"mass": 1e-25}})

    def test_unknown_species_name(self):
        with pytest.raises(ConfigError, match="species"):
            config_from_dict({"species": "Cs133"})

    def test_bad_interval_named(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict({"lmt_order": 2, "extra_intervals": ["12 ms", "6 kg"]})
        assert exc.value.field == "extra_intervals[2]"

    def test_non_integer_order(self):
        with pytest.raises(ConfigError):
            config_from_dict({"lmt_order": 1.5})

    @given(
        st.integers(0, 6),
        st.floats(5e-3, 0.1),
        st.floats(0.05, 1.0),
        st.integers(1, 10**7),
        st.floats(1e-7, 1e-4),
    )
    def test_round_trip_and_hash(self, n, big_t, c, N, temp):
        cfg = config_from_dict({"lmt_order": n, "big_t": big_t, "contrast": c, "atom_number": N, "temperature": temp})
        back = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
        assert back == cfg
        assert config_hash(back) == config_hash(cfg)


class TestLoad:
    def test_missing_file(self, tmp_path):
        p = tmp_path / "nope.json"
        with pytest.raises(ConfigError, match="nope.json"):
            load_config(p)

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="line 1"):
            load_config(p)

    def test_hash_changes_with_content(self, tmp_path):
        a = config_from_dict({"big_t": "20 ms"})
        b = config_from_dict({"big_t": "21 ms"})
        assert config_hash(a) != config_hash(b)
        assert len(config_hash(a)) == 64
