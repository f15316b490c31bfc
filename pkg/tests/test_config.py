"""Config parsing: schema validation, cross-checks, provenance hashing."""

import json

import numpy as np
import pytest

from qns.config import CONFIG_SCHEMA, load_config, parse_config
from qns.errors import ConfigError
from qns.noise import ArmaSpec, OuSpec
from qns.simulator import PulseModel, ReadoutModel

T = 5e-6


def base_doc(**overrides) -> dict:
    doc = {
        "schema": "qns-config-v1",
        "plan": {"K": 4, "m": 5, "tau_pi": T / 64},
        "statics": {"delta1": 0.1, "delta2": 0.2, "j_zz": 0.3},
        "noise": [
            {"channel": "qubit1", "components": [
                {"type": "ou", "sigma": 1.05 / T, "theta": 22.5 / T}]},
            {"channel": "crosstalk", "components": [
                {"type": "bandpass", "amplitude": 0.0125 / T,
                 "omega_low": 100 / T, "omega_high": 150 / T}]},
        ],
        "simulation": {"trajectories": 10, "seed": 3, "oversample": 2},
    }
    doc.update(overrides)
    return doc


class TestSchema:
    def test_minimal_document_parses(self):
        cfg = parse_config({"schema": "qns-config-v1",
                            "plan": {"K": 2, "m": 4, "tau_pi": 1e-7}})
        assert cfg.K == 2
        assert cfg.trajectories == 1000  # defaults fill in
        assert cfg.shots is None
        assert cfg.sampling == "iid"
        assert cfg.noise == ()

    def test_full_document_parses(self):
        cfg = parse_config(base_doc())
        assert cfg.statics.j_zz == 0.3
        assert len(cfg.noise) == 2
        assert isinstance(cfg.noise[0].components[0].generator, OuSpec)
        assert cfg.oversample == 2
        assert cfg.fine_dt == pytest.approx(T / 128)

    def test_missing_plan_rejected_with_path(self):
        with pytest.raises(ConfigError, match="plan"):
            parse_config({"schema": "qns-config-v1"})

    def test_wrong_schema_tag_rejected(self):
        with pytest.raises(ConfigError, match="schema"):
            parse_config(base_doc(schema="qns-config-v2"))

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(base_doc(extra=1))

    def test_bad_channel_name_rejected(self):
        doc = base_doc()
        doc["noise"][0]["channel"] = "qubit3"
        with pytest.raises(ConfigError, match="channel"):
            parse_config(doc)

    def test_error_message_carries_field_path(self):
        doc = base_doc()
        doc["plan"]["K"] = 0
        with pytest.raises(ConfigError, match=r"\['plan'\]\['K'\]"):
            parse_config(doc)

    def test_component_missing_field_rejected(self):
        doc = base_doc()
        doc["noise"][0]["components"][0] = {"type": "ou", "sigma": 1.0}
        with pytest.raises(ConfigError):
            parse_config(doc)

    def test_sampling_enum_enforced(self):
        doc = base_doc()
        doc["simulation"]["sampling"] = "sobol"
        with pytest.raises(ConfigError, match="sampling"):
            parse_config(doc)
        doc["simulation"]["sampling"] = "stratified"
        assert parse_config(doc).sampling == "stratified"

    def test_pulse_and_readout_parsed(self):
        doc = base_doc()
        doc["simulation"]["pulse"] = {"width": 32e-9}
        doc["simulation"]["readout"] = {"flip1": 0.05, "flip2": 0.03}
        cfg = parse_config(doc)
        assert isinstance(cfg.pulse, PulseModel)
        assert cfg.pulse.width == 32e-9
        assert isinstance(cfg.readout, ReadoutModel)


class TestCrossChecks:
    def test_duplicate_channel_rejected(self):
        doc = base_doc()
        doc["noise"].append(doc["noise"][0])
        with pytest.raises(ConfigError, match="twice"):
            parse_config(doc)

    def test_arma_dt_must_match_fine_step(self):
        doc = base_doc()
        doc["noise"][0]["components"] = [
            {"type": "arma", "ar": [0.9], "ma": [1.0], "dt": T / 64}]
        # oversample 2 makes the simulation step T/128, not T/64
        with pytest.raises(ConfigError, match="dt"):
            parse_config(doc)
        doc["noise"][0]["components"][0]["dt"] = T / 128
        cfg = parse_config(doc)
        assert isinstance(cfg.noise[0].components[0].generator, ArmaSpec)

    def test_off_grid_delay_rejected(self):
        doc = base_doc()
        doc["noise"][0]["components"][0]["delay"] = 0.4 * T / 128
        with pytest.raises(ConfigError, match="delay"):
            parse_config(doc)

    def test_conflicting_shared_generator_rejected(self):
        doc = base_doc()
        doc["noise"] = [
            {"channel": "qubit1", "components": [
                {"type": "ou", "sigma": 1.0, "theta": 1e5, "name": "s"}]},
            {"channel": "qubit2", "components": [
                {"type": "ou", "sigma": 2.0, "theta": 1e5, "name": "s"}]},
        ]
        with pytest.raises(ConfigError, match="conflicting"):
            parse_config(doc)

    def test_k_bounded_by_order_count(self):
        doc = base_doc()
        doc["plan"] = {"K": 40, "m": 5, "tau_pi": T / 64}
        with pytest.raises(ConfigError, match="2\\^m"):
            parse_config(doc)


class TestProvenanceHash:
    def test_hash_stable_across_key_order(self):
        doc = base_doc()
        shuffled = json.loads(json.dumps(doc))
        shuffled["plan"] = dict(reversed(list(doc["plan"].items())))
        assert parse_config(doc).sha256 == parse_config(shuffled).sha256

    def test_output_dir_excluded_from_hash(self):
        a = parse_config(base_doc())
        b = parse_config(base_doc(output_dir="/tmp/elsewhere"))
        assert a.sha256 == b.sha256
        assert b.output_dir == "/tmp/elsewhere"

    def test_parameter_change_changes_hash(self):
        doc = base_doc()
        doc["simulation"]["trajectories"] = 11
        assert parse_config(base_doc()).sha256 != parse_config(doc).sha256

    def test_seed_override_applies_and_rehashes(self):
        cfg = parse_config(base_doc(), seed_override=77)
        assert cfg.seed == 77
        assert cfg.provenance()["seed"] == 77
        assert cfg.sha256 != parse_config(base_doc()).sha256

    def test_input_document_not_mutated(self):
        doc = base_doc()
        frozen = json.dumps(doc, sort_keys=True)
        parse_config(doc, seed_override=99)
        assert json.dumps(doc, sort_keys=True) == frozen


class TestRunObjects:
    def test_plan_and_grid_consistency(self):
        cfg = parse_config(base_doc())
        plan = cfg.build_plan()
        assert plan.K == cfg.K
        assert plan.base_duration == pytest.approx(cfg.base_duration)
        grid = cfg.grid()
        assert grid.n_bins == cfg.K
        # first harmonic spacing is 2 pi / T
        spacing = 2 * np.pi / cfg.base_duration
        assert grid.centers[2] - grid.centers[1] == pytest.approx(spacing)

    def test_system_matches_plan(self):
        cfg = parse_config(base_doc())
        system = cfg.system()
        assert system.matrix.shape == (6 * cfg.K - 2, 5 * cfg.K - 1)


class TestLoadConfig:
    def test_round_trip_through_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(base_doc()))
        cfg = load_config(path)
        assert cfg.K == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(path)

    def test_schema_constant_is_itself_valid(self):
        # the published schema must at least be a valid draft 2020-12 doc
        import jsonschema
        jsonschema.Draft202012Validator.check_schema(CONFIG_SCHEMA)
