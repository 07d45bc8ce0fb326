import pytest

from coexqkd import experiments as ex
from coexqkd.bb84 import PolState
from coexqkd.config import ExperimentConfig, default_text
from coexqkd.errors import ConfigError


def test_default_builds_reference_system():
    cfg = ExperimentConfig.default()
    assert cfg.system() == ex.SystemModel()
    assert cfg.receiver() is PolState.R
    assert len(cfg.sweep_grid()) == 251


def test_every_key_carries_a_unit_or_is_dimensionless():
    cfg = ExperimentConfig.default()
    units = ("_ma", "_w", "_nm", "_ghz", "_db", "_baud", "_km", "_s", "_cps", "_dbm", "_ps",
             "_a_per_w", "_bytes", "_bits", "_db_per_km")
    dimensionless = {"fwhm_nm", "efficiency", "target_ber", "window_fraction", "sift_factor",
                     "signal_window_acceptance", "depolarization_qber_floor", "qber_threshold",
                     "distillation", "ec_efficiency", "fixed_fraction", "mu", "qber",
                     "crossing_qber", "seed", "n_symbols", "frame_length", "pattern_offset",
                     "receiver_basis", "receiver_bit", "batch_symbols", "workers", "phase_bins",
                     "sync_score_floor", "length_km"}
    for section, body in cfg.values.items():
        for key in body:
            assert key in dimensionless or key.endswith(units), f"{section}.{key}"


def test_unknown_key_named():
    with pytest.raises(ConfigError, match=r"spad\.effciency"):
        ExperimentConfig.from_text("[spad]\neffciency = 0.1\n")


def test_unknown_section_named():
    with pytest.raises(ConfigError, match="detector"):
        ExperimentConfig.from_text("[detector]\nefficiency = 0.1\n")


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        ExperimentConfig.from_text("[spad]\nefficiency = = 0.1\n")


def test_type_checked():
    with pytest.raises(ConfigError, match=r"spad\.dark_rate_cps"):
        ExperimentConfig.from_text('[spad]\ndark_rate_cps = "many"\n')
    with pytest.raises(ConfigError, match=r"montecarlo\.seed"):
        ExperimentConfig.from_text("[montecarlo]\nseed = 1.5\n")


def test_integers_accepted_for_floats():
    cfg = ExperimentConfig.from_text("[spad]\ndark_rate_cps = 100\n")
    assert cfg.system().spad.dark_rate_cps == 100.0


def test_invalid_value_is_config_error():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[spad]\nefficiency = 2.0\n").system()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text('[protocol]\ndistillation = "magic"\n').distillation()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[sweep]\nrop_step_db = 0.0\n").sweep_grid()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text('[montecarlo]\nreceiver_basis = "linear"\n').receiver()


def test_calibration_overrides():
    cfg = ExperimentConfig.from_text("[calibration]\nraman_beta = 0.0\n")
    cal = ex.calibrate_all(cfg.system())
    assert cfg.apply_overrides(cal).raman_beta == 0.0
    assert cfg.apply_overrides(cal).tx_loss_db == cal.tx_loss_db
    with pytest.raises(ConfigError, match="calibration.beta"):
        ExperimentConfig.from_text("[calibration]\nbeta = 0.0\n")


def test_override_keeps_validation():
    cfg = ExperimentConfig.default().override("anchors", mu=0.01)
    assert cfg.system().anchors.mu == 0.01
    with pytest.raises(ConfigError):
        ExperimentConfig.default().override("anchors", mew=0.01)


def test_distillation_choices():
    cfg = ExperimentConfig.from_text('[protocol]\ndistillation = "fixed_fraction"\n')
    assert cfg.distillation().variant == "fixed_fraction"
    assert cfg.distillation().parameter == 0.2797


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        ExperimentConfig.load(tmp_path / "nope.toml")


def test_shipped_file_is_documented():
    text = default_text()
    assert text.count("[") >= 10 and "#" in text
