import pytest

from sirpursuit.config import CONFIG_ENV, DEFAULTS, Config, coerce, parse_config
from sirpursuit.dictionary import GridSpec
from sirpursuit.errors import ConfigurationError


def test_defaults_match_default_grid():
    cfg = Config.load()
    assert cfg.grid_spec() == GridSpec()
    assert cfg["pursuit.delta_r2_stop"] == 0.01 and cfg["pursuit.max_components"] == 20


def test_parse_and_precedence(tmp_path, monkeypatch):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\npursuit.max_components = 7   # inline\nrun.workers=2\n\npursuit.allow_negative = yes\n")
    cfg = Config.load(path, {"run.workers": "4"})
    assert cfg["pursuit.max_components"] == 7
    assert cfg["run.workers"] == 4
    assert cfg["pursuit.allow_negative"] is True
    monkeypatch.setenv(CONFIG_ENV, str(path))
    assert Config.load()["pursuit.max_components"] == 7


@pytest.mark.parametrize(
    "text, message",
    [
        ("pursuit.max_component = 3", "unknown configuration key"),
        ("pursuit.max_components 3", "expected 'section.key = value'"),
        ("pursuit.max_components = three", "cannot parse"),
        ("pursuit.allow_negative = maybe", "cannot parse"),
    ],
)
def test_parse_errors(text, message):
    with pytest.raises(ConfigurationError, match=message):
        parse_config(text, "x.cfg")


def test_missing_file_is_an_error(tmp_path):
    with pytest.raises(ConfigurationError):
        Config.load(tmp_path / "nope.cfg")


def test_coerce_types():
    assert coerce("sir.step_days", "0.1") == 0.1
    assert coerce("grid.theta_points", "5") == 5
    assert coerce("matching.method", " optimal ") == "optimal"


def test_rate_reported_default_and_list():
    cfg = Config.load()
    assert cfg.rate_reported("Influenza A(H3)") == 1
    assert cfg.rate_reported("RSV") == 0
    cfg = Config.load(overrides={"evaluation.rate_reported": "RSV, hMPV"})
    assert cfg.rate_reported("hMPV") == 1 and cfg.rate_reported("Influenza B") == 0


def test_digest_and_dump_round_trip(tmp_path):
    cfg = Config.load(overrides={"grid.theta_points": "3"})
    path = tmp_path / "dump.cfg"
    path.write_text(cfg.dump())
    again = Config.load(path)
    assert again == cfg and again.digest() == cfg.digest()
    assert Config.load().digest() != cfg.digest()
    assert set(cfg) == set(DEFAULTS)
