import pytest

from iruwb.config import ConfigError, RunConfig, from_dict, load_config, load_preset, loads


def test_fig1_preset():
    cfg = load_preset("fig1_15mbps")
    s = cfg.system
    assert (s.N_s, s.T_c, s.N_h, s.N_u) == (1, 0.5, 16, 0)
    assert s.bit_rate_mbps == pytest.approx(15.0)
    assert cfg.ebn0_grid == tuple(float(x) for x in range(0, 21, 2))
    assert set(cfg.engines) == {"simulation", "analysis"}


def test_users_preset_expands():
    runs = load_preset("fig2_users").runs()
    assert [r.system.N_u + 1 for r in runs] == [1, 2, 4, 8]
    assert all(r.system.bit_rate_mbps == pytest.approx(15.0) for r in runs)
    assert len({r.name for r in runs}) == 4


@pytest.mark.parametrize("name", ["awgn", "fig1_15mbps", "fig1_1mbps", "fig2_users"])
def test_presets_roundtrip(name):
    cfg = load_preset(name)
    assert from_dict(cfg.to_dict()) == cfg


def test_hop_span_violation_names_invariant():
    text = "[system]\nbit_rate_mbps = 150.0\nN_h = 16\nT_c = 0.5\n"
    with pytest.raises(ConfigError, match="T_s <= T_f"):
        loads(text)


@pytest.mark.parametrize(
    "text, match",
    [
        ("bogus = 1\n", "unknown key"),
        ("[channel]\ngamma_0 = 6.4\n", r"unknown key.*\[channel\]"),
        ("[toggles]\nnoise = false\n", "unknown key"),
        ("engines = []\n", "engines"),
        ("engines = ['oracle']\n", "unknown engines"),
        ("ebn0_grid = [4, 2]\n", "ascending"),
        ("users = [0, 2]\n", "users"),
        ("seed = -1\n", "seed"),
        ("[pulse]\nduration_ns = 1.0\n", "exceeds hop slot"),
        ("[channel]\nbeta = 2.0\n", "beta"),
    ],
)
def test_semantic_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        loads(text)


def test_parse_error_has_line_context():
    with pytest.raises(ConfigError, match=r"line 2"):
        loads("seed = 1\nname = \n", "bad.toml")


def test_grid_table_form():
    cfg = loads("ebn0_grid = { start = 0, stop = 1, step = 0.25 }\n")
    assert cfg.ebn0_grid == (0.0, 0.25, 0.5, 0.75, 1.0)


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")


def test_defaults_valid():
    cfg = loads("")
    assert cfg == RunConfig()
