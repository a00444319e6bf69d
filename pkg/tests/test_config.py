from dataclasses import fields

import pytest

from dlgn.config import RunConfig, format_config, parse_config
from dlgn.init import InitKind
from dlgn.network import ConfigError, Parametrization


def test_defaults_echo_every_key():
    text = format_config(RunConfig())
    keys = [line.split(" = ")[0] for line in text.splitlines()]
    assert keys == [f.name for f in fields(RunConfig)]


def test_roundtrip_of_echo():
    cfg = parse_config("""
        # comment
        dataset = csv:/tmp/x.csv
        parametrization = op
        init = and_or
        init_sigma = 0.3
        tau = 3.5
        histogram_layers = 1,3
        residual_start = 0.1
        residual_end = 0.4
    """)
    text = format_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert format_config(again) == text


@pytest.mark.parametrize("text,needle", [
    ("bogus = 1", "unknown key"),
    ("steps = ten", "steps"),
    ("parametrization = lut", "parametrization"),
    ("init = sometimes", "init"),
    ("steps 5", "key = value"),
    ("steps = 1\nsteps = 2", "duplicate"),
])
def test_bad_config_rejected(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


def test_derived_configs():
    cfg = parse_config("parametrization = op\ninit = gaussian\nlayer_width = 12\nbase_layers = 2\n"
                       "depth_scale = 2\nresidual_start = 0.1\nresidual_end = 0.5")
    nc = cfg.network_config(3)
    assert nc.parametrization is Parametrization.OP
    assert nc.init.kind is InitKind.GAUSSIAN and nc.init.sigma == 1.0
    assert nc.n_layers == 4 and nc.residual_fraction == (0.1, 0.5)
    assert cfg.train_config().learning_rate == 0.01


def test_and_or_alias():
    nc = parse_config("init = and_or").network_config(2)
    assert nc.init.targets == (2, 8)


def test_iwp_weight_decay_rejected():
    with pytest.raises(ConfigError):
        parse_config("weight_decay = 0.01").train_config()


def test_indivisible_width_rejected():
    with pytest.raises(ConfigError):
        parse_config("layer_width = 10").network_config(3)
