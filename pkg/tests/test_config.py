import logging

import pytest

from config import DEFAULT_DMIN, DEFAULT_EPS_S, STABILITY_DMIN_GRID
from exceptions import ConfigError
from models.run_config import RunConfig


def write(tmp_path, text):
    path = tmp_path / 'run.conf'
    path.write_text(text)
    return path


def test_defaults_validate():
    config = RunConfig().validate()
    assert config.kernel == 'mq'
    assert config.eps_s == DEFAULT_EPS_S
    assert config.dmin == DEFAULT_DMIN
    assert config.dmin_grid == STABILITY_DMIN_GRID
    assert config.kernel_spec(0.1).shape == pytest.approx(DEFAULT_EPS_S / 0.1)


def test_small_shape_parameter_needs_opt_in(caplog):
    with pytest.raises(ConfigError):
        RunConfig(eps_s=0.1).validate()
    with caplog.at_level(logging.WARNING):
        RunConfig(eps_s=0.1, allow_small_eps=True).validate()
    assert 'double precision' in caplog.text


@pytest.mark.parametrize('changes', [
    {'kernel': 'phs4'},
    {'eps_s': -1.0},
    {'poly': -2},
    {'mi': 0},
    {'dmin': 1.2},
    {'dmin_grid': (0.1, -0.1)},
    {'eps_grid': (0.0,)},
    {'spacing': 0.0},
    {'domain': 'square'},
    {'mode': 'all'},
    {'arrangement': 'hex7'},
    {'workers': 0},
    {'alpha_samples': 1},
    {'n_iter': 0},
    {'perturb': -0.5},
    {'log_level': 'chatty'},
])
def test_invalid_values_rejected(changes):
    with pytest.raises(ConfigError):
        RunConfig(**changes).validate()


def test_values_are_normalized():
    config = RunConfig(mode='SELECT', domain='Disk', log_level='debug', eps_grid=[1, 2])
    assert (config.mode, config.domain, config.log_level) == ('select', 'disk', 'DEBUG')
    assert config.eps_grid == (1.0, 2.0)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({'epsilon': 0.5})


def test_from_dict_skips_missing_values():
    config = RunConfig.from_dict({'eps-s': None, 'dmin': 0.4, 'spacing': None})
    assert config.eps_s == DEFAULT_EPS_S
    assert config.dmin == 0.4
    assert config.spacing is None


def test_round_trip_through_dict():
    config = RunConfig(kernel='ga', eps_s=0.8, dmin_grid=(0.3, 0.6))
    assert RunConfig.from_dict(config.to_dict()) == config


def test_from_file_with_overrides(tmp_path):
    path = write(tmp_path, "\n".join([
        "# stability run",
        "kernel = imq",
        "eps-s = 0.6   # dimensionless",
        "poly = 3",
        "dmin_grid = 0.5, 0.7,",
        "skip_singular = yes",
        "",
        "mode = select",
    ]))
    config = RunConfig.from_file(path, overrides={'poly': 2, 'mode': None}).validate()
    assert config.kernel == 'imq'
    assert config.eps_s == 0.6
    assert config.poly == 2
    assert config.dmin_grid == (0.5, 0.7)
    assert config.skip_singular is True
    assert config.mode == 'select'


@pytest.mark.parametrize('text', [
    "poly = two",
    "skip_singular = maybe",
    "kernel mq",
    "colour = blue",
])
def test_from_file_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        RunConfig.from_file(write(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / 'absent.conf')
