"""
Tests for INI loading and the per-solver config builders.
"""

import pytest

from simplex_unmix import config as unmix_config
from simplex_unmix.errors import ConfigError


def _write(tmp_path, text):
    path = tmp_path / 'unmix.conf'
    path.write_text(text)
    return unmix_config.load_config(str(path))


def test_missing_file_gives_defaults(tmp_path):
    config = unmix_config.load_config(str(tmp_path / 'absent.conf'))
    assert config.sections() == []
    cfg = unmix_config.sisal_config(config)
    assert cfg.lam == 0.1
    assert cfg.admm.max_iter == 200


def test_environment_variable_path(tmp_path, monkeypatch):
    path = tmp_path / 'env.conf'
    path.write_text('[h2sisal]\nlambda = 3\n')
    monkeypatch.setenv('SIMPLEX_UNMIX_CONFIG', str(path))
    assert unmix_config.h2_config(unmix_config.load_config()).lam == 3.0


def test_sections_are_read(tmp_path):
    config = _write(tmp_path, """
[sisal]
lambda = 0.5
line_search = legacy

[admm]
rho = 2.0
max_iter = 50

[h2sisal]
extrapolate = no
anchor = current

[prsisal]
tau = 0.25
outer_max = 3
""")
    sisal = unmix_config.sisal_config(config)
    assert sisal.lam == 0.5
    assert sisal.line_search == 'legacy'
    assert sisal.admm.rho == 2.0
    assert sisal.admm.max_iter == 50
    h2 = unmix_config.h2_config(config)
    assert h2.extrapolate is False
    assert h2.anchor == 'current'
    pr = unmix_config.pr_config(config)
    assert pr.tau == 0.25
    assert pr.outer_max == 3


def test_overrides_beat_the_file(tmp_path):
    config = _write(tmp_path, '[sisal]\nlambda = 0.5\n[admm]\nmax_iter = 50\n')
    cfg = unmix_config.sisal_config(config, {'lambda': 2.0, 'admm_max_iter': 10, 'mu': None})
    assert cfg.lam == 2.0
    assert cfg.admm.max_iter == 10
    assert cfg.mu == 1.0


def test_nested_admm_overrides():
    cfg = unmix_config.sisal_config(None, {'admm': {'tol_primal': 1e-8}})
    assert cfg.admm.tol_primal == 1e-8


def test_unknown_option():
    with pytest.raises(ConfigError, match='unknown sisal option'):
        unmix_config.sisal_config(None, {'lamda': 1.0})


def test_bad_values(tmp_path):
    with pytest.raises(ConfigError):
        unmix_config.h2_config(_write(tmp_path, '[h2sisal]\nmax_iter = lots\n'))
    with pytest.raises(ConfigError):
        unmix_config.h2_config(_write(tmp_path, '[h2sisal]\nextrapolate = maybe\n'))
    with pytest.raises(ConfigError):
        unmix_config.pr_config(None, {'mode': 'newton'})
    with pytest.raises(ConfigError):
        unmix_config.sisal_config(None, {'lam': -1.0})


def test_init_config():
    assert unmix_config.init_config().kappa == 1.2
    with pytest.raises(ConfigError):
        unmix_config.init_config(None, {'kappa': 0.9})


def test_worker_cap(monkeypatch):
    monkeypatch.delenv('SIMPLEX_UNMIX_THREADS', raising=False)
    assert unmix_config.worker_cap() is None
    monkeypatch.setenv('SIMPLEX_UNMIX_THREADS', '3')
    assert unmix_config.worker_cap() == 3
    monkeypatch.setenv('SIMPLEX_UNMIX_THREADS', '0')
    with pytest.raises(ConfigError):
        unmix_config.worker_cap()


def test_bench_and_logging_settings(tmp_path):
    assert unmix_config.bench_defaults() == {'parallel': 1, 'seed_base': 0}
    config = _write(tmp_path, '[bench]\nparallel = 4\n[logging]\nlevel = DEBUG\nremote_batch_size = 25\n')
    assert unmix_config.bench_defaults(config)['parallel'] == 4
    settings = unmix_config.logging_settings(config)
    assert settings == {'level': 'DEBUG', 'remote_batch_size': 25, 'remote_flush_interval': 5}
