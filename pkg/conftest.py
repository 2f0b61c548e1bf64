import os

# Loggers are created at import time; keep test runs off the logs/ directory
os.environ['EPOCHSPEC_LOG_DIR'] = ''
os.environ.setdefault('EPOCHSPEC_LOG_LEVEL', 'WARNING')

import pytest  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_weight_cache(tmp_path_factory, monkeypatch):
    """One weight cache per session so tests never touch data/weight_cache.json"""
    cache_dir = tmp_path_factory.getbasetemp() / 'weight-cache'
    cache_dir.mkdir(exist_ok=True)
    monkeypatch.setenv('EPOCHSPEC_CACHE_PATH', str(cache_dir / 'weights.json'))
    yield
