"""Fixtures: in-process servers on ephemeral ports."""

import pytest

from coz_server import ModelServer, ServerConfig


@pytest.fixture
def server():
    srv = ModelServer(ServerConfig(port=0,
                                   stub_metrics={"niqe": 9.8260, "musiq": 42.5}))
    srv.start()
    yield srv
    srv.close()


@pytest.fixture
def sr_only_server():
    srv = ModelServer(ServerConfig(port=0, roles=("sr",)))
    srv.start()
    yield srv
    srv.close()
