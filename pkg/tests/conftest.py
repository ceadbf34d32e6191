import pytest

from biohub.bus.broker import Broker
from biohub.bus.client import BusClient


@pytest.fixture
def broker():
    b = Broker("127.0.0.1:0").start()
    yield b
    b.close()


@pytest.fixture
def addr(broker):
    return f"127.0.0.1:{broker.port}"


@pytest.fixture
def make_client(addr):
    clients = []

    def _make():
        c = BusClient(addr)
        clients.append(c)
        return c

    yield _make
    for c in clients:
        c.close()
