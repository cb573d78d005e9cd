import random
from dataclasses import dataclass, field

import pytest

from trustmarket.auth import AuthService, Outbox
from trustmarket.broker import Broker
from trustmarket.client import Client
from trustmarket.company import CompanyNode, CompanyProfile
from trustmarket.crypto import KeyRegistry
from trustmarket.network import SimulatedNetwork


@dataclass
class World:
    net: SimulatedNetwork
    auth: AuthService
    broker: Broker
    root: object = None
    companies: dict = field(default_factory=dict)
    clients: dict = field(default_factory=dict)

    def company(self, cid, register=True, **profile):
        p = CompanyProfile(cid, profile.pop("name", f"Company {cid}"), **profile)
        if register:
            self.broker.register_company(p)
        node = CompanyNode(p, self.net, "broker", self.root / "companies" / cid if self.root else None)
        self.net.connect("broker", cid)
        self.companies[cid] = node
        return node

    def client(self, uid, login=True):
        c = Client(uid, self.net)
        self.net.connect("broker", uid)
        c.register(f"{uid}@mail.test")
        if login:
            c.login(self.auth.outbox.latest_otp(uid))
        self.clients[uid] = c
        return c

    def session_with(self, uid, cid):
        return self.broker.select_company(self.clients[uid].session, cid)


def make_world(seed=0, root=None):
    rng = random.Random(seed)
    net = SimulatedNetwork(KeyRegistry(root / "kds" / "registry.rec" if root else None), rng)
    auth = AuthService(rng, Outbox(root / "outbox" if root else None), root / "auth" / "accounts.rec" if root else None, clock=lambda: net.now)
    broker = Broker(net, auth, root / "broker" if root else None)
    return World(net, auth, broker, root)


@pytest.fixture
def world():
    return make_world()


@pytest.fixture
def disk_world(tmp_path):
    return make_world(root=tmp_path)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
