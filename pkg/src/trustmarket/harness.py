"""Deterministic scenario runner.

Scenario files are line oriented, one step per line, ``#`` starts a comment,
fields are shell-quoted::

    seed 7
    register_company A "Company A" f=0.5 w=1 N=20
    register_server A web-1 SERVER
    register_user alice alice@shop.test
    login alice
    select alice A
    transact alice A "2 x walnut desk" 410.00
    rate alice A positive server=web-1
    inject_fault A drop-notifications
    select alice A expect=CompanyUnavailable
    list

Every step accepts ``expect=<ErrorName>``: the step must then fail with that
error, and the failure is logged instead of aborting the run.
"""

from __future__ import annotations

import csv
import io
import random
import shlex
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from trustmarket import crypto, trust
from trustmarket.auth import AuthService, Outbox
from trustmarket.broker import Broker, BrokeredSession, Listing
from trustmarket.client import Client
from trustmarket.company import CompanyNode, CompanyProfile, ServerKind
from trustmarket.errors import NoBrokeredSession, NoTransactions, ScriptError, StepError, TrustMarketError
from trustmarket.network import EventLog, SimulatedNetwork

BROKER_ID = "broker"
FAULTS = ("drop-notifications", "restore", "lose-keystore")

# op -> (min positional, max positional, allowed keyword fields)
_GRAMMAR: dict[str, tuple[int, int, frozenset[str]]] = {
    "register_company": (2, 2, frozenset({"f", "w", "N"})),
    "register_server": (2, 3, frozenset()),
    "register_user": (2, 2, frozenset()),
    "login": (1, 1, frozenset({"otp"})),
    "select": (2, 2, frozenset()),
    "transact": (4, 4, frozenset()),
    "rate": (3, 3, frozenset({"server"})),
    "inject_fault": (2, 2, frozenset()),
    "list": (0, 0, frozenset()),
}


@dataclass(frozen=True)
class Step:
    line: int
    op: str
    args: tuple[str, ...]
    options: dict[str, str] = field(default_factory=dict)

    @property
    def expect(self) -> str | None:
        return self.options.get("expect")


@dataclass(frozen=True)
class ScenarioScript:
    seed: int
    steps: tuple[Step, ...]


def _split(text: str, lineno: int) -> list[str]:
    try:
        return shlex.split(text, comments=True)
    except ValueError as exc:
        raise ScriptError(str(exc), lineno) from None


def parse_script(text: str, seed: int = 0) -> ScenarioScript:
    """Parse and statically check a scenario; ``seed`` applies if the script has no ``seed`` line."""
    steps: list[Step] = []
    companies: set[str] = set()
    users: set[str] = set()
    servers: set[tuple[str, str]] = set()
    script_seed: int | None = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        tokens = _split(raw, lineno)
        if not tokens:
            continue
        op, rest = tokens[0], tokens[1:]
        if op == "seed":
            if steps or script_seed is not None or len(rest) != 1:
                raise ScriptError("'seed <int>' must appear once, before any step", lineno)
            try:
                script_seed = int(rest[0])
            except ValueError:
                raise ScriptError(f"seed must be an integer, got {rest[0]!r}", lineno) from None
            continue
        if op not in _GRAMMAR:
            raise ScriptError(f"unknown step {op!r}", lineno)

        args, options = [], {}
        for tok in rest:
            key, sep, value = tok.partition("=")
            if sep and key.isidentifier():
                options[key] = value
            else:
                args.append(tok)
        lo, hi, allowed = _GRAMMAR[op]
        if not lo <= len(args) <= hi:
            want = str(lo) if lo == hi else f"{lo}-{hi}"
            raise ScriptError(f"{op} takes {want} positional fields, got {len(args)}", lineno)
        bad = set(options) - allowed - {"expect"}
        if bad:
            raise ScriptError(f"{op} does not accept {', '.join(sorted(bad))}", lineno)

        def need_company(cid: str) -> None:
            if cid not in companies:
                raise ScriptError(f"undeclared company {cid!r}", lineno)

        def need_user(uid: str) -> None:
            if uid not in users:
                raise ScriptError(f"undeclared user {uid!r}", lineno)

        if op == "register_company":
            companies.add(args[0])
            for k in ("f", "w"):
                if k in options:
                    _number(options[k], k, lineno, float)
            if "N" in options:
                _number(options["N"], "N", lineno, int)
        elif op == "register_server":
            need_company(args[0])
            if len(args) == 3 and args[2] not in ServerKind.__members__:
                raise ScriptError(f"server kind must be SERVER or DATABASE, got {args[2]!r}", lineno)
            servers.add((args[0], args[1]))
        elif op == "register_user":
            users.add(args[0])
        elif op == "login":
            need_user(args[0])
        elif op in ("select", "transact", "rate"):
            need_user(args[0])
            need_company(args[1])
            if op == "transact":
                _number(args[3], "amount", lineno, float)
            if op == "rate":
                if args[2] not in ("positive", "negative"):
                    raise ScriptError(f"outcome must be positive or negative, got {args[2]!r}", lineno)
                if "server" in options and (args[1], options["server"]) not in servers:
                    raise ScriptError(f"undeclared server {options['server']!r} for {args[1]}", lineno)
        elif op == "inject_fault":
            need_company(args[0])
            if args[1] not in FAULTS:
                raise ScriptError(f"fault must be one of {', '.join(FAULTS)}", lineno)
        steps.append(Step(lineno, op, tuple(args), options))

    return ScenarioScript(script_seed if script_seed is not None else seed, tuple(steps))


def _number(text: str, name: str, lineno: int, kind: type) -> Any:
    try:
        return kind(text)
    except ValueError:
        raise ScriptError(f"{name} must be a number, got {text!r}", lineno) from None


def load_script(path: str | Path, seed: int = 0) -> ScenarioScript:
    """Load a scenario from ``path``, falling back to a bundled scenario of that name."""
    p = Path(path)
    if p.exists():
        return parse_script(p.read_text(encoding="utf-8"), seed)
    return parse_script(bundled_scenario_text(str(path)), seed)


def bundled_scenarios() -> list[str]:
    root = resources.files("trustmarket") / "scenarios"
    return sorted(e.name[: -len(".scn")] for e in root.iterdir() if e.name.endswith(".scn"))


def bundled_scenario_text(name: str) -> str:
    name = name[:-4] if name.endswith(".scn") else name
    res = resources.files("trustmarket") / "scenarios" / f"{name}.scn"
    if not res.is_file():
        raise ScriptError(f"no scenario file or bundled scenario named {name!r}")
    return res.read_text(encoding="utf-8")


@dataclass(frozen=True)
class MetricsRow:
    index: int
    client_id: str
    company_id: str
    duration_s: float
    logical_steps: int


METRICS_HEADER = ("index", "client", "company", "duration_s", "logical_steps")


def metrics_to_tsv(rows: list[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for m in rows:
        w.writerow((m.index, m.client_id, m.company_id, repr(m.duration_s), m.logical_steps))
    return buf.getvalue()


def read_metrics(path: str | Path) -> list[MetricsRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        return [
            MetricsRow(int(r["index"]), r["client"], r["company"], float(r["duration_s"]), int(r["logical_steps"]))
            for r in reader
        ]


def timing_report(metrics: list[MetricsRow]) -> str:
    """Per-transaction durations in a two-column person / time table."""
    if not metrics:
        raise NoTransactions("timing report needs at least one completed transaction")
    lines = ["Person No\tTransaction Time (Full Process)"]
    lines += [f"{m.index}\t{m.duration_s:.6f} sec" for m in metrics]
    return "\n".join(lines) + "\n"


class Simulation:
    """The whole architecture wired onto one simulated network.

    The world is built lazily on the first step, so an empty script leaves
    an empty event log.
    """

    def __init__(self, seed: int, out_dir: str | Path | None = None, ack_timeout: int = 10):
        self.seed = seed
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.ack_timeout = ack_timeout
        self.log = EventLog()
        self.metrics: list[MetricsRow] = []
        self.companies: dict[str, CompanyNode] = {}
        self.clients: dict[str, Client] = {}
        self.brokered: dict[tuple[str, str], BrokeredSession] = {}
        self.rate_steps = 0
        self.invoice_plaintexts: list[str] = []
        self._consumed_otp: dict[str, str] = {}
        self._built = False

    def _path(self, *parts: str) -> Path | None:
        return self.out_dir.joinpath(*parts) if self.out_dir is not None else None

    def _build(self) -> None:
        if self._built:
            return
        self.rng = random.Random(self.seed)
        self.registry = crypto.KeyRegistry(self._path("kds", "registry.rec"))
        self.net = SimulatedNetwork(self.registry, self.rng, self.log)
        self.outbox = Outbox(self._path("outbox"))
        self.auth = AuthService(self.rng, self.outbox, self._path("auth", "accounts.rec"), clock=lambda: self.net.now)
        self.broker = Broker(self.net, self.auth, self._path("broker"), BROKER_ID, self.ack_timeout)
        self._built = True

    # -- steps -----------------------------------------------------------

    def do_register_company(self, cid: str, name: str, f: str = "0.5", w: str = "1", N: str = str(trust.DEFAULT_N)) -> None:
        profile = CompanyProfile(cid, name, float(f), float(w), int(N))
        self.broker.register_company(profile)
        node = CompanyNode(profile, self.net, BROKER_ID, self._path("companies", cid))
        self.net.connect(BROKER_ID, cid)
        self.companies[cid] = node

    def do_register_server(self, cid: str, server: str, kind: str = "SERVER") -> None:
        self.companies[cid].add_server(server, kind)

    def do_register_user(self, uid: str, mail: str) -> None:
        client = self.clients.get(uid)
        if client is None:
            client = Client(uid, self.net, BROKER_ID)
            self.net.connect(BROKER_ID, uid)
            self.clients[uid] = client
        client.register(mail)

    def do_login(self, uid: str, otp: str | None = None) -> None:
        if otp is None:
            otp = self.outbox.latest_otp(uid)
        elif otp == "previous":
            otp = self._consumed_otp.get(uid, "")
        self.clients[uid].login(otp)
        self._consumed_otp[uid] = otp

    def do_select(self, uid: str, cid: str) -> None:
        self.brokered[(uid, cid)] = self.broker.select_company(self.clients[uid].session, cid)

    def do_transact(self, uid: str, cid: str, summary: str, amount: str) -> None:
        brokered = self.brokered.get((uid, cid))
        if brokered is None:
            raise NoBrokeredSession(f"{uid} has not selected {cid}")
        self.invoice_plaintexts += [summary, amount]
        steps_before = self.net.delivered
        started = time.perf_counter()
        invoice_id = self.clients[uid].transact(brokered, summary, amount)
        elapsed = time.perf_counter() - started
        self.metrics.append(MetricsRow(len(self.metrics) + 1, uid, cid, elapsed, self.net.delivered - steps_before))
        self.log.emit(self.net.now, "transaction", client=uid, company=cid, invoice=invoice_id)

    def do_rate(self, uid: str, cid: str, outcome: str, server: str | None = None) -> None:
        node = self.companies[cid]
        if server is not None:
            node.rate_server(server, outcome)
        node.report_evidence(outcome, uid)
        self.rate_steps += 1

    def do_inject_fault(self, cid: str, fault: str) -> None:
        node = self.companies[cid]
        if fault == "restore":
            node.faults.clear()
        elif fault == "lose-keystore":
            if node.directory is not None:
                (node.directory / "keystore.rec").unlink(missing_ok=True)
                node.reload_stores()
            else:
                for key_id in node.keystore.ids():
                    node.keystore.delete(key_id)
        else:
            node.faults.add(fault)
        self.log.emit(self.net.now, "fault", company=cid, fault=fault)

    def do_list(self) -> None:
        for rank, row in enumerate(self.broker.list_companies(), 1):
            self.log.emit(
                self.net.now,
                "listing",
                rank=rank,
                company=row.company_id,
                T=f"{row.trust_percent:.2f}",
                P=f"{row.behavior_percent:+.2f}",
                classification=row.classification.value,
                status="unrated" if row.unrated else "rated",
            )

    def execute(self, index: int, step: Step) -> None:
        self._build()
        handler = getattr(self, "do_" + step.op)
        kwargs = {k: v for k, v in step.options.items() if k != "expect"}
        try:
            handler(*step.args, **kwargs)
        except (TrustMarketError, ValueError) as exc:
            if step.expect == type(exc).__name__:
                self.log.emit(self.net.now, "expected-error", step=index, error=type(exc).__name__)
                return
            raise StepError(index, step.line, exc) from exc
        if step.expect is not None:
            raise StepError(index, step.line, ScriptError(f"expected {step.expect} but step succeeded", step.line))

    # -- results ---------------------------------------------------------

    def listing(self) -> Listing:
        return self.broker.list_companies() if self._built else Listing()

    def ledger_evidence_total(self) -> int:
        if not self._built:
            return 0
        return sum(e.evidence.total for e in self.broker.ledger.entries.values())

    def mailed_otps(self) -> list[str]:
        return [m.otp() for m in self.outbox.messages] if self._built else []

    def write_outputs(self) -> None:
        if self.out_dir is None:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "events.log").write_text(self.log.text(), encoding="utf-8")
        (self.out_dir / "listing.tsv").write_text(self.listing().to_tsv(), encoding="utf-8")
        (self.out_dir / "metrics.tsv").write_text(metrics_to_tsv(self.metrics), encoding="utf-8")


@dataclass
class ScenarioResult:
    events: list[str]
    metrics: list[MetricsRow]
    listing: Listing
    simulation: Simulation


def run_scenario(script: ScenarioScript, out_dir: str | Path | None = None, ack_timeout: int = 10) -> ScenarioResult:
    sim = Simulation(script.seed, out_dir, ack_timeout)
    for index, step in enumerate(script.steps):
        sim.execute(index, step)
    sim.write_outputs()
    return ScenarioResult(list(sim.log.lines), list(sim.metrics), sim.listing(), sim)


# never scanned: the outbox is the simulated mail network, not server-side storage
CLIENT_SIDE_DIRS = ("outbox",)


def scan_for_leaks(out_dir: str | Path, secrets: list[str]) -> list[tuple[Path, str]]:
    """Return every (file, secret) pair where a secret appears in server-side persisted bytes."""
    out_dir = Path(out_dir)
    needles = [(s, s.encode("utf-8")) for s in set(secrets) if s]
    hits = []
    for path in sorted(out_dir.rglob("*")):
        if not path.is_file() or path.relative_to(out_dir).parts[0] in CLIENT_SIDE_DIRS:
            continue
        data = path.read_bytes()
        hits += [(path, s) for s, b in needles if b in data]
    return hits
