"""Deterministic discrete-step execution kernel.

Time advances in integer steps. A step runs four phases:

  1. scheduled directives (scale, fault, inject), in declaration order
     per category;
  2. delivery of every message whose arrival step is due, in the total
     order (arrival step, channel id, sequence number);
  3. one activation per delivered message, in the same total order, each
     popping the head of the receiving replica's per-port FIFO;
  4. a retirement sweep that removes drained replicas marked for
     shrinking.

All choice points (replica selection, token binding, escalation) are
functions of this order plus the scenario seed, so a run is reproducible
event for event.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from random import Random

from .analyzer import OPEN, ROOT_PATH, ChannelSpec, InstanceSpec, RuntimeTopology
from .behaviors import (
    MODE_BROADCAST,
    MODE_ONE,
    ActivationContext,
    Behavior,
    Emit,
    Raise,
    instantiate,
)
from .model import IN, OUT, ArchitectureModel, Record

SEND = "SEND"
DELIVER = "DELIVER"
MINT = "MINT"
STRIP = "STRIP"
BIND = "BIND"
RAISE = "RAISE"
RESTART = "RESTART"
ESCALATE = "ESCALATE"
SCALE = "SCALE"
FATAL = "FATAL"

RESUME = "resume"
RESTART_STRATEGY = "restart"
ESCALATE_STRATEGY = "escalate"
STRATEGIES = (RESUME, RESTART_STRATEGY, ESCALATE_STRATEGY)

# Tokens are (context name, serial) pairs; serials count up per context.


@dataclass(frozen=True)
class Event:
    step: int
    kind: str
    subject: str
    seq: int | None
    tokens: tuple[tuple[str, int], ...]
    payload: str
    # source channel for message events; kept out of the rendered trace
    channel: str = ""


@dataclass
class Message:
    channel: ChannelSpec
    seq: int
    payload: Record
    tokens: tuple[tuple[str, int], ...]
    send_step: int
    arrive_step: int
    pinned: int | None = None  # replica id fixed at send time
    bind: bool = True  # broadcast copies never bind tokens


@dataclass
class Replica:
    rid: int
    state: object
    rng: Random
    queues: dict[str, deque] = field(default_factory=dict)
    held: set = field(default_factory=set)
    retiring: bool = False


class Group:
    """All replicas of one atomic instance; size 1 unless replicating."""

    def __init__(self, inst: InstanceSpec, behavior: Behavior | None, seed: int):
        self.inst = inst
        self.path = inst.path
        self.behavior = behavior
        self.seed = seed
        self.replicas: dict[int, Replica] = {}
        self.next_rid = 0
        self.rr = 0  # round-robin cursor, advanced only on round-robin picks
        self.target = 1
        self.grow(1)

    def grow(self, count: int) -> None:
        for _ in range(count):
            rid = self.next_rid
            self.next_rid += 1
            state = self.behavior.initial_state() if self.behavior else None
            rng = Random(f"{self.seed}:{self.path}#{rid}")
            queues = {
                p.name: deque() for p in self.inst.type_def.ports if p.direction == IN
            }
            self.replicas[rid] = Replica(rid, state, rng, queues)

    def live(self) -> list[Replica]:
        return [r for _, r in sorted(self.replicas.items()) if not r.retiring]

    def size(self) -> int:
        return len(self.replicas)


@dataclass(frozen=True)
class Injection:
    step: int
    port: str
    payload: Record


@dataclass(frozen=True)
class ScaleDirective:
    step: int
    path: str
    count: int


@dataclass(frozen=True)
class FaultDirective:
    step: int
    path: str
    kind: str
    rid: int | None = None  # None faults the lowest live replica


class KernelError(Exception):
    pass


class FatalUnhandled(Exception):
    def __init__(self, path: str, kind: str):
        super().__init__(f"unhandled fault '{kind}' from {path}")
        self.path = path
        self.kind = kind


class Kernel:
    def __init__(
        self,
        model: ArchitectureModel,
        topology: RuntimeTopology,
        *,
        seed: int = 0,
        strategies: dict[str, str] | None = None,
        injections: list[Injection] | None = None,
        scales: list[ScaleDirective] | None = None,
        faults: list[FaultDirective] | None = None,
        maxsteps: int = 1000,
    ):
        self.model = model
        self.topology = topology
        self.seed = seed
        self.strategies = dict(strategies or {})
        self.injections = list(injections or [])
        self.scales = list(scales or [])
        self.faults = list(faults or [])
        self.maxsteps = maxsteps

        self.groups: dict[str, Group] = {}
        for inst in topology.instances.values():
            if inst.atomic:
                behavior = (
                    instantiate(inst.type_def, model)
                    if inst.type_def.behavior is not None
                    else None
                )
                self.groups[inst.path] = Group(inst, behavior, seed)

        self.channels_from: dict[tuple[str, str], list[ChannelSpec]] = {}
        for ch in topology.channels:
            self.channels_from.setdefault((ch.source_path, ch.source_port), []).append(ch)

        self.seq_counters: dict[str, int] = {}
        self.token_counters: dict[str, int] = {}
        self.bindings: dict[tuple[str, tuple[str, int]], int] = {}
        self.in_flight: list[Message] = []
        self.events: list[Event] = []
        self.out_streams: dict[str, list[tuple[tuple, Record]]] = {
            p.name: []
            for p in topology.root.type_def.ports
            if p.direction == OUT
        }
        self.step = 0
        self.truncated = False

        self._validate_directives()

    # -- setup ------------------------------------------------------------

    def _validate_directives(self) -> None:
        root_in = {
            p.name: p.message_type
            for p in self.topology.root.type_def.ports
            if p.direction == IN
        }
        for inj in self.injections:
            if inj.port not in root_in:
                raise KernelError(f"no in port '{inj.port}' on the root component")
            if inj.payload.type_name != root_in[inj.port]:
                raise KernelError(
                    f"port '{inj.port}' carries {root_in[inj.port]}, "
                    f"not {inj.payload.type_name}"
                )
        for sc in self.scales:
            group = self.groups.get(sc.path)
            if group is None or not group.inst.replicating:
                raise KernelError(f"'{sc.path}' is not a replicating instance")
            if sc.count < 1:
                raise KernelError("replica count must be at least 1")
        for f in self.faults:
            if f.path not in self.groups:
                raise KernelError(f"'{f.path}' is not an atomic instance")
        for path, strategy in self.strategies.items():
            if path not in self.topology.instances:
                raise KernelError(f"unknown instance '{path}'")
            if strategy not in STRATEGIES:
                raise KernelError(f"unknown strategy '{strategy}'")

    # -- event helpers ----------------------------------------------------

    def _event(
        self,
        kind: str,
        subject: str,
        seq: int | None = None,
        tokens: tuple = (),
        payload: str = "-",
        channel: str = "",
    ) -> None:
        self.events.append(
            Event(self.step, kind, subject, seq, tuple(tokens), payload, channel)
        )

    # -- run loop ----------------------------------------------------------

    def run(self) -> None:
        """Execute until quiescence, a step budget, or an unhandled fault."""
        while self.step <= self.maxsteps:
            self._run_directives()
            self._deliver_and_activate()
            self._sweep()
            if not self.in_flight and not self._pending_directives():
                return
            self.step += 1
        self.truncated = True

    def _pending_directives(self) -> bool:
        return any(
            d.step > self.step
            for batch in (self.injections, self.scales, self.faults)
            for d in batch
        )

    def _run_directives(self) -> None:
        for sc in self.scales:
            if sc.step == self.step:
                self._scale(sc.path, sc.count)
        for f in self.faults:
            if f.step == self.step:
                group = self.groups[f.path]
                rid = f.rid
                if rid is None:
                    live = group.live()
                    if not live:
                        raise KernelError(f"no live replica of '{f.path}' to fault")
                    rid = live[0].rid
                self._fault(group.inst.path, rid, f.kind)
        for inj in self.injections:
            if inj.step == self.step:
                for ch in self.channels_from.get((ROOT_PATH, inj.port), []):
                    self._dispatch(ch, inj.payload, ())

    def _deliver_and_activate(self) -> None:
        due = [m for m in self.in_flight if m.arrive_step <= self.step]
        if not due:
            return
        due.sort(key=lambda m: (m.arrive_step, m.channel.id, m.seq))
        self.in_flight = [m for m in self.in_flight if m.arrive_step > self.step]
        activations: list[tuple[Group, Replica, str]] = []
        for m in due:
            ch = m.channel
            if ch.external:
                self._event(
                    DELIVER,
                    f"{ROOT_PATH}.{ch.target_port}",
                    m.seq,
                    m.tokens,
                    m.payload.render(),
                    ch.id,
                )
                self.out_streams[ch.target_port].append((m.tokens, m.payload))
                continue
            group = self.groups[ch.target_path]
            replica = self._select(group, m)
            self._event(
                DELIVER,
                f"{group.path}#{replica.rid}.{ch.target_port}",
                m.seq,
                m.tokens,
                m.payload.render(),
                ch.id,
            )
            replica.queues[ch.target_port].append(m)
            activations.append((group, replica, ch.target_port))
        for group, replica, port in activations:
            queue = replica.queues.get(port)
            if not queue:
                continue
            self._activate(group, replica, port, queue.popleft())

    def _select(self, group: Group, m: Message) -> Replica:
        if m.pinned is not None:
            replica = group.replicas.get(m.pinned)
            if replica is None:
                raise KernelError(
                    f"message pinned to missing replica {group.path}#{m.pinned}"
                )
        else:
            bound = sorted(
                tok for tok in m.tokens if (group.path, tok) in self.bindings
            )
            if bound:
                replica = group.replicas[self.bindings[(group.path, bound[0])]]
            else:
                live = group.live()
                if not live:
                    raise KernelError(f"no live replica of '{group.path}'")
                replica = live[group.rr % len(live)]
                group.rr += 1
        if m.bind and m.channel.group:
            fresh = tuple(
                tok for tok in m.tokens if (group.path, tok) not in self.bindings
            )
            if fresh:
                for tok in fresh:
                    self.bindings[(group.path, tok)] = replica.rid
                self._event(
                    BIND, f"{group.path}#{replica.rid}", m.seq, fresh, "-", m.channel.id
                )
        return replica

    def _activate(self, group: Group, replica: Replica, port: str, m: Message) -> None:
        ctx = ActivationContext(self.step, self._receiver_counts(group.inst), replica.rng)
        state, actions = group.behavior.handle(replica.state, port, m.payload, ctx)
        for act in actions:
            if isinstance(act, Raise):
                # a fault abandons the activation: no state commit, no sends
                self._fault(group.path, replica.rid, act.kind)
                return
        replica.state = state
        emitted = False
        for act in actions:
            self._send(group.path, act, m.tokens)
            emitted = True
        if not emitted:
            replica.held.update(m.tokens)

    def _receiver_counts(self, inst: InstanceSpec) -> dict[str, int]:
        counts: dict[str, int] = {}
        for p in inst.type_def.ports:
            if p.direction != OUT:
                continue
            chs = self.channels_from.get((inst.path, p.name), [])
            if len(chs) == 1:
                ch = chs[0]
                if ch.group:
                    counts[p.name] = len(self.groups[ch.target_path].live())
                else:
                    counts[p.name] = 1
            elif not chs:
                counts[p.name] = 0
        return counts

    # -- sending ------------------------------------------------------------

    def _send(self, path: str, emit: Emit, tokens: tuple) -> None:
        channels = self.channels_from.get((path, emit.port), [])
        if emit.mode == MODE_ONE:
            for ch in channels:
                self._dispatch(ch, emit.payload, tokens)
            return
        if len(channels) != 1 or not channels[0].group:
            raise KernelError(
                f"{emit.mode} through '{path}.{emit.port}' needs exactly one "
                "channel into a replica group"
            )
        ch = channels[0]
        live = self.groups[ch.target_path].live()
        if emit.mode == MODE_BROADCAST:
            for replica in live:
                self._dispatch(ch, emit.payload, tokens, pinned=replica.rid, bind=False)
        else:
            replica = live[emit.index % len(live)]
            self._dispatch(ch, emit.payload, tokens, pinned=replica.rid)

    def _dispatch(
        self,
        ch: ChannelSpec,
        payload: Record,
        tokens: tuple,
        pinned: int | None = None,
        bind: bool = True,
    ) -> None:
        seq = self.seq_counters.get(ch.id, 0) + 1
        self.seq_counters[ch.id] = seq
        toks = set(tokens)
        for action, ctx_name in ch.gates:
            if action == OPEN:
                serial = self.token_counters.get(ctx_name, 0)
                self.token_counters[ctx_name] = serial + 1
                tok = (ctx_name, serial)
                toks.add(tok)
                self._event(MINT, ch.id, seq, (tok,), "-", ch.id)
            else:
                stripped = tuple(sorted(t for t in toks if t[0] == ctx_name))
                if stripped:
                    toks.difference_update(stripped)
                    self._event(STRIP, ch.id, seq, stripped, "-", ch.id)
        final = tuple(sorted(toks))
        self._event(SEND, ch.id, seq, final, payload.render(), ch.id)
        self.in_flight.append(
            Message(ch, seq, payload, final, self.step, self.step + ch.latency, pinned, bind)
        )

    # -- supervision ---------------------------------------------------------

    def _fault(self, path: str, rid: int, kind: str) -> None:
        self._event(RAISE, f"{path}#{rid}", None, (), kind)
        child = path
        decider = path
        while True:
            strategy = self.strategies.get(decider, ESCALATE_STRATEGY)
            if strategy == RESUME:
                return
            if strategy == RESTART_STRATEGY:
                self._event(RESTART, child, None, (), kind)
                self._restart_subtree(child)
                return
            self._event(ESCALATE, decider, None, (), kind)
            if decider == ROOT_PATH:
                self._event(FATAL, ROOT_PATH, None, (), kind)
                raise FatalUnhandled(path, kind)
            child = decider
            decider = self.topology.instances[decider].parent

    def _restart_subtree(self, path: str) -> None:
        prefix = path + "/"
        for group_path, group in self.groups.items():
            if group_path != path and not group_path.startswith(prefix):
                continue
            for replica in group.replicas.values():
                replica.state = (
                    group.behavior.initial_state() if group.behavior else None
                )
                replica.held.clear()
                # queued messages survive a restart and are processed fresh

    # -- scaling ---------------------------------------------------------------

    def _scale(self, path: str, target: int) -> None:
        group = self.groups[path]
        group.target = target
        live = group.live()
        if target > len(live):
            group.grow(target - len(live))
        else:
            for replica in live[target:]:
                replica.retiring = True
        self._event(
            SCALE, path, None, (), f"target={target},size={group.size()}"
        )

    def _sweep(self) -> None:
        for group in self.groups.values():
            removed = False
            for replica in list(group.replicas.values()):
                if replica.retiring and self._drained(group, replica):
                    del group.replicas[replica.rid]
                    removed = True
            if removed:
                self._event(
                    SCALE,
                    group.path,
                    None,
                    (),
                    f"target={group.target},size={group.size()}",
                )

    def _drained(self, group: Group, replica: Replica) -> bool:
        if replica.held or any(replica.queues.values()):
            return False
        for (gpath, _tok), rid in self.bindings.items():
            if gpath == group.path and rid == replica.rid:
                return False
        for m in self.in_flight:
            if m.channel.external or m.channel.target_path != group.path:
                continue
            if m.pinned == replica.rid:
                return False
            for tok in m.tokens:
                if self.bindings.get((group.path, tok)) == replica.rid:
                    return False
        return True
