"""Valence classification and adversarial schedule construction.

A scenario fixes a protocol, a driver, and one distinguished decision
operation (the TEST or the READ of the driver program). A configuration
is 0-valent if no finite extension makes the decision operation return
1, 1-valent symmetrically, and bivalent when both return values remain
reachable. Bivalence verdicts are absolute: they carry two replayable
certificate histories, one per value. Univalence verdicts are relative
to the exploration budget unless the reachable state space was exhausted
below it (or the decision already returned, which settles the matter).

On top of classification this module builds the adversarial machinery:

  * bivalent_successor: given a bivalent configuration and a forced next
    step e, search the configurations reachable without applying e for
    one where applying e lands bivalent again (shortest detour first);
  * build_hbi: iterate that against a rotating process queue, always
    forcing the oldest pending message, to produce an arbitrarily long
    schedule that keeps every process taking steps, keeps every
    traversed configuration bivalent, and (on subjects where the search
    can steer around completions) never lets any operation finish;
  * completed_implies_univalent_audit: sweep reachable configurations
    for the incriminating combination "some operation completed, yet
    still bivalent", and package each hit as a three-node history tree
    whose induced strategy check must come back negative.

Everything here is deterministic: exploration orders are canonical and
any randomness is confined to seeding the process rotation.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .checkers import (
    ExecutionTree,
    make_triple_tree,
    strong_linearization_exists,
    write_strong_linearization_exists,
)
from .model import (
    Configuration,
    NotApplicable,
    PreconditionViolated,
    SchedulingMode,
    Step,
    apply_history,
    apply_step,
    applicable,
    enabled_steps,
    initial_configuration,
)
from .protocols import BuiltProtocol, build_protocol
from .seqspec import INVOCATION, OpHistory, RESPONSE


class _Timeout:
    def __repr__(self) -> str:
        return "Timeout"


TIMEOUT = _Timeout()


@dataclass
class Scenario:
    """A runnable experiment: protocol, driver, decision op, budgets."""

    built: BuiltProtocol
    name: str
    seed: Optional[int] = None
    crash_set: tuple = ()
    rotation: Optional[tuple] = None
    fair_bound: int = 240
    valence_depth: int = 8
    probe_depth: int = 3  # fair-probe shallow reorderings during classification
    crash_probes: bool = True  # also probe single-crash fair schedules
    avoid_completions: bool = True
    _absolute: dict = field(default_factory=dict, repr=False, compare=False)
    _bounded: dict = field(default_factory=dict, repr=False, compare=False)
    _fair_memo: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def system(self):
        return self.built.system

    @property
    def n(self) -> int:
        return self.built.system.num_processes

    @property
    def decision_process(self) -> Optional[int]:
        return self.built.decision_process

    @property
    def decision_op(self) -> Optional[str]:
        return self.built.decision_op

    def initial(self) -> Configuration:
        return initial_configuration(self.system)

    def decided(self, config: Configuration) -> Optional[int]:
        """Value the decision operation returned in config, if it has."""
        if self.decision_op is None:
            return None
        for ev in reversed(config.events):
            if (
                ev.kind == RESPONSE
                and ev.process == self.decision_process
                and ev.op.name == self.decision_op
            ):
                return ev.value
        return None

    def vkey(self, config: Configuration) -> tuple:
        """Behavioral identity: forward core plus decision status.

        Raw values rather than digests: states and payload tuples hash
        by value and the frozensets cache their own hashes, which beats
        re-encoding the whole configuration on every dedup probe.
        """
        return (config.core_key(), self.decided(config))


def build_scenario(protocol: str = "naive-tos", n: Optional[int] = None, **kw) -> Scenario:
    built = build_protocol(protocol, n)
    return Scenario(built=built, name=protocol, **kw)


def completed_count(config: Configuration) -> int:
    return sum(1 for ev in config.events if ev.kind == RESPONSE)


def pending_count(config: Configuration) -> int:
    invoked = sum(1 for ev in config.events if ev.kind == INVOCATION)
    return invoked - completed_count(config)


def op_history_of(config: Configuration) -> OpHistory:
    return OpHistory(config.events)


# --- fair schedules ---------------------------------------------------------


@dataclass
class FairRun:
    history: tuple
    value: object  # 0 | 1 | TIMEOUT
    final: Configuration


def _stable(a: Configuration, b: Configuration) -> bool:
    return a.states == b.states and a.buffer == b.buffer and a.channels == b.channels


def _fair_run(scenario: Scenario, config: Configuration, live, bound: int) -> FairRun:
    """Round-robin over live processes, oldest message first, until the
    decision returns, the system stops changing, or the bound is hit."""
    system = scenario.system
    v = scenario.decided(config)
    if v is not None:
        return FairRun((), v, config)
    live = [p for p in live if p not in scenario.crash_set]
    if not live:
        return FairRun((), TIMEOUT, config)
    history: list = []
    current = config
    steps = 0
    while steps < bound:
        before = current
        for p in live:
            step = enabled_steps(current, p, SchedulingMode.EARLIEST_ONLY)[0]
            current = apply_step(current, step, system)
            history.append(step)
            steps += 1
            v = scenario.decided(current)
            if v is not None:
                return FairRun(tuple(history), v, current)
            if steps >= bound:
                break
        if _stable(before, current):
            break  # quiescent: nothing will ever change again
    return FairRun(tuple(history), TIMEOUT, current)


def fair_completion(
    scenario: Scenario,
    config: Configuration,
    crashed: Optional[int] = None,
    bound: Optional[int] = None,
) -> FairRun:
    """Fair round-robin schedule with at most one crashed process."""
    bound = scenario.fair_bound if bound is None else bound
    live = [p for p in range(scenario.n) if p != crashed]
    return _fair_run(scenario, config, live, bound)


def staged_probe(scenario: Scenario, config: Configuration, hold: int) -> FairRun:
    """Hold one process back until the rest quiesce, then run everyone.

    Fair overall (the held process still takes infinitely many steps in
    the limit); exists to harvest order-dependent decision values.
    """
    bound = scenario.fair_bound
    live = [p for p in range(scenario.n) if p != hold]
    first = _fair_run(scenario, config, live, bound)
    if first.value is not TIMEOUT:
        return first
    rest = _fair_run(scenario, first.final, list(range(scenario.n)), bound)
    return FairRun(first.history + rest.history, rest.value, rest.final)


# --- valence classification --------------------------------------------------


class ValenceTag(Enum):
    ZERO_VALENT = "0-valent"
    ONE_VALENT = "1-valent"
    BIVALENT = "bivalent"
    UNKNOWN_AT_BOUND = "unknown-at-bound"


_VALENT = {0: ValenceTag.ZERO_VALENT, 1: ValenceTag.ONE_VALENT}


@dataclass
class Valence:
    """Classification result. certificates maps a return value to a
    history from the classified configuration that realizes it."""

    tag: ValenceTag
    certificates: dict
    exhausted: bool
    depth: int

    @property
    def is_bivalent(self) -> bool:
        return self.tag is ValenceTag.BIVALENT

    def to_json(self) -> dict:
        return {
            "tag": self.tag.value,
            "certificates": {
                str(v): [
                    {"process": s.process,
                     "message_uid": None if s.received is None else s.received.uid}
                    for s in hist
                ]
                for v, hist in sorted(self.certificates.items())
            },
            "exhausted": self.exhausted,
            "depth": self.depth,
        }


def _memo_fair(scenario: Scenario, config: Configuration):
    """Plain fair-run outcome, memoized by behavioral key. Histories
    recorded under one key replay against any configuration sharing it:
    equal cores mean equal buffers, so the same message identities."""
    key = scenario.vkey(config)
    hit = scenario._fair_memo.get(key)
    if hit is None:
        run = fair_completion(scenario, config)
        hit = (run.value, run.history)
        scenario._fair_memo[key] = hit
    return hit


def classify_valence(
    scenario: Scenario, config: Configuration, depth: Optional[int] = None
) -> Valence:
    """Classify a configuration, cheap probes first, bounded search after.

    The probe battery runs fair schedules (plain, staged, single-crash)
    from the configuration itself. Those deliver oldest-first, which can
    systematically hide one decision value behind stale replies, so the
    bounded sweep additionally runs a memoized fair probe from every
    configuration within probe_depth: a short out-of-order prefix plus a
    fair tail reaches values no oldest-first schedule can.

    Bivalent and already-decided verdicts are absolute and cached by
    behavioral key; bounded verdicts are cached per (key, depth).
    """
    depth = scenario.valence_depth if depth is None else depth
    v0 = scenario.decided(config)
    if v0 is not None:
        return Valence(_VALENT[v0], {v0: ()}, exhausted=True, depth=0)

    key = scenario.vkey(config)
    hit = scenario._absolute.get(key)
    if hit is not None:
        return hit
    hit = scenario._bounded.get((key, depth))
    if hit is not None:
        return hit

    certs: dict = {}

    def record(run: FairRun, prefix: tuple = ()) -> None:
        if run.value is not TIMEOUT and run.value not in certs:
            certs[run.value] = prefix + run.history

    value, tail = _memo_fair(scenario, config)
    record(FairRun(tail, value, config))
    for q in range(scenario.n):
        if 0 in certs and 1 in certs:
            break
        record(staged_probe(scenario, config, q))
        if scenario.crash_probes:
            record(fair_completion(scenario, config, crashed=q))

    if 0 in certs and 1 in certs:
        out = Valence(ValenceTag.BIVALENT, certs, exhausted=False, depth=0)
        scenario._absolute[key] = out
        return out

    # bounded breadth-first sweep of every scheduling choice
    system = scenario.system
    visited = {key}
    queue: deque = deque([(config, (), 0)])
    truncated = False
    while queue:
        current, hist, d = queue.popleft()
        for p in range(scenario.n):
            for step in enabled_steps(current, p, SchedulingMode.FULL_NONDET):
                nxt = apply_step(current, step, system)
                h2 = hist + (step,)
                v = scenario.decided(nxt)
                if v is not None:
                    # decided: valence below is settled, no need to expand
                    if v not in certs:
                        certs[v] = h2
                else:
                    k2 = scenario.vkey(nxt)
                    if k2 in visited:
                        continue
                    visited.add(k2)
                    if d + 1 <= scenario.probe_depth:
                        fv, fh = _memo_fair(scenario, nxt)
                        if fv is not TIMEOUT and fv not in certs:
                            certs[fv] = h2 + fh
                    if d + 1 >= depth:
                        truncated = True
                    else:
                        queue.append((nxt, h2, d + 1))
                if 0 in certs and 1 in certs:
                    out = Valence(ValenceTag.BIVALENT, certs, exhausted=False, depth=d + 1)
                    scenario._absolute[key] = out
                    return out

    if len(certs) == 1 and not truncated:
        v = next(iter(certs))
        out = Valence(_VALENT[v], certs, exhausted=True, depth=depth)
        scenario._absolute[key] = out
        return out
    out = Valence(ValenceTag.UNKNOWN_AT_BOUND, certs, exhausted=not truncated, depth=depth)
    scenario._bounded[(key, depth)] = out
    return out


# --- bivalent successor search ------------------------------------------------


@dataclass
class BivalentSuccessor:
    config: Configuration
    detour: tuple  # steps applied before the forced one
    step: Step
    valence: Valence
    new_completions: int


@dataclass
class SuccessorNotFound:
    explored: int
    frontier: int
    evidence: tuple

    def __bool__(self) -> bool:  # truthiness mirrors "found"
        return False


def _same_step(a: Step, b: Step) -> bool:
    return a.process == b.process and a.received == b.received


def bivalent_successor(
    scenario: Scenario,
    config: Configuration,
    step_e: Step,
    search_depth: int = 6,
    check_start: bool = False,
):
    """Find a bivalent configuration of the form e(E), E reachable from
    config without ever applying e.

    Breadth-first over detour length, insertion order canonical within a
    layer (process id ascending, idle receipt before messages, messages
    oldest first). When the scenario asks to avoid completions, a
    completion-free bivalent successor at any depth beats a completing
    one at a shallower depth; the shallowest completing candidate is
    remembered as a fallback. e stays applicable along every detour
    because only e consumes its message.
    """
    if check_start:
        start = classify_valence(scenario, config)
        if not start.is_bivalent:
            raise PreconditionViolated("search requires a bivalent starting point")
    if not applicable(config, step_e):
        raise NotApplicable(f"{step_e} is not applicable at the starting configuration")

    system = scenario.system
    base_completed = completed_count(config)
    visited = {scenario.vkey(config)}
    layer: list = [(config, ())]
    explored = 0
    cand_tags: dict = {}  # detour -> ValenceTag of e(detour config)
    held_configs: dict = {}  # detours ending in a step of e.process, for evidence
    fallback = None  # shallowest bivalent-but-completing candidate

    for _ in range(search_depth + 1):
        for cfg, det in layer:
            succ = apply_step(cfg, step_e, system)
            cls = classify_valence(scenario, succ)
            explored += 1
            cand_tags[det] = cls.tag
            if det and det[-1].process == step_e.process:
                held_configs[det] = cfg
            if cls.is_bivalent:
                new = completed_count(succ) - base_completed
                if new == 0 or not scenario.avoid_completions:
                    return BivalentSuccessor(succ, det, step_e, cls, new)
                if fallback is None:
                    fallback = BivalentSuccessor(succ, det, step_e, cls, new)

        nxt: list = []
        for cfg, det in layer:
            for p in range(scenario.n):
                for step in enabled_steps(cfg, p, SchedulingMode.FULL_NONDET):
                    if _same_step(step, step_e):
                        continue  # stay inside the e-free region
                    c2 = apply_step(cfg, step, system)
                    k2 = scenario.vkey(c2)
                    if k2 in visited:
                        continue
                    visited.add(k2)
                    nxt.append((c2, det + (step,)))
        layer = nxt
        if not layer:
            break

    if fallback is not None:
        return fallback
    evidence = _case_two_evidence(scenario, step_e, cand_tags, held_configs)
    return SuccessorNotFound(explored=explored, frontier=len(layer), evidence=evidence)


def _case_two_evidence(scenario, step_e, cand_tags, held_configs) -> tuple:
    """Spot pairs where stepping the forced process again flips the
    resulting valence, and show that stalling that process still lets
    some operation complete under a fair schedule."""
    univalent = {ValenceTag.ZERO_VALENT, ValenceTag.ONE_VALENT}
    out = []
    for det, tag in cand_tags.items():
        if not det or det[-1].process != step_e.process or tag not in univalent:
            continue
        parent = det[:-1]
        ptag = cand_tags.get(parent)
        if ptag in univalent and ptag is not tag:
            cfg = held_configs.get(det)
            completes = None
            if cfg is not None:
                run = _fair_run(
                    scenario,
                    cfg,
                    [p for p in range(scenario.n) if p != step_e.process],
                    scenario.fair_bound,
                )
                completes = completed_count(run.final) > completed_count(cfg)
            out.append(
                {
                    "detour_len": len(det),
                    "bridge_process": step_e.process,
                    "valences": (ptag.value, tag.value),
                    "progress_without_that_process": completes,
                }
            )
            if len(out) >= 3:
                break
    return tuple(out)


# --- the non-terminating bivalent schedule ------------------------------------


@dataclass
class HbiSegment:
    round: int
    slot: int
    process: int
    scheduled_uid: Optional[int]
    start_index: int  # offset of this segment's first step in the history
    detour_len: int
    certificates: dict  # value -> history from the segment's end config


@dataclass
class HbiStuck:
    round: int
    slot: int
    process: int
    explored: int
    evidence: tuple


@dataclass
class HbiReport:
    scenario: str
    rotation: tuple
    history: tuple
    segments: list
    completions: tuple  # response events appended along the way (want: none)
    rounds_completed: int
    stuck: Optional[HbiStuck]
    final: Configuration

    def certificates_at(self, index: int) -> dict:
        """Bivalence certificates for the configuration after `index`
        steps of the history: ride the current segment to its end, then
        use the end configuration's certificates. Valence never recovers
        once lost, so an ancestor of a certified-bivalent configuration
        is itself bivalent via exactly this suffix construction."""
        for seg in reversed(self.segments):
            if seg.start_index <= index:
                end = seg.start_index + seg.detour_len + 1
                bridge = self.history[index:end]
                return {v: bridge + h for v, h in seg.certificates.items()}
        raise IndexError(index)

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "rotation": list(self.rotation),
            "rounds_completed": self.rounds_completed,
            "steps": len(self.history),
            "segments": [
                {
                    "round": s.round,
                    "slot": s.slot,
                    "process": s.process,
                    "scheduled_uid": s.scheduled_uid,
                    "detour_len": s.detour_len,
                }
                for s in self.segments
            ],
            "completions": [ev.to_json() for ev in self.completions],
            "stuck": None
            if self.stuck is None
            else {
                "round": self.stuck.round,
                "slot": self.stuck.slot,
                "process": self.stuck.process,
                "explored": self.stuck.explored,
            },
        }


def build_hbi(scenario: Scenario, rounds: int, search_depth: int = 6) -> HbiReport:
    """Construct a schedule that keeps the system bivalent forever.

    Per slot: take the next process p off the rotation, force
    e = (p, oldest buffered message for p, or the idle receipt), ask
    bivalent_successor for a detour that keeps e's application bivalent,
    append detour plus e, and send p to the back of the queue. A full
    round schedules every process once. Getting stuck is reported, not
    raised: it means the certified-bivalent frontier ran out within the
    search depth, which the guarantees of a strongly linearizable
    subject would rule out but our deliberately weak subjects may not.
    """
    init = scenario.initial()
    start = classify_valence(scenario, init)
    if not start.is_bivalent:
        raise PreconditionViolated("initial configuration is not certified bivalent")

    order = list(range(scenario.n)) if scenario.rotation is None else list(scenario.rotation)
    if scenario.seed is not None:
        random.Random(scenario.seed).shuffle(order)
    rotation = tuple(order)

    queue = deque(order)
    history: list = []
    segments: list = []
    current = init
    stuck = None
    rounds_done = 0

    for r in range(1, rounds + 1):
        for slot in range(scenario.n):
            p = queue[0]
            msgs = current.messages_for(p)
            e = Step(p, msgs[0] if msgs else None)
            res = bivalent_successor(scenario, current, e, search_depth=search_depth)
            if isinstance(res, SuccessorNotFound):
                stuck = HbiStuck(r, slot, p, res.explored, res.evidence)
                break
            segments.append(
                HbiSegment(
                    round=r,
                    slot=slot,
                    process=p,
                    scheduled_uid=None if e.received is None else e.received.uid,
                    start_index=len(history),
                    detour_len=len(res.detour),
                    certificates=dict(res.valence.certificates),
                )
            )
            history.extend(res.detour)
            history.append(e)
            current = res.config
            queue.rotate(-1)
        if stuck is not None:
            break
        rounds_done = r

    completions = tuple(
        ev for ev in current.events[len(init.events):] if ev.kind == RESPONSE
    )
    return HbiReport(
        scenario=scenario.name,
        rotation=rotation,
        history=tuple(history),
        segments=segments,
        completions=completions,
        rounds_completed=rounds_done,
        stuck=stuck,
        final=current,
    )


# --- completed-but-bivalent audit ----------------------------------------------


@dataclass
class AuditTriple:
    """A bivalent configuration with a completed operation, branched to
    both decision outcomes: base history plus two certificate branches."""

    base_history: tuple
    base: OpHistory
    branch0: OpHistory
    branch1: OpHistory
    completed: tuple  # op labels completed in the base
    depth: int
    verdict: object = None  # checker result, populated when check=True

    def tree(self) -> ExecutionTree:
        return make_triple_tree(self.base, self.branch0, self.branch1)


def completed_implies_univalent_audit(
    scenario: Scenario,
    depth: int,
    spec,
    checker_mode: str = "strong",
    max_triples: Optional[int] = None,
    order: str = "bfs",
    check: bool = True,
    max_nodes: Optional[int] = None,
    classify_depth: Optional[int] = None,
) -> list:
    """Sweep reachable configurations for completed-yet-bivalent states.

    Every hit is packaged as the three-node tree {base, base+cert0,
    base+cert1}; with check=True the matching strategy checker runs on
    it (these trees admit no strategy when the audit works as intended,
    and the verdict is recorded on the triple).

    order="completion-first" visits configurations with more completed
    operations first, which reaches the interesting region much sooner
    on protocols whose operations take many steps; "bfs" is plain
    breadth-first. Both are deterministic. Exploration deduplicates by
    behavioral key, so each behavior class is audited once, through its
    first-discovered history.

    classify_depth tunes how hard each candidate is classified. The
    audit only acts on certified-bivalent configurations, so it defaults
    to the scenario's probe depth: enough to hunt certificates, without
    paying for univalence confirmation at every completed node.
    """
    if classify_depth is None:
        classify_depth = scenario.probe_depth
    system = scenario.system
    init = scenario.initial()
    triples: list = []

    visited = {scenario.vkey(init)}
    counter = 0
    if order == "completion-first":
        import heapq

        heap: list = [(0, 0, 0, init, ())]

        def push(c, h, d):
            nonlocal counter
            counter += 1
            # Depth-major order, so this never explores more than plain
            # BFS. Within a depth, classes that pair a response with a
            # pending op come first: bivalence with a completed op
            # needs something still in flight to swing the decision.
            hot = 0 if completed_count(c) > 0 and pending_count(c) > 0 else 1
            heapq.heappush(heap, (d, hot, counter, c, h))

        def pop():
            d, _, _, c, h = heapq.heappop(heap)
            return c, h, d

        def pending() -> bool:
            return bool(heap)

    else:
        dq: deque = deque([(init, (), 0)])

        def push(c, h, d):
            dq.append((c, h, d))

        def pop():
            return dq.popleft()

        def pending() -> bool:
            return bool(dq)

    examined = 0
    while pending():
        current, hist, d = pop()
        examined += 1
        if max_nodes is not None and examined > max_nodes:
            break
        decided = scenario.decided(current)
        if completed_count(current) > 0 and decided is None:
            cls = classify_valence(scenario, current, depth=classify_depth)
            if cls.is_bivalent:
                c0, _ = apply_history(current, cls.certificates[0], system)
                c1, _ = apply_history(current, cls.certificates[1], system)
                triple = AuditTriple(
                    base_history=hist,
                    base=op_history_of(current),
                    branch0=op_history_of(c0),
                    branch1=op_history_of(c1),
                    completed=tuple(
                        f"{o.op}#{o.op_id}"
                        for o in op_history_of(current).complete_ops()
                    ),
                    depth=d,
                )
                if check:
                    checker = (
                        strong_linearization_exists
                        if checker_mode == "strong"
                        else write_strong_linearization_exists
                    )
                    triple.verdict = checker(triple.tree(), spec)
                triples.append(triple)
                if max_triples is not None and len(triples) >= max_triples:
                    return triples
        if decided is not None or d >= depth:
            continue  # decided: univalent forever below, nothing to audit
        for p in range(scenario.n):
            for step in enabled_steps(current, p, SchedulingMode.FULL_NONDET):
                nxt = apply_step(current, step, system)
                k = scenario.vkey(nxt)
                if k in visited:
                    continue
                visited.add(k)
                push(nxt, hist + (step,), d + 1)
    return triples


# --- plain history-tree exploration (for the tree checkers) --------------------


def explore_history_tree(
    scenario: Scenario, depth: int, max_nodes: int = 600
) -> ExecutionTree:
    """The full scheduling tree to `depth` as an operation-history tree.

    No deduplication: distinct schedules are distinct nodes, which is
    exactly what the strategy checkers quantify over. Guarded by
    max_nodes since the tree is exponential in depth.
    """
    from .checkers import SizeLimitError

    system = scenario.system
    init = scenario.initial()
    tree = ExecutionTree(op_history_of(init))
    frontier = deque([(init, 0, 0)])
    count = 1
    while frontier:
        cfg, nid, d = frontier.popleft()
        if d >= depth:
            continue
        for p in range(scenario.n):
            for step in enabled_steps(cfg, p, SchedulingMode.FULL_NONDET):
                nxt = apply_step(cfg, step, system)
                count += 1
                if count > max_nodes:
                    raise SizeLimitError(
                        f"history tree exceeds {max_nodes} nodes at depth {d + 1}"
                    )
                cid = tree.add_node(op_history_of(nxt), nid)
                frontier.append((nxt, cid, d + 1))
    return tree
