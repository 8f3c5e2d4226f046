"""Two writers, one reader: the quorum register is linearizable but not
write-strong linearizable.

Every completed-operation history of this register passes the plain
linearizability check. The stronger property fails anyway. The audit
digs up a configuration where WRITE(1) has already returned, WRITE(0)
is still in flight, and the reader can still be driven to either
value. Each branch then admits exactly one linearization, and the two
of them order the writes oppositely; no prefix-stable assignment of
write orders can cover both.
"""

from linlab.checkers import linearizations
from linlab.seqspec import REG_SPEC
from linlab.valence import build_scenario, completed_implies_univalent_audit

s = build_scenario("abd-reg")
print(f"protocol {s.name}, {s.n} processes (two writers, one reader)")
print("searching executions for a completed write inside a bivalent "
      "configuration, reader-swing first...")

tr = completed_implies_univalent_audit(
    s,
    depth=16,
    spec=REG_SPEC,
    checker_mode="write-strong",
    max_triples=1,
    order="completion-first",
)[0]

print(f"\nfound at depth {tr.depth}; already returned: {', '.join(tr.completed)}")
print(f"write-strong checker says: {type(tr.verdict).__name__}\n")

for label, branch in (("READ = 0 branch", tr.branch0), ("READ = 1 branch", tr.branch1)):
    lins = list(linearizations(branch, REG_SPEC))
    print(f"{label}: {len(lins)} admissible linearization(s)")
    for lin in lins:
        order = " ; ".join(f"{e.op}->{e.value}" for e in lin)
        print(f"  {order}")

print("\nthe 0-branch needs WRITE(1) before WRITE(0), the 1-branch the")
print("reverse, so the write suborder of any single linearization of the")
print("common prefix is wrong for one of its extensions")
