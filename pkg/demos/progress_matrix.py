"""Progress audit across the shipped protocols.

Two conditions per protocol. The single-crash condition tolerates any
one process failing. The client/server condition is stricter about
who must keep stepping: at least one client and enough servers. A
protocol that needs replies from n-2 peers survives the first and
fails the second, and the failure comes with a schedule you can replay.
"""

from linlab.progress import check_1rlf, check_nonblocking, default_split, implication_audit
from linlab.protocols import PROTOCOLS
from linlab.valence import apply_history, build_scenario

print(f"{'protocol':<12} {'clients':<8} {'servers':<8} {'1-crash':<9} nonblocking")
for name in sorted(PROTOCOLS):
    s = build_scenario(name)
    split = default_split(s)
    a = check_1rlf(s, depth=5)
    b = check_nonblocking(s, depth=6)
    print(f"{name:<12} {len(split.clients):<8} {len(split.servers):<8} "
          f"{'holds' if a.holds else 'FAILS':<9} "
          f"{'holds' if b.holds else 'FAILS'}")

print("\nrows where the conditions separate are the interesting ones;")
print("no row may fail the weaker condition while passing the stronger:")
for row in implication_audit(depth=5):
    flag = "VIOLATION" if row["implication_violated"] else "consistent"
    print(f"  {row['protocol']:<12} {flag}")

# replay the starvation witness for the acknowledgement object
s = build_scenario("trivial-ack")
w = check_nonblocking(s, depth=6).witness
print(f"\ntrivial-ack starvation witness: crash {sorted(w.crash_set)}, "
      f"pending {list(w.pending)}")
config, _ = apply_history(s.initial(), w.base_history, s.system)
config, _ = apply_history(config, w.extension, s.system)
responses = sum(1 for ev in config.events if ev.kind == "response")
print(f"after {len(w.base_history)} setup steps and a fair {len(w.extension)}-step "
      f"extension of the live processes: {responses} responses, the pending "
      "operation never returns")
