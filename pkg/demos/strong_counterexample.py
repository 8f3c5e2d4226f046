"""A completed SET inside a still-bivalent configuration sinks strong
linearizability for the naive test/set protocol.

The naive protocol broadcasts the flag bit and answers TEST from local
state. The audit walks its executions, finds a configuration where the
SET already returned but schedules to both TEST values still exist,
and hands the three histories (base, 0-branch, 1-branch) to the
strong-linearizability checker. The checker must reject: whatever the
linearization of the base names first is contradicted by one branch.
A brute-force search over every prefix-consistent assignment confirms
there is no escape hatch.
"""

from linlab.checkers import brute_force_strategy_oracle, make_triple_tree
from linlab.seqspec import TOS_SPEC
from linlab.valence import build_scenario, completed_implies_univalent_audit

s = build_scenario("naive-tos")
triples = completed_implies_univalent_audit(s, depth=14, spec=TOS_SPEC, checker_mode="strong")
print(f"audit of {s.name} to depth 14: {len(triples)} bivalent configuration(s) "
      "with a completed operation\n")

for tr in triples:
    print(f"depth {tr.depth}, completed: {', '.join(tr.completed)}")
    print(f"  base history     : {tr.base!r}")
    print(f"  branch deciding 0: {tr.branch0!r}")
    print(f"  branch deciding 1: {tr.branch1!r}")
    print(f"  strong checker   : {type(tr.verdict).__name__}")

    tree = make_triple_tree(tr.base, tr.branch0, tr.branch1)
    oracle = brute_force_strategy_oracle(tree, TOS_SPEC, mode="strong")
    verdict = "no strategy exists" if oracle is None else "found a strategy (!)"
    print(f"  brute-force sweep: {verdict}")
