"""An adversary that schedules fairly forever without deciding anything.

Round by round, every process gets a turn, yet after each scheduled
step the configuration is still bivalent and no operation has
returned. The trick: before handing a process its turn, search for a
short detour after which that process's oldest message is harmless.

On the quorum test/set object this works indefinitely (three rounds
shown here). On the naive protocol it collapses immediately, which is
the point: the naive tester decides the moment it takes a step, so no
bivalence-preserving round exists.
"""

from linlab.valence import build_hbi, build_scenario

rep = build_hbi(build_scenario("abd-tos"), rounds=3)
print(f"abd-tos: {rep.rounds_completed} full rounds, "
      f"{len(rep.history)} scheduled steps, completions: {rep.completions or 'none'}")
print(f"rotation: {rep.rotation}")
print()
print("round slot process detour certified")
for seg in rep.segments:
    certs = "/".join(str(v) for v in sorted(seg.certificates))
    print(f"{seg.round:5d} {seg.slot:4d} {seg.process:7d} {seg.detour_len:6d} "
          f"bivalent ({certs})")

final = rep.certificates_at(len(rep.history))
print(f"\nafter the last step the configuration still has certificates "
      f"for {sorted(final)}")

print("\n== the same construction on naive-tos ==")
rep = build_hbi(build_scenario("naive-tos"), rounds=1)
if rep.stuck is None:
    print(f"completed {rep.rounds_completed} round(s)")
else:
    st = rep.stuck
    print(f"stuck in round {st.round} at slot {st.slot} (process {st.process}) "
          f"after exploring {st.explored} candidate steps")
    for ev in st.evidence:
        before, after = ev["valences"]
        setup = ev["detour_len"] - 1
        print(f"  after {setup} detour step(s) the forced receipt leaves a "
              f"{before} configuration; let process {ev['bridge_process']} take "
              f"one extra step first and the same receipt leaves {after}")
    print("every available step either completes TEST or fixes its value,")
    print("so the adversary has no bivalence-preserving move for this slot")
