"""The initial configuration commits to nothing.

A TEST races a SET. Hold the tester back and the flag is set first,
so TEST returns 1; hold the setter back and TEST runs against the
clean flag and returns 0. Since both schedules start from the same
configuration, that configuration is bivalent, and classify_valence
produces a replayable certificate for each value.
"""

from linlab.valence import apply_history, build_scenario, classify_valence, staged_probe

for name in ("abd-tos", "naive-tos"):
    s = build_scenario(name)
    print(f"== {name} (n={s.n}) ==")

    set_first = staged_probe(s, s.initial(), hold=0)
    test_first = staged_probe(s, s.initial(), hold=1)
    print(f"  hold the tester, let SET land first : TEST = {set_first.value}")
    print(f"  hold the setter, let TEST go first  : TEST = {test_first.value}")

    out = classify_valence(s, s.initial())
    print(f"  initial configuration: {out.tag.value}")
    for v, cert in sorted(out.certificates.items()):
        final, _ = apply_history(s.initial(), cert, s.system)
        print(
            f"    certificate for {v}: {len(cert)} steps, "
            f"replays to TEST = {s.decided(final)}"
        )
    print()
