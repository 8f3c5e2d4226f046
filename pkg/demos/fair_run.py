"""Watch one fair round-robin execution of the quorum test/set object.

Processes step in rotation, each receiving its oldest pending message
(or nothing). The run stops when the tester's TEST operation returns.
Then the same experiment with the tester crashed: nobody is left to
decide, and the run times out instead of returning garbage.
"""

from linlab.valence import TIMEOUT, build_scenario, fair_completion

s = build_scenario("abd-tos")
print(f"protocol {s.name}, {s.n} processes, decision by process {s.decision_process}")

run = fair_completion(s, s.initial())
print(f"\nfair schedule, nobody crashed: TEST = {run.value}")
print(f"steps taken: {len(run.history)}")
for i, step in enumerate(run.history):
    got = "nothing" if step.received is None else str(step.received)
    print(f"  {i:3d}  process {step.process} receives {got}")

responses = [ev for ev in run.final.events if ev.kind == "response"]
print("\noperations that returned:")
for ev in responses:
    print(f"  {ev.op} by process {ev.process} -> {ev.value}")

# Crash the tester before it starts. The SET still completes (the
# setter only needs a quorum of the other processes), but no TEST
# response can ever appear, so the bounded fair run reports a timeout.
crashed = fair_completion(s, s.initial(), crashed=s.decision_process)
outcome = "timed out" if crashed.value is TIMEOUT else f"returned {crashed.value}"
print(f"\nsame schedule with process {s.decision_process} crashed: {outcome}")
print(f"steps before giving up: {len(crashed.history)}")
