"""
Which locality properties does each structure have?

Every property is sampled (100 trials, seed 42) and the verdicts are checked
against the implication lattice.  Run with ``python3 demos/locality_audit.py``.
"""

from dstruct import audit_implications, reproduce_counterexample
from dstruct.checker import LOCALITY

# %% Audit all four structures
header = f"{'structure':22s}" + "".join(f"{p[:6]:>8s}" for p in LOCALITY)
print(header)
print("-" * len(header))
for kind in ("graph", "hajlasz", "interval_derivative", "trivial"):
    audit = audit_implications(kind, None, trials=100, seed=42)
    marks = ["ok" if audit.reports[p].ok else "FAIL" for p in LOCALITY]
    print(f"{kind:22s}" + "".join(f"{m:>8s}" for m in marks),
          "" if audit.consistent else "  <- lattice contradiction")

# %% Look at one witness
# On the two-vertex path, g = (1, 0) is a pseudo-gradient of u = (0, 1) but Du = (1/2, 1/2)
# is not below it, which breaks L5.
audit = audit_implications("graph", None, trials=100, seed=42)
w = audit.reports["L5"].witness
print("\nL5 witness:", w["inequality"])
print("  inputs:", {k: v.get("values", v) for k, v in w["inputs"].items()})
print("  margin:", w["margin"])

# %% L1 without L2
rep = reproduce_counterexample()
print("\nexplicit g =", rep.details["explicit_g"], " energy on B =",
      rep.details["energy_on_B_explicit"], " Du on B =", rep.details["Du_on_B"])
