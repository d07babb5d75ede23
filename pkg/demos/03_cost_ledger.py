# The cost ledger along k = 2^j
#
# Each stage contributes three paired entries.  The squeeze entries decay
# from the start, but the transport entry m log k - (m/p) log log(1/lambda_k)
# keeps growing until log log(1/lambda_k) catches up with p log k.

from vanishdist.construction import ConstructionParams, analytic_entries, cost_ledger
from vanishdist.flows import ledger_total
from vanishdist.norms import SobolevParams
from vanishdist.xp import find_j0

sp = SobolevParams(n=2, p=3.0)
js = list(range(3, 45))
totals = []
print(f"{'j':>3} {'squeeze1':>9} {'squeeze2':>9} {'transport':>9} {'total':>9}")
for j in js:
    cp = ConstructionParams(sp, 2**j, beta=0.25)
    e = analytic_entries(cp, 1.0, 1.0)
    totals.append(ledger_total(cost_ledger(cp, 1.0, 1.0)))
    print(f"{j:3d} {e['squeeze1']:9.3f} {e['squeeze2']:9.3f} {e['transport']:9.3f} {totals[-1]:9.3f}")

print(f"totals strictly decrease from j0 = {find_j0(js, totals)}")
print(f"through j = 20 only: j0 = {find_j0(js[:18], totals[:18])}")
