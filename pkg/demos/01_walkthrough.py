"""Walk through the design on a five-unit star.

Builds the conflict graph for the direct effect, orders units by
importance, prints the exact exposure probabilities, then confirms by full
enumeration that the modified Horvitz-Thompson estimate is unbiased.
"""

import numpy as np

from cgdesign import graph as gr
from cgdesign import oracle as orc
from cgdesign.design import ConflictGraphDesign
from cgdesign.estimand import Estimand
from cgdesign.estimator import OutcomeTable, modified_ht, true_effect

g = gr.star(5)
design = ConflictGraphDesign.prepare(g, Estimand.direct(), r=2.0)
print("conflict graph edges:", [tuple(map(int, e)) for e in design.h.edges()])
print(f"lambda(H) = {design.params.lam:.4f}, p = {design.params.p:.4f}, q = {design.params.q:.4f}")
print("importance order:", design.ordering.order.tolist())
print("Pr[desired exposure] per unit:", np.round(design.prob_single(), 5).tolist())

# hub outcomes are large, leaves small
out = OutcomeTable(np.array([8.0, 1.0, 1.5, 0.5, 1.0]), np.array([2.0, 0.0, 0.5, 0.0, 0.2]))

rng = np.random.default_rng(0)
u, z = design.sample_batch(rng, 3)
for row_u, row_z in zip(u, z):
    print("U =", row_u.tolist(), " Z =", row_z.tolist())

dist = orc.enumerate_design(design)
est = modified_ht(out, dist.u, design.ordering, design.params)
print(f"true effect {true_effect(out):.6f}")
print(f"exact mean of the estimate over {len(dist)} atoms: {float(orc.expectation(dist, est)):.6f}")
print(f"exact variance: {orc.variance(dist, est):.4f}")
