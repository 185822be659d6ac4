"""Walk through the graph side: reaches, kernel bases and range refinement."""
import numpy as np

from syncnet.graphs import WeightedDigraph, laplacian, reach_decomposition
from syncnet.linalg import eigenstructure, kernel_basis_by_reaches, range_space, refine_to_direct_sum

# node 3 listens to nodes 1 and 2, which hear nobody
g = WeightedDigraph(3, [(2, 0, 1.0), (2, 1, 1.0)])
rd = reach_decomposition(g)
print("reaches:", [sorted(v + 1 for v in r) for r in rd.reaches])
kb = kernel_basis_by_reaches(laplacian(g), rd)
for v in kb.vectors:
    print("kernel vector:", np.round(v, 4))
es = eigenstructure(laplacian(g))
print(f"zero eigenvalue: algebraic {es.zero_alg_mult}, geometric {es.zero_geo_mult}")

# two four-node graphs whose range spaces overlap in one direction
ga = WeightedDigraph(4, [(1, 0, 1.0), (3, 0, 1.0)])
gb = WeightedDigraph(4, [(2, 0, 1.0), (3, 2, 1.0)])
pieces = refine_to_direct_sum([range_space(laplacian(ga)), range_space(laplacian(gb))])
for k, p in enumerate(pieces, 1):
    print(f"piece {k}:", np.round(p.basis[:, 0], 4))
