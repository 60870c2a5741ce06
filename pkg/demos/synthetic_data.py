"""Build the default planted-partition dataset and look at what it contains."""
import numpy as np

from region2vec import SynthConfig, generate_synthetic

ds = generate_synthetic(SynthConfig(seed=1))
print(f"{ds.n} regions on a 10x10 rook grid, {int(ds.graph.adjacency.sum()) // 2} shared edges")
print(f"{ds.ground_truth.k} planted communities of sizes {np.bincount(ds.ground_truth.labels)[1:].tolist()}")

# flows are symmetric; most of the mass stays inside a planted community
s = ds.flows
same = ds.ground_truth.labels[:, None] == ds.ground_truth.labels[None, :]
iu = np.triu_indices(ds.n, k=1)
print(f"flow pairs: {int((s[iu] > 0).sum())} positive out of {len(iu[0])}")
print(f"mean intra flow {s[iu][same[iu]].mean():.2f}, mean inter flow {s[iu][~same[iu]].mean():.2f}")
print(f"attributes: {ds.attributes.x.shape[1]} standardized columns (poverty share first), poverty share in [{ds.poverty_share.min():.2f}, {ds.poverty_share.max():.2f}]")

# print the planted map
grid = ds.ground_truth.labels.reshape(10, 10)
print("\n".join(" ".join(str(v) for v in row) for row in grid))
