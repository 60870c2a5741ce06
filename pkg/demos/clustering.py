"""Cut the learned embedding into contiguous regions and compare with the plant."""
from region2vec import SynthConfig, TrainingConfig, adjusted_rand, generate_synthetic, kmeans, train, ward_constrained

ds = generate_synthetic(SynthConfig(seed=1))
z = train(ds.graph, ds.flows, ds.attributes, TrainingConfig(seed=1)).z
k = ds.ground_truth.k

regions, merges = ward_constrained(z, ds.graph.adjacency, k)
flagged = sum(m.violation for m in merges)
print(f"constrained Ward: {len(merges)} merges, {flagged} forced across non-adjacent clusters")
print(f"  ARI vs planted: {adjusted_rand(ds.ground_truth, regions):.3f}")
print("\n".join(" ".join(str(v) for v in row) for row in regions.labels.reshape(10, 10)))

# attributes alone ignore both flows and space
km = kmeans(ds.attributes.x, k, seed=1)
print(f"K-Means on attributes: ARI {adjusted_rand(ds.ground_truth, km):.3f}")
print("\n".join(" ".join(str(v) for v in row) for row in km.labels.reshape(10, 10)))
