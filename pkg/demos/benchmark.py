"""Score Louvain, K-Means and the embedding pipeline side by side."""
from region2vec import SynthConfig, generate_synthetic
from region2vec.benchmark import ordering_holds, render_text, run_benchmark

held = 0
for seed in range(1, 11):
    bench = run_benchmark(generate_synthetic(SynthConfig(seed=seed)), seed=seed)
    if seed == 1:
        print(render_text(bench))
    held += ordering_holds(bench)
print(f"\nexpected ordering held on {held}/10 seeds")
