"""Train the two-layer graph convolution on flows and attributes."""
from region2vec import SynthConfig, TrainingConfig, generate_synthetic, train

ds = generate_synthetic(SynthConfig(seed=1))
config = TrainingConfig(seed=1)
result = train(ds.graph, ds.flows, ds.attributes, config)

print(f"{config.iterations} Adam steps at lr {config.learning_rate}, hop threshold {config.hop_threshold}")
for it in (0, 50, 100, 200, 400):
    step = result.trace[it]
    print(f"iter {it:3d}  loss {step.total:.4f}  positive {step.numerator:.3f}  negative {step.negative_term:.3f}  hops {step.hop_term:.3f}")
print(f"final / initial = {result.final_loss / result.initial_loss:.3f}")
print(f"embedding shape {result.z.shape}")
