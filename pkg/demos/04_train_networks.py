# Train the three network families on a synthetic participant and watch the
# protocol at work: stratified 10% validation split, Adam, LR scheduling,
# early stopping, best-epoch weight restore.

import numpy as np

from vocalperc import generate_synthetic
from vocalperc.dsp import feature_matrix, spectrogram_stack
from vocalperc.nn import (
    NetworkConfig,
    TrainConfig,
    embed_and_classify,
    mlp_hidden_choices,
    train_network,
)

train, test = generate_synthetic(seed=42, n_per_class=25)
y_train, y_test = train.labels, test.labels

# ---- MLP on engineered features -------------------------------------------
X_train = feature_matrix(train.clips)
X_test = feature_matrix(test.clips)
hidden = mlp_hidden_choices(100)[0]  # [ceil(n/2)] for n = 100 inputs
mlp = train_network(
    NetworkConfig(kind="mlp", n_inputs=100, hidden_sizes=hidden),
    X_train, y_train,
    TrainConfig(learning_rate=1e-3, batch_size=8, seed=0).for_family("mlp"),
)
accuracy = 100.0 * np.mean(mlp.predict(X_test) == y_test)
print(f"MLP hidden {hidden}: {len(mlp.history)} epochs, best epoch "
      f"{mlp.best_epoch}, test accuracy {accuracy:.1f}%")

# ---- CNN on 12x12 mel spectrograms ----------------------------------------
S_train = spectrogram_stack(train.clips, 12)
S_test = spectrogram_stack(test.clips, 12)
cnn = train_network(
    NetworkConfig(kind="cnn", n_bands=12, conv_filters=(8, 16), n_pools=2),
    S_train, y_train,
    TrainConfig(learning_rate=1e-3, batch_size=8, seed=0).for_family("cnn"),
)
accuracy = 100.0 * np.mean(cnn.predict(S_test) == y_test)
print(f"CNN (8,16 filters, 2 pools): {len(cnn.history)} epochs, "
      f"test accuracy {accuracy:.1f}%")

print("\nfirst epochs of the CNN run (epoch, train loss, val loss, lr):")
for row in cnn.history[:5]:
    print(f"  {row[0]:>3}  {row[1]:8.4f}  {row[2]:8.4f}  {row[3]:.4g}")

# ---- TCNN embeddings + separate linear head --------------------------------
E_train = spectrogram_stack(train.clips, 8)
E_test = spectrogram_stack(test.clips, 8)
tcnn = train_network(
    NetworkConfig(kind="tcnn", n_bands=8, conv_filters=(8, 16), n_pools=2,
                  output_size=16),
    E_train, y_train,
    TrainConfig(learning_rate=1e-3, batch_size=8, seed=0, loss="triplet",
                triplet_strategy="hardest_negative").for_family("tcnn"),
)
predictions = embed_and_classify(tcnn, E_train, y_train, E_test)
accuracy = 100.0 * np.mean(predictions == y_test)
print(f"\nTCNN embeddings (16-d) + linear head: test accuracy {accuracy:.1f}%")

embeddings = tcnn.embed(E_test)
for class_id in range(4):
    centroid = embeddings[y_test == class_id].mean(axis=0)
    spread = np.linalg.norm(embeddings[y_test == class_id] - centroid, axis=1).mean()
    print(f"  class {class_id}: mean within-class embedding distance {spread:.3f}")
