"""Build a small graph by hand, run backward, and check it against finite differences."""

import numpy as np

from momentwgan import autodiff as ad
from momentwgan.oracles import gradient_check, numerical_gradient

rng = np.random.default_rng(0)

# a (batch, length, channels) input and a width-3 kernel mapping 2 channels to 4
x = ad.Node(rng.normal(size=(2, 5, 2)), requires_grad=True)
kernel = ad.Node(rng.normal(size=(3, 2, 4)), requires_grad=True)
bias = ad.Node(np.zeros(4), requires_grad=True)

h = ad.leaky_relu(ad.conv1d(x, kernel, bias), 0.2)
probs = ad.softmax(h, axis=-1)
weights = rng.normal(size=probs.shape)
loss = ad.mean(probs * weights)
ad.backward(loss)
print("loss", loss.item())
print("d loss / d bias", bias.grad)

# the same gradient by central differences
numeric = numerical_gradient(
    lambda: ad.mean(ad.softmax(ad.leaky_relu(ad.conv1d(x, kernel, bias), 0.2), axis=-1) * weights).item(),
    bias.value)
print("finite differences ", numeric)

# gradient_check does both and reports the worst relative error over all leaves
err = gradient_check(
    lambda: ad.mean(ad.softmax(ad.leaky_relu(ad.conv1d(x, kernel, bias), 0.2), axis=-1) * weights),
    [x, kernel, bias])
print(f"worst relative error {err:.2e}")
