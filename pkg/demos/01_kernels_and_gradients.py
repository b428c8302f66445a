"""Walk through the dense kernels and verify a backward pass by hand.

Every layer exposes a forward function and an input vector-Jacobian product.
Here we run a small convolution, pull a random cotangent back through it, and
confirm the result against central finite differences of <g, conv(x)>.
"""

import numpy as np

from elfkit import conv2d_forward, conv2d_vjp_input, maxpool_forward, relu_forward

rng = np.random.default_rng(0)

x = rng.normal(size=(3, 8, 8))
w = rng.normal(size=(4, 3, 3, 3))
b = rng.normal(size=4)

out = conv2d_forward(x, w, b, stride=1, pad=1)
print(f"conv2d: input {x.shape} -> output {out.shape}")

act = relu_forward(out)
pooled, argmax = maxpool_forward(act, k=2, stride=2)
print(f"relu -> maxpool: {act.shape} -> {pooled.shape}")

# backward through the convolution, checked against finite differences
g = rng.normal(size=out.shape)
vjp = conv2d_vjp_input(g, w, stride=1, pad=1, input_dims=x.shape)

step = 1e-6
fd = np.zeros_like(x)
flat, fd_flat = x.ravel(), fd.ravel()
for i in range(flat.size):
    old = flat[i]
    flat[i] = old + step
    fp = (g * conv2d_forward(x, w, b, 1, 1)).sum()
    flat[i] = old - step
    fm = (g * conv2d_forward(x, w, b, 1, 1)).sum()
    flat[i] = old
    fd_flat[i] = (fp - fm) / (2 * step)

err = np.abs(vjp - fd).max() / np.abs(fd).max()
print(f"conv2d VJP vs central differences: max rel err = {err:.2e}")
assert err < 1e-6
print("backward pass verified")
