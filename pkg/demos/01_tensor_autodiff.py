"""Tour of the tensor engine: forward ops, reverse-mode gradients, FD checks.

Run:  python3 demos/01_tensor_autodiff.py
"""

import numpy as np

import pndnet.tensor as T
from pndnet.gradcheck import grad_check, run_checks
from pndnet.tensor import Rng, Tensor

# --- tensors are numpy buffers with an optional gradient tape ---------------

a = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
b = Tensor([[5.0, 6.0], [7.0, 8.0]])
product = a @ b
print("A @ B =\n", product.data)

# backward() on a scalar fills .grad on everything that contributed
loss = T.tensor_sum(product)
loss.backward()
print("d sum(A@B) / dA =\n", a.grad)          # equals ones @ B^T
print("analytic check  =\n", np.ones((2, 2)) @ b.data.T)

# --- the op set covers everything the classifier needs ----------------------

rng = Rng(0)
image = Tensor(rng.uniform(-1, 1, (6, 6, 3)))
print("\nadaptive max pool to 2x2 ->", T.adaptive_max_pool2d(image, 2).shape)
print("nearest upsample to 12x12 ->", T.upsample_nearest(image, 12, 12).shape)
print("region average over rows [1,4) cols [0,3) ->",
      T.avg_pool_region(image, (1, 4), (0, 3)).shape)

x = Tensor(rng.uniform(-2, 2, (2, 5)))
probs = T.softmax(x, axis=1)
print("softmax rows sum to", probs.data.sum(axis=1))

# dropout is inverted: eval mode is the identity, train mode rescales
kept = T.dropout(Tensor(np.ones(10_000)), 0.3, "train", Rng(1))
print(f"dropout(0.3) zeroed {float((kept.data == 0).mean()):.3f} of entries, "
      f"mean stays {kept.data.mean():.3f}")

# --- every gradient is verified against central differences -----------------

print("\nfinite-difference audit (max relative error per op):")
for name, err in run_checks(seeds=range(2)).items():
    print(f"  {name:24s} {err:.2e}")

# the checker is an independent oracle: feed it any differentiable callable
w = Tensor(rng.uniform(-1, 1, (5, 3)), requires_grad=True)
m = Tensor(rng.uniform(0.3, 1.0, (4, 5)))
err = grad_check(lambda t: T.relu(T.matmul(m, t)), [w])
print(f"\ncustom composite relu(M @ W): max rel err {err:.2e}")
