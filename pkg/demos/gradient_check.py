"""Compare analytic network gradients against central finite differences.

Builds the two production network shapes (the 9->64->64->18 actor and the
18->300->400->1 critic), pushes a random batch through each, and checks a
random sample of parameter coordinates per layer. Relative errors land
around 1e-9; anything above 1e-4 would indicate a broken backward pass.
"""

import numpy as np

from pegx import nn


def check(sizes, coords_per_array=8, h=1e-5):
    rng = np.random.default_rng(7)
    params = nn.init_params(sizes, rng)
    x = rng.normal(0.0, 1.0, (4, sizes[0]))
    probe = rng.standard_normal((4, sizes[-1]))

    def loss():
        y, _ = nn.forward(params, x)
        return float(np.sum(probe * y))

    _, cache = nn.forward(params, x)
    grads, _ = nn.backward(params, cache, probe)

    worst = 0.0
    checked = 0
    arrays = list(zip(params.weights, grads.weights)) + list(zip(params.biases, grads.biases))
    for theta, analytic in arrays:
        flat, aflat = theta.reshape(-1), analytic.reshape(-1)
        count = min(coords_per_array, flat.size)
        for k in rng.choice(flat.size, size=count, replace=False):
            orig = flat[k]
            flat[k] = orig + h
            lp = loss()
            flat[k] = orig - h
            lm = loss()
            flat[k] = orig
            fd = (lp - lm) / (2.0 * h)
            err = abs(aflat[k] - fd) / max(abs(aflat[k]) + abs(fd), 1e-6)
            worst = max(worst, err)
            checked += 1
    return worst, checked


def main():
    for name, sizes in (("actor", [9, 64, 64, 18]), ("critic", [18, 300, 400, 1])):
        worst, checked = check(sizes)
        arch = "->".join(str(s) for s in sizes)
        print(f"{name:6s} {arch:18s} {checked:3d} coordinates  max relative error {worst:.2e}")


if __name__ == "__main__":
    main()
