"""Independent reference values for the unit tests.

Run with numpy and torch installed; paste the printed literals into the
matching test files. Every tensor is filled with the same closed-form
pattern used on the C++ side: v[i] = scale * sin(0.37 * i + phase).
"""
import math

import numpy as np
import torch

torch.set_default_dtype(torch.float64)


def pattern(shape, phase, scale=1.0):
    n = int(np.prod(shape))
    return np.array([scale * math.sin(0.37 * i + phase) for i in range(n)]).reshape(shape)


def fmt(a):
    return ", ".join(f"{v:.17g}" for v in np.asarray(a).ravel())


print("// rfft of pattern(5, 0.1)")
x = pattern((5,), 0.1)
X = np.fft.rfft(x)
print("re:", fmt(X.real)); print("im:", fmt(X.imag))
print("// rfft of pattern(8, 0.2)")
x = pattern((8,), 0.2)
X = np.fft.rfft(x)
print("re:", fmt(X.real)); print("im:", fmt(X.imag))

print("// circular convolution of pattern(6, 0.3), pattern(6, 1.1)")
a, b = pattern((6,), 0.3), pattern((6,), 1.1)
y = [sum(a[m] * b[(n - m) % 6] for m in range(6)) for n in range(6)]
print(fmt(y))

print("// instance norm of pattern((6, 2), 0.4, 3.0)")
w = pattern((6, 2), 0.4, 3.0)
mu = w.mean(0); sd = np.sqrt(w.var(0) + 1e-5)
print("norm:", fmt((w - mu) / sd)); print("std:", fmt(sd))

print("// moving average, L=6, kernel 5, edge replication, applied to pattern(6, 0.5)")
x = pattern((6,), 0.5)
pad = np.concatenate([np.repeat(x[:1], 2), x, np.repeat(x[-1:], 2)])
print(fmt([pad[i:i + 5].mean() for i in range(6)]))

print("// Adam, lr 0.01, two steps with grads pattern(4, 0.6) then pattern(4, 1.7)")
p = torch.tensor(pattern((4,), 0.2), requires_grad=True)
opt = torch.optim.Adam([p], lr=0.01, betas=(0.9, 0.999), eps=1e-8)
for ph in (0.6, 1.7):
    p.grad = torch.tensor(pattern((4,), ph))
    opt.step()
print(fmt(p.detach().numpy()))

print("// frequency MAE (modulus and componentwise) for pred pattern((6,2),0.7), target pattern((6,2),2.1)")
pr, tg = torch.tensor(pattern((6, 2), 0.7)), torch.tensor(pattern((6, 2), 2.1))
d = torch.fft.rfft(pr, dim=0) - torch.fft.rfft(tg, dim=0)
print("modulus:", f"{d.abs().mean().item():.17g}")
print("componentwise:", f"{(d.real.abs() + d.imag.abs()).mean().item():.17g}")
print("mse:", f"{((pr - tg) ** 2).mean().item():.17g}")

# Full forward pipeline on a tiny configuration.
L, H, D, F, hidden, M = 8, 4, 2, 5, 3, 2
B = 2
t_last = [9, 14]  # slots 1 and 0 with M = period = 2
xb = torch.tensor(pattern((B, L, D), 0.3, 2.0)) + 0.5
yb = torch.tensor(pattern((B, H, D), 1.3, 2.0))
bank = torch.tensor(pattern((M, F, D), 0.9, 0.4), requires_grad=True)
fre = torch.tensor(1.0 + pattern((F,), 1.9, 0.3), requires_grad=True)
fim = torch.tensor(pattern((F,), 2.9, 0.3), requires_grad=True)
w1 = torch.tensor(pattern((hidden, L), 0.11, 0.5), requires_grad=True)
b1 = torch.tensor(pattern((hidden,), 0.22, 0.5), requires_grad=True)
w2 = torch.tensor(pattern((H, hidden), 0.33, 0.5), requires_grad=True)
b2 = torch.tensor(pattern((H,), 0.44, 0.5), requires_grad=True)

mu = xb.mean(1, keepdim=True)
sd = torch.sqrt(xb.var(1, keepdim=True, unbiased=False) + 1e-5)
xn = (xb - mu) / sd
X = torch.fft.rfft(xn, dim=1)
Xs = bank[torch.tensor([t % M for t in t_last])]
mask = torch.ones(F); mask[0] = 0; mask[F - 1] = 0
w = torch.complex(fre, fim * mask)
Xr = (X - Xs) * w[None, :, None] + Xs
xr = torch.fft.irfft(Xr, n=L, dim=1)
rows = xr.permute(0, 2, 1)
out = torch.relu(rows @ w1.T + b1) @ w2.T + b2
pred = out.permute(0, 2, 1) * sd + mu
alpha = 0.75
fm = (torch.fft.rfft(pred, dim=1) - torch.fft.rfft(yb, dim=1)).abs().mean()
loss = alpha * fm + (1 - alpha) * ((pred - yb) ** 2).mean()
loss.backward()
print("// tiny pipeline")
print("pred:", fmt(pred.detach().numpy()))
print("loss:", f"{loss.item():.17g}")
for name, t in [("bank", bank), ("fre", fre), ("fim", fim), ("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)]:
    print(f"grad {name}:", fmt(t.grad.numpy()))
