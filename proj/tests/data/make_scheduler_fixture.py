"""Writes scheduler_fixture.json: a 4-user, N_max = 2 instance with Q of every
subset, the exhaustive optimum and the greedy trace, computed with numpy."""
import itertools
import json

import numpy as np

rng = np.random.default_rng(2024)
N, I, N_MAX, P, NOISE = 16, 4, 2, 2.0, 1e-2

h = (rng.normal(size=(N, I)) + 1j * rng.normal(size=(N, I))) / np.sqrt(2)
f = rng.normal(size=(N, I)) + 1j * rng.normal(size=(N, I))
f /= np.linalg.norm(f, axis=0)
w = rng.uniform(0.5, 2.0, size=I)
u = h.conj().T @ f


def q_of(users):
    users = list(users)
    g = u[np.ix_(users, users)]
    fbb = g.conj().T @ np.linalg.inv(g @ g.conj().T)
    composite = f[:, users] @ fbb
    fbb = fbb * np.sqrt(P / len(users)) / np.linalg.norm(composite, axis=0)
    rx = g @ fbb
    q = 0.0
    for a, i in enumerate(users):
        sig = abs(rx[a, a]) ** 2
        intf = np.sum(np.abs(rx[a]) ** 2) - sig
        q += w[i] * np.log2(1 + sig / (intf + NOISE))
    return float(q)


subsets = [list(s) for m in range(1, N_MAX + 1) for s in itertools.combinations(range(I), m)]
qs = [q_of(s) for s in subsets]
best = subsets[int(np.argmax(qs))]

chosen, q_now, history = [], 0.0, []
for _ in range(N_MAX):
    cands = [(q_of(sorted(chosen + [i])), i) for i in range(I) if i not in chosen]
    q_best, i_best = max(cands, key=lambda c: (c[0], -c[1]))
    if q_best <= q_now:
        break
    chosen = sorted(chosen + [i_best])
    q_now = q_best
    history.append(q_best)

out = {
    "antennas": N, "users": I, "max_selected": N_MAX, "power": P, "noise": NOISE,
    "h_real": h.real.tolist(), "h_imag": h.imag.tolist(),
    "f_real": f.real.tolist(), "f_imag": f.imag.tolist(),
    "weights": w.tolist(),
    "subsets": subsets, "q": qs,
    "exhaustive": best, "exhaustive_q": max(qs),
    "greedy": chosen, "greedy_history": history,
}
with open("scheduler_fixture.json", "w") as fh:
    json.dump(out, fh, indent=1)
