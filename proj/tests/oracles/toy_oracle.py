"""Dense matrix-power oracle for the 10-node toy fixture.

Independent of the C++ walk/DFS code: builds D^-1/2 (A+I) D^-1/2 densely,
raises it to the K-th power and contracts row v with label masks.
Prints the values frozen into the C++ tests.
"""
import numpy as np

names = ["v"] + [f"u{i}" for i in range(1, 10)]
idx = {n: i for i, n in enumerate(names)}
edges = [("v", "u2"), ("v", "u3"), ("v", "u5"), ("u1", "u2"), ("u2", "u3"),
         ("u2", "u7"), ("u3", "u4"), ("u3", "u5"), ("u5", "u6"), ("u5", "u7"),
         ("u7", "u8"), ("u7", "u9")]
labels = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1, 0])  # v,u1..u9
Y, C = 0, 1


def adj(extra_add=(), extra_del=()):
    a = np.zeros((10, 10))
    for s, t in edges:
        a[idx[s], idx[t]] = a[idx[t], idx[s]] = 1
    for s, t in extra_add:
        a[idx[s], idx[t]] = a[idx[t], idx[s]] = 1
    for s, t in extra_del:
        a[idx[s], idx[t]] = a[idx[t], idx[s]] = 0
    return a


def ahat(a, deg_override=None):
    at = a + np.eye(len(a))
    d = at.sum(1)
    if deg_override:
        for k, val in deg_override.items():
            d[idx[k]] = val
    s = 1 / np.sqrt(d)
    return at * s[:, None] * s[None, :]


def objective(a, k=2, deg_override=None):
    row = np.linalg.matrix_power(ahat(a, deg_override), k)[idx["v"]]
    return row[labels == C].sum() - row[labels == Y].sum()


a0 = adj()
print("clean objective K=2:        %.12f" % objective(a0))
print("add u7 exact K=2:           %.12f" % objective(adj([("v", "u7")])))
print("delete u3 exact K=2:        %.12f" % objective(adj(extra_del=[("v", "u3")])))
print("C_A approx (d_v=5):         %.12f" % objective(a0, deg_override={"v": 5}))
print("C_B approx (d_v=3):         %.12f" % objective(a0, deg_override={"v": 3}))
for cand in ["u6", "u7", "u8"]:
    print("exact add %s:              %.12f" % (cand, objective(adj([("v", cand)]))))
for cand in ["u2", "u3"]:
    print("exact del %s:              %.12f" % (cand, objective(adj(extra_del=[("v", cand)]))))
# delta_A via structure difference with identical degrees (v:5, cand:d+1)
for cand in ["u6", "u7", "u8"]:
    d = (a0 + np.eye(10)).sum(1)
    ov = {"v": 5, cand: d[idx[cand]] + 1}
    delta = objective(adj([("v", cand)]), deg_override=ov) - objective(a0, deg_override=ov)
    print("approx delta add %s:       %.12f  gain %.12f" % (cand, delta, objective(a0, deg_override={"v": 5}) + delta))
for cand in ["u2", "u3"]:
    ov = {"v": 3}
    delta = objective(a0, deg_override=ov) - objective(adj(extra_del=[("v", cand)]), deg_override={"v": 3, cand: 5})
    print("approx delta del %s:       %.12f  gain %.12f" % (cand, delta, objective(a0, deg_override={"v": 3}) - delta))
# K=1 signed sum from u7 with clean degrees
r = ahat(a0)[idx["u7"]]
print("dfs start=u7 K=1:           %.12f" % (r[labels == C].sum() - r[labels == Y].sum()))
print("power row v K=2 u6:         %.12f" % np.linalg.matrix_power(ahat(a0), 2)[idx["v"], idx["u6"]])
