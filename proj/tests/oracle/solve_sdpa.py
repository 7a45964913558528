#!/usr/bin/env python3
"""Solve an SDPA sparse (.dat-s) file with cvxpy and record the point.

Reads the file with its own parser (independent of the C++ reader), solves
    min c'x  s.t.  sum_k x_k F_k - F_0 >= 0  (blockwise)
and writes a fixture JSON holding x and the smallest eigenvalue of every block.
"""
import argparse
import json
import re
import sys

import cvxpy as cp
import numpy as np


def parse(text):
    lines = [l for l in text.splitlines() if l.strip() and l.lstrip()[0] not in '"*']
    tok = lambda l: [t for t in re.split(r"[\s,{}()]+", l.strip()) if t]
    m = int(tok(lines[0])[0])
    nblocks = int(tok(lines[1])[0])
    sizes = [int(v) for v in tok(lines[2])[:nblocks]]
    c = np.array([float(v) for v in tok(lines[3])[:m]]) if m else np.zeros(0)
    F = [[np.zeros((abs(s), abs(s))) for s in sizes] for _ in range(m + 1)]
    for l in lines[4:]:
        k, b, i, j, v = tok(l)[:5]
        k, b, i, j, v = int(k), int(b) - 1, int(i) - 1, int(j) - 1, float(v)
        F[k][b][i, j] = v
        F[k][b][j, i] = v
    return m, sizes, c, F


def block_value(F, x, b):
    v = -F[0][b].copy()
    for k in range(1, len(F)):
        v += x[k - 1] * F[k][b]
    return v


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("datfile")
    ap.add_argument("--fixture", required=True, help="fixture JSON to write")
    ap.add_argument("--system", required=True)
    ap.add_argument("--theorem", type=int, default=2)
    ap.add_argument("--box", type=float, default=None)
    ap.add_argument("--solver", default="CLARABEL")
    a = ap.parse_args()

    m, sizes, c, F = parse(open(a.datfile).read())
    x = cp.Variable(m)
    cons = []
    for b, s in enumerate(sizes):
        expr = -F[0][b] + sum(x[k - 1] * F[k][b] for k in range(1, m + 1) if np.any(F[k][b]))
        if s < 0:
            cons.append(cp.diag(expr) >= 0)
        else:
            cons.append((expr + expr.T) / 2 >> 0)
    prob = cp.Problem(cp.Minimize(c @ x), cons)
    prob.solve(solver=a.solver)
    xv = np.asarray(x.value, dtype=float)
    eigs = [float(np.linalg.eigvalsh(block_value(F, xv, b)).min()) for b in range(len(sizes))]
    fixture = {
        "system": a.system,
        "theorem": a.theorem,
        "box_bound": a.box,
        "objective": "feasibility",
        "sdpa": a.datfile.split("/")[-1],
        "external": {
            "solver": f"cvxpy {cp.__version__} / {a.solver}",
            "status": prob.status,
            "x": [float(v) for v in xv],
            "block_min_eig": eigs,
        },
    }
    with open(a.fixture, "w") as f:
        json.dump(fixture, f, indent=1)
        f.write("\n")
    print(a.system, prob.status, "min block eig", min(eigs), file=sys.stderr)
    return 0 if prob.status == "optimal" else 1


if __name__ == "__main__":
    sys.exit(main())
