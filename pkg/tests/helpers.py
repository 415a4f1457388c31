"""Shared oracles and generators for the test suite."""

import itertools

import numpy as np

from potnormals.expr import Binary, Constant, Unary, Variable, eval_real, to_source
from potnormals.jet import fd_partials

# |derivative| cap for randomly generated expressions; beyond it a central
# difference with the default steps cannot meet the comparison tolerances
COEFF_CAP = 1e3


def random_tree(rng, dim, depth):
    """Random expression tree of depth <= ``depth``.

    ln, sqrt and division only ever see arguments of the form x*x + c with
    c >= 0.5, so every generated tree is defined on all of R^dim.
    """
    if depth <= 1 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return Variable(int(rng.integers(dim)))
        return Constant(float(np.round(rng.uniform(0.5, 2.0), 3)))
    kind = rng.choice(["+", "-", "*", "/", "^", "neg", "sin", "cos", "exp", "ln", "sqrt"])
    child = lambda: random_tree(rng, dim, depth - 1)
    if kind in ("+", "-", "*"):
        return Binary(kind, child(), child())
    if kind in ("/", "ln", "sqrt"):
        sub = child()
        positive = Binary("+", Binary("*", sub, sub), Constant(float(np.round(rng.uniform(0.5, 2.0), 3))))
        if kind == "/":
            return Binary("/", child(), positive)
        return Unary(kind, positive)
    if kind == "^":
        return Binary("^", child(), Constant(float(rng.choice([2.0, 3.0]))))
    if kind == "exp":
        return Unary("exp", Unary("sin", child()))
    return Unary(kind, child())


def index_tuples(dim, order):
    return list(itertools.combinations_with_replacement(range(dim), order))


# oracle steps for the jet comparisons: small enough that the O(h^2)
# truncation error sits well below the tolerances, large enough for roundoff
ORACLE_STEP = {1: 1e-5, 2: 1e-4, 3: 1e-3}


def fd_jet_errors(tree, u, jet):
    """Worst normalized jet-vs-finite-difference error per order.

    Each coefficient's error is divided by max(1, |fd estimate|).
    """
    f = lambda x: eval_real(tree, x)
    dim = len(u)
    worst = {}
    for order in (1, 2, 3):
        err = 0.0
        for idx in index_tuples(dim, order):
            est = fd_partials(f, u, order, idx, ORACLE_STEP[order])
            err = max(err, abs(jet.derivative(idx) - est) / max(1.0, abs(est)))
        worst[order] = err
    return worst


def jet_is_tame(jet):
    return (
        abs(jet.value) < COEFF_CAP
        and np.max(np.abs(jet.grad)) < COEFF_CAP
        and np.max(np.abs(jet.hess)) < COEFF_CAP
        and np.max(np.abs(jet.third)) < COEFF_CAP
    )


def brute_force_wdvv(phi, eta, u, step=None):
    """WDVV residual by explicit loops over (i, j, k, l, s, p) with finite-difference thirds."""
    N = len(u)
    eta_inv = np.linalg.inv(eta)
    f = lambda x: eval_real(phi, x)
    third = np.empty((N, N, N))
    for i, j, k in itertools.product(range(N), repeat=3):
        third[i, j, k] = fd_partials(f, u, 3, (i, j, k), step)
    worst = 0.0
    for i, j, k, l in itertools.product(range(N), repeat=4):
        lhs = rhs = 0.0
        for s, p in itertools.product(range(N), repeat=2):
            lhs += third[i, j, s] * eta_inv[s, p] * third[p, k, l]
            rhs += third[i, k, s] * eta_inv[s, p] * third[p, j, l]
        worst = max(worst, abs(lhs - rhs))
    return worst


__all__ = [
    "brute_force_wdvv",
    "fd_jet_errors",
    "index_tuples",
    "jet_is_tame",
    "random_tree",
    "to_source",
]
