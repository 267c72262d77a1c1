"""Slow, independent re-implementations used as test oracles.

Nothing here touches the package's model builders or simulator: the routing
energies are evaluated straight from the defining sums on explicit bit arrays,
and QAOA is simulated with dense matrices built from Kronecker products.
"""

import itertools
import math

import numpy as np
from scipy.linalg import expm

# --- routing energies ---------------------------------------------------------


def unpack(instance, bits):
    """Split a flat bit vector into y[v][i][a] and per-vehicle slack bits."""
    n0, nv = instance.n_customers, instance.n_vehicles
    bits = [int(b) for b in bits]
    y = [[[bits[(v * n0 + i) * n0 + a] for a in range(n0)] for i in range(n0)] for v in range(nv)]
    pos = n0 * n0 * nv
    slack = []
    for veh in instance.vehicles:
        width = int(math.floor(math.log2(veh.capacity))) + 1
        slack.append(bits[pos : pos + width])
        pos += width
    return y, slack


def register_weights(capacity):
    m = int(math.floor(math.log2(capacity)))
    return [2**k for k in range(m)] + [capacity + 1 - 2**m]


def leg_cost(instance, v, a, b):
    """Cost of driving vehicle v between nodes a and b (0 is the depot)."""
    pts = [instance.depot_position] + [c.position for c in instance.customers]
    return instance.vehicles[v].cost_per_km * math.dist(pts[a], pts[b])


def routing_cost(instance, bits):
    """Travel plus fixed cost from the edge indicators, unit prefactors."""
    y, _ = unpack(instance, bits)
    n0 = instance.n_customers
    total = 0.0
    for v in range(instance.n_vehicles):
        t = instance.vehicles[v].fixed_cost
        for i in range(n0):
            for j in range(n0):
                if i != j:
                    x_ij = sum(y[v][i][a] * y[v][j][a + 1] for a in range(n0 - 1))
                    total += leg_cost(instance, v, i + 1, j + 1) * x_ij
            x_0i = y[v][i][0]
            for a in range(1, n0):
                others = sum(y[v][j][a - 1] for j in range(n0) if j != i)
                x_0i += (1 - others) * y[v][i][a]
            x_i0 = y[v][i][n0 - 1]
            for a in range(n0 - 1):
                others = sum(y[v][j][a + 1] for j in range(n0) if j != i)
                x_i0 += y[v][i][a] * (1 - others)
            total += (leg_cost(instance, v, 0, i + 1) + t) * x_0i
            total += leg_cost(instance, v, i + 1, 0) * x_i0
    return total


def constraint_energy(instance, bits):
    """Visit-once + position-uniqueness + capacity penalties, unit prefactors."""
    y, slack = unpack(instance, bits)
    n0, nv = instance.n_customers, instance.n_vehicles
    e = 0
    for i in range(n0):
        e += (1 - sum(y[v][i][a] for v in range(nv) for a in range(n0))) ** 2
    for a in range(n0):
        e += (1 - sum(y[v][i][a] for v in range(nv) for i in range(n0))) ** 2
    for v, veh in enumerate(instance.vehicles):
        reg = sum(w * z for w, z in zip(register_weights(veh.capacity), slack[v]))
        load = sum(instance.customers[i].demand * y[v][i][a] for i in range(n0) for a in range(n0))
        e += (reg - load) ** 2
    return e


def all_bits(n):
    """Every bitstring of length n; row z has bit k of z in column k."""
    return ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(np.int8)


def tour_bits(instance, routes):
    """Bits for routes placed on consecutive positions with a matching slack register."""
    n0 = instance.n_customers
    bits = [0] * (n0 * n0 * instance.n_vehicles)
    for v, route in enumerate(routes):
        for a, c in enumerate(route):
            bits[(v * n0 + c - 1) * n0 + a] = 1
    for v, veh in enumerate(instance.vehicles):
        load = sum(instance.customers[c - 1].demand for c in routes[v])
        w = register_weights(veh.capacity)
        for combo in itertools.product((0, 1), repeat=len(w)):
            if sum(a * b for a, b in zip(w, combo)) == load:
                bits += list(combo)
                break
        else:
            raise ValueError("load not representable")
    return np.array(bits)


# --- dense QAOA ---------------------------------------------------------------

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_I = np.eye(2, dtype=complex)


def mixer_hamiltonian(n):
    """Sum of Pauli-X on every qubit; qubit k is bit k of the basis index."""
    total = np.zeros((2**n, 2**n), dtype=complex)
    for k in range(n):
        op = np.array([[1]], dtype=complex)
        for q in reversed(range(n)):  # kron puts the most significant qubit first
            op = np.kron(op, _X if q == k else _I)
        total += op
    return total


def dense_state(energies, gammas, betas):
    n = int(np.log2(len(energies)))
    psi = np.full(2**n, 2 ** (-n / 2), dtype=complex)
    hc = np.diag(np.asarray(energies, dtype=complex))
    hb = mixer_hamiltonian(n)
    for g, b in zip(gammas, betas):
        psi = expm(-1j * g * hc) @ psi
        psi = expm(-1j * b * hb) @ psi
    return psi


def dense_expectation(energies, gammas, betas):
    psi = dense_state(energies, gammas, betas)
    return float(np.real(np.vdot(psi, np.asarray(energies) * psi)))
