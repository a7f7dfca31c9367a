"""Independent dense-matrix reference for the EPR and teleportation pipelines.

Nothing here imports the simulator. Atoms are restricted to their (b, c) or
(f, e) levels, every step is a full-space matrix built with ``np.kron``, the
displacement uses closed-form Laguerre matrix elements, and the probe uses
``expm`` of the Jaynes-Cummings Hamiltonian.
"""

from __future__ import annotations

import math
from functools import reduce

import numpy as np
import scipy.linalg
from scipy.special import eval_genlaguerre


def coherent(alpha: complex, n_max: int) -> np.ndarray:
    """Coherent amplitudes by direct factorials, renormalized on the cutoff."""
    c = np.array([alpha**n / math.sqrt(math.factorial(n)) for n in range(n_max + 1)], dtype=complex)
    c *= math.exp(-abs(alpha) ** 2 / 2)
    return c / np.linalg.norm(c)


def poisson_tail_above(mu: float, n_max: int, terms: int = 400) -> float:
    """Mass of Poisson(mu) on n > n_max by explicit summation."""
    total, p = 0.0, math.exp(-mu)
    for n in range(1, n_max + terms + 1):
        p *= mu / n
        if n > n_max:
            total += p
    return total


def displacement_laguerre(beta: complex, n_max: int) -> np.ndarray:
    """``<m|D(beta)|n>`` from the generalized-Laguerre closed form."""
    d = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    x = abs(beta) ** 2
    for m in range(n_max + 1):
        for n in range(n_max + 1):
            if m >= n:
                k, sign = m - n, beta**(m - n)
                pre = math.exp(0.5 * (math.lgamma(n + 1) - math.lgamma(m + 1)))
                d[m, n] = pre * sign * math.exp(-x / 2) * eval_genlaguerre(n, k, x)
            else:
                k = n - m
                pre = math.exp(0.5 * (math.lgamma(m + 1) - math.lgamma(n + 1)))
                d[m, n] = pre * (-np.conj(beta)) ** k * math.exp(-x / 2) * eval_genlaguerre(m, k, x)
    return d


def kron(*ms):
    return reduce(np.kron, ms)


B = np.array([1, 0], dtype=complex)
C = np.array([0, 1], dtype=complex)
PB = np.outer(B, B)
PC = np.outer(C, C)
BC = np.outer(B, C)
CB = np.outer(C, B)


class DenseModel:
    """Dense reference with ``n_atoms`` two-level lambda atoms, one probe and one cavity.

    Layout: lambda atoms (2 levels each), then the probe (f, e), then the cavity.
    """

    def __init__(self, n_atoms: int, n_max: int):
        self.k = n_atoms
        self.N = n_max + 1
        n = np.arange(self.N)
        par = np.diag(np.exp(1j * np.pi * n))
        eye_n = np.eye(self.N)
        self.pi_plus = 0.5 * (par + eye_n)
        self.pi_minus = 0.5 * (par - eye_n)
        a = np.diag(np.sqrt(n[1:]), 1).astype(complex)
        sp = np.array([[0, 0], [1, 0]], dtype=complex)  # |e><f|
        self.h_jc = np.kron(sp, a) + np.kron(sp.conj().T, a.conj().T)

    def dispersive(self, atom: int) -> np.ndarray:
        """Full matrix for lambda atom ``atom`` crossing the cavity with phase pi."""
        left, right = np.eye(2**atom), np.eye(2 ** (self.k - atom - 1))
        terms = ((PB, self.pi_plus), (BC, self.pi_minus), (CB, self.pi_minus), (PC, self.pi_plus))
        return sum(kron(left, op_a, right, np.eye(2), op_c) for op_a, op_c in terms)

    def cavity_op(self, op: np.ndarray) -> np.ndarray:
        return kron(np.eye(2 ** self.k), np.eye(2), op)

    def jc(self, gt: float) -> np.ndarray:
        return kron(np.eye(2 ** self.k), scipy.linalg.expm(-1j * gt * self.h_jc))

    def run_epr(self, alpha: complex, gt: float, sign: int = 1):
        """Pair preparation; returns the full pre-detection state (atoms, probe, cavity)."""
        psi = kron(*([B] * self.k), np.array([1, 0], dtype=complex), coherent(alpha, self.N - 1))
        for atom in range(self.k):
            psi = self.dispersive(atom) @ psi
        psi = self.cavity_op(displacement_laguerre(sign * alpha, self.N - 1)) @ psi
        return self.jc(gt) @ psi

    def teleport(self, zeta: complex, xi: complex, alpha: complex, gt: float):
        """Three lambda atoms (A1, A2, A4) with A2-A4 in the ideal pair; only A1 and A2 cross the cavity."""
        assert self.k == 3
        pair = (kron(B, B) + kron(C, C)) / math.sqrt(2)
        psi = kron(zeta * B + xi * C, pair, np.array([1, 0], dtype=complex), coherent(alpha, self.N - 1))
        return self._teleport_operator(complex(alpha), float(gt)) @ psi

    def _teleport_operator(self, alpha: complex, gt: float) -> np.ndarray:
        cache = self.__dict__.setdefault("_ops", {})
        if (alpha, gt) not in cache:
            d = self.cavity_op(displacement_laguerre(alpha, self.N - 1))
            cache[(alpha, gt)] = self.jc(gt) @ d @ self.dispersive(1) @ self.dispersive(0)
        return cache[(alpha, gt)]


def branch_table(psi: np.ndarray, n_atoms: int, n_max: int) -> dict:
    """Exhaustive enumeration over atoms and probe of a dense state.

    Returns ``{(atom levels..., probe level): unnormalized cavity vector}``.
    """
    t = psi.reshape((2,) * n_atoms + (2, n_max + 1))
    out = {}
    for idx in np.ndindex(*(2,) * (n_atoms + 1)):
        labels = tuple("bc"[i] for i in idx[:-1]) + ("fe"[idx[-1]],)
        out[labels] = t[idx]
    return out


def teleport_oracle(zeta: complex, xi: complex, alpha: complex, gt: float, n_max: int, model: DenseModel | None = None):
    """e3 probability and, per sender outcome, (conditional probability, corrected-A4 fidelity)."""
    model = model or DenseModel(3, n_max)
    psi = model.teleport(zeta, xi, alpha, gt)
    t = psi.reshape(2, 2, 2, 2, n_max + 1)  # A1, A2, A4, probe, cavity
    excited = t[:, :, :, 1, :]
    p_e = float(np.sum(np.abs(excited) ** 2))
    target = np.array([zeta, xi])
    results = {}
    for i in range(2):
        for j in range(2):
            block = excited[i, j]  # A4 x cavity
            p = float(np.sum(np.abs(block) ** 2)) / p_e
            rho = block @ block.conj().T
            rho /= np.trace(rho)
            if i != j:
                x = np.array([[0, 1], [1, 0]])
                rho = x @ rho @ x
            fid = float(np.real(target.conj() @ rho @ target))
            results["bc"[i] + "bc"[j]] = (p, fid)
    return p_e, results
