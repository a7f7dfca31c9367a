"""Operator bank acting on designated subsystems of a :class:`CompositeState`.

Atomic bases: ``Atom3`` is ordered (a, b, c) and ``Atom2`` is ordered (f, e).
2x2 atomic unitaries act on (b, c) for a lambda atom, leaving ``a`` alone,
and on (f, e) for a probe atom.
"""

from __future__ import annotations

import math
import warnings
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import DomainError, ShapeError, TruncationWarning
from .fockspace import Atom2, Atom3, CavityMode, CompositeState, check_truncation

#: Rotation taking |b> -> |c> and |c> -> -|b> on the (b, c) subspace.
R_ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]], dtype=np.complex128)

#: The (b, c) swap applied by the receiver after a mixed detection.
R4_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)

IDENTITY_2 = np.eye(2, dtype=np.complex128)

UNITARY_TOLERANCE = 1e-12


def _require(s: CompositeState, index: int, kind, what: str):
    if not 0 <= index < len(s.subsystems):
        raise ShapeError(f"{what}: subsystem index {index} out of range")
    sub = s.subsystems[index]
    if not isinstance(sub, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ShapeError(f"{what}: subsystem {index} is {type(sub).__name__}, expected {names}")
    return sub


def _apply_single(s: CompositeState, index: int, matrix: np.ndarray) -> CompositeState:
    t = np.tensordot(matrix, s.tensor(), axes=([1], [index]))
    return s.replace(amps=np.moveaxis(t, 0, index).reshape(-1))


def _apply_diagonal(s: CompositeState, index: int, diag: np.ndarray) -> CompositeState:
    shape = [1] * len(s.dims)
    shape[index] = diag.size
    return s.replace(amps=(s.tensor() * diag.reshape(shape)).reshape(-1))


def _pair_view(s: CompositeState, atom_index: int, cavity_index: int) -> np.ndarray:
    """Tensor with the atom and cavity axes moved to the last two positions."""
    return np.moveaxis(s.tensor(), (atom_index, cavity_index), (-2, -1))


def _from_pair_view(s: CompositeState, t: np.ndarray, atom_index: int, cavity_index: int) -> CompositeState:
    return s.replace(amps=np.moveaxis(t, (-2, -1), (atom_index, cavity_index)).reshape(-1))


def _parity(n_max: int) -> np.ndarray:
    return np.where(np.arange(n_max + 1) % 2 == 0, 1.0, -1.0).astype(np.complex128)


def _phase_diag(n_max: int, phi: float) -> np.ndarray:
    # exact parity at phi = pi keeps projectors free of 1e-16 imaginary residue
    if phi == math.pi:
        return _parity(n_max)
    return np.exp(1j * phi * np.arange(n_max + 1))


def number_phase(s: CompositeState, cavity_index: int, phi: float) -> CompositeState:
    """Apply ``exp(i phi a^dag a)`` to one cavity."""
    mode = _require(s, cavity_index, CavityMode, "number_phase")
    return _apply_diagonal(s, cavity_index, _phase_diag(mode.n_max, phi))


def parity_project(s: CompositeState, cavity_index: int, sign: int) -> CompositeState:
    """Apply ``(exp(i pi a^dag a) + sign) / 2``.

    ``sign=+1`` keeps even Fock levels; ``sign=-1`` keeps odd levels with
    a factor -1, so the odd projector squares to minus itself.
    """
    mode = _require(s, cavity_index, CavityMode, "parity_project")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    return _apply_diagonal(s, cavity_index, 0.5 * (_parity(mode.n_max) + sign))


@lru_cache(maxsize=64)
def _displacement_cached(beta: complex, n_max: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(np.complex128)
    gen = beta * a.conj().T - np.conj(beta) * a
    d = scipy.linalg.expm(gen)
    d.setflags(write=False)
    return d


def displacement_matrix(beta: complex, n_max: int) -> np.ndarray:
    """Truncated displacement ``exp(beta a^dag - beta* a)`` on levels ``0..n_max``.

    Built by exponentiating the truncated generator, so it is exactly unitary
    on the truncated space but only matches the true operator on states with
    negligible weight near the top level.
    """
    return _displacement_cached(complex(beta), int(n_max))


def displace(s: CompositeState, cavity_index: int, beta: complex) -> CompositeState:
    mode = _require(s, cavity_index, CavityMode, "displace")
    if beta == 0:
        return s
    out = _apply_single(s, cavity_index, displacement_matrix(beta, mode.n_max))
    tail = check_truncation(out, cavity_index, f"displace(beta={complex(beta)})")
    return out.with_diagnostics(tail_mass=tail)


def dispersive_lambda_evolve(s: CompositeState, atom_index: int, cavity_index: int, phi: float) -> CompositeState:
    """Effective dispersive propagator of a lambda atom crossing the cavity.

    Per Fock level ``n`` with ``e = exp(i phi n)``: ``|a> -> -e |a>``, and
    the (b, c) block is ``[[e+1, e-1], [e-1, e+1]] / 2``.
    """
    _require(s, atom_index, Atom3, "dispersive_lambda_evolve")
    mode = _require(s, cavity_index, CavityMode, "dispersive_lambda_evolve")
    e = _phase_diag(mode.n_max, phi)
    plus, minus = 0.5 * (e + 1.0), 0.5 * (e - 1.0)
    t = _pair_view(s, atom_index, cavity_index)
    out = np.empty_like(t)
    out[..., 0, :] = -e * t[..., 0, :]
    out[..., 1, :] = plus * t[..., 1, :] + minus * t[..., 2, :]
    out[..., 2, :] = minus * t[..., 1, :] + plus * t[..., 2, :]
    return _from_pair_view(s, out, atom_index, cavity_index)


def jc_evolve(s: CompositeState, atom_index: int, cavity_index: int, gt: float) -> CompositeState:
    """Resonant Jaynes-Cummings propagator for a probe atom.

    ``|f,n> -> cos(gt sqrt n)|f,n> - i sin(gt sqrt n)|e,n-1>`` within each
    closed block. The block pairing ``|e,n_max>`` with ``|f,n_max+1>`` does
    not fit the truncation and is left as identity; the probability it held
    is recorded in ``diagnostics['jc_clipped_probability']``.
    """
    _require(s, atom_index, Atom2, "jc_evolve")
    mode = _require(s, cavity_index, CavityMode, "jc_evolve")
    t = _pair_view(s, atom_index, cavity_index)
    f, e = t[..., 0, :], t[..., 1, :]
    n = np.arange(mode.n_max + 1)
    # block k couples |f,k> and |e,k-1>, k = 1..n_max
    angle = gt * np.sqrt(n[1:])
    c, sn = np.cos(angle), np.sin(angle)
    out = np.empty_like(t)
    out[..., 0, 0] = f[..., 0]
    out[..., 0, 1:] = c * f[..., 1:] - 1j * sn * e[..., :-1]
    out[..., 1, :-1] = c * e[..., :-1] - 1j * sn * f[..., 1:]
    out[..., 1, -1] = e[..., -1]
    clipped = float(np.sum(np.abs(e[..., -1]) ** 2))
    top = float(np.sum(np.abs(t[..., :, -1]) ** 2))
    if top > mode.tail_tolerance * max(s.norm2(), 1e-300):
        warnings.warn(
            f"jc_evolve: top Fock level holds {top:.3g} > tolerance {mode.tail_tolerance:.3g}; "
            "the |e,n_max> <-> |f,n_max+1> block is clipped",
            TruncationWarning,
            stacklevel=2,
        )
    return _from_pair_view(s, out, atom_index, cavity_index).with_diagnostics(jc_clipped_probability=clipped)


def check_unitary(u, tol: float = UNITARY_TOLERANCE) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (2, 2):
        raise DomainError(f"atomic unitary must be 2x2, got shape {u.shape}")
    if not np.all(np.isfinite(u)) or np.max(np.abs(u.conj().T @ u - IDENTITY_2)) > tol:
        raise DomainError("matrix is not unitary within tolerance")
    return u


def apply_atomic_unitary(s: CompositeState, atom_index: int, u) -> CompositeState:
    sub = _require(s, atom_index, (Atom3, Atom2), "apply_atomic_unitary")
    u = check_unitary(u)
    if isinstance(sub, Atom3):
        full = np.eye(3, dtype=np.complex128)
        full[1:, 1:] = u
        u = full
    return _apply_single(s, atom_index, u)
