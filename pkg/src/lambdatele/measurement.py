"""Projective measurement of atoms, post-selection and branch sampling.

A measured atom is removed from the branch state. Branch states are left
unnormalized so that their squared norm is the joint probability of the
recorded outcomes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, PostSelectionError, ShapeError, UnsupportedOperationError
from .fockspace import CavityMode, CompositeState, is_atom, level_index

#: Probabilities at or below this are treated as impossible by post_select.
MIN_POSTSELECT_PROBABILITY = 1e-15

#: Branches lighter than this fraction of the state's norm are round-off, not outcomes.
NEGLIGIBLE_PROBABILITY = 1e-24


@dataclass(frozen=True)
class Branch:
    """One measurement record.

    ``labels`` holds ``(subsystem index, level)`` pairs, with indices referring
    to the state that was measured.
    """

    labels: tuple[tuple[int, str], ...]
    state: CompositeState
    probability: float

    @property
    def outcome(self) -> str:
        return "".join(level for _, level in self.labels)


def _check_atom(s: CompositeState, index: int):
    if not 0 <= index < len(s.subsystems):
        raise ShapeError(f"subsystem index {index} out of range")
    sub = s.subsystems[index]
    if isinstance(sub, CavityMode):
        raise UnsupportedOperationError("the cavity field is never measured directly")
    if not is_atom(sub):
        raise ShapeError(f"subsystem {index} is not an atom")
    return sub


def _project_out(s: CompositeState, index: int, level_pos: int) -> CompositeState:
    t = np.take(s.tensor(), level_pos, axis=index)
    subs = s.subsystems[:index] + s.subsystems[index + 1 :]
    return CompositeState(subs, t.reshape(-1), s.diagnostics)


def measure(s: CompositeState, subsystem_index: int) -> list[Branch]:
    """One branch per level of the addressed atom with non-negligible probability."""
    sub = _check_atom(s, subsystem_index)
    floor = NEGLIGIBLE_PROBABILITY * s.norm2()
    out = []
    for pos, level in enumerate(sub.levels):
        st = _project_out(s, subsystem_index, pos)
        p = st.norm2()
        if p > floor:
            out.append(Branch(((subsystem_index, level),), st, p))
    return out


def post_select(s: CompositeState, subsystem_index: int, level: str,
                min_probability: float = MIN_POSTSELECT_PROBABILITY) -> tuple[float, CompositeState]:
    """Condition on one outcome; returns its probability and the normalized remainder."""
    sub = _check_atom(s, subsystem_index)
    st = _project_out(s, subsystem_index, level_index(sub, level))
    p = st.norm2() / s.norm2()
    if p <= min_probability:
        name = sub.name or f"#{subsystem_index}"
        raise PostSelectionError(f"outcome {level!r} on atom {name} has probability {p:.3g}", probability=p)
    return p, st.normalized()


def enumerate_joint(s: CompositeState, subsystem_indices: Sequence[int]) -> list[Branch]:
    """Complete branch set over the Cartesian product of the addressed atoms' levels.

    Branches come out in lexicographic level order of ``subsystem_indices``;
    combinations below :data:`NEGLIGIBLE_PROBABILITY` are dropped.
    """
    idx = list(subsystem_indices)
    if len(set(idx)) != len(idx):
        raise ShapeError("subsystem indices must be distinct")
    subs = [_check_atom(s, i) for i in idx]
    rest = [i for i in range(len(s.subsystems)) if i not in idx]
    t = np.transpose(s.tensor(), idx + rest)
    rest_subs = tuple(s.subsystems[i] for i in rest)
    floor = NEGLIGIBLE_PROBABILITY * s.norm2()
    out = []
    for combo in itertools.product(*(range(sub.dim) for sub in subs)):
        amps = t[combo].reshape(-1)
        p = float(np.vdot(amps, amps).real)
        if p > floor:
            labels = tuple((i, sub.levels[k]) for i, sub, k in zip(idx, subs, combo))
            out.append(Branch(labels, CompositeState(rest_subs, amps, s.diagnostics), p))
    return out


def sample(branches: Sequence[Branch], seed: int) -> Branch:
    """Draw one branch by inverse CDF in declaration order, seeded per call."""
    if not branches:
        raise DomainError("cannot sample from an empty branch list")
    probs = np.array([b.probability for b in branches], dtype=float)
    total = probs.sum()
    if abs(total - 1.0) > 1e-6:
        raise DomainError(f"branch probabilities sum to {total}, expected 1")
    u = np.random.default_rng(seed).random() * total
    cdf = np.cumsum(probs)
    k = int(np.searchsorted(cdf, u, side="right"))
    # skip trailing zero-probability branches if u lands exactly on the end
    k = min(k, len(branches) - 1)
    while probs[k] == 0.0 and k > 0:
        k -= 1
    return branches[k]
