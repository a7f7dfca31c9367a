"""Qubit abstraction of the teleportation scheme and its check against the physical model.

Dictionary: ``b -> 0``, ``c -> 1`` for atoms; even coherent state ``-> 0_C`` and
odd coherent state ``-> 1_C`` for the cavity. The dispersive passage of two
atoms becomes a three-qubit XOR gate flipping both atoms when the cavity
qubit is 1. Detecting the probe excited projects the cavity qubit onto
``(0_C + 1_C)/sqrt 2``, since only that combination survives the injection as
``|2 alpha>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ModelMismatchError
from .fockspace import CompositeState, even_odd_state
from .protocols import TeleportConfig, teleport

# register layout used by the teleportation reference
Q_A1, Q_A2, Q_A4, Q_C = 0, 1, 2, 3

_PLUS_X = np.array([1.0, 1.0], dtype=np.complex128) / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class QubitRegister:
    """``2**width`` amplitudes; qubit 0 is the most significant bit of the index."""

    width: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        if self.width < 1 or amps.size != 2**self.width:
            raise DomainError(f"register of width {self.width} needs {2 ** self.width} amplitudes")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def basis(cls, *bits: int) -> "QubitRegister":
        amps = np.zeros(2 ** len(bits), dtype=np.complex128)
        amps[int("".join(str(int(b)) for b in bits), 2)] = 1.0
        return cls(len(bits), amps)

    @classmethod
    def product(cls, *qubits) -> "QubitRegister":
        amps = np.ones(1, dtype=np.complex128)
        for q in qubits:
            amps = np.kron(amps, np.asarray(q, dtype=np.complex128))
        return cls(len(qubits), amps)

    def tensor(self) -> np.ndarray:
        return self.amps.reshape((2,) * self.width)

    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)


def _check_index(r: QubitRegister, k: int):
    if not 0 <= k < r.width:
        raise DomainError(f"qubit index {k} outside 0..{r.width - 1}")


def xor_gate(r: QubitRegister, a: int, b: int, c: int) -> QubitRegister:
    """``|A>|B>|C> -> |A xor C>|B xor C>|C>`` on qubits ``a``, ``b`` with control ``c``."""
    for k in (a, b, c):
        _check_index(r, k)
    if len({a, b, c}) != 3:
        raise DomainError("xor_gate needs three distinct qubits")
    t = np.array(r.tensor())
    sel = [slice(None)] * r.width
    sel[c] = 1
    sub = t[tuple(sel)]
    # after removing axis c, indices above it shift down by one
    aa, bb = (a - (a > c)), (b - (b > c))
    t[tuple(sel)] = np.flip(np.flip(sub, axis=aa), axis=bb)
    return QubitRegister(r.width, t.reshape(-1))


def bit_flip(r: QubitRegister, k: int) -> QubitRegister:
    _check_index(r, k)
    return QubitRegister(r.width, np.flip(r.tensor(), axis=k).reshape(-1))


def project_qubit(r: QubitRegister, k: int, vector) -> QubitRegister:
    """Contract qubit ``k`` with ``<vector|``; the result has one qubit fewer (unnormalized)."""
    _check_index(r, k)
    if r.width < 2:
        raise DomainError("cannot remove the last qubit")
    t = np.tensordot(np.conj(np.asarray(vector, dtype=np.complex128)), r.tensor(), axes=([0], [k]))
    return QubitRegister(r.width - 1, t.reshape(-1))


def initial_register(zeta: complex, xi: complex) -> QubitRegister:
    """Unknown qubit on A1, Bell pair on (A2, A4), cavity qubit in ``(0_C + 1_C)/sqrt 2``."""
    _check_normalized(zeta, xi)
    t = np.zeros((2, 2, 2, 2), dtype=np.complex128)
    for a1, amp in ((0, zeta), (1, xi)):
        for pair in (0, 1):
            for cq in (0, 1):
                t[a1, pair, pair, cq] = amp * 0.5
    return QubitRegister(4, t.reshape(-1))


def _check_normalized(zeta: complex, xi: complex):
    norm = abs(complex(zeta)) ** 2 + abs(complex(xi)) ** 2
    if abs(norm - 1.0) > 1e-12:
        raise DomainError(f"|zeta|^2 + |xi|^2 = {norm!r}, expected 1")


@dataclass(frozen=True)
class QubitOutcome:
    outcome: str  # sender bits as physical level names, e.g. "bc"
    probability: float
    received: np.ndarray
    corrected: np.ndarray
    fidelity_before_correction: float
    fidelity_to_input: float


_LEVEL = {0: "b", 1: "c"}


def _qfid(u: np.ndarray, v: np.ndarray) -> float:
    return float(abs(np.vdot(u, v)) ** 2 / (np.vdot(u, u).real * np.vdot(v, v).real))


def entangled_register(zeta: complex, xi: complex) -> QubitRegister:
    """State after the XOR gate, before the probe merges the cavity qubit."""
    return xor_gate(initial_register(zeta, xi), Q_A1, Q_A2, Q_C)


def sender_marginals(r: QubitRegister) -> dict[str, float]:
    """Outcome distribution of measuring A1 and A2 on a four-qubit register."""
    p = (np.abs(r.tensor()) ** 2).sum(axis=(Q_A4, Q_C)) / r.norm2()
    return {_LEVEL[i] + _LEVEL[j]: float(p[i, j]) for i in (0, 1) for j in (0, 1)}


def qubit_teleport_reference(zeta: complex, xi: complex) -> list[QubitOutcome]:
    """Four-outcome teleportation in the qubit picture, conditioned on the merge.

    Outcomes are ordered bb, bc, cb, cc; mixed outcomes receive a bit flip.
    """
    target = np.array([zeta, xi], dtype=np.complex128)
    merged = project_qubit(entangled_register(zeta, xi), Q_C, _PLUS_X)
    merged = QubitRegister(3, merged.amps / math.sqrt(merged.norm2()))
    t = merged.tensor()
    out = []
    for i in (0, 1):
        for j in (0, 1):
            received = t[i, j, :]
            p = float(np.vdot(received, received).real)
            corrected = received[::-1] if i != j else received
            out.append(QubitOutcome(_LEVEL[i] + _LEVEL[j], p, received / math.sqrt(p), corrected / math.sqrt(p),
                                    _qfid(received, target), _qfid(corrected, target)))
    return out


def dictionary_fidelity(state: CompositeState, alpha: complex) -> float:
    """Fidelity of a two-atom-plus-cavity state to its qubit image.

    The cavity is expanded on the normalized even/odd coherent states; the
    resulting eight amplitudes are compared with the qubit state
    ``(|00,0_C> + |11,1_C>)/sqrt 2`` produced by two dispersive passes. The
    shortfall from 1 comes from the unequal norms of the even and odd
    states at finite ``alpha``.
    """
    mode = state.subsystems[-1]
    plus = even_odd_state(alpha, 1, mode).normalized().amps
    minus = even_odd_state(alpha, -1, mode).normalized().amps
    t = state.tensor()[1:, 1:, :]  # (b, c) x (b, c) x Fock
    image = np.stack([t @ plus.conj(), t @ minus.conj()], axis=-1).reshape(-1)
    ref = np.zeros(8, dtype=np.complex128)
    ref[0b000] = ref[0b111] = 1 / math.sqrt(2.0)
    return _qfid(image, ref) * float(np.vdot(image, image).real) / state.norm2()


@dataclass(frozen=True)
class ModelComparison:
    alpha: complex
    bound: float
    max_probability_deviation: float
    max_fidelity_deviation: float
    rows: list[dict] = field(default_factory=list)

    @property
    def within_bound(self) -> bool:
        return self.max_probability_deviation <= self.bound


def deviation_bound(alpha: complex) -> float:
    return 10.0 * math.exp(-2.0 * abs(complex(alpha)) ** 2) + 1e-9


def compare_models(zeta: complex, xi: complex, alpha: complex = 2.0, n_max: int | None = None,
                   probe_gt: float | None = None, check: bool = True) -> ModelComparison:
    """Run the physical and qubit protocols side by side.

    Two stages are compared per outcome: the sender's detection statistics
    right after the dispersive passes (where the finite-``alpha`` norm
    imbalance of the even/odd states shows up), and the post-selected,
    corrected outcomes. With ``check=True`` a probability deviation above
    ``10 exp(-2|alpha|^2) + 1e-9`` raises :class:`ModelMismatchError`.
    """
    _check_normalized(zeta, xi)
    phys = teleport(TeleportConfig(zeta, xi, alpha=alpha, probe_gt=probe_gt, n_max=n_max))
    ref = {o.outcome: o for o in qubit_teleport_reference(zeta, xi)}
    pre_q = sender_marginals(entangled_register(zeta, xi))
    rows = []
    for o in phys.outcomes:
        q = ref[o.outcome]
        rows.append({
            "stage": "dispersive",
            "outcome": o.outcome,
            "physical_probability": phys.dispersive_outcome_probabilities[o.outcome],
            "qubit_probability": pre_q[o.outcome],
            "physical_fidelity": float("nan"),
            "qubit_fidelity": float("nan"),
        })
        rows.append({
            "stage": "post-selected",
            "outcome": o.outcome,
            "physical_probability": o.probability,
            "qubit_probability": q.probability,
            "physical_fidelity": o.fidelity_to_input,
            "qubit_fidelity": q.fidelity_to_input,
        })
    for r in rows:
        r["probability_deviation"] = abs(r["physical_probability"] - r["qubit_probability"])
        r["fidelity_deviation"] = abs(r["physical_fidelity"] - r["qubit_fidelity"]) if r["stage"] == "post-selected" else 0.0
    rows.sort(key=lambda r: (r["stage"] != "dispersive", r["outcome"]))
    result = ModelComparison(
        alpha=complex(alpha),
        bound=deviation_bound(alpha),
        max_probability_deviation=max(r["probability_deviation"] for r in rows),
        max_fidelity_deviation=max(r["fidelity_deviation"] for r in rows),
        rows=rows,
    )
    if check and not result.within_bound:
        raise ModelMismatchError(
            f"outcome probabilities differ by {result.max_probability_deviation:.3g} > bound {result.bound:.3g}"
        )
    return result

