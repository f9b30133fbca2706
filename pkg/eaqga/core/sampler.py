"""
Exact single-shot sampling of EAQGA circuits.

Every circuit EAQGA builds is a layer of RY rotations followed by CNOT fan-outs
from one rotated control per chain (with an X on anti-correlated targets). Its
computational-basis statistics are therefore a product of independent biased
qubits and parity chains: the control is a biased coin and every target copies
or complements it. Only those statistics are stored (``p1 = beta**2``).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, NamedTuple, Tuple

import numpy as np

from ..errors import PlanError, UsageError
from .problem import bit_table, bits_to_str

MAX_DISTRIBUTION_QUBITS = 20


class Parity(str, Enum):
    """Relation of a chain target to its control."""

    POSITIVE = "POS"
    NEGATIVE = "NEG"


class Gate(NamedTuple):
    name: str
    qubits: Tuple[int, ...]
    angle: float = 0.0


def _check_probability(p: float, what: str) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise UsageError(f"{what} must lie in [0, 1], got {p}")
    return p


def bias_angle(p_a: float, desired_bit: int) -> float:
    """RY angle that measures ``desired_bit`` with probability ``p_a``.

    Args:
        p_a: Probability of reproducing the desired bit.
        desired_bit: The favored outcome, 0 or 1.

    Returns:
        float: ``2*arccos(sqrt(p_a))`` for 0, ``2*arccos(sqrt(1 - p_a))`` for 1.
    """
    p_a = _check_probability(p_a, "p_a")
    if desired_bit not in (0, 1):
        raise UsageError(f"desired_bit must be 0 or 1, got {desired_bit}")
    if desired_bit == 0:
        return 2.0 * math.acos(math.sqrt(p_a))
    return 2.0 * math.acos(math.sqrt(1.0 - p_a))


def p1_from_angle(theta: float) -> float:
    """Probability of measuring 1 after ``RY(theta)|0>``."""
    return math.sin(theta / 2.0) ** 2


def angle_from_p1(p1: float) -> float:
    p1 = _check_probability(p1, "p1")
    return 2.0 * math.asin(math.sqrt(p1))


@dataclass(frozen=True)
class Chain:
    """One rotated control fanned out to its targets through CNOTs."""

    control: int
    control_p1: float
    targets: Tuple[Tuple[int, Parity], ...]

    def __post_init__(self):
        targets = tuple((int(i), Parity(p)) for i, p in self.targets)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "control", int(self.control))
        object.__setattr__(self, "control_p1", _check_probability(self.control_p1, "control_p1"))
        if not targets:
            raise PlanError(f"chain on control {self.control} has no targets")
        indices = [i for i, _ in targets]
        if len(set(indices)) != len(indices):
            raise PlanError(f"chain on control {self.control} repeats a target")
        if self.control in indices:
            raise PlanError(f"chain control {self.control} is also a target")

    @property
    def qubits(self) -> Tuple[int, ...]:
        return (self.control,) + tuple(i for i, _ in self.targets)


@dataclass(frozen=True)
class SamplingPlan:
    """Measurement statistics of one circuit.

    Attributes:
        n: Qubit count.
        independents: Unentangled qubit index -> probability of measuring 1.
        chains: Disjoint parity chains covering the remaining qubits.
    """

    n: int
    independents: Mapping[int, float]
    chains: Tuple[Chain, ...] = ()

    _ind_idx: np.ndarray = field(init=False, repr=False, compare=False)
    _ind_p1: np.ndarray = field(init=False, repr=False, compare=False)
    _ctl_idx: np.ndarray = field(init=False, repr=False, compare=False)
    _ctl_p1: np.ndarray = field(init=False, repr=False, compare=False)
    _tgt_idx: np.ndarray = field(init=False, repr=False, compare=False)
    _tgt_chain: np.ndarray = field(init=False, repr=False, compare=False)
    _tgt_flip: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise PlanError(f"plan needs at least one qubit, got n={n}")
        independents = {int(i): _check_probability(p, f"p1 of qubit {i}") for i, p in sorted(self.independents.items())}
        chains = tuple(sorted(self.chains, key=lambda c: c.control))

        seen = np.zeros(n, dtype=int)
        for i in independents:
            if not 0 <= i < n:
                raise PlanError(f"qubit {i} outside [0, {n})")
            seen[i] += 1
        for chain in chains:
            for i in chain.qubits:
                if not 0 <= i < n:
                    raise PlanError(f"qubit {i} outside [0, {n})")
                seen[i] += 1
        if (seen != 1).any():
            bad = np.flatnonzero(seen != 1).tolist()
            raise PlanError(f"qubits {bad} are not covered exactly once")

        object.__setattr__(self, "n", n)
        object.__setattr__(self, "independents", independents)
        object.__setattr__(self, "chains", chains)
        object.__setattr__(self, "_ind_idx", np.fromiter(independents.keys(), dtype=np.intp, count=len(independents)))
        object.__setattr__(self, "_ind_p1", np.fromiter(independents.values(), dtype=float, count=len(independents)))
        object.__setattr__(self, "_ctl_idx", np.array([c.control for c in chains], dtype=np.intp))
        object.__setattr__(self, "_ctl_p1", np.array([c.control_p1 for c in chains], dtype=float))
        tgt = [(i, k, p is Parity.NEGATIVE) for k, c in enumerate(chains) for i, p in c.targets]
        object.__setattr__(self, "_tgt_idx", np.array([t[0] for t in tgt], dtype=np.intp))
        object.__setattr__(self, "_tgt_chain", np.array([t[1] for t in tgt], dtype=np.intp))
        object.__setattr__(self, "_tgt_flip", np.array([t[2] for t in tgt], dtype=np.uint8))

    @property
    def draws_per_shot(self) -> int:
        return len(self.independents) + len(self.chains)

    def favored_probability(self, qubit: int, bit: int) -> float:
        """Probability that a rotated qubit (independent or control) measures ``bit``."""
        if qubit in self.independents:
            p1 = self.independents[qubit]
        else:
            matches = [c.control_p1 for c in self.chains if c.control == qubit]
            if not matches:
                raise UsageError(f"qubit {qubit} is a chain target, not a rotated qubit")
            p1 = matches[0]
        return p1 if bit == 1 else 1.0 - p1


def uniform_plan(n: int) -> SamplingPlan:
    """The Hadamard layer: every qubit independent with p1 = 0.5."""
    return SamplingPlan(n=n, independents={i: 0.5 for i in range(n)})


def _fill(plan: SamplingPlan, u: np.ndarray) -> np.ndarray:
    k = len(plan._ind_idx)
    out = np.empty(u.shape[:-1] + (plan.n,), dtype=np.uint8)
    # Independents first, then chain controls
    out[..., plan._ind_idx] = u[..., :k] < plan._ind_p1
    controls = (u[..., k:] < plan._ctl_p1).astype(np.uint8)
    out[..., plan._ctl_idx] = controls
    # Targets copy their control, flipped when anti-correlated
    out[..., plan._tgt_idx] = controls[..., plan._tgt_chain] ^ plan._tgt_flip
    return out


def sample(plan: SamplingPlan, rng: np.random.Generator) -> np.ndarray:
    """Measure the plan's circuit once.

    Consumes one uniform per independent qubit (ascending index) and then one
    per chain (ascending control index).
    """
    bits = _fill(plan, rng.random(plan.draws_per_shot))
    bits.setflags(write=False)
    return bits


def sample_many(plan: SamplingPlan, shots: int, rng: np.random.Generator) -> np.ndarray:
    """``shots`` independent measurements as a (shots, n) array."""
    if shots < 0:
        raise UsageError(f"shots must be >= 0, got {shots}")
    return _fill(plan, rng.random((shots, plan.draws_per_shot)))


def plan_distribution(plan: SamplingPlan) -> Dict[str, float]:
    """Exact joint distribution over all ``2**n`` bitstrings.

    Raises:
        UsageError: When n exceeds 20 qubits.
    """
    if plan.n > MAX_DISTRIBUTION_QUBITS:
        raise UsageError(f"exact distribution limited to {MAX_DISTRIBUTION_QUBITS} qubits, plan has {plan.n}")
    bits = bit_table(plan.n)
    probs = np.ones(len(bits))
    for i, p1 in plan.independents.items():
        probs *= np.where(bits[:, i] == 1, p1, 1.0 - p1)
    for chain in plan.chains:
        control = bits[:, chain.control]
        probs *= np.where(control == 1, chain.control_p1, 1.0 - chain.control_p1)
        # Targets are fixed by the control
        for i, parity in chain.targets:
            expected = control ^ (parity is Parity.NEGATIVE)
            probs *= bits[:, i] == expected
    return {bits_to_str(b): float(p) for b, p in zip(bits, probs)}


def plan_to_gates(plan: SamplingPlan) -> List[Gate]:
    """Circuit realizing the plan from ``|0...0>``.

    RY on every independent and every chain control, then for each target an X
    when anti-correlated followed by CX from the control.
    """
    gates = [Gate("ry", (i,), angle_from_p1(p1)) for i, p1 in plan.independents.items()]
    for chain in plan.chains:
        gates.append(Gate("ry", (chain.control,), angle_from_p1(chain.control_p1)))
        for i, parity in chain.targets:
            if parity is Parity.NEGATIVE:
                gates.append(Gate("x", (i,)))
            gates.append(Gate("cx", (chain.control, i)))
    return gates


def circuit_stats(plan: SamplingPlan) -> Dict[str, int]:
    """Gate counts and depth of :func:`plan_to_gates`.

    X gates run alongside the control's RY, so depth is one rotation layer plus
    the longest CNOT fan-out.
    """
    fan_out = max((len(c.targets) for c in plan.chains), default=0)
    return {
        "ry": len(plan.independents) + len(plan.chains),
        "x": sum(p is Parity.NEGATIVE for c in plan.chains for _, p in c.targets),
        "cx": sum(len(c.targets) for c in plan.chains),
        "depth": 1 + fan_out,
    }


def plan_to_dict(plan: SamplingPlan) -> Dict[str, Any]:
    return {
        "n": plan.n,
        "independents": {str(i): p1 for i, p1 in plan.independents.items()},
        "chains": [
            {
                "control": c.control,
                "p1": c.control_p1,
                "targets": [[i, p.value] for i, p in c.targets],
            }
            for c in plan.chains
        ],
    }


def plan_from_dict(data: Mapping[str, Any]) -> SamplingPlan:
    try:
        chains = tuple(
            Chain(control=c["control"], control_p1=c["p1"], targets=tuple((i, Parity(p)) for i, p in c["targets"]))
            for c in data.get("chains", ())
        )
        return SamplingPlan(
            n=data["n"],
            independents={int(i): p for i, p in data.get("independents", {}).items()},
            chains=chains,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise PlanError(f"malformed plan document: {e}")
