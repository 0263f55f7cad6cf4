from functools import lru_cache, reduce
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


def purify_step(q1: float, q2: float) -> float:
    """
    Fidelity of the single pair left after purifying two Bell pairs of
    fidelities ``q1`` and ``q2``.

    Exact 0 and 1 follow the limit convention: a perfect pair stays perfect and
    a zero-fidelity pair stays at zero.

    :param q1: Fidelity of the first pair.
    :param q2: Fidelity of the second pair.
    :return: ``q1*q2 / (q1*q2 + (1-q1)*(1-q2))``.
    :raises ValueError: When a fidelity is outside [0, 1] or the pair (0, 1) makes the
        result undefined.
    """
    for q in (q1, q2):
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"fidelity {q} outside [0, 1]")
    if {q1, q2} == {0.0, 1.0}:
        raise ValueError("purification of a perfect pair with a zero-fidelity pair is undefined")
    if q1 == 1.0 or q2 == 1.0:
        return 1.0
    if q1 == 0.0 or q2 == 0.0:
        return 0.0
    agree = q1 * q2
    return agree / (agree + (1.0 - q1) * (1.0 - q2))


def chained_fidelity(base: float, pairs: int) -> float:
    """
    Fidelity reached on an edge by consuming ``pairs`` entangled pairs of fidelity
    ``base``: the first pair is purified with each further pair in turn, so
    ``pairs - 1`` rounds are performed.

    :param base: Fidelity of one raw pair on the edge.
    :param pairs: Number of pairs consumed, at least one.
    :return: The resulting fidelity.
    :raises ValueError: When ``pairs`` is below one.
    """
    if pairs < 1:
        raise ValueError("at least one entangled pair is needed for a connection")
    return reduce(purify_step, [base] * (pairs - 1), base)


class PurificationTable(BaseModel):
    """
    Achieved fidelity per pair count for one base fidelity. ``achieved[k]`` is the
    fidelity after consuming ``k`` pairs; index 0 is unused and holds 0.
    """
    model_config = ConfigDict(frozen=True)

    base_fidelity: float = Field(gt=0.0, le=1.0)
    max_pairs: int = Field(ge=1)
    achieved: tuple[float, ...]

    def min_pairs(self, target: float) -> Optional[int]:
        if target >= 1.0:
            return None
        for pairs in range(1, self.max_pairs + 1):
            if self.achieved[pairs] >= target:
                return pairs
        return None


@lru_cache(maxsize=4096)
def purification_table(base: float, max_pairs: int) -> PurificationTable:
    achieved = [0.0, base]
    for _ in range(2, max_pairs + 1):
        achieved.append(purify_step(achieved[-1], base))
    return PurificationTable(base_fidelity=base, max_pairs=max_pairs, achieved=tuple(achieved[: max_pairs + 1]))


def min_pairs(base: float, target: float, cap: int) -> Optional[int]:
    """
    Smallest number of pairs, at most ``cap``, whose chained fidelity meets ``target``.

    :param base: Fidelity of one raw pair.
    :param target: Fidelity to reach.
    :param cap: Largest admissible pair count.
    :return: The pair count, or ``None`` when the target is unreachable within ``cap``.
    """
    if cap < 1:
        raise ValueError("cap must be at least one pair")
    return purification_table(base, cap).min_pairs(target)
