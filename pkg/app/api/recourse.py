from typing import Iterable, Optional, Sequence

import more_itertools

from app.config import config
from app.exceptions import InfeasibleError
from app.schemas.paths import EdgePlan, NewsvendorProfile, RecourseChoice


def _split(profile: NewsvendorProfile, reserved: int, ceiling: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Per-scenario (utilized, on-demand) pairs, filling the cheaper phase first."""
    utilized, ondemand = [], []
    for k, _ in profile.demands:
        if profile.utilize_cost <= profile.ondemand_cost:
            used = min(reserved, k)
            utilized.append(used)
            ondemand.append(k - used)
        else:
            bought = min(ceiling, k)
            ondemand.append(bought)
            utilized.append(k - bought)
    return tuple(utilized), tuple(ondemand)


def recourse_choice(profile: NewsvendorProfile, reserved: int, ceiling: int) -> Optional[RecourseChoice]:
    """
    Cost of reserving ``reserved`` pairs and allowing up to ``ceiling`` on-demand
    pairs in every scenario, or ``None`` when some scenario cannot be covered.
    """
    utilized, ondemand = _split(profile, reserved, ceiling)
    if max(utilized, default=0) > reserved or max(ondemand, default=0) > min(ceiling, profile.cap_ondemand):
        return None
    stage2 = 0.0
    for (_, probability), used, bought in zip(profile.demands, utilized, ondemand):
        stage2 += probability * (profile.utilize_cost * used + profile.ondemand_cost * bought)
    return RecourseChoice(
        reserved=reserved,
        ondemand_ceiling=max(ondemand, default=0),
        utilized=utilized,
        ondemand=ondemand,
        stage1=profile.reserve_cost * reserved,
        stage2=stage2,
    )


def recourse_options(profile: NewsvendorProfile, reserved_values: Iterable[int]) -> list[RecourseChoice]:
    """
    Every undominated choice for the given reservation levels. With on-demand at
    least as expensive as utilization one choice per level suffices; otherwise
    each admissible on-demand ceiling is a distinct trade-off against capacity.
    """
    peak = profile.max_demand
    options = []
    for reserved in reserved_values:
        floor = max(0, peak - reserved)
        if profile.utilize_cost <= profile.ondemand_cost:
            ceilings: Iterable[int] = [floor]
        else:
            ceilings = range(floor, min(peak, profile.cap_ondemand) + 1)
        for ceiling in ceilings:
            choice = recourse_choice(profile, reserved, ceiling)
            if choice is not None:
                options.append(choice)
    return options


def _check_profile(profile: NewsvendorProfile) -> None:
    if not more_itertools.is_sorted(k for k, _ in profile.demands):
        raise ValueError("newsvendor demands must be sorted by pair count")
    if min((k for k, _ in profile.demands), default=0) < 0:
        raise ValueError("newsvendor demands must be nonnegative")


def newsvendor_reserve(profile: NewsvendorProfile) -> RecourseChoice:
    """
    Optimal reservation of one request on one edge in isolation.

    Scans every reservation level ``0..cap_reserved`` and prices the recourse with
    the cheaper phase filled first. Ties go to the smaller reservation.

    :param profile: Demand distribution, prices and capacity shares.
    :type profile: NewsvendorProfile
    :raises InfeasibleError: If no reservation level keeps on-demand within its share.
    :return: The best reservation with its per-scenario split.
    :rtype: RecourseChoice
    """
    _check_profile(profile)
    best: Optional[RecourseChoice] = None
    for choice in recourse_options(profile, range(profile.cap_reserved + 1)):
        if best is None or choice.expected_cost < best.expected_cost - config.COST_TOLERANCE:
            best = choice
    if best is None:
        raise InfeasibleError(
            f"demand {profile.max_demand} exceeds reserved share {profile.cap_reserved} "
            f"plus on-demand share {profile.cap_ondemand}",
            diagnostics=[("newsvendor", profile.max_demand, profile.cap_reserved, profile.cap_ondemand)],
        )
    return best


def _tie_key(choices: tuple[RecourseChoice, ...]) -> tuple[int, tuple[int, ...]]:
    # fewer reserved pairs first, then reservations go to earlier requests
    return sum(ch.reserved for ch in choices), tuple(-ch.reserved for ch in choices)


def _better(cost: float, key: tuple, incumbent: Optional[tuple[float, tuple]]) -> bool:
    if incumbent is None:
        return True
    best_cost, best_key = incumbent
    if cost < best_cost - config.COST_TOLERANCE:
        return True
    if cost > best_cost + config.COST_TOLERANCE:
        return False
    return key < best_key


def allocate_edge(
    profiles: Sequence[NewsvendorProfile],
    cap_reserved: int,
    cap_ondemand: int,
    reserved_values: Sequence[Iterable[int]],
) -> dict[int, EdgePlan]:
    """
    Joint allocation of one edge among the requests routed over it.

    Dynamic program over the requests with state (reserved pairs used, on-demand
    ceiling used). ``reserved_values[i]`` lists the admissible reservations of
    request ``i``. Equal costs resolve toward fewer reserved pairs, then toward
    reserving for earlier requests.

    :param profiles: One profile per request sharing the edge.
    :param cap_reserved: Edge reservation capacity.
    :param cap_ondemand: Edge on-demand capacity.
    :param reserved_values: Candidate reservation levels per request.
    :return: Best plan for every attainable total reservation; empty when infeasible.
    """
    states: dict[tuple[int, int], tuple[float, tuple[RecourseChoice, ...]]] = {(0, 0): (0.0, ())}
    for profile, values in zip(profiles, reserved_values):
        options = recourse_options(profile, values)
        nxt: dict[tuple[int, int], tuple[float, tuple[RecourseChoice, ...]]] = {}
        for (used_c, used_o), (cost, choices) in states.items():
            for option in options:
                c = used_c + option.reserved
                o = used_o + option.ondemand_ceiling
                if c > cap_reserved or o > cap_ondemand:
                    continue
                total = cost + option.expected_cost
                new_choices = choices + (option,)
                incumbent = nxt.get((c, o))
                current = None if incumbent is None else (incumbent[0], _tie_key(incumbent[1]))
                if _better(total, _tie_key(new_choices), current):
                    nxt[(c, o)] = (total, new_choices)
        states = nxt
        if not states:
            return {}

    by_total: dict[int, tuple[float, tuple[RecourseChoice, ...]]] = {}
    for (c, _), (cost, choices) in sorted(states.items()):
        incumbent = by_total.get(c)
        current = None if incumbent is None else (incumbent[0], _tie_key(incumbent[1]))
        if _better(cost, _tie_key(choices), current):
            by_total[c] = (cost, choices)

    return {
        c: EdgePlan(
            choices=choices,
            stage1=sum(ch.stage1 for ch in choices),
            stage2=sum(ch.stage2 for ch in choices),
        )
        for c, (_, choices) in sorted(by_total.items())
    }


def best_plan(table: dict[int, EdgePlan]) -> Optional[EdgePlan]:
    """Cheapest plan of an allocation table, ties toward fewer reserved pairs."""
    best: Optional[EdgePlan] = None
    for total in sorted(table):
        plan = table[total]
        if best is None or plan.cost < best.cost - config.COST_TOLERANCE:
            best = plan
    return best
