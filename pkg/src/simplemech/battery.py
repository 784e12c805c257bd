"""Seeded generators for small test instances and the shipped battery."""

from __future__ import annotations

import json
import random
from fractions import Fraction
from importlib import resources
from typing import Any

from .model import (
    XOS,
    Additive,
    CardinalityCap,
    ConstrainedAdditive,
    DiscreteMarginal,
    ExplicitFamily,
    Instance,
    UnitDemand,
    instance_to_dict,
    parse_instance,
)

BATTERY_SEED = 20211107
BATTERY_SIZE = 32


def random_marginal(rng: random.Random, max_support: int = 3, max_value: int = 6) -> DiscreteMarginal:
    k = rng.randint(1, max_support)
    support = sorted(rng.sample(range(1, max_value + 1), k))
    weights = [rng.randint(1, 4) for _ in support]
    total = sum(weights)
    return DiscreteMarginal(tuple(Fraction(v) for v in support), tuple(Fraction(w, total) for w in weights))


def random_feasibility(rng: random.Random, m: int):
    kind = rng.choice(["additive", "unit", "cap", "family"])
    if kind == "additive" or m == 1:
        return Additive() if kind != "unit" else UnitDemand()
    if kind == "unit":
        return UnitDemand()
    if kind == "cap":
        return CardinalityCap(rng.randint(1, m - 1))
    # a random downward-closed family: all singletons of a random item subset
    items = [j for j in range(m) if rng.random() < 0.8] or [0]
    sets = [frozenset()] + [frozenset([j]) for j in items]
    if len(items) >= 2 and rng.random() < 0.5:
        sets.append(frozenset(items[:2]))
    return ExplicitFamily(tuple(sets))


def random_ca_instance(rng: random.Random, n: int, m: int, max_support: int = 3) -> Instance:
    marginals = tuple(tuple(random_marginal(rng, max_support) for _ in range(m)) for _ in range(n))
    vals = tuple(ConstrainedAdditive(random_feasibility(rng, m)) for _ in range(n))
    return Instance(n, m, marginals, vals)


def random_xos_instance(rng: random.Random, n: int, m: int, K: int, max_support: int = 2) -> Instance:
    """XOS bidders whose coefficients grow with the support index, so ``V_ij`` is increasing."""
    marginals = []
    vals = []
    for _ in range(n):
        row = []
        alpha = []
        for _ in range(m):
            k = rng.randint(1, max_support)
            weights = [rng.randint(1, 4) for _ in range(k)]
            total = sum(weights)
            rows = []
            for v in range(k):
                rows.append(tuple(Fraction(rng.randint(0, 3) + 2 * v) for _ in range(K)))
            # at least one positive coefficient keeps V > 0
            rows = [r if max(r) > 0 else (Fraction(1),) + r[1:] for r in rows]
            row.append(DiscreteMarginal(tuple(Fraction(v + 1) for v in range(k)), tuple(Fraction(w, total) for w in weights)))
            alpha.append(tuple(rows))
        marginals.append(tuple(row))
        vals.append(XOS(tuple(alpha)))
    return Instance(n, m, tuple(marginals), tuple(vals))


def generate_battery(count: int = BATTERY_SIZE, seed: int = BATTERY_SEED) -> list[Instance]:
    """Constrained-additive instances with ``n, m <= 2`` and ``|T_ij| <= 3``."""
    rng = random.Random(seed)
    out = []
    shapes = [(1, 1), (1, 2), (2, 1), (2, 2)]
    for k in range(count):
        n, m = shapes[k % len(shapes)]
        out.append(random_ca_instance(rng, n, m))
    return out


def generate_xos_battery(count: int = 10, seed: int = BATTERY_SEED + 1) -> list[Instance]:
    """Single-bidder XOS instances with ``m <= 3`` and ``K <= 3``."""
    rng = random.Random(seed)
    return [random_xos_instance(rng, 1, rng.randint(1, 3), rng.randint(1, 3)) for _ in range(count)]


def battery_document(instances: list[Instance], seed: int) -> dict[str, Any]:
    return {"seed": seed, "instances": [instance_to_dict(x) for x in instances]}


def load_battery() -> list[Instance]:
    """The shipped constrained-additive battery."""
    text = resources.files("simplemech").joinpath("data/battery.json").read_text(encoding="utf-8")
    return [parse_instance(obj) for obj in json.loads(text)["instances"]]


def load_xos_battery() -> list[Instance]:
    text = resources.files("simplemech").joinpath("data/xos_battery.json").read_text(encoding="utf-8")
    return [parse_instance(obj) for obj in json.loads(text)["instances"]]


def write_shipped_batteries(directory: str) -> None:
    """Regenerate the shipped battery files (maintenance helper)."""
    import os

    with open(os.path.join(directory, "battery.json"), "w", encoding="utf-8") as fh:
        json.dump(battery_document(generate_battery(), BATTERY_SEED), fh, indent=1)
        fh.write("\n")
    with open(os.path.join(directory, "xos_battery.json"), "w", encoding="utf-8") as fh:
        json.dump(battery_document(generate_xos_battery(), BATTERY_SEED + 1), fh, indent=1)
        fh.write("\n")
