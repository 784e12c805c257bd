"""Auction instances: discrete marginals, valuation structures, type profiles.

Items and bidders are 0-indexed throughout. A bidder type ``t_i`` is stored as
a tuple of per-item indices into that item's support, and a type profile is a
tuple of bidder types.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence, Union

from . import config

Number = Union[int, Fraction]
BidderType = tuple[int, ...]
TypeProfile = tuple[BidderType, ...]


class InstanceFormatError(ValueError):
    """Raised when an instance document cannot be parsed or is invalid."""


class ProfileCapError(ValueError):
    """Raised when an enumeration would exceed its configured cap."""

    def __init__(self, size: int, cap: int, what: str = "type profiles") -> None:
        super().__init__(f"{what}: {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


def to_fraction(x: Any) -> Fraction:
    """Parse ints, Fractions, ``"p/q"`` strings and decimal floats exactly."""
    if isinstance(x, bool):
        raise InstanceFormatError(f"boolean is not a number: {x!r}")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise InstanceFormatError(f"non-finite number {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InstanceFormatError(f"cannot parse rational {x!r}") from exc
    raise InstanceFormatError(f"cannot parse rational {x!r}")


def format_number(x: Fraction) -> str:
    """Decimal text when the fraction terminates, ``p/q`` otherwise."""
    x = Fraction(x)
    d = x.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    if x.denominator == 1:
        return str(x.numerator)
    digits = 0
    while (x * 10**digits).denominator != 1:
        digits += 1
    scaled = x * 10**digits
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


# ---------------------------------------------------------------------------
# marginals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteMarginal:
    """Distribution of one item value: ``Pr[t = support[k]] = probs[k]``."""

    support: tuple[Fraction, ...]
    probs: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", tuple(to_fraction(v) for v in self.support))
        object.__setattr__(self, "probs", tuple(to_fraction(v) for v in self.probs))

    @classmethod
    def uniform(cls, values: Iterable[Any]) -> "DiscreteMarginal":
        vals = [to_fraction(v) for v in values]
        return cls(tuple(vals), tuple(Fraction(1, len(vals)) for _ in vals))

    @classmethod
    def point(cls, value: Any) -> "DiscreteMarginal":
        return cls((to_fraction(value),), (Fraction(1),))

    @property
    def size(self) -> int:
        return len(self.support)

    def prob_ge(self, x: Any) -> Fraction:
        return sum((p for v, p in zip(self.support, self.probs) if v >= x), Fraction(0))

    def prob_gt(self, x: Any) -> Fraction:
        return sum((p for v, p in zip(self.support, self.probs) if v > x), Fraction(0))

    def cdf(self, z: Any) -> Fraction:
        return sum((p for v, p in zip(self.support, self.probs) if v <= z), Fraction(0))


# ---------------------------------------------------------------------------
# valuations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Additive:
    def is_feasible(self, S: frozenset[int]) -> bool:
        return True


@dataclass(frozen=True)
class UnitDemand:
    def is_feasible(self, S: frozenset[int]) -> bool:
        return len(S) <= 1


@dataclass(frozen=True)
class CardinalityCap:
    k: int

    def is_feasible(self, S: frozenset[int]) -> bool:
        return len(S) <= self.k


@dataclass(frozen=True)
class ExplicitFamily:
    """Explicit list of feasible sets; must be downward-closed and contain the empty set."""

    sets: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        uniq = sorted({frozenset(s) for s in self.sets}, key=bundle_key)
        object.__setattr__(self, "sets", tuple(uniq))

    def is_feasible(self, S: frozenset[int]) -> bool:
        return frozenset(S) in self.sets


Feasibility = Union[Additive, UnitDemand, CardinalityCap, ExplicitFamily]


@dataclass(frozen=True)
class ConstrainedAdditive:
    """Best additive value over a feasible sub-bundle."""

    feasibility: Feasibility

    kind = "ConstrainedAdditive"


@dataclass(frozen=True)
class XOS:
    """Maximum of ``K`` additive functions.

    ``alpha[j][v][k]`` is item ``j``'s coefficient in function ``k`` when the
    item's value index is ``v``.
    """

    alpha: tuple[tuple[tuple[Fraction, ...], ...], ...]

    kind = "XOS"

    def __post_init__(self) -> None:
        a = tuple(tuple(tuple(to_fraction(c) for c in row) for row in item) for item in self.alpha)
        object.__setattr__(self, "alpha", a)

    @property
    def K(self) -> int:
        for item in self.alpha:
            for row in item:
                return len(row)
        return 0


Valuation = Union[ConstrainedAdditive, XOS]


def bundle_key(S: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Total order on bundles: smaller size first, then lexicographic."""
    s = tuple(sorted(S))
    return (len(s), s)


def all_bundles(m: int) -> list[frozenset[int]]:
    """Every subset of ``range(m)`` in :func:`bundle_key` order."""
    out = [frozenset(c) for r in range(m + 1) for c in itertools.combinations(range(m), r)]
    return out


def feasible_sets(feas: Feasibility, m: int) -> list[frozenset[int]]:
    """All feasible bundles (including the empty set) in :func:`bundle_key` order."""
    if isinstance(feas, ExplicitFamily):
        return [s for s in feas.sets if all(0 <= j < m for j in s)]
    if isinstance(feas, UnitDemand):
        return [frozenset()] + [frozenset([j]) for j in range(m)]
    if isinstance(feas, CardinalityCap):
        return [frozenset(c) for r in range(min(feas.k, m) + 1) for c in itertools.combinations(range(m), r)]
    return all_bundles(m)


# ---------------------------------------------------------------------------
# instance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    """``n`` bidders, ``m`` items, an ``n x m`` table of marginals, one valuation per bidder."""

    n: int
    m: int
    marginals: tuple[tuple[DiscreteMarginal, ...], ...]
    valuations: tuple[Valuation, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "marginals", tuple(tuple(row) for row in self.marginals))
        object.__setattr__(self, "valuations", tuple(self.valuations))

    @property
    def T(self) -> int:
        """Total support size ``sum_{i,j} |T_ij|``."""
        return sum(d.size for row in self.marginals for d in row)

    def is_xos(self, i: int) -> bool:
        return isinstance(self.valuations[i], XOS)

    def marginal(self, i: int, j: int) -> DiscreteMarginal:
        return self.marginals[i][j]


@dataclass(frozen=True)
class ValidationReport:
    """Violated invariants, each message prefixed with its location."""

    messages: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.messages

    def __bool__(self) -> bool:
        return bool(self.messages)


def _validate_marginal(d: DiscreteMarginal, where: str) -> list[str]:
    msgs = []
    if len(d.support) != len(d.probs):
        msgs.append(f"{where}: support and probs lengths differ ({len(d.support)} vs {len(d.probs)})")
    if not d.support:
        msgs.append(f"{where}: empty support")
    if any(v < 0 for v in d.support):
        msgs.append(f"{where}: negative support value")
    if any(b <= a for a, b in zip(d.support, d.support[1:])):
        msgs.append(f"{where}: support not strictly increasing")
    if any(p <= 0 for p in d.probs):
        msgs.append(f"{where}: nonpositive probability")
    total = sum(d.probs, Fraction(0))
    if total != 1:
        msgs.append(f"{where}: probabilities sum to {format_number(total)}")
    return msgs


def _is_downward_closed(sets: Sequence[frozenset[int]]) -> bool:
    family = set(sets)
    for s in family:
        for j in s:
            if s - {j} not in family:
                return False
    return True


def validate_instance(inst: Instance) -> ValidationReport:
    """Report every violated invariant; the report is empty iff ``inst`` is valid."""
    msgs: list[str] = []
    if inst.n < 1 or inst.m < 1:
        msgs.append(f"instance: need n >= 1 and m >= 1 (got n={inst.n}, m={inst.m})")
    if len(inst.marginals) != inst.n:
        msgs.append(f"instance: {len(inst.marginals)} marginal rows for n={inst.n}")
    if len(inst.valuations) != inst.n:
        msgs.append(f"instance: {len(inst.valuations)} valuations for n={inst.n}")
    for i, row in enumerate(inst.marginals):
        if len(row) != inst.m:
            msgs.append(f"bidder {i}: {len(row)} marginals for m={inst.m}")
        for j, d in enumerate(row):
            msgs.extend(_validate_marginal(d, f"marginal ({i},{j})"))
    for i, val in enumerate(inst.valuations):
        where = f"valuation {i}"
        if isinstance(val, ConstrainedAdditive):
            feas = val.feasibility
            if isinstance(feas, CardinalityCap) and feas.k < 0:
                msgs.append(f"{where}: negative cardinality cap")
            elif isinstance(feas, ExplicitFamily):
                if frozenset() not in feas.sets:
                    msgs.append(f"{where}: family lacks the empty set")
                if any(j < 0 or j >= inst.m for s in feas.sets for j in s):
                    msgs.append(f"{where}: family references unknown item")
                if not _is_downward_closed(feas.sets):
                    msgs.append(f"{where}: family not downward-closed")
            elif not isinstance(feas, (Additive, UnitDemand, CardinalityCap)):
                msgs.append(f"{where}: unknown feasibility {feas!r}")
        elif isinstance(val, XOS):
            if len(val.alpha) != inst.m:
                msgs.append(f"{where}: alpha has {len(val.alpha)} items for m={inst.m}")
            K = val.K
            if K < 1:
                msgs.append(f"{where}: XOS needs at least one additive function")
            for j, item in enumerate(val.alpha):
                if i < len(inst.marginals) and j < len(inst.marginals[i]):
                    size = inst.marginals[i][j].size
                    if len(item) != size:
                        msgs.append(f"{where}: item {j} has {len(item)} value rows for support size {size}")
                for v, row in enumerate(item):
                    if len(row) != K:
                        msgs.append(f"{where}: item {j} value {v} has {len(row)} coefficients, expected {K}")
                    if any(c < 0 for c in row):
                        msgs.append(f"{where}: item {j} value {v} has a negative coefficient")
        else:
            msgs.append(f"{where}: unknown valuation kind {val!r}")
    return ValidationReport(tuple(msgs))


# ---------------------------------------------------------------------------
# types and profiles
# ---------------------------------------------------------------------------


def singleton_value(inst: Instance, i: int, j: int, v: int) -> Fraction:
    """``V_ij`` at support index ``v``: the value itself, or ``max_k alpha`` for XOS."""
    if not (0 <= i < inst.n and 0 <= j < inst.m):
        raise IndexError(f"no bidder/item ({i},{j})")
    d = inst.marginals[i][j]
    if not 0 <= v < d.size:
        raise IndexError(f"value index {v} out of range for ({i},{j})")
    val = inst.valuations[i]
    if isinstance(val, XOS):
        return max(val.alpha[j][v])
    return d.support[v]


def singleton_values(inst: Instance, i: int, j: int) -> tuple[Fraction, ...]:
    return tuple(singleton_value(inst, i, j, v) for v in range(inst.marginals[i][j].size))


def type_vector(inst: Instance, i: int, t_i: BidderType) -> tuple:
    """Oracle input for bidder ``i`` at type ``t_i``.

    Constrained-additive oracles read item values; XOS oracles read the
    support indices that select rows of ``alpha``.
    """
    if inst.is_xos(i):
        return tuple(t_i)
    return tuple(inst.marginals[i][j].support[v] for j, v in enumerate(t_i))


def count_bidder_types(inst: Instance, i: int) -> int:
    return math.prod(d.size for d in inst.marginals[i])


def bidder_types(inst: Instance, i: int) -> list[tuple[BidderType, Fraction]]:
    """All types of bidder ``i`` with probabilities, lexicographic order."""
    margs = inst.marginals[i]
    out = []
    for idx in itertools.product(*(range(d.size) for d in margs)):
        p = Fraction(1)
        for j, v in enumerate(idx):
            p *= margs[j].probs[v]
        out.append((tuple(idx), p))
    return out


def count_type_profiles(inst: Instance) -> int:
    return math.prod(d.size for row in inst.marginals for d in row)


def enumerate_type_profiles(inst: Instance, cap: int = config.PROFILE_CAP) -> list[tuple[TypeProfile, Fraction]]:
    """All type profiles with product probabilities.

    Order is lexicographic over (bidder, item, support index).

    Raises
    ------
    ProfileCapError
        If the number of profiles exceeds ``cap``.
    """
    size = count_type_profiles(inst)
    if size > cap:
        raise ProfileCapError(size, cap)
    per_bidder = [bidder_types(inst, i) for i in range(inst.n)]
    out = []
    for combo in itertools.product(*per_bidder):
        p = Fraction(1)
        for _, q in combo:
            p *= q
        out.append((tuple(t for t, _ in combo), p))
    return out


# ---------------------------------------------------------------------------
# JSON format
# ---------------------------------------------------------------------------


def _check_keys(obj: Any, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise InstanceFormatError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise InstanceFormatError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise InstanceFormatError(f"{where}: missing field(s) {sorted(missing)}")


def _parse_feasibility(obj: Any, where: str) -> Feasibility:
    if isinstance(obj, str):
        obj = {"type": obj}
    _check_keys(obj, {"type", "k", "sets"}, {"type"}, where)
    kind = obj["type"]
    if kind == "Additive":
        _check_keys(obj, {"type"}, set(), where)
        return Additive()
    if kind == "UnitDemand":
        _check_keys(obj, {"type"}, set(), where)
        return UnitDemand()
    if kind == "CardinalityCap":
        _check_keys(obj, {"type", "k"}, {"k"}, where)
        if not isinstance(obj["k"], int) or isinstance(obj["k"], bool):
            raise InstanceFormatError(f"{where}: k must be an integer")
        return CardinalityCap(obj["k"])
    if kind == "ExplicitFamily":
        _check_keys(obj, {"type", "sets"}, {"sets"}, where)
        sets = []
        for s in obj["sets"]:
            if not isinstance(s, list) or not all(isinstance(j, int) and not isinstance(j, bool) for j in s):
                raise InstanceFormatError(f"{where}: sets must be integer lists")
            sets.append(frozenset(s))
        return ExplicitFamily(tuple(sets))
    raise InstanceFormatError(f"{where}: unknown feasibility type {kind!r}")


def _parse_valuation(obj: Any, where: str) -> Valuation:
    _check_keys(obj, {"kind", "feasibility", "xos"}, {"kind"}, where)
    kind = obj["kind"]
    if kind == "ConstrainedAdditive":
        _check_keys(obj, {"kind", "feasibility"}, {"feasibility"}, where)
        return ConstrainedAdditive(_parse_feasibility(obj["feasibility"], where + ".feasibility"))
    if kind == "XOS":
        _check_keys(obj, {"kind", "xos"}, {"xos"}, where)
        xos = obj["xos"]
        _check_keys(xos, {"alpha"}, {"alpha"}, where + ".xos")
        try:
            alpha = tuple(tuple(tuple(to_fraction(c) for c in row) for row in item) for item in xos["alpha"])
        except TypeError as exc:
            raise InstanceFormatError(f"{where}.xos.alpha: expected a nested array") from exc
        return XOS(alpha)
    raise InstanceFormatError(f"{where}: unknown valuation kind {kind!r}")


def parse_instance(obj: Any, validate: bool = True) -> Instance:
    """Build an :class:`Instance` from a decoded JSON document."""
    _check_keys(obj, {"n", "m", "marginals", "valuations"}, {"n", "m", "marginals", "valuations"}, "instance")
    n, m = obj["n"], obj["m"]
    if not all(isinstance(x, int) and not isinstance(x, bool) for x in (n, m)):
        raise InstanceFormatError("instance: n and m must be integers")
    rows = []
    if not isinstance(obj["marginals"], list):
        raise InstanceFormatError("instance.marginals: expected an array")
    for i, row in enumerate(obj["marginals"]):
        if not isinstance(row, list):
            raise InstanceFormatError(f"marginals[{i}]: expected an array")
        parsed = []
        for j, d in enumerate(row):
            where = f"marginals[{i}][{j}]"
            _check_keys(d, {"support", "probs"}, {"support", "probs"}, where)
            if not isinstance(d["support"], list) or not isinstance(d["probs"], list):
                raise InstanceFormatError(f"{where}: support and probs must be arrays")
            parsed.append(DiscreteMarginal(tuple(map(to_fraction, d["support"])), tuple(map(to_fraction, d["probs"]))))
        rows.append(tuple(parsed))
    if not isinstance(obj["valuations"], list):
        raise InstanceFormatError("instance.valuations: expected an array")
    vals = tuple(_parse_valuation(v, f"valuations[{i}]") for i, v in enumerate(obj["valuations"]))
    inst = Instance(n, m, tuple(rows), vals)
    if validate:
        report = validate_instance(inst)
        if not report.ok:
            raise InstanceFormatError("; ".join(report.messages))
    return inst


def loads_instance(text: str, validate: bool = True) -> Instance:
    """Parse instance JSON text; decode errors carry line and column."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"JSON error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_instance(obj, validate)


def load_instance(path: str, validate: bool = True) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return loads_instance(fh.read(), validate)


def _num(x: Fraction) -> Any:
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _feas_to_dict(feas: Feasibility) -> dict[str, Any]:
    if isinstance(feas, CardinalityCap):
        return {"type": "CardinalityCap", "k": feas.k}
    if isinstance(feas, ExplicitFamily):
        return {"type": "ExplicitFamily", "sets": [sorted(s) for s in feas.sets]}
    return {"type": type(feas).__name__}


def instance_to_dict(inst: Instance) -> dict[str, Any]:
    """Inverse of :func:`parse_instance` (rationals become ``"p/q"`` strings)."""
    vals = []
    for v in inst.valuations:
        if isinstance(v, XOS):
            vals.append({"kind": "XOS", "xos": {"alpha": [[[_num(c) for c in row] for row in item] for item in v.alpha]}})
        else:
            vals.append({"kind": "ConstrainedAdditive", "feasibility": _feas_to_dict(v.feasibility)})
    return {
        "n": inst.n,
        "m": inst.m,
        "marginals": [
            [{"support": [_num(x) for x in d.support], "probs": [_num(p) for p in d.probs]} for d in row]
            for row in inst.marginals
        ],
        "valuations": vals,
    }


def instance_hash(inst: Instance) -> str:
    """SHA-256 of the canonical JSON form."""
    text = json.dumps(instance_to_dict(inst), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def make_instance(
    marginals: Sequence[Sequence[DiscreteMarginal]],
    valuations: Sequence[Valuation] | Valuation | None = None,
) -> Instance:
    """Convenience constructor; ``valuations`` defaults to additive for everyone."""
    n = len(marginals)
    m = len(marginals[0]) if n else 0
    if valuations is None:
        valuations = ConstrainedAdditive(Additive())
    if not isinstance(valuations, (list, tuple)):
        valuations = [valuations] * n
    return Instance(n, m, tuple(tuple(r) for r in marginals), tuple(valuations))
