from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given

from simplemech.model import (
    XOS,
    Additive,
    ConstrainedAdditive,
    DiscreteMarginal,
    ExplicitFamily,
    Instance,
    InstanceFormatError,
    ProfileCapError,
    enumerate_type_profiles,
    instance_hash,
    instance_to_dict,
    loads_instance,
    make_instance,
    parse_instance,
    singleton_value,
    validate_instance,
)
from strategies import ca_instances

ADD = ConstrainedAdditive(Additive())


def test_minimal_instance_is_valid():
    inst = make_instance([[DiscreteMarginal.point(1)]])
    assert validate_instance(inst).messages == ()


def test_probabilities_must_sum_to_one():
    d = DiscreteMarginal((Fraction(1), Fraction(2)), (Fraction(2, 5), Fraction(2, 5)))
    msgs = validate_instance(make_instance([[d]])).messages
    assert any("probabilities sum to 0.8" in s for s in msgs)


def test_family_must_be_downward_closed():
    fam = ExplicitFamily((frozenset(), frozenset({0, 1})))
    inst = make_instance([[DiscreteMarginal.point(1), DiscreteMarginal.point(1)]], ConstrainedAdditive(fam))
    assert any("not downward-closed" in s for s in validate_instance(inst).messages)


def test_profile_enumeration_examples():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2])]])
    profs = enumerate_type_profiles(inst)
    assert [p for _, p in profs] == [Fraction(1, 2)] * 2
    inst = make_instance([[DiscreteMarginal.uniform([1, 2])] * 2] * 2)
    profs = enumerate_type_profiles(inst)
    assert len(profs) == 16 and all(p == Fraction(1, 16) for _, p in profs)


def test_profile_cap():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2])] * 30])
    with pytest.raises(ProfileCapError) as exc:
        enumerate_type_profiles(inst)
    assert exc.value.size == 2**30


def test_singleton_value_examples():
    inst = make_instance([[DiscreteMarginal.point(3)]])
    assert singleton_value(inst, 0, 0, 0) == 3
    xos = Instance(1, 1, ((DiscreteMarginal.point(1),),), (XOS((((2, 5),),)),))
    assert singleton_value(xos, 0, 0, 0) == 5
    xos0 = Instance(1, 1, ((DiscreteMarginal.point(1),),), (XOS((((0,),),)),))
    assert singleton_value(xos0, 0, 0, 0) == 0


def test_json_round_trip_and_unknown_fields():
    inst = make_instance([[DiscreteMarginal((1, 3), ("1/3", "2/3"))]])
    doc = instance_to_dict(inst)
    assert parse_instance(json.loads(json.dumps(doc))) == inst
    doc["extra"] = 1
    with pytest.raises(InstanceFormatError):
        parse_instance(doc)


def test_json_errors_carry_position():
    with pytest.raises(InstanceFormatError, match="line 2, column"):
        loads_instance('{"n": 1,\n "m": }')


@given(ca_instances())
def test_profiles_sum_to_one(inst):
    assert sum(p for _, p in enumerate_type_profiles(inst)) == 1


@given(ca_instances())
def test_validation_is_idempotent_and_hash_stable(inst):
    a, b = validate_instance(inst), validate_instance(inst)
    assert a == b and a.messages == ()
    assert instance_hash(inst) == instance_hash(parse_instance(instance_to_dict(inst)))


@given(ca_instances())
def test_singleton_value_monotone_in_support(inst):
    for i in range(inst.n):
        for j in range(inst.m):
            vals = [singleton_value(inst, i, j, v) for v in range(inst.marginals[i][j].size)]
            assert vals == sorted(vals)
