import random

from hypothesis import given, settings

from periphemu.primitives import DeviceInstance, Evt, ModelInstance, Reg, RegField, RegFieldState, RegRef, Upd
from periphemu.validator import (
    check_category_names,
    check_field_overlap,
    check_instances,
    check_irq_association,
    check_referential_integrity,
    check_register_overlap,
    intervals_intersect,
    shared_registers,
    validate_all,
)

import oracles
from strategies import random_fields, random_registers, seeded


def S(reg, field, value):
    return RegFieldState(reg, field, value)


def test_register_overlap_examples():
    assert check_register_overlap([Reg("A", 0, 32), Reg("B", 4, 32)]).passed
    rep = check_register_overlap([Reg("A", 0, 32), Reg("B", 2, 16)])
    assert [(f.stage, f.rule, f.entities) for f in rep.findings] == [(2, "register-overlap", ("A", "B"))]
    assert not check_register_overlap([Reg("A", 0, 64), Reg("B", 7, 8)]).passed


def test_field_overlap_examples():
    ok = {"CCR": [RegField("CCR", "PSIZE", 8, 2), RegField("CCR", "MSIZE", 10, 2)]}
    assert check_field_overlap(ok).passed
    bad = {"CCR": [RegField("CCR", "PSIZE", 8, 3), RegField("CCR", "MSIZE", 10, 2)]}
    assert [f.entities for f in check_field_overlap(bad).findings] == [("CCR.MSIZE", "CCR.PSIZE")]


def test_intervals_half_open():
    assert not intervals_intersect(0, 4, 4, 8)
    assert intervals_intersect(0, 5, 4, 8)


@settings(max_examples=200)
@given(seeded(random_registers))
def test_register_overlap_matches_oracle(regs):
    got = sorted(f.entities for f in check_register_overlap(regs).findings)
    assert got == oracles.register_overlaps(regs)


@settings(max_examples=200)
@given(seeded(lambda rng: random_fields(rng, random_registers(rng, 6))))
def test_field_overlap_matches_oracle(fields):
    got = sorted(f.entities for f in check_field_overlap(fields).findings)
    assert got == oracles.field_overlaps(fields)


@settings(max_examples=100)
@given(seeded(random_registers, 32, 256))
def test_register_overlap_sparse_offsets(regs):
    got = sorted(f.entities for f in check_register_overlap(regs).findings)
    assert got == oracles.register_overlaps(regs)


@settings(max_examples=100)
@given(seeded(random_registers))
def test_overlap_symmetric_under_reordering(regs):
    forward = {frozenset(f.entities) for f in check_register_overlap(regs).findings}
    backward = {frozenset(f.entities) for f in check_register_overlap(regs[::-1]).findings}
    assert forward == backward
    assert all(len(pair) == 2 for pair in forward)


def test_overlap_is_exhaustive():
    regs = [Reg(f"R{i}", 0, 32) for i in range(5)]
    assert len(check_register_overlap(regs).findings) == 10


def _inst(**kw):
    return ModelInstance("UART", registers=(Reg("SR", 0, 32), Reg("CR", 4, 32), Reg("DR", 8, 32)),
                         fields=(RegField("SR", "RXNE", 5, 1), RegField("CR", "RE", 2, 1)), **kw)


def test_referential_integrity_stages():
    bad_upd = Upd((S("CR", "RE", 1),), (S("SR", "TXE", 1),))
    rep = check_referential_integrity(_inst(updates=(bad_upd,), slots={"data": RegRef("TDR")}))
    assert sorted((f.stage, f.entities) for f in rep.findings) == [(4, ("SR.TXE",)), (5, ("TDR",))]


def test_category_duplicates():
    assert check_category_names([("USART", "UART"), ("TIM", "Timer")]).passed
    rep = check_category_names([("USART", "UART"), ("USART", "Timer")])
    assert [(f.stage, f.rule) for f in rep.findings] == [(1, "duplicate-category")]


def test_instance_duplicates():
    devs = [DeviceInstance("USART1", 0x40011000, (37,)), DeviceInstance("USART1", 0x40004400, (37,)),
            DeviceInstance("USART3", 0x40004400, (39,))]
    rules = sorted(f.rule for f in check_instances(devs).findings)
    assert rules == ["duplicate-base", "duplicate-instance", "duplicate-irq"]


def test_irq_association():
    evt = Evt(S("SR", "RXNE", 1), S("CR", "RE", 1), S("CR", "RE", 1), S("CR", "RE", 0), S("SR", "RXNE", 0))
    m = _inst(slots={"rx_evt": evt})
    dev = DeviceInstance("USART1", 0x40011000, (37,), m)
    assert [f.rule for f in check_irq_association(dev).findings] == ["irq-unassigned"]
    assert check_irq_association(dev, m.with_irq_lines({"rx_evt": 37})).passed
    assert [f.stage for f in check_irq_association(dev, m.with_irq_lines({"rx_evt": 5})).findings] == [7]


def test_validate_all_collects_every_stage():
    m = ModelInstance("UART", registers=(Reg("A", 0, 32), Reg("B", 2, 32)),
                      fields=(RegField("A", "X", 0, 4), RegField("A", "Y", 2, 4)),
                      updates=(Upd((S("A", "X", 1),), (S("C", "Z", 1),)),), slots={"data": RegRef("Q")})
    devs = [DeviceInstance("U1", 0x1000, (1,), m), DeviceInstance("U1", 0x1000, (1,), m)]
    rep = validate_all(m, devs, categories=[("USART", "UART"), ("USART", "UART")])
    assert rep.stages() == {1, 2, 3, 4, 5, 6}
    assert not rep
    assert rep.to_dict()["verdict"] == "fail"


def test_validate_all_passes_generated(fixtures):
    from periphemu.docformat import parse_model_instance

    for p in (fixtures / "models").glob("*.json"):
        assert validate_all(parse_model_instance(p.read_text())).passed, p.name


def test_seeded_generators_are_deterministic():
    a = random_registers(random.Random(3))
    assert a == random_registers(random.Random(3))


def test_shared_registers_are_informational():
    a = ModelInstance("basic", registers=(Reg("CSR", 0, 32),))
    b = ModelInstance("UART", registers=(Reg("SR", 0, 32), Reg("DR", 4, 32)))
    devs = [DeviceInstance("RCC", 0x40021000, (), a), DeviceInstance("LPUART", 0x40020FFC, (), b)]
    notes = shared_registers(devs)
    assert len(notes) == 1 and "RCC.CSR" in notes[0] and "LPUART.DR" in notes[0]
    assert shared_registers(devs[:1]) == []
