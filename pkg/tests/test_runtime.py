import pytest

from periphemu.docformat import parse_model_instance
from periphemu.primitives import DeviceInstance
from periphemu.runtime import (
    BuildError,
    BusFault,
    IrqLineError,
    Machine,
    load_machine,
)

import oracles
from conftest import FIXTURES

MODELS = FIXTURES / "models"
MACHINES = FIXTURES / "machines"
RAM = 0x20000000


def model(name):
    return parse_model_instance((MODELS / f"{name}.json").read_text())


def machine(name, **kw):
    return load_machine(MACHINES / f"{name}.json", **kw)


def single(name, base=0x40000000, irqs=(), **kw):
    return Machine([DeviceInstance(name.upper(), base, tuple(irqs), model(name))], **kw)


class Dev:
    """Register access by name for one device."""

    def __init__(self, m, name):
        self.m, self.name = m, name

    def addr(self, reg):
        return self.m.reg_address(self.name, reg)

    def w(self, reg, value, size=None):
        self.m.mmio_write(self.addr(reg), size or self.m.device(self.name).reg_by_name[reg].nbytes, value)

    def r(self, reg):
        return self.m.mmio_read(self.addr(reg), self.m.device(self.name).reg_by_name[reg].nbytes)

    def f(self, reg, field):
        return self.m.device(self.name).get_field(reg, field)


# --- construction ----------------------------------------------------------------------

def test_registers_read_zero_after_build():
    m = machine("mixed")
    for name, ds in m.devices.items():
        for reg in ds.reg_by_name:
            assert Dev(m, name).r(reg) == 0
    assert all(level == 0 for level in m.lines.values())


def test_empty_machine():
    m = Machine([])
    assert m.devices == {} and m.lines == {}
    with pytest.raises(BusFault):
        m.mmio_read(0x40000000, 4)


def test_duplicate_base_rejected():
    t = model("timer")
    with pytest.raises(BuildError) as e:
        Machine([DeviceInstance("A", 0x40000000, (28,), t), DeviceInstance("B", 0x40000000, (29,), t)])
    assert "duplicate-base" in str(e.value.report)


def test_overlapping_ranges_rejected():
    u = model("upd_two")
    with pytest.raises(BuildError, match="overlaps"):
        Machine([DeviceInstance("A", 0x40000000, (), u), DeviceInstance("B", 0x40000008, (), u)])
    Machine([DeviceInstance("A", 0x40000000, (), u), DeviceInstance("B", 0x4000000C, (), u)])


def test_ram_collision_rejected():
    with pytest.raises(BuildError, match="RAM"):
        Machine([DeviceInstance("T", RAM + 0x100, (28,), model("timer"))])


def test_unbound_and_unassigned_events_rejected():
    with pytest.raises(BuildError):
        Machine([DeviceInstance("T", 0x40000000, (28,))])
    raw = (MODELS / "uart.json").read_text().replace('"irq_line": 37', '"irq_line": null')
    with pytest.raises(BuildError) as e:
        Machine([DeviceInstance("U", 0x40011000, (37,), parse_model_instance(raw))])
    assert "irq-unassigned" in str(e.value.report)


def test_irq_line_override():
    m = machine("uart")
    assert set(m.lines) == {37, 38}
    assert [p for _, p, _ in m.groups[38]] == ["tx_evt", "rx_evt"]
    with pytest.raises(IrqLineError):
        m.irq_level(99)


# --- bus ---------------------------------------------------------------------------------

def test_bus_faults():
    m = single("timer", irqs=[28])
    for addr, size in [(0x40000004, 4), (0x40000000, 3), (0x40000002, 4), (0x3FFFFFFC, 4)]:
        with pytest.raises(BusFault):
            m.mmio_read(addr, size)
        with pytest.raises(BusFault):
            m.mmio_write(addr, size, 1)


def test_bus_fault_ignore_mode():
    m = single("timer", irqs=[28], bus_fault="ignore")
    assert m.mmio_read(0x40000004, 4) == 0
    m.mmio_write(0x40000004, 4, 0xFFFF)
    assert len(m.diagnostics) == 2
    assert [r["op"] for r in m.trace] == ["fault", "fault"]


def test_sub_word_access_little_endian():
    m = single("timer", irqs=[28])
    t = Dev(m, "TIMER")
    t.w("ARR", 0x11223344)
    base = t.addr("ARR")
    assert [m.mmio_read(base + i, 1) for i in range(4)] == [0x44, 0x33, 0x22, 0x11]
    assert m.mmio_read(base + 2, 2) == 0x1122
    m.mmio_write(base + 1, 1, 0xAB)
    assert t.r("ARR") == 0x1122AB44


def test_values_masked_to_register_width():
    m = single("upd_two", debug=True)
    m.mmio_write(m.reg_address("UPD_TWO", "CFGR"), 4, 0x1_0000_0002)
    assert Dev(m, "UPD_TWO").r("CFGR") == 2


# --- update rules ------------------------------------------------------------------------

def test_single_update_rule():
    m = single("upd_single", debug=True)
    d = Dev(m, "UPD_SINGLE")
    d.w("SR", 0)
    assert d.f("SR", "RDY") == 0
    d.w("CR", 1)
    assert d.f("SR", "RDY") == 1
    assert [r for r in m.trace if r["op"] == "upd"] == [{"op": "upd", "device": "UPD_SINGLE", "rule": 0}]


def test_update_rule_needs_condition_on_written_register():
    m = single("upd_two")
    d = Dev(m, "UPD_TWO")
    d.w("CFGR", 2)
    assert d.f("SR", "PLLRDY") == 0
    d.w("CR", 0b10)  # PLLON; SW already 2
    assert (d.f("SR", "PLLRDY"), d.f("SR", "SWS")) == (1, 2)


def test_update_actions_apply_in_declaration_order():
    m = single("upd_two")
    d = Dev(m, "UPD_TWO")
    d.w("CFGR", 2)
    d.w("CR", 0b11)  # both rules fire; rule 1 writes SWS last
    assert (d.f("SR", "HSERDY"), d.f("SR", "PLLRDY"), d.f("SR", "SWS")) == (1, 1, 2)
    assert [r["rule"] for r in m.trace if r["op"] == "upd"][-2:] == [0, 1]


def test_update_fixpoint():
    m = single("upd_two")
    d = Dev(m, "UPD_TWO")
    d.w("CFGR", 2)
    d.w("CR", 0b11)
    snapshot = dict(m.device("UPD_TWO").regs)
    assert m.apply_updates("UPD_TWO", "CR") is False
    assert m.device("UPD_TWO").regs == snapshot


# --- timer -------------------------------------------------------------------------------

def start_timer(period, uie=True):
    m = machine("timer", debug=True)
    t = Dev(m, "TIM2")
    t.w("ARR", period)
    t.w("DIER", 1 if uie else 0)
    t.w("CR1", 1)
    return m, t


@pytest.mark.parametrize("period", [1, 2, 3, 7])
def test_timer_period_matches_reference(period):
    m, t = start_timer(period)
    expected, final = oracles.timer_reference(period, 3 * period + 1)
    raised = []
    for i in range(1, 3 * period + 2):
        m.tick()
        if t.f("SR", "UIF"):
            raised.append(i)
            t.w("SR", 0)
    assert raised == expected
    assert t.r("CNT") == final


def test_timer_stops_when_disabled():
    m, t = start_timer(5)
    m.tick(2)
    t.w("CR1", 0)
    m.tick(10)
    assert t.r("CNT") == 2 and t.f("SR", "UIF") == 0


def test_timer_flag_without_interrupt_enable():
    m, t = start_timer(2, uie=False)
    m.tick(2)
    assert t.f("SR", "UIF") == 1 and m.irq_level(28) == 0
    t.w("DIER", 1)
    assert m.irq_level(28) == 1
    t.w("DIER", 0)
    assert m.irq_level(28) == 0


def test_timer_happen_flag_ignores_direct_set():
    m, t = start_timer(100)
    t.w("SR", 0x7)
    assert t.r("SR") == 0


def test_timer_compare_channel():
    m, t = start_timer(10)
    t.w("CCR2", 4)
    t.w("CCER", 1 << 4)
    t.w("DIER", 0b101)
    m.tick(3)
    assert t.f("SR", "CC2IF") == 0
    m.tick(1)
    assert t.f("SR", "CC2IF") == 1 and m.irq_level(28) == 1


# --- UART --------------------------------------------------------------------------------

def uart():
    m = machine("uart", debug=True)
    u = Dev(m, "USART1")
    u.w("CR1", (1 << 13) | (1 << 3) | (1 << 2) | (1 << 5))
    return m, u


def test_uart_enable_sets_txe_via_update():
    m, u = uart()
    assert u.f("SR", "TXE") == 1


def test_uart_rx_fifo_order():
    m, u = uart()
    m.inject_rx("USART1", b"abc")
    assert u.f("SR", "RXNE") == 1 and m.irq_level(37) == 1
    assert [u.r("DR") for _ in range(3)] == [ord("a"), ord("b"), ord("c")]
    assert u.f("SR", "RXNE") == 0 and m.irq_level(37) == 0


def test_uart_tx_collects_bytes_when_enabled():
    m, u = uart()
    for b in b"OK":
        u.w("DR", b)
    assert m.read_tx("USART1") == b"OK"
    assert m.read_tx("USART1") == b""
    u.w("CR1", 1 << 13)  # transmitter off
    u.w("DR", 0x55)
    assert m.read_tx("USART1") == b""


def test_uart_instances_are_independent():
    m, u = uart()
    m.inject_rx("USART2", b"x")
    assert u.f("SR", "RXNE") == 0
    assert Dev(m, "USART2").f("SR", "RXNE") == 1
    assert m.irq_level(37) == 0


def test_inject_into_non_uart():
    m = machine("mixed")
    with pytest.raises(TypeError):
        m.inject_rx("TIM2", b"x")


# --- GPIO --------------------------------------------------------------------------------

def test_gpio_set_clear_and_edges():
    m = machine("gpio", debug=True)
    g = Dev(m, "GPIOA")
    g.w("IMR", 0b11)
    g.w("BSR", 0b101)
    assert g.r("IDR") == 0b101 and g.r("ODR") == 0b101 and g.r("BSR") == 0
    assert g.f("PR", "PR0") == 1 and m.irq_level(6) == 1
    g.w("PR", 0b1)
    assert m.irq_level(6) == 0
    g.w("BSR", 0b10)
    g.w("BRR", 0b10)  # pin 1 falls
    assert g.r("IDR") == 0b101 and g.f("PR", "PR1") == 1 and m.irq_level(7) == 1
    g.w("BSR", 0b1)  # already high: no new edge
    assert g.f("PR", "PR0") == 0


# --- DMA ---------------------------------------------------------------------------------

def dma_program(m, ch, src, dst, cnt, msize=0, psize=0, direction=0, tcie=True):
    d = Dev(m, "DMA1")
    p = f"Channel_{ch}_"
    d.w(p + "CMAR", src)
    d.w(p + "CPAR", dst)
    d.w(p + "CNDTR", cnt)
    ccr = (msize << 10) | (psize << 8) | (direction << 4) | (int(tcie) << 1)
    d.w(p + "CCR", ccr)
    d.w(p + "CCR", ccr | 1)
    return d


def test_dma_copy():
    m = machine("dma", debug=True)
    data = bytes(range(64))
    m.mem_write(RAM, data)
    d = dma_program(m, 0, RAM, RAM + 0x100, 16, msize=2, psize=2)
    assert m.mem_read(RAM + 0x100, 64) == data
    assert d.r("Channel_0_CNDTR") == 0 and d.f("ISR", "TCIF1") == 1
    assert m.irq_level(11) == 1 and m.irq_level(12) == 0
    d.w("IFCR", 0b10)
    assert m.irq_level(11) == 0


def test_dma_direction_swaps():
    m = machine("dma")
    m.mem_write(RAM + 0x200, b"\xAA\xBB\xCC\xDD")
    dma_program(m, 1, RAM, RAM + 0x200, 2, msize=1, direction=1)
    assert m.mem_read(RAM, 4) == b"\xAA\xBB\xCC\xDD"
    assert m.irq_level(12) == 1


def test_dma_kicks_only_on_enable_transition():
    m = machine("dma")
    m.mem_write(RAM, b"\x01\x02")
    d = dma_program(m, 0, RAM, RAM + 0x10, 2)
    m.mem_write(RAM + 0x10, b"\x00\x00")
    d.w("Channel_0_CNDTR", 2)
    d.w("Channel_0_CCR", d.r("Channel_0_CCR") | 1)
    assert m.mem_read(RAM + 0x10, 2) == b"\x00\x00"


@pytest.mark.parametrize("msize,psize", [(3, 0), (0, 3)])
def test_dma_unmapped_width_aborts(msize, psize):
    m = machine("dma")
    m.mem_write(RAM, b"\x11" * 8)
    before = m.mem_read(RAM, 0x100)
    d = dma_program(m, 0, RAM, RAM + 0x40, 4, msize=msize, psize=psize)
    assert m.mem_read(RAM, 0x100) == before
    assert d.r("Channel_0_CNDTR") == 4 and d.f("ISR", "TCIF1") == 0
    assert any("no mapped width" in msg for msg in m.diagnostics)


def test_dma_outside_ram_aborts():
    m = machine("dma")
    d = dma_program(m, 0, RAM + 0xFFF0, RAM, 8, msize=2)
    assert d.r("Channel_0_CNDTR") == 8
    assert any("not within RAM" in msg for msg in m.diagnostics)


def test_ram_bounds():
    m = machine("dma")
    with pytest.raises(BusFault):
        m.mem_read(RAM + 0xFFFF, 2)
    with pytest.raises(BusFault):
        m.mem_write(RAM - 1, b"x")
