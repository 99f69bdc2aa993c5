"""Interpretive execution of instantiated peripheral models."""

from .engines import DmaEngine, GpioEngine, IdleEngine, TimerEngine, UartEngine
from .machine import (
    BuildError,
    BusFault,
    DeviceState,
    IrqLineError,
    Machine,
    build_machine,
    inject_rx,
    irq_level,
    mem_read,
    mem_write,
    mmio_read,
    mmio_write,
    read_tx,
    tick,
)
from .scenario import (
    ConfigError,
    Scenario,
    ScenarioError,
    ScenarioResult,
    Step,
    dump_trace,
    load_machine,
    load_scenario,
    machine_from_dict,
    parse_scenario,
    run_files,
    run_scenario,
)
