"""Peripheral modeling primitives, LLM-driven model extraction and register-level emulation."""

from .docformat import (
    parse_devices,
    parse_model_instance,
    serialize_devices,
    serialize_model_instance,
)
from .primitives import (
    CategorySchema,
    DeviceInstance,
    Evt,
    InstanceError,
    MemField,
    MemFieldState,
    ModelInstance,
    Reg,
    RegField,
    RegFieldMap,
    RegFieldState,
    RegRef,
    Slot,
    Swt,
    Upd,
)
from .resolver import build_symbol_table, resolve_instance, resolve_value
from .schemas import SchemaRegistry, default_registry, get_schema, register_schema
from .validator import ValidationReport, validate_all

__version__ = "0.1.0"
