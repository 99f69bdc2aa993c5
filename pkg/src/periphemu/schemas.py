"""Built-in category schemas and the schema registry.

Timer, DMA and Ethernet are the reference models.  UART and GPIO are written in
the same style and cover the common subset of those peripherals.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .primitives import CategorySchema, InstanceError, Slot

# the abstract categories offered to the category-identification stage
STANDARD_CATEGORIES = (
    "ADC", "DAC", "DMA", "Ethernet", "GPIO", "RNG",
    "SDHC", "SDIO", "SPI", "I2C", "Timer", "UART",
)

GENERIC = CategorySchema("basic", (), "basic register model: registers and update dependencies only")

COUNTER = CategorySchema(
    "Counter",
    (
        Slot("tick", "Reg", "the register holding the current timer tick value"),
        Slot("period", "Reg", "the register holding the timer period value"),
        Slot("enable", "Swt", "when to enable the counter"),
        Slot("period_evt", "Evt", "the event generated when the timer tick reaches the period"),
    ),
)

INPUT_CAPTURE = CategorySchema(
    "InputCapture",
    (
        Slot("capture", "Reg", "the register holding the capture value"),
        Slot("enable", "Swt", "when to enable the input capture channel"),
        Slot("capture_evt", "Evt", "the input capture event"),
    ),
)

OUTPUT_COMPARE = CategorySchema(
    "OutputCompare",
    (
        Slot("compare", "Reg", "the register holding the compare value"),
        Slot("enable", "Swt", "when to enable the output compare channel"),
        Slot("compare_evt", "Evt", "the output compare event"),
    ),
)

TIMER = CategorySchema(
    "Timer",
    (
        Slot("counters", COUNTER, "a list of counters", many=True),
        Slot("input_captures", INPUT_CAPTURE, "a list of input capture channels", many=True),
        Slot("output_compares", OUTPUT_COMPARE, "a list of output compare channels", many=True),
    ),
)

UART = CategorySchema(
    "UART",
    (
        Slot("data", "Reg", "the register holding received data and data to be transmitted"),
        Slot("tx_enable", "Swt", "when to enable the transmitter"),
        Slot("rx_enable", "Swt", "when to enable the receiver"),
        Slot("tx_evt", "Evt", "the event generated when a byte has been transmitted"),
        Slot("rx_evt", "Evt", "the event generated when a received byte is ready to be read"),
    ),
)

PIN_EDGE = CategorySchema(
    "PinEdge",
    (
        Slot(
            "pin",
            "RegFieldState",
            "the input register field holding the pin level, and the level that triggers the event",
        ),
        Slot("evt", "Evt", "the event generated when the pin changes to that level"),
    ),
)

GPIO = CategorySchema(
    "GPIO",
    (
        Slot("input", "Reg", "the register holding the current pin input levels"),
        Slot("set", "Reg", "the register where writing 1 to a bit drives the corresponding pin high"),
        Slot("clear", "Reg", "the register where writing 1 to a bit drives the corresponding pin low"),
        Slot("output", "Reg", "the register holding the pin output levels", optional=True),
        Slot("edges", PIN_EDGE, "a list of pin edge events", many=True),
    ),
)

DMA_TRANS_DESC = CategorySchema(
    "DMATransDesc",
    (
        Slot("enable", "Swt", "when to enable the channel"),
        Slot("complete", "Evt", "the event generated when the transfer completes"),
        Slot("src", "Reg", "the register holding DMA transfer source address"),
        Slot(
            "src_width",
            "RegFieldMap",
            "the register field representing source transfer chunk width (in bytes)",
        ),
        Slot("dst", "Reg", "the register holding DMA transfer destination address"),
        Slot(
            "dst_width",
            "RegFieldMap",
            "the register field representing destination transfer chunk width (in bytes)",
        ),
        Slot("cnt", "Reg", "the register holding the number of data to be transferred"),
        Slot(
            "direction",
            "RegFieldState",
            "the register field representing transfer direction",
            optional=True,
            aliases=("dir",),
        ),
    ),
)

DMA = CategorySchema(
    "DMA",
    (Slot("trans_descs", DMA_TRANS_DESC, "a list of transfer descriptors", many=True),),
)

ETH_TRANS_DESC = CategorySchema(
    "EthTransDesc",
    (
        Slot("trans_desc_struct", "text", "name of the transfer descriptor struct"),
        Slot(
            "tx_frame_len",
            "MemField",
            "the field within the transfer descriptor struct that holds the number of bytes to be transmitted in a frame",
        ),
        Slot(
            "rx_frame_len",
            "MemField",
            "the field within the transfer descriptor struct that holds the number of received bytes in a frame",
        ),
        Slot("buf", "MemField", "the field within the transfer descriptor struct that holds the buffer address"),
        Slot("addr_method", "choice", "descriptor addressing method", choices=("LinkedList", "Array")),
        Slot(
            "last_rx_seg",
            "MemFieldState",
            "when the field is set to this value, the corresponding descriptor represents the last received segment",
        ),
        Slot(
            "last_tx_seg",
            "MemFieldState",
            "when the field is set to this value, the corresponding descriptor represents the last segment to be transmitted",
        ),
        Slot(
            "own",
            "MemFieldState",
            "when the field is set to this value, the corresponding descriptor can be manipulated by the hardware",
        ),
        Slot(
            "first_rx_seg",
            "MemFieldState",
            "when the field is set to this value, the corresponding descriptor represents the first received segment",
            optional=True,
        ),
        Slot(
            "rx_buf_len",
            "MemField",
            "the field within the transfer descriptor struct that holds the length of `buf`",
            optional=True,
        ),
        Slot(
            "next",
            "MemField",
            "the field within the transfer descriptor struct that holds the address of the next descriptor. "
            "only present when addressing method is `LinkedList`",
            optional=True,
        ),
        Slot(
            "last_desc",
            "MemFieldState",
            "when the field is set to this value, the descriptor is the last one in the array. "
            "only present when addressing method is `Array`",
            optional=True,
        ),
    ),
)

ETHERNET = CategorySchema(
    "Ethernet",
    (
        Slot("trans_desc", ETH_TRANS_DESC, "the transfer descriptor layout"),
        Slot("rx_desc_reg", "Reg", "the register holding the address of rx descriptors"),
        Slot("tx_desc_reg", "Reg", "the register holding the address of tx descriptors"),
        Slot("rx_enable", "Swt", "when to enable rx"),
        Slot("tx_enable", "Swt", "when to enable tx"),
        Slot("rx_done", "Evt", "the event generated when a frame is received"),
        Slot("tx_done", "Evt", "the event generated when a frame is transmitted"),
        Slot(
            "rx_buf_len_reg",
            "Reg",
            "the register holding the length of `trans_desc.buf`, can be stored here or in `trans_desc.rx_buf_len`",
            optional=True,
        ),
    ),
)


def builtin_schemas() -> list[CategorySchema]:
    return [TIMER, UART, GPIO, DMA, ETHERNET, GENERIC]


class SchemaRegistry:
    """Category name -> schema, with the generic model as fallback."""

    def __init__(self, schemas: Iterable[CategorySchema] = (), fallback: CategorySchema = GENERIC):
        self.fallback = fallback
        self._schemas: dict[str, CategorySchema] = {}
        for s in schemas:
            self.register_schema(s)

    @classmethod
    def default(cls) -> "SchemaRegistry":
        return cls(builtin_schemas())

    def register_schema(self, schema: CategorySchema) -> None:
        if schema.name in self._schemas:
            raise InstanceError("schema-unique", f"schema {schema.name!r} already registered")
        self._schemas[schema.name] = schema

    def get_schema(self, name: str) -> CategorySchema:
        return self._schemas.get(name, self.fallback)

    def lookup(self, name: str) -> Optional[CategorySchema]:
        return self._schemas.get(name)

    def names(self) -> list[str]:
        return list(self._schemas)

    def category_names(self) -> list[str]:
        """Abstract categories in prompt order: the standard twelve, then extras."""
        extra = [n for n in self._schemas if n not in STANDARD_CATEGORIES and n != self.fallback.name]
        return list(STANDARD_CATEGORIES) + extra

    def __contains__(self, name: str) -> bool:
        return name in self._schemas

    def __iter__(self):
        return iter(self._schemas.values())


_default: Optional[SchemaRegistry] = None


def default_registry() -> SchemaRegistry:
    global _default
    if _default is None:
        _default = SchemaRegistry.default()
    return _default


def get_schema(name: str) -> CategorySchema:
    return default_registry().get_schema(name)


def register_schema(schema: CategorySchema) -> None:
    default_registry().register_schema(schema)
