"""Stage prompt templates and JSON-like skeleton prompts generated from schemas."""

from __future__ import annotations

import json
import re
from typing import Any, Mapping, Sequence

from ..primitives import CategorySchema, Slot
from ..schemas import STANDARD_CATEGORIES

SYSTEM_INSTRUCTION = (
    "You are an expert driver code analyzer, and your job is to answer the user's query "
    "based on the driver code files you have access to."
)

TEMPLATES = {
    1: (
        "There are {CATEGORY_COUNT} abstract peripheral categories: [{CATEGORIES}]. "
        "Find all peripheral categories for the {MCU_NAME} MCU and output in JSON format:\n"
        "\n"
        '[{"<peripheral category name>": "<abstract category>"},...]'
    ),
    2: (
        "Find all registers of the {PERIPHERAL_NAME} peripheral. Output in JSON format like this:\n"
        "\n"
        '{"regs": [{\n'
        '  "name": "<register name>",\n'
        '  "width": "<register width in bits>",\n'
        '  "offset": "<address offset within the peripheral>"}, ...]}\n'
        "\n"
        "Think step by step."
    ),
    3: (
        "Find all fields of the {REGISTER_NAME} register of the {PERIPHERAL_NAME} peripheral. "
        "Output in JSON format like this:\n"
        "\n"
        '{"fields": [{\n'
        '  "name": "<field name>",\n'
        '  "pos": "<bit position of the field within the register>",\n'
        '  "width": "<field width in bits>"}, ...]}\n'
        "\n"
        "Think step by step."
    ),
    4: (
        "When the driver sets/clears some register fields (condition), hardware may take actions and "
        "sets/clears some register fields (action). To wait the hardware to finish, the driver polls for "
        "these register fields. The above procedure looks like this:\n"
        "\n"
        "SET(REG_A, FIELD_A) or CLEAR(REG_A, FIELD_A) // condition\n"
        "SET(REG_B, FIELD_B) or CLEAR(REG_B, FIELD_B) // condition, can be multiple\n"
        "while ((REG_C & FIELD_C) == 0/1); // action\n"
        "while ((REG_D & FIELD_D) == 0/1); // action, can be multiple\n"
        "\n"
        "For the {PERIPHERAL_NAME} peripheral, find all such situations. Output in JSON format like this:\n"
        "\n"
        '{"updates": [{"condition": [...], "action": [...]}]}\n'
        "\n"
        "Think step by step."
    ),
    5: (
        "Summarize information about the {PERIPHERAL_NAME} peripheral and output in JSON format like this:\n"
        "\n"
        "{JSON_LIKE_PROMPT}\n"
        "\n"
        "Think step by step."
    ),
    6: (
        "Find all peripheral instances of kind {PERIPHERAL_NAME}. Output in JSON format like this:\n"
        "\n"
        '"instances": [{\n'
        '    "name": "<name of the instance>",\n'
        '    "base": "<base address of the peripheral instance>",\n'
        '    "irqs": ["<interrupt number>", ...]\n'
        "  },...]\n"
        "\n"
        "Think step by step."
    ),
    7: (
        "Associate interrupt events listed in the given JSON with their interrupt numbers by filling the blanks.\n"
        "\n"
        "{JSON_LIKE_PROMPT}\n"
        "\n"
        "Think step by step."
    ),
}

IRQ_BLANK = "<BLANK: interrupt number>"

_PLACEHOLDER_RE = re.compile(r"\{([A-Z_]+)\}")


class PromptAssemblyError(KeyError):
    pass


def assemble_stage_prompt(stage: int, ctx: Mapping[str, Any]) -> str:
    """Fill a stage template.  Stage 1 defaults to the twelve standard categories."""
    if stage not in TEMPLATES:
        raise PromptAssemblyError(f"no template for stage {stage}")
    values = {k: v for k, v in ctx.items() if isinstance(k, str) and k.isupper()}
    if stage == 1:
        cats = list(ctx.get("CATEGORY_NAMES") or STANDARD_CATEGORIES)
        values.setdefault("CATEGORIES", ", ".join(cats))
        values.setdefault("CATEGORY_COUNT", str(len(cats)))

    def fill(m: re.Match) -> str:
        key = m.group(1)
        if key not in values:
            raise PromptAssemblyError(f"stage {stage} template needs {key}")
        return str(values[key])

    return _PLACEHOLDER_RE.sub(fill, TEMPLATES[stage])


_STATE = '"reg": "<register name>", "field": "<field name>", "value": "<value of the field>",'
_EVT_VALUES = {
    "happen": "when the event happens, the field is set to this value",
    "active": "when the event is enabled, the field is set to this value",
    "enable": "the event interrupt is enabled when this value is written into the field",
    "disable": "the event interrupt is disabled when this value is written into the field",
    "clear": "the event happen flag is cleared when this value is written into the field",
}


def _block(lines: list[str], pad: str) -> list[str]:
    return [pad + ln for ln in lines]


def _state_lines(value_hint: str = "") -> list[str]:
    if not value_hint:
        return [_STATE]
    return ['"reg": "<register name>", "field": "<field name>",', f'"value": "<{value_hint}>",']


def _blank(slot: Slot) -> list[str]:
    """The value part of a slot, as lines; the first line continues the key line."""
    kind = slot.kind
    if isinstance(kind, CategorySchema):
        return ["{"] + _block(_slot_lines(kind), "  ") + ["},"]
    if kind == "Reg" or kind == "text":
        return [f'"<{slot.description}>",']
    if kind == "choice":
        return [f'"<one of: {", ".join(slot.choices)}>",']
    if kind == "RegFieldState":
        return ["{"] + _block(_state_lines(), "  ") + ["},"]
    if kind == "RegFieldMap":
        body = ['"reg": "<register name>", "field": "<field name>",',
                '"map": {"<field value>": "<mapped value>", ...},']
        return ["{"] + _block(body, "  ") + ["},"]
    if kind == "Swt":
        body: list[str] = []
        for member in ("enable", "disable", "status"):
            body += [f'"{member}": {{'] + _block(_state_lines(), "  ") + ["},"]
        return ["{"] + _block(body, "  ") + ["},"]
    if kind == "Evt":
        body = []
        for member, hint in _EVT_VALUES.items():
            body += [f'"{member}": {{'] + _block(_state_lines(hint), "  ") + ["},"]
        return ["{"] + _block(body, "  ") + ["},"]
    if kind == "MemField":
        return ['{"offset": "<byte offset of the field within the struct>", "width": "<field width in bits>"},']
    if kind == "MemFieldState":
        return ["{",
                '  "field": {"offset": "<byte offset of the field within the struct>", "width": "<field width in bits>"},',
                '  "value": "<value of the field>",',
                "},"]
    raise ValueError(f"no skeleton for kind {kind!r}")


def _slot_lines(schema: CategorySchema) -> list[str]:
    lines: list[str] = []
    for slot in schema.slots:
        inline = not slot.many and (slot.kind == "Reg" or slot.kind == "text")
        tag = "[OPTIONAL] " if slot.optional else ""
        if not inline or slot.optional:
            lines.append(f"// {tag}{slot.description}")
        value = _blank(slot)
        if slot.many:
            lines.append(f'"{slot.name}": [')
            lines += _block(value + ["...,"], "  ")
            lines.append("],")
        else:
            lines.append(f'"{slot.name}": {value[0]}')
            lines += value[1:]
    return lines


def skeleton_prompt(schema: CategorySchema) -> str:
    if not schema.slots:
        return "{}"
    return "\n".join(["{"] + _block(_slot_lines(schema), "  ") + ["}"])


def events_prompt(instance: str, event_paths: Sequence[str]) -> str:
    body = {"instance": instance, "events": [{"event": p, "irq": IRQ_BLANK} for p in event_paths]}
    return "{" + json.dumps(body) + "}"
