import pytest

from periphemu.frontend.pipeline import extract_json
from periphemu.frontend.prompts import (
    IRQ_BLANK,
    TEMPLATES,
    PromptAssemblyError,
    assemble_stage_prompt,
    events_prompt,
    skeleton_prompt,
)
from periphemu.schemas import STANDARD_CATEGORIES, builtin_schemas, default_registry


def test_stage1_lists_categories():
    p = assemble_stage_prompt(1, {"MCU_NAME": "STM32F103"})
    assert p.startswith("There are 12 abstract peripheral categories: [ADC, DAC,")
    assert "STM32F103 MCU" in p
    custom = assemble_stage_prompt(1, {"MCU_NAME": "X", "CATEGORY_NAMES": ["UART", "Foo"]})
    assert "There are 2 abstract peripheral categories: [UART, Foo]" in custom


def test_missing_placeholder_is_an_error():
    with pytest.raises(PromptAssemblyError):
        assemble_stage_prompt(3, {"PERIPHERAL_NAME": "DMA"})
    with pytest.raises(PromptAssemblyError):
        assemble_stage_prompt(9, {})


def test_placeholders_fully_substituted():
    ctx = {"MCU_NAME": "M", "PERIPHERAL_NAME": "P", "REGISTER_NAME": "R", "JSON_LIKE_PROMPT": "{}"}
    for stage in TEMPLATES:
        text = assemble_stage_prompt(stage, ctx)
        for key in ctx:
            assert "{" + key + "}" not in text


@pytest.mark.parametrize("schema", builtin_schemas(), ids=lambda s: s.name)
def test_skeleton_mentions_every_slot_and_parses_as_a_shape(schema):
    text = skeleton_prompt(schema)
    for slot in schema.slots:
        assert f'"{slot.name}":' in text
        if slot.optional:
            assert "[OPTIONAL]" in text
    if schema.slots:
        doc = extract_json(text)
        assert set(doc) == {s.name for s in schema.slots}


def test_skeleton_shapes():
    dma = skeleton_prompt(default_registry().get_schema("DMA"))
    assert '"trans_descs": [' in dma and '"map": {"<field value>": "<mapped value>", ...}' in dma
    for member in ("happen", "active", "enable", "disable", "clear"):
        assert f'"{member}": {{' in dma
    assert skeleton_prompt(default_registry().get_schema("basic")) == "{}"


def test_events_prompt_double_braced():
    text = events_prompt("DMA1", ["trans_descs.0.complete"])
    assert text.startswith("{{") and text.endswith("}}")
    body = extract_json(text)
    assert body == {"instance": "DMA1", "events": [{"event": "trans_descs.0.complete", "irq": IRQ_BLANK}]}


def test_extract_json_variants():
    assert extract_json('sure!\n```json\n{"a": [1, 2, ...]}\n```\nbye') == {"a": [1, 2]}
    assert extract_json('prefix [{"x": "..."}] suffix') == [{"x": "..."}]
    assert extract_json("{{\"instance\": \"U\", \"events\": []}}") == {"instance": "U", "events": []}
    assert extract_json("{// note\n a: 1,}") == {"a": 1}


def test_extract_json_none_found():
    from periphemu.docformat import FormatSyntaxError

    with pytest.raises(FormatSyntaxError):
        extract_json("no braces here")
    with pytest.raises(FormatSyntaxError):
        extract_json("{ unterminated: [1, 2 }")


def test_standard_categories_all_have_schemas():
    reg = default_registry()
    for name in STANDARD_CATEGORIES:
        assert reg.get_schema(name).name in (name, "basic")
