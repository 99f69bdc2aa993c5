"""Record the STM32F1 DMA extraction transcripts shipped under fixtures/transcripts.

A scripted client plays the LLM: it answers each stage the way a well-behaved model
would for the driver corpus in fixtures/drivers/stm32f1.  The pipeline is run
against it and every (prompt, response) pair is saved for mock replay.

    python scripts/make_dma_transcript.py [--out fixtures/transcripts]
"""

from __future__ import annotations

import argparse
import json
import re
from pathlib import Path

from periphemu.frontend import FunctionClient, PipelineConfig, Record, run_pipeline, save_transcript

ROOT = Path(__file__).resolve().parent.parent
CORPUS = sorted((ROOT / "fixtures" / "drivers" / "stm32f1").iterdir())

REGS = [("ISR", 0x00), ("IFCR", 0x04)]
for ch, base in ((0, 0x08), (1, 0x1C)):
    REGS += [(f"Channel_{ch}_{r}", base + 4 * i) for i, r in enumerate(("CCR", "CNDTR", "CPAR", "CMAR"))]

CCR_FIELDS = [("EN", 0, 1), ("TCIE", 1, 1), ("HTIE", 2, 1), ("TEIE", 3, 1), ("DIR", 4, 1), ("CIRC", 5, 1),
              ("PINC", 6, 1), ("MINC", 7, 1), ("PSIZE", 8, 2), ("MSIZE", 10, 2), ("PL", 12, 2), ("MEM2MEM", 14, 1)]


def fields_of(reg: str) -> list[tuple[str, int, int]]:
    if reg in ("ISR", "IFCR"):
        prefix = "" if reg == "ISR" else "C"
        return [(f"{prefix}{flag}{ch + 1}", 4 * ch + i, 1)
                for ch in range(2) for i, flag in enumerate(("GIF", "TCIF", "HTIF", "TEIF"))]
    if reg.endswith("_CCR"):
        return CCR_FIELDS
    return [(reg.rsplit("_", 1)[1], 0, 16 if reg.endswith("CNDTR") else 32)]


def descriptor(ch: int) -> dict:
    ccr = f"Channel_{ch}_CCR"
    state = lambda reg, field, value: {"reg": reg, "field": field, "value": value}
    width_map = {"0x00": "1", "0x01": "2", "0x02": "4"}
    return {
        "enable": {"enable": state(ccr, "EN", "0x01"), "disable": state(ccr, "EN", "0x00")},
        "complete": {
            "happen": state("ISR", f"TCIF{ch + 1}", "0x01"),
            "active": state(ccr, "TCIE", "0x01"),
            "enable": state(ccr, "TCIE", "0x01"),
            "disable": state(ccr, "TCIE", "0x00"),
            "clear": state("IFCR", f"CTCIF{ch + 1}", "0x01"),
        },
        "src": f"Channel_{ch}_CMAR",
        "src_width": {"reg": ccr, "field": "MSIZE", "map": width_map},
        "dst": f"Channel_{ch}_CPAR",
        "dst_width": {"reg": ccr, "field": "PSIZE", "map": width_map},
        "cnt": f"Channel_{ch}_CNDTR",
        "dir": state(ccr, "DIR", "0x01"),
    }


def fenced(doc) -> str:
    return "Here is the result:\n\n```json\n" + json.dumps(doc, indent=2) + "\n```\n"


def answer(system: str, prompt: str) -> str:
    if prompt.startswith("There are"):
        return fenced([{"DMA": "DMA"}])
    if prompt.startswith("Find all registers"):
        return fenced({"regs": [{"name": n, "width": "32", "offset": f"0x{o:02X}"} for n, o in REGS]})
    m = re.match(r"Find all fields of the (\w+) register", prompt)
    if m:
        return fenced({"fields": [{"name": n, "pos": str(p), "width": str(w)} for n, p, w in fields_of(m.group(1))]})
    if prompt.startswith("When the driver"):
        return fenced({"updates": []})
    if prompt.startswith("Summarize"):
        return fenced({"trans_descs": [descriptor(0), descriptor(1)]})
    if prompt.startswith("Find all peripheral instances"):
        return fenced({"instances": [
            {"name": "DMA1", "base": "0x40020000", "irqs": ["DMA1_Channel1_IRQn", "DMA1_Channel2_IRQn"]}]})
    if prompt.startswith("Associate"):
        body = {"instance": "DMA1", "events": [
            {"event": "trans_desc.0.complete", "irq": "11"},
            {"event": "trans_desc.1.complete", "irq": "DMA1_Channel2_IRQn"},
        ]}
        return "{" + json.dumps(body) + "}"
    raise ValueError(f"unexpected prompt: {prompt[:60]!r}")


def with_faults(records: list[Record], stage: int, bad: str, k: int = 1) -> list[Record]:
    """Insert ``k`` rejected responses ahead of the first record of ``stage``."""
    i = next(i for i, r in enumerate(records) if r.stage == stage)
    r = records[i]
    return records[:i] + [Record(r.system, r.prompt, bad, r.stage, r.key) for _ in range(k)] + records[i:]


# two registers overlapping in bytes 0x02-0x03: rejected by the overlap check
BAD_REGS = fenced({"regs": [{"name": "ISR", "width": "32", "offset": "0x00"},
                            {"name": "IFCR", "width": "32", "offset": "0x02"}]})


def record() -> list[Record]:
    cfg = PipelineConfig.from_files("STM32F103", CORPUS)
    result = run_pipeline(FunctionClient(answer), cfg)
    if result.skipped:
        raise SystemExit(f"categories failed while recording: {sorted(result.skipped)}")
    return result.transcript


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "fixtures" / "transcripts")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    records = record()
    save_transcript(records, args.out / "stm32f1_dma.json")
    save_transcript(with_faults(records, 2, BAD_REGS), args.out / "stm32f1_dma_stage2_retry.json")
    print(f"wrote {len(records)} records to {args.out}")


if __name__ == "__main__":
    main()
