"""Staged LLM extraction of model and device instances from driver source."""

from .client import (
    ClientConfigError,
    FunctionClient,
    HttpClient,
    LlmClient,
    MockClient,
    Record,
    TranscriptMismatch,
    load_transcript,
    save_transcript,
)
from .pipeline import (
    PipelineConfig,
    PipelineError,
    PipelineResult,
    StageFailure,
    StageResult,
    extract_json,
    run_pipeline,
    run_stage,
)
from .prompts import SYSTEM_INSTRUCTION, assemble_stage_prompt, events_prompt, skeleton_prompt
