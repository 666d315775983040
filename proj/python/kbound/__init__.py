"""Knowledge-boundary perception metrics and confidence elicitation for vision-language models."""

from ._kbound import (
    BatchError,
    CapabilityError,
    ConfigError,
    DatasetError,
    JudgingError,
    KboundError,
    ParseError,
    RunAbortedError,
    TransportError,
    UnparsedConfidenceError,
    add_gaussian_noise,
    compare_modalities,
    compute_perplexity,
    fit,
    fit_threshold,
    grade_answer,
    is_confident,
    judge_equivalence,
    methods,
    metrics,
    noise_schedule,
    parse_probability,
    parse_verbalized,
    prompt_catalog,
    render_prompt,
    report,
    run,
)

__all__ = [name for name in dir() if not name.startswith("_")]
