"""Counter-narrative SFT + DPO pipeline."""

from ._cnalign import (
    CnalignError,
    bleu2,
    dpo_loss,
    emit_report,
    extract_completion,
    gen_len,
    load_corpus,
    novelty,
    parse_report_table,
    render,
    rouge_l,
    run_cli,
    sft_loss,
    split_stats,
    tokenize,
    validate_rejected,
)

__all__ = [
    "CnalignError",
    "bleu2",
    "dpo_loss",
    "emit_report",
    "extract_completion",
    "gen_len",
    "load_corpus",
    "novelty",
    "parse_report_table",
    "render",
    "rouge_l",
    "run_cli",
    "sft_loss",
    "split_stats",
    "tokenize",
    "validate_rejected",
]
