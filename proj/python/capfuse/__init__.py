from ._capfuse import (
    CapfuseError,
    agreement_histogram,
    bleu_corpus,
    bleu_sentence,
    blip_score,
    cider,
    cosine,
    detect_collapse,
    div_n,
    make_splits,
    mbleu,
    pair_frequency,
    postprocess,
    rank,
    render_prompt,
    summarize_votes,
    tokenize,
)

__all__ = [
    "CapfuseError",
    "agreement_histogram",
    "bleu_corpus",
    "bleu_sentence",
    "blip_score",
    "cider",
    "cosine",
    "detect_collapse",
    "div_n",
    "make_splits",
    "mbleu",
    "pair_frequency",
    "postprocess",
    "rank",
    "render_prompt",
    "summarize_votes",
    "tokenize",
]
