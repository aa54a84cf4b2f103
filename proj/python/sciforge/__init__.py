"""Science QA dataset and rubric-reward toolkit.

The heavy lifting lives in the C++ core; this package re-exports the
bound operations: text normalization, prompt rendering, rollout parsing,
answer canonicalization and rule verification, coverage selection,
curriculum state, and reward scoring.
"""

from ._core import (  # noqa: F401
    RUBRIC_JUDGE_SYSTEM_PROMPT,
    CanonicalAnswer,
    CurriculumConfig,
    CurriculumState,
    ParsedRollout,
    __version__,
    aggregate_reward,
    canonicalize_answer,
    epoch_end,
    extract_grams,
    extract_last_boxed,
    normalize_text,
    parse_rollout,
    partition,
    record_rollout,
    render_answer_verification,
    render_instruction,
    render_rubric_generation,
    render_rubric_judge_user,
    reward_stats,
    score_rollout,
    select_greedy,
    select_lazy_greedy,
    tokenize,
    verify_answer_rule,
)
