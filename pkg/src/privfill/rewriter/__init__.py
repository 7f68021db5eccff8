from privfill.rewriter.mechanisms import (
    BLANK,
    DEFAULT_PARAPHRASE_TEMPLATE,
    DP_PROMPT,
    MECHANISMS,
    PRIVFILL,
    PRIVFILL_DP,
    Document,
    GenerationLimits,
    RewriteError,
    RewriteJob,
    RewriteOutput,
    build_infill_prompt,
    dp_prompt_rewrite,
    encode_with_blank,
    generate,
    privfill_dp_rewrite,
    privfill_rewrite,
)
from privfill.rewriter.models import BackendError, GenerativeModel, HashedToyModel, StubModel, load_backend
from privfill.rewriter.segment import Sentence, segment_sentences, sent_tokenize
