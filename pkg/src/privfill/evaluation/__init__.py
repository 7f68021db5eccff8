from privfill.evaluation.harness import (
    ADAPTIVE,
    STATIC,
    PrivacyScores,
    evaluate_privacy,
    run_privacy_attack,
    run_utility_eval,
    split_indices,
)
from privfill.evaluation.metrics import (
    EvalInputs,
    PerplexityResult,
    cosine_similarity,
    majority_f1,
    mean_perplexity,
    micro_f1,
    pp_plus,
    relative_gain,
)
from privfill.evaluation.report import EvalReport, merge_reports, render_privacy_table, render_utility_table
from privfill.evaluation.rouge import lcs_length, rouge_l_f, rouge_n_f, tokenize
from privfill.evaluation.stemmer import porter_stem
