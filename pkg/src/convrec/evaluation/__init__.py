from .rec import rank_metrics
from .conv import bleu_n, distinct_n, embedding_metrics, perplexity
from .policy import policy_metrics
from .report import MetricReport, format_report, write_report

__all__ = [
    "MetricReport",
    "bleu_n",
    "distinct_n",
    "embedding_metrics",
    "format_report",
    "perplexity",
    "policy_metrics",
    "rank_metrics",
    "write_report",
]
