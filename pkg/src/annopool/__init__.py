"""annopool: build rare-class labeled corpora with pooled and active-learning selection.

The package covers the full loop: ingest raw posts into a clean document
collection, pick which documents deserve human attention (threshold pooling
or an iterative selection loop), collect structured annotations through an
HTTP service, aggregate them into consensus labels, and score the result
with prevalence, coverage, agreement, and cost-effectiveness metrics.
"""

__version__ = "0.1.0"
