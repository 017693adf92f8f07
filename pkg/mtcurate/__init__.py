"""
mtcurate: English-Vietnamese parallel corpus toolkit.

Provides:
- CLI entrypoint `mtcurate`
- Corpus ingestion, merging, statistics and test-set sampling
- BLEU scoring and a translation gateway with a shared cache
- DP alignment of weakly-aligned documents
- Quality scoring with top-K filtering, and deduplication
- Evaluation matrices, data-budget ratios and tier time reports
"""

__all__ = ["__version__"]

__version__ = "0.1.0"
