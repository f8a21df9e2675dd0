"""Back-translation generation strategies as a testable pipeline.

Sequence models, decoding strategies, pseudo-corpus construction, IBM-1
entropy, perplexity/BLEU diagnostics, and a toy channel with exact oracles.
"""

from .corpus import MonoCorpus, ParallelCorpus, Vocabulary, build_vocabulary
from .decode import GeneratorSpec, generate, generate_corpus
from .seqmodel import ArchConfig, SeqModel

__version__ = "0.1.0"

__all__ = ["ArchConfig", "GeneratorSpec", "MonoCorpus", "ParallelCorpus", "SeqModel", "Vocabulary",
           "build_vocabulary", "generate", "generate_corpus", "__version__"]
