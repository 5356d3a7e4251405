from .spiral_embedding import SourceEmbedding, TupleEmbedding

__all__ = ["SourceEmbedding", "TupleEmbedding"]
