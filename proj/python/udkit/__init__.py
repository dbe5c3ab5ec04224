from ._core import Document, Sentence, Word, read_conllu, write_conllu

__all__ = ["Document", "Sentence", "Word", "read_conllu", "write_conllu"]
