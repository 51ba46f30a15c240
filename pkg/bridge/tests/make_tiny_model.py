#!/usr/bin/env python3
"""Regenerate the committed tiny random-weight checkpoint in fixtures/.

Small enough to live in the repo (a few tens of kilobytes), so tests never
touch the network.  Seeded, so regeneration is reproducible.
"""

import os

import torch
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import BertNormalizer
from tokenizers.pre_tokenizers import BertPreTokenizer
from tokenizers.processors import TemplateProcessing
from transformers import BertConfig, BertModel, BertTokenizerFast

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "fixtures", "tiny-bert")

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "what", "is", "a", "of", "to", "and",
    "red", "tower", "bridge", "famous", "london",
    "play", "##ing", "##er", "swim", "##s",
    "question", "answer", "how", "do", "we",
    "rank", "dense", "sparse", "vector", "index",
    "look", "##up", "score", "query", "document",
    "passage", "token", "embed", "##ding", "mean",
]


def main():
    os.makedirs(OUT, exist_ok=True)
    vocab_file = os.path.join(OUT, "vocab.txt")
    with open(vocab_file, "w") as fh:
        fh.write("\n".join(VOCAB) + "\n")
    # BertTokenizerFast(vocab_file=...) no longer builds the WordPiece vocab
    # (transformers >= 5), so assemble the tokenizer explicitly.
    vocab = {token: i for i, token in enumerate(VOCAB)}
    tk = Tokenizer(WordPiece(vocab=vocab, unk_token="[UNK]"))
    tk.normalizer = BertNormalizer(lowercase=True)
    tk.pre_tokenizer = BertPreTokenizer()
    tk.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = BertTokenizerFast(
        tokenizer_object=tk,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )
    tokenizer.save_pretrained(OUT)

    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=16,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
        type_vocab_size=2,
    )
    model = BertModel(config)
    model.save_pretrained(OUT)
    print(f"tiny model written to {OUT}")


if __name__ == "__main__":
    main()
