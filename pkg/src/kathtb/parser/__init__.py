"""Feature-based baseline: hashed logistic tagger, arc scorer and labeler."""

from .features import (HASH_DIM, extract_arc_features, extract_tag_features,
                       hash_feature)
from .linear import LinearModel
from .model import (ParserConfig, ParserModel, arc_distribution, predict_sentence,
                    predict_treebank, train)
from .modelfile import load_model, save_model
from .repair import repair_heads, repair_tree

__all__ = [
    "HASH_DIM", "LinearModel", "ParserConfig", "ParserModel", "arc_distribution",
    "extract_arc_features", "extract_tag_features", "hash_feature", "load_model",
    "predict_sentence", "predict_treebank", "repair_heads", "repair_tree",
    "save_model", "train",
]
