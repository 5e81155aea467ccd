"""Domain-tunable stand-off linguistic annotation of document collections."""
from .model import Document, Span, Token, deserialize, serialize, validate
from .pipeline import Pipeline, PipelineConfig, run_pipeline, validate_config
from .tokenizer import tokenize

__version__ = "0.1.0"

__all__ = ["Document", "Pipeline", "PipelineConfig", "Span", "Token", "deserialize", "run_pipeline", "serialize",
           "tokenize", "validate", "validate_config"]
