"""Hierarchical, lazily-loaded binary dataset format."""
from boat.storage.dataset import (BlockReadError, Dataset, DatasetStats, FormatError, IndexEntry,
                                  StorageError, dataset_stats, extend_dataset, open_dataset,
                                  write_dataset)
from boat.storage.encoding import CODEC_DEFLATE, CODEC_IDENTITY, DecodeError, quantize

__all__ = [
    "BlockReadError", "CODEC_DEFLATE", "CODEC_IDENTITY", "Dataset", "DatasetStats", "DecodeError",
    "FormatError", "IndexEntry", "StorageError", "dataset_stats", "extend_dataset",
    "open_dataset", "quantize", "write_dataset",
]
