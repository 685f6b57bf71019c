"""Content-and-structure index over interleaved path/value composite keys."""

from .core_keys import (CompositeKey, Dimension, KeyError_, RecordError, dsc,
                        encode_value, lcp, make_key, parse_record, terminate_path)
from .interleave import (InterleavedKey, InterleavedTuple, PartitionStep, PsiResult,
                         dynamic_interleave, partitioning_sequence, psi, psi_of_key)
from .mem_trie import MemTrie, MemTrieFullError
from .disk_trie import FormatError, TrieFile
from .bulkload import BuildConfig, BuildReport, IoCounters, NoKeysError, bulk_load_trie
from .lsm import IndexBusyError, LsmConfig, LsmIndex, lsm_insert, lsm_query, stats
from .query import (CasQuery, MatchOutcome, PathState, QueryGrammarError, ValueState,
                    cas_query, match_path, match_value, parse_query)

__version__ = "0.1.0"

__all__ = [
    "BuildConfig", "BuildReport", "CasQuery", "CompositeKey", "Dimension",
    "FormatError", "IndexBusyError", "InterleavedKey", "InterleavedTuple",
    "IoCounters", "KeyError_", "LsmConfig", "LsmIndex", "MatchOutcome", "MemTrie",
    "MemTrieFullError", "NoKeysError", "PartitionStep", "PathState", "PsiResult",
    "QueryGrammarError", "RecordError", "TrieFile", "ValueState", "bulk_load_trie",
    "cas_query", "dsc", "dynamic_interleave", "encode_value", "lcp", "lsm_insert",
    "lsm_query", "make_key", "match_path", "match_value", "parse_query",
    "parse_record", "partitioning_sequence", "psi", "psi_of_key", "stats",
    "terminate_path",
]
