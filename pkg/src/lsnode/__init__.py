"""Erasure-coded low-storage blockchain node.

A low-storage node keeps only seed-derived linear combinations of each
block's fragments plus the block hashes; any block is rebuilt from about k
coded fragments gathered from peers. The package bundles the GF(256)
codec, the node state machine and fragment store, closed-form availability
models, and a deterministic network simulator.
"""

from .analysis import Distribution
from .chain import Block, BlockHeader, build_chain, validate_chain
from .codec import (
    CodecParams,
    CodedFragment,
    DecodingSet,
    can_decode,
    decode_block,
    encode_fragments,
    fragment_block,
    verify_decoded,
)
from .coeffgen import CoefficientSeed, coefficient_matrix, coefficient_stream
from .node import FragmentStore, NodeConfig, bootstrap, recover_block
from .simnet import SimConfig, SimMetrics

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockHeader",
    "CodecParams",
    "CodedFragment",
    "CoefficientSeed",
    "DecodingSet",
    "Distribution",
    "FragmentStore",
    "NodeConfig",
    "SimConfig",
    "SimMetrics",
    "bootstrap",
    "build_chain",
    "can_decode",
    "coefficient_matrix",
    "coefficient_stream",
    "decode_block",
    "encode_fragments",
    "fragment_block",
    "recover_block",
    "validate_chain",
    "verify_decoded",
    "__version__",
]
