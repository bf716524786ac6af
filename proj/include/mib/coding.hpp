#pragma once

#include "mib/core.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace mib::coding {

struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientBlocks : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MalformedInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CodedBlock {
    std::uint16_t index = 0;
    Bytes data;
};

/// Systematic (k_data, k_total) Reed-Solomon code over GF(2^8).
/// The message is framed with a 4-byte big-endian length prefix and
/// zero-padded to a multiple of k_data, so decode returns the exact
/// original bytes. Blocks 0..k_data-1 are the framed fragments;
/// blocks k_data..k_total-1 are parity. Any k_data distinct blocks
/// reconstruct the message.
std::vector<CodedBlock> encode(std::span<const std::uint8_t> message,
                               int k_data, int k_total);

Bytes decode(const std::vector<CodedBlock>& blocks, int k_data, int k_total);

/// Reconstructs all k_total blocks from any k_data of them, in index
/// order. Used by broadcast protocols that must re-derive missing
/// shares before re-committing to them.
std::vector<Bytes> reconstruct_all(const std::vector<CodedBlock>& blocks,
                                   int k_data, int k_total);

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);

/// Sibling path from a leaf to the root. The leaf itself travels
/// separately; `branch` holds one digest per tree level, bottom-up.
struct MerkleProof {
    std::vector<Digest> branch;
    std::uint32_t leaf_index = 0;
};

struct MerkleTree {
    Digest root{};
    std::vector<MerkleProof> proofs; // one per input leaf
};

/// Leaves are hashed with a leaf tag and interior nodes with a node
/// tag; the leaf layer is padded to a power of two by repeating the
/// last leaf digest. Throws ParameterError on an empty leaf list.
MerkleTree merkle_build(const std::vector<Bytes>& leaves);

bool merkle_verify(const Digest& root, const MerkleProof& proof,
                   std::span<const std::uint8_t> leaf);

} // namespace mib::coding
