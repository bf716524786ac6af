#include "mib/coding.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

namespace mib::coding {

namespace {

// GF(2^8) with the 0x11d reduction polynomial, generator 2.
struct GfTables {
    std::array<std::uint8_t, 512> exp{};
    std::array<std::uint8_t, 256> log{};

    GfTables() {
        int x = 1;
        for (int i = 0; i < 255; ++i) {
            exp[i] = static_cast<std::uint8_t>(x);
            log[x] = static_cast<std::uint8_t>(i);
            x <<= 1;
            if (x & 0x100)
                x ^= 0x11d;
        }
        for (int i = 255; i < 512; ++i)
            exp[i] = exp[i - 255];
    }
};

const GfTables gf;

inline std::uint8_t gf_mul(std::uint8_t a, std::uint8_t b) {
    if (a == 0 || b == 0)
        return 0;
    return gf.exp[gf.log[a] + gf.log[b]];
}

inline std::uint8_t gf_div(std::uint8_t a, std::uint8_t b) {
    if (b == 0)
        throw std::logic_error("gf division by zero");
    if (a == 0)
        return 0;
    return gf.exp[(gf.log[a] + 255 - gf.log[b]) % 255];
}

// Lagrange basis over the sample points xs, evaluated at x.
// row[j] is the weight of sample j when reconstructing the value at x.
std::vector<std::uint8_t> lagrange_row(const std::vector<std::uint8_t>& xs,
                                       std::uint8_t x) {
    std::vector<std::uint8_t> row(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) {
        std::uint8_t num = 1, den = 1;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            if (t == j)
                continue;
            num = gf_mul(num, static_cast<std::uint8_t>(x ^ xs[t]));
            den = gf_mul(den, static_cast<std::uint8_t>(xs[j] ^ xs[t]));
        }
        row[j] = gf_div(num, den);
    }
    return row;
}

void check_params(int k_data, int k_total) {
    if (k_data <= 0 || k_total < k_data)
        throw ParameterError("erasure parameters require 1 <= k_data <= k_total, got (" +
                             std::to_string(k_data) + ", " + std::to_string(k_total) + ")");
    if (k_total > 255)
        throw ParameterError("k_total exceeds the GF(256) field size");
}

Bytes frame(std::span<const std::uint8_t> message, int k_data) {
    const std::size_t framed = 4 + message.size();
    const std::size_t frag = (framed + k_data - 1) / k_data;
    Bytes buf(frag * k_data, 0);
    const auto len = static_cast<std::uint32_t>(message.size());
    buf[0] = static_cast<std::uint8_t>(len >> 24);
    buf[1] = static_cast<std::uint8_t>(len >> 16);
    buf[2] = static_cast<std::uint8_t>(len >> 8);
    buf[3] = static_cast<std::uint8_t>(len);
    std::memcpy(buf.data() + 4, message.data(), message.size());
    return buf;
}

// Selects k_data blocks with distinct indices (lowest indices first)
// and validates shapes. Shared by decode and reconstruct_all.
std::vector<const CodedBlock*> pick_samples(const std::vector<CodedBlock>& blocks,
                                            int k_data, int k_total) {
    std::vector<const CodedBlock*> by_index(k_total, nullptr);
    std::size_t width = 0;
    int distinct = 0;
    for (const auto& b : blocks) {
        if (b.index >= k_total)
            throw MalformedInput("block index " + std::to_string(b.index) +
                                 " out of range for k_total=" + std::to_string(k_total));
        if (width == 0)
            width = b.data.size();
        else if (b.data.size() != width)
            throw MalformedInput("coded blocks have inconsistent lengths");
        if (!by_index[b.index]) {
            by_index[b.index] = &b;
            ++distinct;
        }
    }
    if (width == 0)
        throw MalformedInput("coded blocks are empty");
    if (distinct < k_data)
        throw InsufficientBlocks("need " + std::to_string(k_data) +
                                 " distinct blocks, got " + std::to_string(distinct));
    std::vector<const CodedBlock*> samples;
    samples.reserve(k_data);
    for (int i = 0; i < k_total && static_cast<int>(samples.size()) < k_data; ++i)
        if (by_index[i])
            samples.push_back(by_index[i]);
    return samples;
}

// Recovers the k_data framed fragments from the chosen samples.
std::vector<Bytes> recover_fragments(const std::vector<const CodedBlock*>& samples,
                                     int k_data) {
    const std::size_t width = samples[0]->data.size();
    std::vector<std::uint8_t> xs(samples.size());
    for (std::size_t j = 0; j < samples.size(); ++j)
        xs[j] = static_cast<std::uint8_t>(samples[j]->index);

    std::vector<Bytes> fragments(k_data);
    for (int t = 0; t < k_data; ++t) {
        // Systematic read-off when fragment t is among the samples.
        auto it = std::find(xs.begin(), xs.end(), static_cast<std::uint8_t>(t));
        if (it != xs.end()) {
            fragments[t] = samples[it - xs.begin()]->data;
            continue;
        }
        auto row = lagrange_row(xs, static_cast<std::uint8_t>(t));
        Bytes out(width, 0);
        for (std::size_t j = 0; j < samples.size(); ++j) {
            if (row[j] == 0)
                continue;
            const Bytes& src = samples[j]->data;
            for (std::size_t col = 0; col < width; ++col)
                out[col] ^= gf_mul(row[j], src[col]);
        }
        fragments[t] = std::move(out);
    }
    return fragments;
}

std::vector<Bytes> extend_fragments(const std::vector<Bytes>& fragments,
                                    int k_data, int k_total) {
    std::vector<Bytes> all(fragments.begin(), fragments.end());
    std::vector<std::uint8_t> xs(k_data);
    for (int j = 0; j < k_data; ++j)
        xs[j] = static_cast<std::uint8_t>(j);
    const std::size_t width = fragments[0].size();
    for (int x = k_data; x < k_total; ++x) {
        auto row = lagrange_row(xs, static_cast<std::uint8_t>(x));
        Bytes out(width, 0);
        for (int j = 0; j < k_data; ++j) {
            if (row[j] == 0)
                continue;
            for (std::size_t col = 0; col < width; ++col)
                out[col] ^= gf_mul(row[j], fragments[j][col]);
        }
        all.push_back(std::move(out));
    }
    return all;
}

Bytes unframe(const std::vector<Bytes>& fragments) {
    Bytes framed;
    for (const auto& f : fragments)
        framed.insert(framed.end(), f.begin(), f.end());
    if (framed.size() < 4)
        throw MalformedInput("framed payload shorter than its length prefix");
    const std::uint32_t len = (std::uint32_t{framed[0]} << 24) |
                              (std::uint32_t{framed[1]} << 16) |
                              (std::uint32_t{framed[2]} << 8) | framed[3];
    if (len > framed.size() - 4)
        throw MalformedInput("length prefix exceeds framed payload");
    return Bytes(framed.begin() + 4, framed.begin() + 4 + len);
}

} // namespace

std::vector<CodedBlock> encode(std::span<const std::uint8_t> message,
                               int k_data, int k_total) {
    check_params(k_data, k_total);
    if (message.empty())
        throw ParameterError("cannot encode an empty message");
    Bytes framed = frame(message, k_data);
    const std::size_t frag = framed.size() / k_data;

    std::vector<Bytes> fragments(k_data);
    for (int i = 0; i < k_data; ++i)
        fragments[i] = Bytes(framed.begin() + i * frag, framed.begin() + (i + 1) * frag);

    auto all = extend_fragments(fragments, k_data, k_total);
    std::vector<CodedBlock> blocks(k_total);
    for (int i = 0; i < k_total; ++i)
        blocks[i] = CodedBlock{static_cast<std::uint16_t>(i), std::move(all[i])};
    return blocks;
}

Bytes decode(const std::vector<CodedBlock>& blocks, int k_data, int k_total) {
    check_params(k_data, k_total);
    auto samples = pick_samples(blocks, k_data, k_total);
    return unframe(recover_fragments(samples, k_data));
}

std::vector<Bytes> reconstruct_all(const std::vector<CodedBlock>& blocks,
                                   int k_data, int k_total) {
    check_params(k_data, k_total);
    auto samples = pick_samples(blocks, k_data, k_total);
    return extend_fragments(recover_fragments(samples, k_data), k_data, k_total);
}

Digest sha256(std::span<const std::uint8_t> data) {
    Digest out;
    SHA256(data.data(), data.size(), out.data());
    return out;
}

namespace {

constexpr std::uint8_t kLeafTag = 0x00;
constexpr std::uint8_t kNodeTag = 0x01;

Digest leaf_hash(std::span<const std::uint8_t> leaf) {
    Bytes buf;
    buf.reserve(1 + leaf.size());
    buf.push_back(kLeafTag);
    buf.insert(buf.end(), leaf.begin(), leaf.end());
    return sha256(buf);
}

Digest node_hash(const Digest& l, const Digest& r) {
    std::array<std::uint8_t, 65> buf;
    buf[0] = kNodeTag;
    std::memcpy(buf.data() + 1, l.data(), 32);
    std::memcpy(buf.data() + 33, r.data(), 32);
    return sha256(std::span<const std::uint8_t>(buf.data(), buf.size()));
}

} // namespace

MerkleTree merkle_build(const std::vector<Bytes>& leaves) {
    if (leaves.empty())
        throw ParameterError("merkle tree requires at least one leaf");

    std::size_t padded = std::bit_ceil(leaves.size());
    std::vector<Digest> level;
    level.reserve(padded);
    for (const auto& l : leaves)
        level.push_back(leaf_hash(l));
    while (level.size() < padded)
        level.push_back(level.back());

    std::vector<std::vector<Digest>> levels{level};
    while (levels.back().size() > 1) {
        const auto& prev = levels.back();
        std::vector<Digest> next(prev.size() / 2);
        for (std::size_t i = 0; i < next.size(); ++i)
            next[i] = node_hash(prev[2 * i], prev[2 * i + 1]);
        levels.push_back(std::move(next));
    }

    MerkleTree tree;
    tree.root = levels.back()[0];
    tree.proofs.resize(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        MerkleProof p;
        p.leaf_index = static_cast<std::uint32_t>(i);
        std::size_t idx = i;
        for (std::size_t lvl = 0; lvl + 1 < levels.size(); ++lvl) {
            p.branch.push_back(levels[lvl][idx ^ 1]);
            idx >>= 1;
        }
        tree.proofs[i] = std::move(p);
    }
    return tree;
}

bool merkle_verify(const Digest& root, const MerkleProof& proof,
                   std::span<const std::uint8_t> leaf) {
    if (proof.branch.size() > 16) // trees here never exceed 2^16 leaves
        return false;
    if (proof.branch.empty())
        return proof.leaf_index == 0 && leaf_hash(leaf) == root;
    if (proof.leaf_index >> proof.branch.size())
        return false;
    Digest h = leaf_hash(leaf);
    std::uint32_t idx = proof.leaf_index;
    for (const auto& sib : proof.branch) {
        h = (idx & 1) ? node_hash(sib, h) : node_hash(h, sib);
        idx >>= 1;
    }
    return h == root;
}

} // namespace mib::coding
