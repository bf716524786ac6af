#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mib/coding.hpp"

#include <algorithm>
#include <functional>
#include <random>

using namespace mib;
using namespace mib::coding;

namespace {

Bytes random_bytes(std::mt19937_64& rng, std::size_t len) {
    Bytes b(len);
    for (auto& x : b)
        x = static_cast<std::uint8_t>(rng());
    return b;
}

// Enumerates every k-subset of [0, n) and hands it to fn.
void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i)
        idx[i] = i;
    while (true) {
        fn(idx);
        int i = k - 1;
        while (i >= 0 && idx[i] == n - k + i)
            --i;
        if (i < 0)
            break;
        ++idx[i];
        for (int j = i + 1; j < k; ++j)
            idx[j] = idx[j - 1] + 1;
    }
}

} // namespace

TEST_CASE("identity and no-redundancy cases") {
    Bytes m = {'h', 'e', 'l', 'l', 'o'};
    auto one = encode(m, 1, 1);
    REQUIRE(one.size() == 1);
    CHECK(decode(one, 1, 1) == m);

    auto four = encode(m, 4, 4);
    REQUIRE(four.size() == 4);
    std::reverse(four.begin(), four.end());
    CHECK(decode(four, 4, 4) == m);
}

TEST_CASE("mds round-trip over every subset") {
    // Independent oracle for the MDS property: brute-force every
    // k_data-subset at small k_total and require exact recovery.
    std::mt19937_64 rng(0x5eed);
    for (int k_total = 1; k_total <= 10; ++k_total) {
        for (int k_data = 1; k_data <= k_total; ++k_data) {
            Bytes m = random_bytes(rng, 1 + rng() % 200);
            auto blocks = encode(m, k_data, k_total);
            REQUIRE(static_cast<int>(blocks.size()) == k_total);
            for (std::size_t i = 1; i < blocks.size(); ++i)
                CHECK(blocks[i].data.size() == blocks[0].data.size());
            for_each_subset(k_total, k_data, [&](const std::vector<int>& subset) {
                std::vector<CodedBlock> chosen;
                for (int i : subset)
                    chosen.push_back(blocks[i]);
                CHECK(decode(chosen, k_data, k_total) == m);
            });
        }
    }
}

TEST_CASE("spec subset example: (4,8) decoding from {1,3,5,7}") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Bytes m = random_bytes(rng, 1 + rng() % 1000);
        auto blocks = encode(m, 4, 8);
        std::vector<CodedBlock> odd = {blocks[1], blocks[3], blocks[5], blocks[7]};
        CHECK(decode(odd, 4, 8) == m);
    }
}

TEST_CASE("systematic prefix carries the framed message") {
    Bytes m = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    auto blocks = encode(m, 3, 7);
    std::vector<CodedBlock> sys(blocks.begin(), blocks.begin() + 3);
    CHECK(decode(sys, 3, 7) == m);
}

TEST_CASE("large and awkward message sizes") {
    std::mt19937_64 rng(99);
    for (std::size_t len : {std::size_t{1}, std::size_t{250}, std::size_t{4093},
                            std::size_t{64 * 1024}}) {
        Bytes m = random_bytes(rng, len);
        auto blocks = encode(m, 4, 8);
        std::vector<CodedBlock> mixed = {blocks[6], blocks[0], blocks[7], blocks[2]};
        CHECK(decode(mixed, 4, 8) == m);
    }
}

TEST_CASE("reconstruct_all regenerates the exact block set") {
    std::mt19937_64 rng(3);
    Bytes m = random_bytes(rng, 333);
    auto blocks = encode(m, 4, 9);
    std::vector<CodedBlock> some = {blocks[8], blocks[2], blocks[5], blocks[1]};
    auto all = reconstruct_all(some, 4, 9);
    REQUIRE(all.size() == 9);
    for (int i = 0; i < 9; ++i)
        CHECK(all[i] == blocks[i].data);
}

TEST_CASE("parameter and input errors") {
    Bytes m = {1, 2, 3};
    CHECK_THROWS_AS(encode(m, 0, 4), ParameterError);
    CHECK_THROWS_AS(encode(m, 5, 4), ParameterError);
    CHECK_THROWS_AS(encode(Bytes{}, 1, 2), ParameterError);

    auto blocks = encode(m, 3, 5);
    std::vector<CodedBlock> two(blocks.begin(), blocks.begin() + 2);
    CHECK_THROWS_AS(decode(two, 3, 5), InsufficientBlocks);

    // Duplicate indices do not count as distinct.
    std::vector<CodedBlock> dup = {blocks[0], blocks[0], blocks[1]};
    CHECK_THROWS_AS(decode(dup, 3, 5), InsufficientBlocks);

    std::vector<CodedBlock> ragged = {blocks[0], blocks[1], blocks[2]};
    ragged[1].data.push_back(0);
    CHECK_THROWS_AS(decode(ragged, 3, 5), MalformedInput);

    std::vector<CodedBlock> oob = {blocks[0], blocks[1], blocks[2]};
    oob[2].index = 9;
    CHECK_THROWS_AS(decode(oob, 3, 5), MalformedInput);
}

TEST_CASE("encode is deterministic") {
    Bytes m = {9, 8, 7, 6, 5};
    auto a = encode(m, 2, 6);
    auto b = encode(m, 2, 6);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].data == b[i].data);
}

TEST_CASE("merkle degenerate single leaf") {
    std::vector<Bytes> leaves = {{1, 2, 3}};
    auto tree = merkle_build(leaves);
    REQUIRE(tree.proofs.size() == 1);
    CHECK(tree.proofs[0].branch.empty());
    CHECK(merkle_verify(tree.root, tree.proofs[0], leaves[0]));
}

TEST_CASE("merkle proofs verify for every leaf") {
    std::mt19937_64 rng(11);
    for (int count : {1, 2, 3, 4, 5, 7, 8, 13, 16}) {
        std::vector<Bytes> leaves;
        for (int i = 0; i < count; ++i)
            leaves.push_back(random_bytes(rng, 1 + rng() % 64));
        auto tree = merkle_build(leaves);
        std::size_t expect_branch = 0;
        while ((std::size_t{1} << expect_branch) < static_cast<std::size_t>(count))
            ++expect_branch;
        for (int i = 0; i < count; ++i) {
            CHECK(tree.proofs[i].branch.size() == expect_branch);
            CHECK(merkle_verify(tree.root, tree.proofs[i], leaves[i]));
        }
    }
    CHECK_THROWS_AS(merkle_build({}), ParameterError);
}

TEST_CASE("merkle mutation oracle rejects tampering") {
    std::mt19937_64 rng(13);
    std::vector<Bytes> leaves;
    for (int i = 0; i < 6; ++i)
        leaves.push_back(random_bytes(rng, 32));
    auto tree = merkle_build(leaves);

    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const auto& proof = tree.proofs[i];

        // Flip each bit of the leaf.
        for (std::size_t byte = 0; byte < leaves[i].size(); ++byte) {
            for (int bit = 0; bit < 8; ++bit) {
                Bytes tampered = leaves[i];
                tampered[byte] ^= static_cast<std::uint8_t>(1u << bit);
                CHECK_FALSE(merkle_verify(tree.root, proof, tampered));
            }
        }
        // Flip each bit of each branch digest.
        for (std::size_t d = 0; d < proof.branch.size(); ++d) {
            for (std::size_t byte = 0; byte < 32; ++byte) {
                for (int bit = 0; bit < 8; ++bit) {
                    MerkleProof mutated = proof;
                    mutated.branch[d][byte] ^= static_cast<std::uint8_t>(1u << bit);
                    CHECK_FALSE(merkle_verify(tree.root, mutated, leaves[i]));
                }
            }
        }
        // Wrong index, swapped sibling order, wrong leaf.
        MerkleProof wrong_index = proof;
        wrong_index.leaf_index ^= 1;
        CHECK_FALSE(merkle_verify(tree.root, wrong_index, leaves[i]));
        if (proof.branch.size() >= 2) {
            MerkleProof swapped = proof;
            std::swap(swapped.branch[0], swapped.branch[1]);
            CHECK_FALSE(merkle_verify(tree.root, swapped, leaves[i]));
        }
        CHECK_FALSE(merkle_verify(tree.root, proof, leaves[(i + 1) % leaves.size()]));
    }
}

TEST_CASE("merkle build is deterministic") {
    std::vector<Bytes> leaves = {{1}, {2}, {3}};
    CHECK(merkle_build(leaves).root == merkle_build(leaves).root);
}
