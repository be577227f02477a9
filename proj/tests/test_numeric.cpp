#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dvote/fixed.hpp"
#include "dvote/merkle.hpp"
#include "dvote/rng.hpp"
#include "dvote/sha256.hpp"
#include "dvote/tensor.hpp"

using namespace dvote;

TEST_CASE("sha256 matches FIPS vectors") {
    CHECK(to_hex(sha256(std::string(""))) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(to_hex(sha256(std::string("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(to_hex(sha256(std::string(
              "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    // Multi-block input through the incremental interface.
    Sha256 h;
    std::string million(1000, 'a');
    for (int i = 0; i < 1000; ++i)
        h.update(reinterpret_cast<const uint8_t*>(million.data()), million.size());
    CHECK(to_hex(h.finish()) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("hex round trip") {
    Digest d = sha256(std::string("x"));
    CHECK(digest_from_hex(to_hex(d)) == d);
    CHECK_THROWS(digest_from_hex("zz"));
}

TEST_CASE("fixed point add/sub are exact and saturate") {
    bool ovf = false;
    FixedPoint a = FixedPoint::from_int(3);
    FixedPoint b = FixedPoint::from_int(4);
    CHECK(fp_add(a, b, ovf).raw == 7 << 16);
    CHECK(fp_sub(a, b, ovf).raw == -(1 << 16));
    CHECK_FALSE(ovf);

    FixedPoint big = FixedPoint::from_raw(kFixedMax);
    CHECK(fp_add(big, FixedPoint::one(), ovf).raw == kFixedMax);
    CHECK(ovf);
    ovf = false;
    FixedPoint small = FixedPoint::from_raw(kFixedMin);
    CHECK(fp_sub(small, FixedPoint::one(), ovf).raw == kFixedMin);
    CHECK(ovf);
}

TEST_CASE("fixed point mul truncates toward negative infinity") {
    bool ovf = false;
    // 1.5 * 2.25 = 3.375 exactly representable
    FixedPoint r = fp_mul(FixedPoint::from_raw(3 << 15), FixedPoint::from_raw(9 << 14), ovf);
    CHECK(r.raw == (3375LL << 16) / 1000);

    // Smallest positive times smallest positive: 2^-32 truncates to 0.
    CHECK(fp_mul(FixedPoint::from_raw(1), FixedPoint::from_raw(1), ovf).raw == 0);
    // Negative products truncate DOWN: -2^-32 -> -1 raw, not 0.
    CHECK(fp_mul(FixedPoint::from_raw(-1), FixedPoint::from_raw(1), ovf).raw == -1);
    CHECK_FALSE(ovf);

    CHECK(fp_mul(FixedPoint::from_raw(kFixedMax), FixedPoint::from_int(2), ovf).raw == kFixedMax);
    CHECK(ovf);
}

TEST_CASE("mul truncation against wide-integer reference") {
    Rng rng(7);
    bool ovf = false;
    for (int i = 0; i < 2000; ++i) {
        int64_t ar = static_cast<int64_t>(rng.next() % (1ULL << 40)) - (1LL << 39);
        int64_t br = static_cast<int64_t>(rng.next() % (1ULL << 40)) - (1LL << 39);
        FixedPoint r = fp_mul(FixedPoint::from_raw(ar), FixedPoint::from_raw(br), ovf);
        __int128 want = (static_cast<__int128>(ar) * br) >> 16;
        CHECK(r.raw == static_cast<int64_t>(want));
    }
    CHECK_FALSE(ovf);
}

TEST_CASE("sigmoid table midpoint and clamping") {
    CHECK(fp_sigmoid(FixedPoint::zero()).raw == 32768);  // exactly 0.5
    CHECK(fp_sigmoid(FixedPoint::from_int(-100)) == fp_sigmoid(FixedPoint::from_int(-8)));
    CHECK(fp_sigmoid(FixedPoint::from_int(100)) == fp_sigmoid(FixedPoint::from_raw((8 << 16) - 1)));
    // Monotone over the table range.
    FixedPoint prev = fp_sigmoid(FixedPoint::from_int(-8));
    for (int i = -7; i <= 7; ++i) {
        FixedPoint cur = fp_sigmoid(FixedPoint::from_int(i));
        CHECK(cur.raw >= prev.raw);
        prev = cur;
    }
}

TEST_CASE("fixed point decimal strings") {
    CHECK(fp_to_string(FixedPoint::from_int(3)) == "3");
    CHECK(fp_to_string(FixedPoint::from_raw(-(3 << 15))) == "-1.5");
    CHECK(fp_to_string(FixedPoint::from_raw(1)) == "0.0000152587890625");
    CHECK(fp_from_string("1.5").raw == 3 << 15);
    CHECK(fp_from_string("-0.125").raw == -(1 << 13));
    CHECK(fp_from_string("2").raw == 2 << 16);
    CHECK_THROWS(fp_from_string("abc"));
    // Round trip over random raws.
    Rng rng(11);
    for (int i = 0; i < 500; ++i) {
        int64_t raw = static_cast<int64_t>(rng.next() % (1ULL << 34)) - (1LL << 33);
        CHECK(fp_from_string(fp_to_string(FixedPoint::from_raw(raw))).raw == raw);
    }
}

TEST_CASE("tensor canonical serialization") {
    FixedTensor t({2, 2}, {FixedPoint::from_int(1), FixedPoint::from_int(2),
                           FixedPoint::from_int(3), FixedPoint::from_int(4)});
    std::vector<uint8_t> bytes = t.serialize();
    CHECK(bytes.size() == 2 * 4 + 4 * 8);
    // shape little-endian first
    CHECK(bytes[0] == 2);
    CHECK(bytes[4] == 2);
    // then raw values little-endian: 1<<16 = 0x00010000
    CHECK(bytes[8] == 0);
    CHECK(bytes[10] == 1);

    FixedTensor s = FixedTensor::scalar(FixedPoint::one());
    CHECK(s.shape().empty());
    CHECK(s.size() == 1);
    CHECK(s.serialize().size() == 8);

    CHECK_THROWS(FixedTensor({2, 3}, {FixedPoint::zero()}));
}

TEST_CASE("merkle tree basics") {
    // Single leaf: height 0, root == leaf, empty proof.
    Digest leaf = sha256(std::string("leaf"));
    MerkleTree one({leaf});
    CHECK(one.height() == 0);
    CHECK(one.root() == leaf);
    CHECK(one.prove(0).empty());
    CHECK(merkle_verify(leaf, 0, {}, one.root()));

    // Eight leaves: height 3 proofs.
    std::vector<Digest> leaves;
    for (int i = 0; i < 8; ++i) leaves.push_back(sha256(std::string(1, char('a' + i))));
    MerkleTree t8(leaves);
    CHECK(t8.height() == 3);
    for (size_t i = 0; i < 8; ++i) {
        auto proof = t8.prove(i);
        CHECK(proof.size() == 3);
        CHECK(merkle_verify(leaves[i], i, proof, t8.root()));
        // Any flipped byte in the proof must fail.
        auto bad = proof;
        bad[1][5] ^= 0x40;
        CHECK_FALSE(merkle_verify(leaves[i], i, bad, t8.root()));
    }

    // Non-power-of-two padding with the all-zero leaf.
    MerkleTree t5(std::vector<Digest>(leaves.begin(), leaves.begin() + 5));
    CHECK(t5.height() == 3);
    CHECK(t5.root() != t8.root());
}

TEST_CASE("merkle update matches rebuild") {
    Rng rng(3);
    std::vector<Digest> leaves;
    for (int i = 0; i < 11; ++i) leaves.push_back(sha256(std::to_string(rng.next())));
    MerkleTree t(leaves);
    for (int round = 0; round < 50; ++round) {
        size_t i = rng.below(leaves.size());
        leaves[i] = sha256(std::to_string(rng.next()));
        t.update_leaf(i, leaves[i]);
        CHECK(t.root() == MerkleTree(leaves).root());
    }
}

TEST_CASE("seed derivation separates streams") {
    CHECK(derive_seed("a", 1) != derive_seed("b", 1));
    CHECK(derive_seed("a", 1) != derive_seed("a", 2));
    CHECK(derive_seed("a", 1) == derive_seed("a", 1));
    Rng r1(derive_seed("x", 9));
    Rng r2(derive_seed("x", 9));
    for (int i = 0; i < 10; ++i) CHECK(r1.next() == r2.next());
}
