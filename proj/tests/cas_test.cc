// Copyright 2026 The Verifi Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "verifi/cas.h"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "support/oracles.h"
#include "support/test_util.h"

namespace verifi::cas {
namespace {

using verifi::testing::random_payload;
using verifi::testing::TempDir;

using verifi::testing::cas_oracle_root;

Bytes read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, const Bytes& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

TEST(ChunkBytes, Boundaries) {
  EXPECT_EQ(chunk_bytes({}).size(), 1u);
  EXPECT_TRUE(chunk_bytes({}).front().payload.empty());

  Bytes exact(262144, 7);
  auto one = chunk_bytes(exact);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].payload.size(), 262144u);

  Bytes plus_one(262145, 7);
  auto two = chunk_bytes(plus_one);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].payload.size(), 262144u);
  EXPECT_EQ(two[1].payload.size(), 1u);
}

TEST(ChunkBytes, ConcatenationAndZeroChunkSize) {
  std::mt19937_64 rng(1);
  Bytes data = random_payload(rng, 1000);
  auto leaves = chunk_bytes(data, 64);
  Bytes joined;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (i + 1 < leaves.size()) EXPECT_EQ(leaves[i].payload.size(), 64u);
    append(joined, leaves[i].payload);
  }
  EXPECT_EQ(joined, data);
  EXPECT_THROW(chunk_bytes(data, 0), Error);
}

TEST(EncodeNode, LeafLayout) {
  EXPECT_EQ(hex_encode(encode_node(LeafNode{to_bytes("abc")})), "0000000003616263");
  EXPECT_EQ(hex_encode(encode_node(LeafNode{})), "0000000000");
}

TEST(EncodeNode, InternalLayout) {
  Digest32 d1{}, d2{};
  d1.fill(0x11);
  d2.fill(0x22);
  InternalNode node{{{Cid(d1), 5}, {Cid(d2), 7}}};
  Bytes enc = encode_node(node);
  ASSERT_EQ(enc.size(), 85u);
  EXPECT_EQ(hex_encode(enc),
            "0100000002" + hex_encode(d1) + "0000000000000005" + hex_encode(d2) +
                "0000000000000007");
  EXPECT_EQ(node.subtree_size(), 12u);
}

TEST(EncodeNode, RejectsInvalidNodes) {
  Digest32 d{};
  InternalNode one{{{Cid(d), 1}}};
  EXPECT_THROW(encode_node(one), Error);
  InternalNode many;
  many.children.assign(33, {Cid(d), 1});
  EXPECT_THROW(encode_node(many), Error);
  EXPECT_THROW(encode_node(LeafNode{Bytes(262145)}), Error);
  many.children.resize(32);
  EXPECT_NO_THROW(encode_node(many));
}

TEST(EncodeNode, DecodeInvertsEncode) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    DagNode node;
    if (i % 2 == 0) {
      node = LeafNode{random_payload(rng, rng() % 600)};
    } else {
      InternalNode in;
      for (std::size_t k = 0, n = 2 + rng() % 31; k < n; ++k) {
        Digest32 d{};
        for (auto& b : d) b = static_cast<uint8_t>(rng());
        in.children.push_back({Cid(d), rng()});
      }
      node = in;
    }
    Bytes enc = encode_node(node);
    ASSERT_EQ(encode_node(decode_node(enc)), enc);
  }
  EXPECT_THROW(decode_node(to_bytes("\x02\0\0\0\0")), Error);
  EXPECT_THROW(decode_node(hex_decode("0000000004616263")), Error);
}

TEST(CidOf, FrozenDigests) {
  // Computed with Python hashlib over the literal encodings.
  EXPECT_EQ(cid_of(LeafNode{}).hex(),
            "8855508aade16ec573d21e6a485dfd0a7624085c1a14b5ecdd6485de0c6839a4");
  EXPECT_EQ(cid_of(LeafNode{to_bytes("abc")}).hex(),
            "063b1397a169a2f0e939bdad11ac2df004eda61bbcf96888f4fbe19643020e83");
  EXPECT_EQ(cid_of(LeafNode{to_bytes("abc")}), cid_of(LeafNode{to_bytes("abc")}));
  EXPECT_EQ(cid_of(LeafNode{}).to_string(),
            "vc1:8855508aade16ec573d21e6a485dfd0a7624085c1a14b5ecdd6485de0c6839a4");
}

TEST(CidText, ParseRequiresPrefixAndLowercase) {
  Cid c = cid_of(LeafNode{});
  EXPECT_EQ(Cid::parse(c.to_string()), c);
  EXPECT_THROW(Cid::parse(c.hex()), Error);
  std::string upper = c.to_string();
  upper[5] = 'A';
  EXPECT_THROW(Cid::parse(upper), Error);
}

class ObjectStoreTest : public ::testing::Test {
 protected:
  TempDir dir;
  ObjectStore store{dir / "cas"};
  std::mt19937_64 rng{42};
};

TEST_F(ObjectStoreTest, PutIsDeterministicAndDeduplicates) {
  Bytes data = random_payload(rng, 700000);
  Cid a = store.put(data);
  std::size_t count = store.object_count();
  Cid b = store.put(data);
  EXPECT_EQ(a, b);
  EXPECT_EQ(store.object_count(), count);

  ObjectStore reopened(dir / "cas");
  EXPECT_EQ(reopened.put(data), a);
  TempDir other;
  ObjectStore elsewhere(other / "cas");
  EXPECT_EQ(elsewhere.put(data), a);
}

TEST_F(ObjectStoreTest, SingleChunkHasNoWrapper) {
  Bytes data = to_bytes("abc");
  EXPECT_EQ(store.put(data), cid_of(LeafNode{data}));
  EXPECT_EQ(store.object_count(), 1u);
}

TEST_F(ObjectStoreTest, OneMebibyteHasFourChildren) {
  Bytes data = random_payload(rng, 1 << 20);
  Cid root = store.put(data);
  DagNode node = decode_node(read_file(store.object_path(root)));
  ASSERT_TRUE(std::holds_alternative<InternalNode>(node));
  EXPECT_EQ(std::get<InternalNode>(node).children.size(), 4u);
  EXPECT_EQ(root.digest(), cas_oracle_root(data));
}

TEST_F(ObjectStoreTest, TenMebibytesIsTwoLevels) {
  Bytes data = random_payload(rng, 10 << 20);
  Cid root = store.put(data);
  EXPECT_EQ(root.digest(), cas_oracle_root(data));
  auto top = std::get<InternalNode>(decode_node(read_file(store.object_path(root))));
  ASSERT_EQ(top.children.size(), 2u);
  auto left = std::get<InternalNode>(
      decode_node(read_file(store.object_path(top.children[0].cid))));
  auto right = std::get<InternalNode>(
      decode_node(read_file(store.object_path(top.children[1].cid))));
  EXPECT_EQ(left.children.size(), 32u);
  EXPECT_EQ(right.children.size(), 8u);
  EXPECT_EQ(top.children[0].subtree_size, 32u * 262144u);
  EXPECT_EQ(top.children[1].subtree_size, 8u * 262144u);
  EXPECT_EQ(store.get(root), data);
}

TEST_F(ObjectStoreTest, LoneTrailingChunkMovesUp) {
  Bytes data = random_payload(rng, 32 * 262144 + 10);
  Cid root = store.put(data);
  EXPECT_EQ(root.digest(), cas_oracle_root(data));
  auto top = std::get<InternalNode>(decode_node(read_file(store.object_path(root))));
  ASSERT_EQ(top.children.size(), 2u);
  EXPECT_EQ(top.children[1].subtree_size, 10u);
  EXPECT_TRUE(std::holds_alternative<LeafNode>(
      decode_node(read_file(store.object_path(top.children[1].cid)))));
  EXPECT_EQ(store.get(root), data);
}

TEST_F(ObjectStoreTest, RoundTripBoundaryCorpus) {
  for (std::size_t n : {0u, 1u, 262143u, 262144u, 262145u, 4u << 20}) {
    Bytes data = random_payload(rng, n);
    ASSERT_EQ(store.get(store.put(data)), data) << n;
  }
}

TEST_F(ObjectStoreTest, SingleBitFlipChangesRoot) {
  Bytes data = random_payload(rng, 600000);
  Cid root = store.put(data);
  for (int i = 0; i < 100; ++i) {
    Bytes mutated = data;
    std::size_t bit = rng() % (data.size() * 8);
    mutated[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
    ASSERT_NE(Cid(cas_oracle_root(mutated)), root);
  }
}

TEST_F(ObjectStoreTest, CorruptionIsLocalizedToTheMutatedObject) {
  Bytes data = random_payload(rng, 3 * 262144 + 5);
  Cid root = store.put(data);
  auto top = std::get<InternalNode>(decode_node(read_file(store.object_path(root))));
  Cid victim = top.children[2].cid;
  Bytes bytes = read_file(store.object_path(victim));
  bytes[100] ^= 0x04;
  write_file(store.object_path(victim), bytes);

  try {
    store.get(root);
    FAIL() << "corruption not detected";
  } catch (const CorruptObjectError& e) {
    EXPECT_EQ(e.cid(), victim);
    EXPECT_EQ(e.code(), Errc::CorruptObject);
  }
  IntegrityReport report = store.verify();
  ASSERT_EQ(report.corrupt.size(), 1u);
  EXPECT_EQ(report.corrupt[0], victim);
  EXPECT_TRUE(report.missing.empty());
}

TEST_F(ObjectStoreTest, UnknownCidIsNotFound) {
  try {
    store.get(cid_of(LeafNode{to_bytes("never stored")}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotFound);
  }
}

TEST_F(ObjectStoreTest, VerifyReportsMissingChildren) {
  for (int i = 0; i < 5; ++i) store.put(random_payload(rng, 1000 * i));
  Bytes data = random_payload(rng, 2 * 262144);
  Cid root = store.put(data);
  EXPECT_TRUE(store.verify().clean());

  auto top = std::get<InternalNode>(decode_node(read_file(store.object_path(root))));
  std::filesystem::remove(store.object_path(top.children[0].cid));
  IntegrityReport report = store.verify();
  EXPECT_TRUE(report.corrupt.empty());
  ASSERT_EQ(report.missing.size(), 1u);
  EXPECT_EQ(report.missing[0], top.children[0].cid);
  EXPECT_THROW(store.get(root), MissingObjectError);
}

TEST_F(ObjectStoreTest, StoredFilesMatchTheirNames) {
  for (int i = 0; i < 10; ++i) store.put(random_payload(rng, rng() % 600000));
  for (const Cid& cid : store.list()) {
    Bytes bytes = read_file(store.object_path(cid));
    EXPECT_EQ(verifi::testing::raw_sha(bytes), cid.digest());
    EXPECT_EQ(store.object_path(cid).parent_path().filename(), cid.hex().substr(2, 2));
  }
}

}  // namespace
}  // namespace verifi::cas
