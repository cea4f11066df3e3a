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

#pragma once

// Builds ledger fixtures without going through the commit pipeline, so large
// chains for scan tests are cheap to produce.

#include <random>
#include <vector>

#include "verifi/crypto.h"
#include "verifi/ledger.h"

namespace verifi::testing {

inline crypto::KeyPair seeded_key(uint8_t tag) {
  crypto::SecretSeed seed{};
  seed.fill(tag);
  return crypto::keypair_from_seed(seed);
}

struct ValidatorFixture {
  std::vector<crypto::KeyPair> keys;
  ledger::ValidatorSet set;
  crypto::KeyPair proposer;

  explicit ValidatorFixture(std::size_t n = 3, std::size_t quorum = 2) {
    for (std::size_t i = 0; i < n; ++i) {
      keys.push_back(seeded_key(static_cast<uint8_t>(0x40 + i)));
      set.validators.push_back(keys.back().public_key);
    }
    set.quorum = quorum;
    proposer = seeded_key(0x30);
  }

  ledger::LedgerKeys ledger_keys() const { return {proposer, keys}; }
};

inline ledger::AnchorTx make_tx(std::mt19937_64& rng, const crypto::KeyPair& issuer,
                                uint64_t serial) {
  ledger::AnchorTx tx;
  tx.applicant_id = "applicant-" + std::to_string(rng() % 1000);
  tx.certificate_id = "cert-" + std::to_string(serial);
  for (auto& b : tx.encrypted_cid_nonce) b = static_cast<uint8_t>(rng());
  tx.encrypted_cid_body.resize(52);
  for (auto& b : tx.encrypted_cid_body) b = static_cast<uint8_t>(rng());
  tx.fee_units = ledger::anchor_fee(tx.encrypted_cid_body.size());
  tx.timestamp = 1'700'000'000 + serial;
  tx.sign(issuer);
  return tx;
}

// Signs the block with the first `signers` validators.
inline void seal_block(ledger::Block& block, const ValidatorFixture& v,
                       std::size_t signers) {
  block.signatures.clear();
  const Digest32 hash = block.hash();
  for (std::size_t i = 0; i < signers; ++i) {
    block.signatures.push_back({v.keys[i].public_key, crypto::sign(v.keys[i], hash)});
  }
}

struct BuiltChain {
  Bytes bytes;
  std::vector<std::size_t> frame_offsets;  // by height
};

// Honest chain: genesis plus `blocks` blocks of `txs_per_block` transactions,
// each block signed by a quorum.
inline BuiltChain build_chain(const ValidatorFixture& v, std::size_t blocks,
                              std::size_t txs_per_block, uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  const crypto::KeyPair issuer = seeded_key(0x20);
  BuiltChain out;
  auto push = [&](const ledger::Block& b) {
    out.frame_offsets.push_back(out.bytes.size());
    Bytes body = b.encode();
    append_be32(out.bytes, static_cast<uint32_t>(body.size()));
    append(out.bytes, body);
  };
  ledger::Block prev = ledger::genesis_block();
  push(prev);
  uint64_t serial = 0;
  for (std::size_t h = 1; h <= blocks; ++h) {
    ledger::Block b;
    for (std::size_t i = 0; i < txs_per_block; ++i) {
      b.txs.push_back(make_tx(rng, issuer, serial++));
    }
    b.header.height = h;
    b.header.prev_hash = prev.hash();
    b.header.merkle_root = ledger::merkle_root(b.tx_hashes());
    b.header.timestamp = 1'700'000'000 + h;
    b.header.proposer_pubkey = v.proposer.public_key;
    seal_block(b, v, v.set.quorum);
    push(b);
    prev = std::move(b);
  }
  return out;
}

// Height of the block whose frame contains byte `offset`.
inline uint64_t height_of_offset(const BuiltChain& c, std::size_t offset) {
  auto it = std::upper_bound(c.frame_offsets.begin(), c.frame_offsets.end(), offset);
  return static_cast<uint64_t>(it - c.frame_offsets.begin()) - 1;
}

}  // namespace verifi::testing
