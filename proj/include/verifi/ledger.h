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

// Hash-chained, quorum-signed ledger of certificate anchor transactions.
//
// Chain file <dir>/chain.log is a sequence of frames be32(len) || block, where
//
//   block   := header || txs || seal
//   header  := 0x01 || be64(height) || prev_hash || merkle_root
//              || be64(timestamp) || proposer_pubkey            (113 bytes)
//   txs     := be32(n) || { tx_hash || be32(len) || canonical_tx }*
//   seal    := header_hash || be32(m) || { validator_pubkey || signature }*
//
// block hash = SHA-256(header). Validators sign the block hash.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "verifi/bytes.h"
#include "verifi/crypto.h"

namespace verifi::ledger {

inline constexpr std::size_t kDefaultBlockCapacity = 100;
inline constexpr uint64_t kBaseFee = 21000;
inline constexpr uint64_t kFeePerByte = 16;
inline constexpr uint64_t kInitialIssuerBalance = 10'000'000;
inline constexpr std::size_t kHeaderSize = 113;

// fee_units = 21000 + 16 * len(encrypted_cid_body)
uint64_t anchor_fee(std::size_t encrypted_body_len);

// ---------------------------------------------------------------------------
// Transactions
// ---------------------------------------------------------------------------

struct AnchorTx {
  std::string applicant_id;
  std::string certificate_id;
  crypto::Nonce encrypted_cid_nonce{};
  Bytes encrypted_cid_body;
  crypto::PublicKey issuer_pubkey{};
  uint64_t fee_units = 0;
  uint64_t timestamp = 0;
  crypto::Signature issuer_signature{};

  // Sorted-key JSON without whitespace; the signing form omits
  // issuer_signature. Throws InvalidArgument for empty ids, an empty body or
  // ids that are not valid UTF-8.
  Bytes signing_bytes() const;
  Bytes canonical_bytes() const;
  Digest32 tx_hash() const;

  void sign(const crypto::KeyPair& issuer);
  bool signature_valid() const;

  // Parses canonical bytes; throws Malformed unless the input is exactly what
  // canonical_bytes() would produce.
  static AnchorTx parse(ByteView canonical);

  friend bool operator==(const AnchorTx&, const AnchorTx&) = default;
};

// ---------------------------------------------------------------------------
// Merkle tree over transaction hashes
// ---------------------------------------------------------------------------
//
// leaf = H(0x00 || tx_hash), node = H(0x01 || left || right), an odd level
// duplicates its last element, the empty list maps to 32 zero bytes.

Digest32 merkle_leaf(const Digest32& tx_hash);
Digest32 merkle_node(const Digest32& left, const Digest32& right);
Digest32 merkle_root(std::span<const Digest32> tx_hashes);

enum class Side { Left, Right };  // where the sibling sits

struct ProofStep {
  Digest32 sibling{};
  Side side = Side::Right;
};

struct InclusionProof {
  std::vector<ProofStep> path;
};

// Throws UnknownTx if index is out of range.
InclusionProof merkle_proof(std::span<const Digest32> tx_hashes, std::size_t index);
bool verify_inclusion(const Digest32& tx_hash, const InclusionProof& proof,
                      const Digest32& merkle_root);

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

struct BlockHeader {
  uint8_t version = 1;
  uint64_t height = 0;
  Digest32 prev_hash{};
  Digest32 merkle_root{};
  uint64_t timestamp = 0;
  crypto::PublicKey proposer_pubkey{};

  Bytes bytes() const;
  Digest32 hash() const;
  static BlockHeader parse(ByteView bytes);  // exactly 113 bytes

  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

struct ValidatorSignature {
  crypto::PublicKey validator{};
  crypto::Signature signature{};

  friend bool operator==(const ValidatorSignature&, const ValidatorSignature&) = default;
};

struct Block {
  BlockHeader header;
  std::vector<AnchorTx> txs;
  std::vector<ValidatorSignature> signatures;

  Digest32 hash() const { return header.hash(); }
  std::vector<Digest32> tx_hashes() const;

  Bytes encode() const;
  // Throws Malformed on any structural problem or stored hash that does not
  // match its content.
  static Block decode(ByteView bytes);
};

// Height 0, zero prev_hash, no transactions, timestamp 0, zero proposer key,
// no signatures.
Block genesis_block();

// ---------------------------------------------------------------------------
// Validators and quorum
// ---------------------------------------------------------------------------

struct ValidatorSet {
  std::vector<crypto::PublicKey> validators;
  std::size_t quorum = 2;

  // Throws InvalidArgument unless 1 <= quorum <= n and keys are distinct.
  void validate() const;
  bool contains(const crypto::PublicKey& key) const;
};

// Parses "<k>of<n>", e.g. "2of3".
std::pair<std::size_t, std::size_t> parse_quorum_spec(std::string_view text);

// True iff the signatures come from >= quorum distinct members of the set
// and every one of them verifies against the header hash.
bool quorum_valid(const BlockHeader& header,
                  std::span<const ValidatorSignature> signatures,
                  const ValidatorSet& set);

// ---------------------------------------------------------------------------
// Tamper scan
// ---------------------------------------------------------------------------

enum class ViolationKind {
  HeaderHashMismatch,
  PrevLinkBroken,
  MerkleMismatch,
  TxHashMismatch,
  QuorumInvalid,
  RecordMalformed,  // framing or block structure cannot be parsed
};

std::string_view violation_name(ViolationKind kind);

struct Violation {
  uint64_t height = 0;
  ViolationKind kind = ViolationKind::RecordMalformed;
  std::string detail;
};

struct TamperReport {
  std::optional<Violation> violation;  // lowest-height violation, if any
  uint64_t blocks_scanned = 0;

  bool clean() const { return !violation.has_value(); }
};

// Recomputes every tx hash, merkle root, header hash, prev link and quorum
// from raw chain bytes and reports the lowest-height violation.
TamperReport scan_chain_bytes(ByteView chain, const ValidatorSet& validators);
TamperReport scan_chain_file(const std::filesystem::path& chain_file,
                             const ValidatorSet& validators);

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

struct TxReceipt {
  Digest32 tx_hash{};
};

struct TxLocation {
  uint64_t height = 0;
  std::size_t index = 0;
};

// Keys for the in-process simulation: one proposing authority plus the
// validators' signing keys (same order as the ValidatorSet).
struct LedgerKeys {
  crypto::KeyPair proposer;
  std::vector<crypto::KeyPair> validators;
};

struct LedgerOptions {
  std::size_t block_capacity = kDefaultBlockCapacity;
  bool fsync_on_commit = true;
  std::function<uint64_t()> clock;  // unix seconds; system clock if empty
};

class Ledger {
 public:
  static std::filesystem::path chain_path(const std::filesystem::path& dir) {
    return dir / "chain.log";
  }

  // Writes a chain holding only the genesis block. Throws AlreadyInitialized
  // if a chain already exists.
  static void create(const std::filesystem::path& dir);

  Ledger(std::filesystem::path dir, ValidatorSet validators, LedgerKeys keys,
         LedgerOptions options = {});
  ~Ledger();
  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  // Fee accounts. Seeds are persisted; debits are derived from the chain.
  void seed_account(const crypto::PublicKey& owner, uint64_t units);
  uint64_t balance(const crypto::PublicKey& owner) const;
  uint64_t total_debited() const;

  // Admits a tx into the pending pool. Errors, in order of precedence:
  // FeeNotApproved, InvalidArgument (fee does not follow the fee formula),
  // BadSignature, DuplicateTx, InsufficientBalance.
  TxReceipt submit_tx(const AnchorTx& tx, bool fee_approved);
  void drop_pending(const Digest32& tx_hash);
  std::size_t pending_count() const;

  // Up to block_capacity pending txs in FIFO order on top of the tip.
  // Throws EmptyPool.
  Block propose_block() const;
  // Every simulated validator re-validates the block; any refusal throws
  // QuorumNotReached. Attaches a quorum of signatures.
  void collect_signatures(Block& block) const;
  // Final admission check (links, merkle root, quorum) and durable append.
  // Throws QuorumNotReached for insufficient signatures, InvalidArgument
  // for any other inconsistency.
  void append_block(const Block& block);
  Block propose_and_commit_block();

  uint64_t tip_height() const;
  Digest32 tip_hash() const;
  std::size_t block_count() const { return tip_height() + 1; }

  // Reads from the chain file; throws Malformed if the stored frame no longer
  // decodes, NotFound for heights beyond the tip.
  Block block_at(uint64_t height) const;
  std::optional<TxLocation> find_tx(const Digest32& tx_hash) const;
  // Throws UnknownTx if tx_hash is not included at that height.
  InclusionProof inclusion_proof(const Digest32& tx_hash, uint64_t height) const;

  TamperReport scan_chain() const;
  void set_tamper_listener(std::function<void(const Violation&)> listener);

  const ValidatorSet& validators() const { return validators_; }
  const crypto::PublicKey& authority() const { return keys_.proposer.public_key; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  struct Pending {
    AnchorTx tx;
    Digest32 hash;
  };

  uint64_t now() const;
  // Reason the given validator would refuse, empty if it approves.
  std::optional<std::string> validator_objection(const Block& block) const;
  void load();
  uint64_t reserved_for(const crypto::PublicKey& owner) const;
  void index_block(const Block& block, uint64_t offset);

  std::filesystem::path dir_;
  ValidatorSet validators_;
  LedgerKeys keys_;
  LedgerOptions options_;

  mutable std::shared_mutex mutex_;
  int chain_fd_ = -1;
  uint64_t chain_size_ = 0;
  std::vector<uint64_t> offsets_;
  std::vector<BlockHeader> headers_;
  std::unordered_map<std::string, TxLocation> tx_index_;  // key: raw hash bytes
  std::map<crypto::PublicKey, uint64_t> seeded_;
  std::map<crypto::PublicKey, uint64_t> debited_;
  uint64_t total_debited_ = 0;
  std::vector<Pending> pending_;
  std::function<void(const Violation&)> tamper_listener_;
};

}  // namespace verifi::ledger
