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

#include "verifi/ledger.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <mutex>

#include "verifi/ed25519_batch.h"

namespace verifi::ledger {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t anchor_fee(std::size_t encrypted_body_len) {
  return kBaseFee + kFeePerByte * encrypted_body_len;
}

// ---------------------------------------------------------------------------
// AnchorTx
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kTxType = "anchor";

json tx_object(const AnchorTx& tx, bool with_signature) {
  if (tx.applicant_id.empty() || tx.certificate_id.empty()) {
    throw Error(Errc::InvalidArgument, "anchor tx ids must be non-empty");
  }
  if (tx.encrypted_cid_body.empty()) {
    throw Error(Errc::InvalidArgument, "anchor tx needs an encrypted cid");
  }
  json j = {{"applicant_id", tx.applicant_id},
            {"certificate_id", tx.certificate_id},
            {"encrypted_cid_body", hex_encode(tx.encrypted_cid_body)},
            {"encrypted_cid_nonce", hex_encode(tx.encrypted_cid_nonce)},
            {"fee_units", tx.fee_units},
            {"issuer_pubkey", hex_encode(tx.issuer_pubkey)},
            {"timestamp", tx.timestamp},
            {"tx_type", kTxType}};
  if (with_signature) j["issuer_signature"] = hex_encode(tx.issuer_signature);
  return j;
}

Bytes dump_bytes(const json& j) {
  try {
    return to_bytes(j.dump());
  } catch (const json::type_error&) {
    throw Error(Errc::InvalidArgument, "anchor tx text is not valid UTF-8");
  }
}

}  // namespace

Bytes AnchorTx::signing_bytes() const { return dump_bytes(tx_object(*this, false)); }

Bytes AnchorTx::canonical_bytes() const { return dump_bytes(tx_object(*this, true)); }

Digest32 AnchorTx::tx_hash() const { return crypto::sha256(canonical_bytes()); }

void AnchorTx::sign(const crypto::KeyPair& issuer) {
  issuer_pubkey = issuer.public_key;
  issuer_signature = crypto::sign(issuer, signing_bytes());
}

bool AnchorTx::signature_valid() const {
  return crypto::verify_sig(issuer_pubkey, signing_bytes(), issuer_signature);
}

AnchorTx AnchorTx::parse(ByteView canonical) {
  AnchorTx tx;
  try {
    json j = json::parse(canonical.begin(), canonical.end());
    if (!j.is_object() || j.size() != 9 || j.at("tx_type") != kTxType) {
      throw Error(Errc::Malformed, "not an anchor tx");
    }
    tx.applicant_id = j.at("applicant_id").get<std::string>();
    tx.certificate_id = j.at("certificate_id").get<std::string>();
    tx.encrypted_cid_body = hex_decode(j.at("encrypted_cid_body").get<std::string>());
    tx.encrypted_cid_nonce =
        hex_decode_fixed<12>(j.at("encrypted_cid_nonce").get<std::string>());
    tx.fee_units = j.at("fee_units").get<uint64_t>();
    tx.issuer_pubkey = hex_decode_fixed<32>(j.at("issuer_pubkey").get<std::string>());
    tx.timestamp = j.at("timestamp").get<uint64_t>();
    tx.issuer_signature =
        hex_decode_fixed<64>(j.at("issuer_signature").get<std::string>());
    if (tx.canonical_bytes() != Bytes(canonical.begin(), canonical.end())) {
      throw Error(Errc::Malformed, "anchor tx is not in canonical form");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::Malformed, std::string("anchor tx: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::Malformed) throw;
    throw Error(Errc::Malformed, std::string("anchor tx: ") + e.what());
  }
  return tx;
}

// ---------------------------------------------------------------------------
// Merkle
// ---------------------------------------------------------------------------

Digest32 merkle_leaf(const Digest32& tx_hash) {
  thread_local crypto::Sha256 h;
  return h.update(uint8_t{0x00}).update(tx_hash).finish();
}

Digest32 merkle_node(const Digest32& left, const Digest32& right) {
  thread_local crypto::Sha256 h;
  return h.update(uint8_t{0x01}).update(left).update(right).finish();
}

Digest32 merkle_root(std::span<const Digest32> tx_hashes) {
  if (tx_hashes.empty()) return Digest32{};
  std::vector<Digest32> level;
  level.reserve(tx_hashes.size() + 1);
  for (const auto& h : tx_hashes) level.push_back(merkle_leaf(h));
  while (level.size() > 1) {
    if (level.size() % 2 == 1) level.push_back(level.back());
    for (std::size_t i = 0; i < level.size() / 2; ++i) {
      level[i] = merkle_node(level[2 * i], level[2 * i + 1]);
    }
    level.resize(level.size() / 2);
  }
  return level.front();
}

InclusionProof merkle_proof(std::span<const Digest32> tx_hashes, std::size_t index) {
  if (index >= tx_hashes.size()) throw Error(Errc::UnknownTx, "tx index out of range");
  InclusionProof proof;
  std::vector<Digest32> level;
  for (const auto& h : tx_hashes) level.push_back(merkle_leaf(h));
  while (level.size() > 1) {
    if (level.size() % 2 == 1) level.push_back(level.back());
    const bool is_right = (index & 1) != 0;
    proof.path.push_back({level[index ^ 1], is_right ? Side::Left : Side::Right});
    std::vector<Digest32> next(level.size() / 2);
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = merkle_node(level[2 * i], level[2 * i + 1]);
    }
    level = std::move(next);
    index /= 2;
  }
  return proof;
}

bool verify_inclusion(const Digest32& tx_hash, const InclusionProof& proof,
                      const Digest32& merkle_root) {
  Digest32 acc = merkle_leaf(tx_hash);
  for (const auto& step : proof.path) {
    acc = step.side == Side::Left ? merkle_node(step.sibling, acc)
                                  : merkle_node(acc, step.sibling);
  }
  return acc == merkle_root;
}

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

Bytes BlockHeader::bytes() const {
  Bytes out;
  out.reserve(kHeaderSize);
  out.push_back(version);
  append_be64(out, height);
  append(out, prev_hash);
  append(out, merkle_root);
  append_be64(out, timestamp);
  append(out, proposer_pubkey);
  return out;
}

Digest32 BlockHeader::hash() const { return crypto::sha256(bytes()); }

BlockHeader BlockHeader::parse(ByteView b) {
  if (b.size() != kHeaderSize) throw Error(Errc::Malformed, "header must be 113 bytes");
  BlockHeader h;
  h.version = b[0];
  h.height = load_be64(b.data() + 1);
  std::copy_n(b.data() + 9, 32, h.prev_hash.begin());
  std::copy_n(b.data() + 41, 32, h.merkle_root.begin());
  h.timestamp = load_be64(b.data() + 73);
  std::copy_n(b.data() + 81, 32, h.proposer_pubkey.begin());
  return h;
}

std::vector<Digest32> Block::tx_hashes() const {
  std::vector<Digest32> out;
  out.reserve(txs.size());
  for (const auto& tx : txs) out.push_back(tx.tx_hash());
  return out;
}

Bytes Block::encode() const {
  Bytes out = header.bytes();
  append_be32(out, static_cast<uint32_t>(txs.size()));
  for (const auto& tx : txs) {
    Bytes canonical = tx.canonical_bytes();
    append(out, crypto::sha256(canonical));
    append_be32(out, static_cast<uint32_t>(canonical.size()));
    append(out, canonical);
  }
  append(out, header.hash());
  append_be32(out, static_cast<uint32_t>(signatures.size()));
  for (const auto& s : signatures) {
    append(out, s.validator);
    append(out, s.signature);
  }
  return out;
}

namespace {

// Zero-copy view of a block record used by the scanner.
struct RawTx {
  ByteView stored_hash;
  ByteView bytes;
};

struct RawSig {
  const uint8_t* pubkey;
  const uint8_t* signature;
};

struct RawBlock {
  ByteView header;
  std::vector<RawTx> txs;
  ByteView sealed_hash;
  std::vector<RawSig> sigs;
};

class Reader {
 public:
  explicit Reader(ByteView data) : data_(data) {}
  bool take(std::size_t n, ByteView& out) {
    if (data_.size() - pos_ < n) return false;
    out = data_.subspan(pos_, n);
    pos_ += n;
    return true;
  }
  bool be32(uint32_t& v) {
    ByteView b;
    if (!take(4, b)) return false;
    v = load_be32(b.data());
    return true;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

bool parse_raw(ByteView frame, RawBlock& out) {
  Reader r(frame);
  out.txs.clear();
  out.sigs.clear();
  uint32_t n = 0;
  if (!r.take(kHeaderSize, out.header) || !r.be32(n)) return false;
  if (n > frame.size()) return false;
  for (uint32_t i = 0; i < n; ++i) {
    RawTx tx;
    uint32_t len = 0;
    if (!r.take(32, tx.stored_hash) || !r.be32(len) || !r.take(len, tx.bytes)) {
      return false;
    }
    out.txs.push_back(tx);
  }
  uint32_t m = 0;
  if (!r.take(32, out.sealed_hash) || !r.be32(m)) return false;
  if (m > frame.size()) return false;
  for (uint32_t i = 0; i < m; ++i) {
    ByteView pk, sig;
    if (!r.take(32, pk) || !r.take(64, sig)) return false;
    out.sigs.push_back({pk.data(), sig.data()});
  }
  return r.done();
}

bool equal_bytes(ByteView a, ByteView b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

Block Block::decode(ByteView bytes) {
  RawBlock raw;
  if (!parse_raw(bytes, raw)) throw Error(Errc::Malformed, "block structure invalid");
  Block block;
  block.header = BlockHeader::parse(raw.header);
  for (const auto& t : raw.txs) {
    AnchorTx tx = AnchorTx::parse(t.bytes);
    if (!equal_bytes(crypto::sha256(t.bytes), t.stored_hash)) {
      throw Error(Errc::Malformed, "stored tx hash mismatch");
    }
    block.txs.push_back(std::move(tx));
  }
  if (!equal_bytes(block.header.hash(), raw.sealed_hash)) {
    throw Error(Errc::Malformed, "sealed header hash mismatch");
  }
  for (const auto& s : raw.sigs) {
    ValidatorSignature vs;
    std::copy_n(s.pubkey, 32, vs.validator.begin());
    std::copy_n(s.signature, 64, vs.signature.begin());
    block.signatures.push_back(vs);
  }
  return block;
}

Block genesis_block() {
  Block b;
  b.header.version = 1;
  b.header.height = 0;
  b.header.timestamp = 0;
  return b;
}

// ---------------------------------------------------------------------------
// Validators
// ---------------------------------------------------------------------------

void ValidatorSet::validate() const {
  if (quorum < 1 || quorum > validators.size()) {
    throw Error(Errc::InvalidArgument, "quorum must be within 1..n");
  }
  std::set<crypto::PublicKey> unique(validators.begin(), validators.end());
  if (unique.size() != validators.size()) {
    throw Error(Errc::InvalidArgument, "validator keys must be distinct");
  }
}

bool ValidatorSet::contains(const crypto::PublicKey& key) const {
  return std::find(validators.begin(), validators.end(), key) != validators.end();
}

std::pair<std::size_t, std::size_t> parse_quorum_spec(std::string_view text) {
  auto pos = text.find("of");
  auto parse_num = [&](std::string_view s) -> std::size_t {
    if (s.empty() || s.size() > 3 ||
        !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw Error(Errc::InvalidArgument, "quorum spec must look like 2of3");
    }
    return static_cast<std::size_t>(std::stoul(std::string(s)));
  };
  if (pos == std::string_view::npos) {
    throw Error(Errc::InvalidArgument, "quorum spec must look like 2of3");
  }
  std::size_t k = parse_num(text.substr(0, pos));
  std::size_t n = parse_num(text.substr(pos + 2));
  if (k < 1 || k > n) throw Error(Errc::InvalidArgument, "quorum must be within 1..n");
  return {k, n};
}

bool quorum_valid(const BlockHeader& header,
                  std::span<const ValidatorSignature> signatures,
                  const ValidatorSet& set) {
  std::set<crypto::PublicKey> seen;
  for (const auto& s : signatures) {
    if (!set.contains(s.validator) || !seen.insert(s.validator).second) return false;
  }
  if (seen.size() < set.quorum) return false;
  Digest32 hash = header.hash();
  std::vector<crypto::SignatureCheck> checks;
  for (const auto& s : signatures) checks.push_back({s.validator, hash, s.signature});
  if (checks.size() == 1) {
    return crypto::verify_sig(checks[0].public_key, hash, checks[0].signature);
  }
  return crypto::verify_batch(checks);
}

// ---------------------------------------------------------------------------
// Tamper scan
// ---------------------------------------------------------------------------

std::string_view violation_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::HeaderHashMismatch: return "HeaderHashMismatch";
    case ViolationKind::PrevLinkBroken: return "PrevLinkBroken";
    case ViolationKind::MerkleMismatch: return "MerkleMismatch";
    case ViolationKind::TxHashMismatch: return "TxHashMismatch";
    case ViolationKind::QuorumInvalid: return "QuorumInvalid";
    case ViolationKind::RecordMalformed: return "RecordMalformed";
  }
  return "Unknown";
}

namespace {

constexpr uint64_t kSigChunkBlocks = 1024;

struct SigRange {
  uint64_t height;
  std::size_t begin;
  std::size_t end;
};

}  // namespace

TamperReport scan_chain_bytes(ByteView chain, const ValidatorSet& validators) {
  TamperReport report;
  const Bytes genesis_header = genesis_block().header.bytes();

  std::vector<crypto::SignatureCheck> checks;
  std::vector<SigRange> ranges;
  std::vector<Digest32> header_hashes;  // by height
  header_hashes.reserve(chain.size() / 256 + 1);
  // SignatureCheck keeps a view of the header hash, so hashes must not move.
  std::vector<std::unique_ptr<Digest32[]>> hash_pages;
  constexpr std::size_t kPage = 4096;
  std::size_t page_used = kPage;

  std::optional<Violation> found;
  auto fail = [&](uint64_t h, ViolationKind k, std::string detail) {
    found = Violation{h, k, std::move(detail)};
  };

  Digest32 prev_hash{};
  RawBlock raw;
  std::vector<Digest32> stored_hashes;
  std::set<crypto::PublicKey> signers;
  std::size_t pos = 0;
  uint64_t height = 0;

  while (pos < chain.size()) {
    if (chain.size() - pos < 4) {
      fail(height, ViolationKind::RecordMalformed, "truncated frame length");
      break;
    }
    const uint32_t len = load_be32(chain.data() + pos);
    if (len > chain.size() - pos - 4) {
      fail(height, ViolationKind::RecordMalformed, "frame extends past end of file");
      break;
    }
    ByteView frame = chain.subspan(pos + 4, len);
    if (!parse_raw(frame, raw)) {
      fail(height, ViolationKind::RecordMalformed, "block structure invalid");
      break;
    }
    if (!equal_bytes(raw.header.subspan(9, 32), prev_hash)) {
      fail(height, ViolationKind::PrevLinkBroken, "prev_hash does not match parent");
      break;
    }
    stored_hashes.clear();
    bool tx_ok = true;
    for (std::size_t i = 0; i < raw.txs.size(); ++i) {
      Digest32 h = crypto::sha256(raw.txs[i].bytes);
      if (!equal_bytes(h, raw.txs[i].stored_hash)) {
        fail(height, ViolationKind::TxHashMismatch, "tx " + std::to_string(i));
        tx_ok = false;
        break;
      }
      stored_hashes.push_back(h);
    }
    if (!tx_ok) break;
    if (!equal_bytes(merkle_root(stored_hashes), raw.header.subspan(41, 32))) {
      fail(height, ViolationKind::MerkleMismatch, "merkle root mismatch");
      break;
    }
    const Digest32 header_hash = crypto::sha256(raw.header);
    const bool header_ok =
        equal_bytes(header_hash, raw.sealed_hash) && raw.header[0] == 0x01 &&
        load_be64(raw.header.data() + 1) == height &&
        (height != 0 || equal_bytes(raw.header, genesis_header));
    if (!header_ok) {
      fail(height, ViolationKind::HeaderHashMismatch, "header hash mismatch");
      break;
    }

    if (height == 0) {
      if (!raw.sigs.empty() || !raw.txs.empty()) {
        fail(height, ViolationKind::QuorumInvalid, "genesis must be empty and unsigned");
        break;
      }
    } else {
      signers.clear();
      bool members_ok = true;
      for (const auto& s : raw.sigs) {
        crypto::PublicKey pk{};
        std::copy_n(s.pubkey, 32, pk.begin());
        if (!validators.contains(pk) || !signers.insert(pk).second) members_ok = false;
      }
      if (!members_ok || signers.size() < validators.quorum) {
        fail(height, ViolationKind::QuorumInvalid, "signers do not form a quorum");
        break;
      }
      if (page_used == kPage) {
        hash_pages.push_back(std::make_unique<Digest32[]>(kPage));
        page_used = 0;
      }
      Digest32* slot = &hash_pages.back()[page_used++];
      *slot = header_hash;
      SigRange range{height, checks.size(), 0};
      for (const auto& s : raw.sigs) {
        checks.push_back({ByteView(s.pubkey, 32), ByteView(*slot), ByteView(s.signature, 64)});
      }
      range.end = checks.size();
      ranges.push_back(range);
    }
    header_hashes.push_back(header_hash);
    prev_hash = header_hash;
    pos += 4 + len;
    ++height;
  }
  report.blocks_scanned = height;

  // Signatures of every block below the first structural violation.
  auto batch_ok = [&](std::size_t first_range, std::size_t last_range) {
    std::size_t b = ranges[first_range].begin;
    std::size_t e = ranges[last_range - 1].end;
    return crypto::verify_batch(std::span(checks).subspan(b, e - b));
  };
  std::function<std::size_t(std::size_t, std::size_t)> lowest_bad =
      [&](std::size_t lo, std::size_t hi) -> std::size_t {
    if (hi - lo == 1) return lo;
    std::size_t mid = lo + (hi - lo) / 2;
    return batch_ok(lo, mid) ? lowest_bad(mid, hi) : lowest_bad(lo, mid);
  };
  for (std::size_t start = 0; start < ranges.size(); start += kSigChunkBlocks) {
    std::size_t stop = std::min(ranges.size(), start + kSigChunkBlocks);
    if (!batch_ok(start, stop)) {
      std::size_t bad = lowest_bad(start, stop);
      if (!found || ranges[bad].height < found->height) {
        fail(ranges[bad].height, ViolationKind::QuorumInvalid,
             "validator signature does not verify");
      }
      break;
    }
  }
  report.violation = std::move(found);
  return report;
}

TamperReport scan_chain_file(const fs::path& chain_file, const ValidatorSet& validators) {
  std::ifstream in(chain_file, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + chain_file.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  Bytes data(size);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error(Errc::Io, "cannot read " + chain_file.string());
  return scan_chain_bytes(data, validators);
}

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

namespace {

std::string hash_key(const Digest32& h) { return {h.begin(), h.end()}; }

void write_all(int fd, ByteView data, const fs::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::Io, "write failed: " + path.string());
    }
    done += static_cast<std::size_t>(n);
  }
}

Bytes frame(const Block& block) {
  Bytes body = block.encode();
  Bytes out;
  out.reserve(body.size() + 4);
  append_be32(out, static_cast<uint32_t>(body.size()));
  append(out, body);
  return out;
}

fs::path accounts_path(const fs::path& dir) { return dir / "accounts.log"; }

}  // namespace

void Ledger::create(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string());
  fs::path path = chain_path(dir);
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw Error(Errc::AlreadyInitialized, "chain already exists");
    throw Error(Errc::Io, "cannot create " + path.string());
  }
  try {
    write_all(fd, frame(genesis_block()), path);
    ::fsync(fd);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

Ledger::Ledger(fs::path dir, ValidatorSet validators, LedgerKeys keys,
               LedgerOptions options)
    : dir_(std::move(dir)),
      validators_(std::move(validators)),
      keys_(std::move(keys)),
      options_(std::move(options)) {
  validators_.validate();
  if (keys_.validators.size() != validators_.validators.size()) {
    throw Error(Errc::InvalidArgument, "one key per validator required");
  }
  for (std::size_t i = 0; i < keys_.validators.size(); ++i) {
    if (keys_.validators[i].public_key != validators_.validators[i]) {
      throw Error(Errc::InvalidArgument, "validator key order does not match set");
    }
  }
  fs::path path = chain_path(dir_);
  chain_fd_ = ::open(path.c_str(), O_RDWR | O_APPEND);
  if (chain_fd_ < 0) throw Error(Errc::NotInitialized, "no chain at " + path.string());
  try {
    load();
  } catch (...) {
    ::close(chain_fd_);
    throw;
  }
}

Ledger::~Ledger() {
  if (chain_fd_ >= 0) ::close(chain_fd_);
}

void Ledger::load() {
  std::ifstream in(chain_path(dir_), std::ios::binary);
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  while (pos < data.size()) {
    const uint64_t h = offsets_.size();
    auto damaged = [&](const std::string& why) {
      return Error(Errc::Malformed, "chain damaged at height " + std::to_string(h) +
                                        " (" + why + "); run `ledger verify`");
    };
    if (data.size() - pos < 4) throw damaged("truncated frame");
    uint32_t len = load_be32(data.data() + pos);
    if (len > data.size() - pos - 4) throw damaged("truncated frame");
    Block block;
    try {
      block = Block::decode(ByteView(data).subspan(pos + 4, len));
    } catch (const Error& e) {
      throw damaged(e.what());
    }
    if (block.header.height != h) throw damaged("height out of sequence");
    index_block(block, pos);
    pos += 4 + len;
  }
  if (offsets_.empty()) throw Error(Errc::Malformed, "chain has no genesis block");
  chain_size_ = data.size();

  std::ifstream acc(accounts_path(dir_));
  std::string line;
  while (std::getline(acc, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    seeded_[hex_decode_fixed<32>(j.at("owner").get<std::string>())] +=
        j.at("units").get<uint64_t>();
  }
}

void Ledger::index_block(const Block& block, uint64_t offset) {
  offsets_.push_back(offset);
  headers_.push_back(block.header);
  for (std::size_t i = 0; i < block.txs.size(); ++i) {
    const auto& tx = block.txs[i];
    tx_index_[hash_key(tx.tx_hash())] = {block.header.height, i};
    debited_[tx.issuer_pubkey] += tx.fee_units;
    total_debited_ += tx.fee_units;
  }
}

uint64_t Ledger::now() const {
  if (options_.clock) return options_.clock();
  return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                   std::chrono::system_clock::now().time_since_epoch())
                                   .count());
}

void Ledger::seed_account(const crypto::PublicKey& owner, uint64_t units) {
  std::unique_lock lock(mutex_);
  json j = {{"owner", hex_encode(owner)}, {"units", units}};
  std::ofstream out(accounts_path(dir_), std::ios::app);
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::Io, "cannot write accounts log");
  seeded_[owner] += units;
}

uint64_t Ledger::balance(const crypto::PublicKey& owner) const {
  std::shared_lock lock(mutex_);
  auto s = seeded_.find(owner);
  auto d = debited_.find(owner);
  uint64_t seeded = s == seeded_.end() ? 0 : s->second;
  uint64_t debited = d == debited_.end() ? 0 : d->second;
  return seeded - debited;
}

uint64_t Ledger::total_debited() const {
  std::shared_lock lock(mutex_);
  return total_debited_;
}

uint64_t Ledger::reserved_for(const crypto::PublicKey& owner) const {
  uint64_t total = 0;
  for (const auto& p : pending_) {
    if (p.tx.issuer_pubkey == owner) total += p.tx.fee_units;
  }
  return total;
}

TxReceipt Ledger::submit_tx(const AnchorTx& tx, bool fee_approved) {
  if (!fee_approved) throw Error(Errc::FeeNotApproved, "anchoring fee was not approved");
  if (tx.fee_units != anchor_fee(tx.encrypted_cid_body.size())) {
    throw Error(Errc::InvalidArgument, "fee_units does not follow the fee formula");
  }
  if (!tx.signature_valid()) throw Error(Errc::BadSignature, "issuer signature invalid");
  const Digest32 hash = tx.tx_hash();

  std::unique_lock lock(mutex_);
  if (tx_index_.count(hash_key(hash)) != 0 ||
      std::any_of(pending_.begin(), pending_.end(),
                  [&](const Pending& p) { return p.hash == hash; })) {
    throw Error(Errc::DuplicateTx, "tx already pending or included");
  }
  auto s = seeded_.find(tx.issuer_pubkey);
  auto d = debited_.find(tx.issuer_pubkey);
  uint64_t seeded = s == seeded_.end() ? 0 : s->second;
  uint64_t debited = d == debited_.end() ? 0 : d->second;
  uint64_t available = seeded - debited - reserved_for(tx.issuer_pubkey);
  if (available < tx.fee_units) {
    throw Error(Errc::InsufficientBalance, "issuer balance below fee");
  }
  pending_.push_back({tx, hash});
  return {hash};
}

void Ledger::drop_pending(const Digest32& tx_hash) {
  std::unique_lock lock(mutex_);
  std::erase_if(pending_, [&](const Pending& p) { return p.hash == tx_hash; });
}

std::size_t Ledger::pending_count() const {
  std::shared_lock lock(mutex_);
  return pending_.size();
}

Block Ledger::propose_block() const {
  std::shared_lock lock(mutex_);
  if (pending_.empty()) throw Error(Errc::EmptyPool, "no pending transactions");
  Block block;
  const std::size_t n = std::min(pending_.size(), options_.block_capacity);
  std::vector<Digest32> hashes;
  for (std::size_t i = 0; i < n; ++i) {
    block.txs.push_back(pending_[i].tx);
    hashes.push_back(pending_[i].hash);
  }
  const BlockHeader& tip = headers_.back();
  block.header.height = tip.height + 1;
  block.header.prev_hash = tip.hash();
  block.header.merkle_root = merkle_root(hashes);
  block.header.timestamp = std::max(now(), tip.timestamp);
  block.header.proposer_pubkey = keys_.proposer.public_key;
  return block;
}

std::optional<std::string> Ledger::validator_objection(const Block& block) const {
  const BlockHeader& tip = headers_.back();
  const BlockHeader& h = block.header;
  if (h.version != 1) return "unknown block version";
  if (h.height != tip.height + 1) return "height is not tip + 1";
  if (h.prev_hash != tip.hash()) return "prev_hash does not reference the tip";
  if (h.proposer_pubkey != keys_.proposer.public_key) return "unknown proposer";
  if (h.timestamp < tip.timestamp) return "timestamp precedes parent";
  if (block.txs.empty() || block.txs.size() > options_.block_capacity) {
    return "transaction count out of range";
  }
  std::vector<Digest32> hashes = block.tx_hashes();
  if (merkle_root(hashes) != h.merkle_root) return "merkle root mismatch";

  std::set<Digest32> unique;
  std::map<crypto::PublicKey, uint64_t> fees;
  std::vector<Bytes> signing(block.txs.size());
  std::vector<crypto::SignatureCheck> checks;
  for (std::size_t i = 0; i < block.txs.size(); ++i) {
    const auto& tx = block.txs[i];
    if (!unique.insert(hashes[i]).second || tx_index_.count(hash_key(hashes[i])) != 0) {
      return "duplicate transaction";
    }
    if (tx.fee_units != anchor_fee(tx.encrypted_cid_body.size())) return "bad fee";
    fees[tx.issuer_pubkey] += tx.fee_units;
    signing[i] = tx.signing_bytes();
    checks.push_back({tx.issuer_pubkey, signing[i], tx.issuer_signature});
  }
  if (!crypto::verify_batch(checks)) return "issuer signature invalid";
  for (const auto& [owner, fee] : fees) {
    auto s = seeded_.find(owner);
    auto d = debited_.find(owner);
    uint64_t seeded = s == seeded_.end() ? 0 : s->second;
    uint64_t debited = d == debited_.end() ? 0 : d->second;
    if (seeded - debited < fee) return "insufficient issuer balance";
  }
  return std::nullopt;
}

void Ledger::collect_signatures(Block& block) const {
  std::shared_lock lock(mutex_);
  if (auto objection = validator_objection(block)) {
    throw Error(Errc::QuorumNotReached, "validator refused block: " + *objection);
  }
  block.signatures.clear();
  const Digest32 hash = block.hash();
  for (std::size_t i = 0; i < keys_.validators.size(); ++i) {
    // Each simulated validator validates on its own; they share the state
    // snapshot, so an honest run yields the same verdict for all of them.
    if (i > 0) {
      if (auto objection = validator_objection(block)) {
        throw Error(Errc::QuorumNotReached, "validator refused block: " + *objection);
      }
    }
    if (block.signatures.size() < validators_.quorum) {
      block.signatures.push_back(
          {keys_.validators[i].public_key, crypto::sign(keys_.validators[i], hash)});
    }
  }
}

void Ledger::append_block(const Block& block) {
  std::unique_lock lock(mutex_);
  if (!quorum_valid(block.header, block.signatures, validators_)) {
    throw Error(Errc::QuorumNotReached, "block lacks a valid validator quorum");
  }
  if (auto objection = validator_objection(block)) {
    throw Error(Errc::InvalidArgument, "block rejected: " + *objection);
  }
  Bytes record = frame(block);
  write_all(chain_fd_, record, chain_path(dir_));
  if (options_.fsync_on_commit && ::fsync(chain_fd_) != 0) {
    throw Error(Errc::Io, "fsync failed on chain file");
  }
  index_block(block, chain_size_);
  chain_size_ += record.size();
  std::set<Digest32> included;
  for (const auto& tx : block.txs) included.insert(tx.tx_hash());
  std::erase_if(pending_, [&](const Pending& p) { return included.count(p.hash) != 0; });
}

Block Ledger::propose_and_commit_block() {
  Block block = propose_block();
  collect_signatures(block);
  append_block(block);
  return block;
}

uint64_t Ledger::tip_height() const {
  std::shared_lock lock(mutex_);
  return headers_.back().height;
}

Digest32 Ledger::tip_hash() const {
  std::shared_lock lock(mutex_);
  return headers_.back().hash();
}

Block Ledger::block_at(uint64_t height) const {
  std::shared_lock lock(mutex_);
  if (height >= offsets_.size()) {
    throw Error(Errc::NotFound, "no block at height " + std::to_string(height));
  }
  const uint64_t begin = offsets_[height];
  const uint64_t end = height + 1 < offsets_.size() ? offsets_[height + 1] : chain_size_;
  Bytes buf(end - begin);
  ssize_t n = ::pread(chain_fd_, buf.data(), buf.size(), static_cast<off_t>(begin));
  if (n != static_cast<ssize_t>(buf.size())) {
    throw Error(Errc::Malformed, "chain file shorter than indexed");
  }
  if (load_be32(buf.data()) != buf.size() - 4) {
    throw Error(Errc::Malformed, "frame length changed at height " + std::to_string(height));
  }
  Block block = Block::decode(ByteView(buf).subspan(4));
  if (block.header.height != height) {
    throw Error(Errc::Malformed, "height mismatch in stored block");
  }
  return block;
}

std::optional<TxLocation> Ledger::find_tx(const Digest32& tx_hash) const {
  std::shared_lock lock(mutex_);
  auto it = tx_index_.find(hash_key(tx_hash));
  if (it == tx_index_.end()) return std::nullopt;
  return it->second;
}

InclusionProof Ledger::inclusion_proof(const Digest32& tx_hash, uint64_t height) const {
  auto loc = find_tx(tx_hash);
  if (!loc || loc->height != height) {
    throw Error(Errc::UnknownTx, "tx not included at height " + std::to_string(height));
  }
  Block block = block_at(height);
  return merkle_proof(block.tx_hashes(), loc->index);
}

TamperReport Ledger::scan_chain() const {
  TamperReport report;
  std::function<void(const Violation&)> listener;
  {
    std::shared_lock lock(mutex_);
    report = scan_chain_file(chain_path(dir_), validators_);
    listener = tamper_listener_;
  }
  if (report.violation && listener) listener(*report.violation);
  return report;
}

void Ledger::set_tamper_listener(std::function<void(const Violation&)> listener) {
  std::unique_lock lock(mutex_);
  tamper_listener_ = std::move(listener);
}

}  // namespace verifi::ledger
