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

// On-disk layout of a Verifi data directory:
//
//   <root>/token_secret              hex HMAC key for bearer tokens
//   <root>/keys/authority.key        hex Ed25519 seed of the block proposer
//   <root>/keys/validator-<i>.key    hex Ed25519 seeds of the validators
//   <root>/ledger/validators.json    {"quorum":k,"validators":[pubkey hex...]}
//   <root>/ledger/chain.log          block frames
//   <root>/cas/                      object store
//   <root>/db/                       workflow record logs
//   <root>/.lock                     advisory lock file

#include <filesystem>
#include <optional>
#include <string>

#include "verifi/bytes.h"
#include "verifi/ledger.h"

namespace verifi {

inline constexpr std::string_view kDefaultQuorumSpec = "2of3";

struct InitOptions {
  std::string quorum_spec = std::string(kDefaultQuorumSpec);
  std::optional<Bytes> token_secret;  // generated when absent
};

class DataDir {
 public:
  explicit DataDir(std::filesystem::path root) : root_(std::move(root)) {}

  // Creates the full layout including the genesis block. Throws
  // AlreadyInitialized if a chain already exists under root.
  static DataDir init(const std::filesystem::path& root, const InitOptions& options = {});

  bool initialized() const;
  // Throws NotInitialized unless initialized().
  void require_initialized() const;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path ledger_dir() const { return root_ / "ledger"; }
  std::filesystem::path cas_dir() const { return root_ / "cas"; }
  std::filesystem::path db_dir() const { return root_ / "db"; }
  std::filesystem::path keys_dir() const { return root_ / "keys"; }
  std::filesystem::path web_dir() const { return root_ / "web"; }
  std::filesystem::path lock_path() const { return root_ / ".lock"; }

  // VERIFI_TOKEN_SECRET (hex) overrides the stored secret.
  Bytes token_secret() const;
  ledger::ValidatorSet validators() const;
  ledger::LedgerKeys ledger_keys() const;

 private:
  std::filesystem::path root_;
};

// Advisory flock on the data directory's lock file, released on destruction.
// Throws Locked if another process holds a conflicting lock.
class DirLock {
 public:
  enum class Mode { Shared, Exclusive };

  DirLock(const DataDir& dir, Mode mode);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

// Reads VERIFI_DATA_DIR, falling back to "./verifi-data".
std::filesystem::path default_data_dir();

}  // namespace verifi
