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

#include "verifi/datadir.h"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>

namespace verifi {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_private(const fs::path& path, const std::string& text) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) throw Error(Errc::Io, "cannot write " + path.string());
  ssize_t n = ::write(fd, text.data(), text.size());
  ::fsync(fd);
  ::close(fd);
  if (n != static_cast<ssize_t>(text.size())) {
    throw Error(Errc::Io, "short write to " + path.string());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::NotInitialized, "missing " + path.string());
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) {
    s.pop_back();
  }
  return s;
}

crypto::KeyPair read_key(const fs::path& path) {
  return crypto::keypair_from_seed(hex_decode_fixed<32>(read_text(path)));
}

fs::path validator_key_path(const DataDir& d, std::size_t i) {
  return d.keys_dir() / ("validator-" + std::to_string(i) + ".key");
}

}  // namespace

DataDir DataDir::init(const fs::path& root, const InitOptions& options) {
  DataDir d(root);
  if (fs::exists(ledger::Ledger::chain_path(d.ledger_dir()))) {
    throw Error(Errc::AlreadyInitialized, "already initialized: " + root.string());
  }
  auto [k, n] = ledger::parse_quorum_spec(options.quorum_spec);
  Bytes secret = options.token_secret ? *options.token_secret : crypto::random_bytes(32);
  if (secret.size() < 16) {
    throw Error(Errc::InvalidArgument, "token secret must be at least 16 bytes");
  }

  for (const auto& p : {d.keys_dir(), d.ledger_dir(), d.cas_dir(), d.db_dir()}) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + p.string());
  }
  fs::permissions(d.keys_dir(), fs::perms::owner_all, fs::perm_options::replace);

  write_private(root / "token_secret", hex_encode(secret) + "\n");
  crypto::KeyPair authority = crypto::keygen();
  write_private(d.keys_dir() / "authority.key", hex_encode(authority.secret_seed) + "\n");
  json set = {{"quorum", k}, {"validators", json::array()}};
  for (std::size_t i = 0; i < n; ++i) {
    crypto::KeyPair v = crypto::keygen();
    write_private(validator_key_path(d, i), hex_encode(v.secret_seed) + "\n");
    set["validators"].push_back(hex_encode(v.public_key));
  }
  write_private(d.ledger_dir() / "validators.json", set.dump() + "\n");
  // The chain file is written last so that its presence marks a complete init.
  ledger::Ledger::create(d.ledger_dir());
  return d;
}

bool DataDir::initialized() const {
  return fs::exists(ledger::Ledger::chain_path(ledger_dir()));
}

void DataDir::require_initialized() const {
  if (!initialized()) {
    throw Error(Errc::NotInitialized,
                "data dir not initialized (run `verifi init`): " + root_.string());
  }
}

Bytes DataDir::token_secret() const {
  if (const char* env = std::getenv("VERIFI_TOKEN_SECRET"); env && *env) {
    Bytes s = hex_decode(env);
    if (s.size() < 16) {
      throw Error(Errc::InvalidArgument, "VERIFI_TOKEN_SECRET must be >= 16 bytes of hex");
    }
    return s;
  }
  return hex_decode(read_text(root_ / "token_secret"));
}

ledger::ValidatorSet DataDir::validators() const {
  json j;
  try {
    j = json::parse(read_text(ledger_dir() / "validators.json"));
    ledger::ValidatorSet set;
    set.quorum = j.at("quorum").get<std::size_t>();
    for (const auto& v : j.at("validators")) {
      set.validators.push_back(hex_decode_fixed<32>(v.get<std::string>()));
    }
    set.validate();
    return set;
  } catch (const json::exception& e) {
    throw Error(Errc::Malformed, std::string("validators.json: ") + e.what());
  }
}

ledger::LedgerKeys DataDir::ledger_keys() const {
  ledger::LedgerKeys keys;
  keys.proposer = read_key(keys_dir() / "authority.key");
  const std::size_t n = validators().validators.size();
  for (std::size_t i = 0; i < n; ++i) keys.validators.push_back(read_key(validator_key_path(*this, i)));
  return keys;
}

DirLock::DirLock(const DataDir& dir, Mode mode) {
  std::error_code ec;
  fs::create_directories(dir.root(), ec);
  fd_ = ::open(dir.lock_path().c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) throw Error(Errc::Io, "cannot open " + dir.lock_path().string());
  const int op = (mode == Mode::Shared ? LOCK_SH : LOCK_EX) | LOCK_NB;
  if (::flock(fd_, op) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw Error(Errc::Locked, "data dir is in use by another verifi process: " +
                                  dir.root().string());
  }
}

DirLock::~DirLock() {
  if (fd_ >= 0) ::close(fd_);
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("VERIFI_DATA_DIR"); env && *env) return env;
  return "verifi-data";
}

}  // namespace verifi
