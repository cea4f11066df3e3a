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

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "verifi/bytes.h"
#include "verifi/cid.h"
#include "verifi/role.h"

namespace verifi::crypto {

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

Digest32 sha256(ByteView data);

// Incremental SHA-256. Not copyable; one instance per thread.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(ByteView data);
  Sha256& update(uint8_t byte) { return update(ByteView(&byte, 1)); }
  Digest32 finish();  // also resets for reuse

 private:
  struct Ctx;
  std::unique_ptr<Ctx> ctx_;
};

Digest32 hmac_sha256(ByteView key, ByteView message);

Digest32 pbkdf2_sha256(std::string_view password, ByteView salt,
                       uint32_t iterations);

// Throws Error(Internal) if the system randomness source fails.
void fill_random(std::span<uint8_t> out);
Bytes random_bytes(std::size_t n);

// Constant-time comparison for equal-length inputs.
bool equal_ct(ByteView a, ByteView b);

// ---------------------------------------------------------------------------
// Ed25519
// ---------------------------------------------------------------------------

using PublicKey = std::array<uint8_t, 32>;
using SecretSeed = std::array<uint8_t, 32>;
using Signature = std::array<uint8_t, 64>;

struct KeyPair {
  PublicKey public_key{};
  SecretSeed secret_seed{};
};

KeyPair keygen();
KeyPair keypair_from_seed(const SecretSeed& seed);

Signature sign(const KeyPair& key, ByteView message);

// Throws Error(Malformed) when the key is not 32 bytes or the signature is
// not 64 bytes. Returns false for any well-formed but invalid signature.
bool verify_sig(ByteView public_key, ByteView message, ByteView signature);

// ---------------------------------------------------------------------------
// AES-256-GCM
// ---------------------------------------------------------------------------

using Nonce = std::array<uint8_t, 12>;
inline constexpr std::size_t kTagSize = 16;

struct SymmetricKey {
  std::array<uint8_t, 32> key{};

  static SymmetricKey generate();
};

struct Ciphertext {
  Nonce nonce{};
  Bytes body;  // ciphertext || 16-byte tag
};

// Raw AEAD primitives; body = ciphertext || tag.
Bytes aead_seal(const SymmetricKey& key, const Nonce& nonce, ByteView plaintext,
                ByteView aad = {});
// Throws Error(AuthFailure) when the tag does not verify.
Bytes aead_open(const SymmetricKey& key, const Nonce& nonce, ByteView body,
                ByteView aad = {});

// Fresh random nonce per call.
Ciphertext encrypt_cid(const SymmetricKey& key, const Cid& cid);
// Throws Error(AuthFailure) on a wrong key, tampered nonce or tampered body.
Cid decrypt_cid(const SymmetricKey& key, const Ciphertext& ct);

// ---------------------------------------------------------------------------
// Bearer tokens
// ---------------------------------------------------------------------------
//
// Wire form: b64url(header) "." b64url(payload) "." b64url(mac), where
// header = {"alg":"HS256","typ":"token"}, payload = {"exp":..,"role":..,
// "sub":..} with keys in ascending code-point order and no whitespace, and
// mac = HMAC-SHA-256(secret, b64url(header) "." b64url(payload)).

inline constexpr int64_t kDefaultTokenTtl = 3600;

struct TokenClaims {
  std::string sub;
  Role role = Role::Applicant;
  int64_t exp = 0;
};

std::string issue_token(ByteView secret, std::string_view sub, Role role,
                        int64_t ttl_seconds, int64_t now);

// Throws TokenMalformed, TokenBadSignature or TokenExpired (now >= exp), in
// that order of precedence.
TokenClaims verify_token(ByteView secret, std::string_view wire, int64_t now);

}  // namespace verifi::crypto
