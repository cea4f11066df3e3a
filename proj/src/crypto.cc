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

#include "verifi/crypto.h"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <sodium.h>

#include <json.hpp>

namespace verifi::crypto {
namespace {

using nlohmann::json;

const EVP_MD* sha256_md() {
  static EVP_MD* md = EVP_MD_fetch(nullptr, "SHA256", nullptr);
  return md;
}

const EVP_CIPHER* aes256gcm_cipher() {
  static EVP_CIPHER* cipher = EVP_CIPHER_fetch(nullptr, "AES-256-GCM", nullptr);
  return cipher;
}

struct SodiumInit {
  SodiumInit() {
    if (sodium_init() < 0) {
      throw Error(Errc::Internal, "libsodium initialization failed");
    }
  }
};

void ensure_sodium() { static SodiumInit init; }

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

CipherCtx new_cipher_ctx() {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw Error(Errc::Internal, "EVP_CIPHER_CTX_new failed");
  return ctx;
}

void check(int rc, const char* what) {
  if (rc != 1) throw Error(Errc::Internal, std::string(what) + " failed");
}

constexpr std::string_view kTokenHeader = R"({"alg":"HS256","typ":"token"})";

}  // namespace

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

struct Sha256::Ctx {
  EVP_MD_CTX* md_ctx = nullptr;
};

Sha256::Sha256() : ctx_(std::make_unique<Ctx>()) {
  ctx_->md_ctx = EVP_MD_CTX_new();
  if (ctx_->md_ctx == nullptr) throw Error(Errc::Internal, "EVP_MD_CTX_new");
  check(EVP_DigestInit_ex(ctx_->md_ctx, sha256_md(), nullptr),
        "EVP_DigestInit_ex");
}

Sha256::~Sha256() { EVP_MD_CTX_free(ctx_->md_ctx); }

Sha256& Sha256::update(ByteView data) {
  check(EVP_DigestUpdate(ctx_->md_ctx, data.data(), data.size()),
        "EVP_DigestUpdate");
  return *this;
}

Digest32 Sha256::finish() {
  Digest32 out{};
  check(EVP_DigestFinal_ex(ctx_->md_ctx, out.data(), nullptr),
        "EVP_DigestFinal_ex");
  check(EVP_DigestInit_ex(ctx_->md_ctx, sha256_md(), nullptr),
        "EVP_DigestInit_ex");
  return out;
}

Digest32 sha256(ByteView data) {
  thread_local Sha256 hasher;
  return hasher.update(data).finish();
}

Digest32 hmac_sha256(ByteView key, ByteView message) {
  Digest32 out{};
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
           message.data(), message.size(), out.data(), &len) == nullptr) {
    throw Error(Errc::Internal, "HMAC failed");
  }
  return out;
}

Digest32 pbkdf2_sha256(std::string_view password, ByteView salt,
                       uint32_t iterations) {
  Digest32 out{};
  check(PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()),
                          salt.data(), static_cast<int>(salt.size()),
                          static_cast<int>(iterations), EVP_sha256(),
                          static_cast<int>(out.size()), out.data()),
        "PKCS5_PBKDF2_HMAC");
  return out;
}

void fill_random(std::span<uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw Error(Errc::Internal, "randomness source unavailable");
  }
}

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  fill_random(out);
  return out;
}

bool equal_ct(ByteView a, ByteView b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

// ---------------------------------------------------------------------------
// Ed25519
// ---------------------------------------------------------------------------

KeyPair keygen() {
  SecretSeed seed{};
  fill_random(seed);
  return keypair_from_seed(seed);
}

KeyPair keypair_from_seed(const SecretSeed& seed) {
  ensure_sodium();
  KeyPair kp;
  kp.secret_seed = seed;
  std::array<uint8_t, crypto_sign_SECRETKEYBYTES> sk{};
  crypto_sign_seed_keypair(kp.public_key.data(), sk.data(), seed.data());
  sodium_memzero(sk.data(), sk.size());
  return kp;
}

Signature sign(const KeyPair& key, ByteView message) {
  ensure_sodium();
  // libsodium's expanded secret key is seed || public key.
  std::array<uint8_t, crypto_sign_SECRETKEYBYTES> sk{};
  std::copy(key.secret_seed.begin(), key.secret_seed.end(), sk.begin());
  std::copy(key.public_key.begin(), key.public_key.end(), sk.begin() + 32);
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                       sk.data());
  sodium_memzero(sk.data(), sk.size());
  return sig;
}

bool verify_sig(ByteView public_key, ByteView message, ByteView signature) {
  if (public_key.size() != crypto_sign_PUBLICKEYBYTES) {
    throw Error(Errc::Malformed, "public key must be 32 bytes");
  }
  if (signature.size() != crypto_sign_BYTES) {
    throw Error(Errc::Malformed, "signature must be 64 bytes");
  }
  ensure_sodium();
  return crypto_sign_verify_detached(signature.data(), message.data(),
                                     message.size(), public_key.data()) == 0;
}

// ---------------------------------------------------------------------------
// AES-256-GCM
// ---------------------------------------------------------------------------

SymmetricKey SymmetricKey::generate() {
  SymmetricKey k;
  fill_random(k.key);
  return k;
}

Bytes aead_seal(const SymmetricKey& key, const Nonce& nonce, ByteView plaintext,
                ByteView aad) {
  auto ctx = new_cipher_ctx();
  check(EVP_EncryptInit_ex2(ctx.get(), aes256gcm_cipher(), key.key.data(),
                            nonce.data(), nullptr),
        "EVP_EncryptInit_ex2");
  int len = 0;
  if (!aad.empty()) {
    check(EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                            static_cast<int>(aad.size())),
          "EVP_EncryptUpdate(aad)");
  }
  Bytes out(plaintext.size() + kTagSize);
  int written = 0;
  if (!plaintext.empty()) {
    check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                            static_cast<int>(plaintext.size())),
          "EVP_EncryptUpdate");
    written = len;
  }
  check(EVP_EncryptFinal_ex(ctx.get(), out.data() + written, &len),
        "EVP_EncryptFinal_ex");
  written += len;
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG,
                            static_cast<int>(kTagSize), out.data() + written),
        "EVP_CTRL_GCM_GET_TAG");
  return out;
}

Bytes aead_open(const SymmetricKey& key, const Nonce& nonce, ByteView body,
                ByteView aad) {
  if (body.size() < kTagSize) {
    throw Error(Errc::AuthFailure, "ciphertext shorter than tag");
  }
  const std::size_t ct_len = body.size() - kTagSize;
  auto ctx = new_cipher_ctx();
  check(EVP_DecryptInit_ex2(ctx.get(), aes256gcm_cipher(), key.key.data(),
                            nonce.data(), nullptr),
        "EVP_DecryptInit_ex2");
  int len = 0;
  if (!aad.empty()) {
    check(EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                            static_cast<int>(aad.size())),
          "EVP_DecryptUpdate(aad)");
  }
  Bytes out(ct_len);
  int written = 0;
  if (ct_len > 0) {
    check(EVP_DecryptUpdate(ctx.get(), out.data(), &len, body.data(),
                            static_cast<int>(ct_len)),
          "EVP_DecryptUpdate");
    written = len;
  }
  Bytes tag(body.begin() + static_cast<std::ptrdiff_t>(ct_len), body.end());
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG,
                            static_cast<int>(kTagSize), tag.data()),
        "EVP_CTRL_GCM_SET_TAG");
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + written, &len) != 1) {
    throw Error(Errc::AuthFailure, "authentication tag mismatch");
  }
  return out;
}

Ciphertext encrypt_cid(const SymmetricKey& key, const Cid& cid) {
  Ciphertext ct;
  fill_random(ct.nonce);
  ct.body = aead_seal(key, ct.nonce, cid.digest());
  return ct;
}

Cid decrypt_cid(const SymmetricKey& key, const Ciphertext& ct) {
  Bytes plain = aead_open(key, ct.nonce, ct.body);
  if (plain.size() != 32) {
    throw Error(Errc::AuthFailure, "decrypted value is not a 32-byte digest");
  }
  Digest32 d{};
  std::copy(plain.begin(), plain.end(), d.begin());
  return Cid(d);
}

// ---------------------------------------------------------------------------
// Bearer tokens
// ---------------------------------------------------------------------------

std::string issue_token(ByteView secret, std::string_view sub, Role role,
                        int64_t ttl_seconds, int64_t now) {
  if (ttl_seconds <= 0) {
    throw Error(Errc::InvalidArgument, "token ttl must be positive");
  }
  json payload = {{"exp", now + ttl_seconds},
                  {"role", std::string(role_name(role))},
                  {"sub", std::string(sub)}};
  std::string signing_input = base64url_encode(as_bytes(kTokenHeader)) + "." +
                              base64url_encode(as_bytes(payload.dump()));
  Digest32 mac = hmac_sha256(secret, as_bytes(signing_input));
  return signing_input + "." + base64url_encode(mac);
}

TokenClaims verify_token(ByteView secret, std::string_view wire, int64_t now) {
  auto first = wire.find('.');
  auto second = first == std::string_view::npos ? first : wire.find('.', first + 1);
  if (second == std::string_view::npos ||
      wire.find('.', second + 1) != std::string_view::npos) {
    throw Error(Errc::TokenMalformed, "token must have three segments");
  }
  std::string_view header_part = wire.substr(0, first);
  std::string_view payload_part = wire.substr(first + 1, second - first - 1);
  std::string_view mac_part = wire.substr(second + 1);

  Bytes header_bytes;
  Bytes payload_bytes;
  try {
    header_bytes = base64url_decode(header_part);
    payload_bytes = base64url_decode(payload_part);
    base64url_decode(mac_part);
  } catch (const Error&) {
    throw Error(Errc::TokenMalformed, "token segment is not base64url");
  }
  if (to_string(header_bytes) != kTokenHeader) {
    throw Error(Errc::TokenMalformed, "unsupported token header");
  }

  // Compare against the canonical text of the expected mac so that
  // non-canonical trailing bits cannot alias a valid signature.
  std::string_view signing_input = wire.substr(0, second);
  std::string expected =
      base64url_encode(hmac_sha256(secret, as_bytes(signing_input)));
  if (!equal_ct(as_bytes(expected), as_bytes(mac_part))) {
    throw Error(Errc::TokenBadSignature, "token signature mismatch");
  }

  TokenClaims claims;
  try {
    json payload = json::parse(payload_bytes);
    claims.sub = payload.at("sub").get<std::string>();
    claims.exp = payload.at("exp").get<int64_t>();
    auto role = parse_role(payload.at("role").get<std::string>());
    if (!role) throw Error(Errc::TokenMalformed, "unknown role");
    claims.role = *role;
  } catch (const json::exception&) {
    throw Error(Errc::TokenMalformed, "token payload is not valid");
  }
  if (now >= claims.exp) throw Error(Errc::TokenExpired, "token expired");
  return claims;
}

}  // namespace verifi::crypto

namespace verifi {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::Applicant: return "applicant";
    case Role::Company: return "company";
    case Role::Admin: return "admin";
  }
  return "unknown";
}

std::optional<Role> parse_role(std::string_view text) {
  if (text == "applicant") return Role::Applicant;
  if (text == "company") return Role::Company;
  if (text == "admin") return Role::Admin;
  return std::nullopt;
}

Cid Cid::parse(std::string_view text) {
  if (!text.starts_with(kPrefix)) {
    throw Error(Errc::InvalidArgument, "cid must start with \"vc1:\"");
  }
  return from_hex(text.substr(kPrefix.size()));
}

Cid Cid::from_hex(std::string_view hex) {
  return Cid(hex_decode_fixed<32>(hex));
}

}  // namespace verifi
