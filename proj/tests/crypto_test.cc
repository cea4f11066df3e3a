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

#include <gtest/gtest.h>

#include <set>

#include "support/oracles.h"

namespace verifi::crypto {
namespace {

using verifi::testing::kGcm;
using verifi::testing::kRfc8032;

TEST(Ed25519, Rfc8032Vectors) {
  for (const auto& v : kRfc8032) {
    KeyPair kp = keypair_from_seed(hex_decode_fixed<32>(v.secret));
    EXPECT_EQ(hex_encode(kp.public_key), v.public_key);
    Bytes msg = hex_decode(v.message);
    Signature sig = sign(kp, msg);
    EXPECT_EQ(hex_encode(sig), v.signature);
    EXPECT_TRUE(verify_sig(kp.public_key, msg, sig));
  }
}

TEST(Ed25519, KeygenDistinctAndDeterministicDerivation) {
  KeyPair a = keygen();
  KeyPair b = keygen();
  EXPECT_NE(a.public_key, b.public_key);
  EXPECT_EQ(keypair_from_seed(a.secret_seed).public_key, a.public_key);
  EXPECT_EQ(keypair_from_seed(a.secret_seed).public_key,
            keypair_from_seed(a.secret_seed).public_key);
}

TEST(Ed25519, RoundTripAndTamper) {
  KeyPair kp = keygen();
  Bytes msg = to_bytes("hello");
  Signature sig = sign(kp, msg);
  EXPECT_TRUE(verify_sig(kp.public_key, msg, sig));
  Bytes flipped = msg;
  flipped[0] ^= 0x01;
  EXPECT_FALSE(verify_sig(kp.public_key, flipped, sig));
}

TEST(Ed25519, MalformedLengthsThrow) {
  KeyPair kp = keygen();
  Signature sig = sign(kp, {});
  Bytes short_key(31);
  Bytes short_sig(63);
  try {
    verify_sig(short_key, {}, sig);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Malformed);
  }
  try {
    verify_sig(kp.public_key, {}, short_sig);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Malformed);
  }
}

TEST(Ed25519, FuzzedRoundTripAndTamper) {
  KeyPair kp = keygen();
  for (int i = 0; i < 1000; ++i) {
    Bytes msg = random_bytes(1 + i % 97);
    Signature sig = sign(kp, msg);
    ASSERT_TRUE(verify_sig(kp.public_key, msg, sig));
    Bytes bit = random_bytes(2);
    std::size_t pos = bit[0] % msg.size();
    msg[pos] ^= static_cast<uint8_t>(1u << (bit[1] % 8));
    ASSERT_FALSE(verify_sig(kp.public_key, msg, sig));
  }
}

TEST(Aes256Gcm, KnownAnswerVectors) {
  for (const auto& v : kGcm) {
    SymmetricKey key{hex_decode_fixed<32>(v.key)};
    Nonce nonce = hex_decode_fixed<12>(v.iv);
    Bytes pt = hex_decode(v.plaintext);
    Bytes aad = hex_decode(v.aad);
    Bytes body = aead_seal(key, nonce, pt, aad);
    EXPECT_EQ(hex_encode(body), std::string(v.ciphertext) + v.tag);
    EXPECT_EQ(aead_open(key, nonce, body, aad), pt);
  }
}

TEST(Aes256Gcm, CidRoundTripAndTamper) {
  SymmetricKey key = SymmetricKey::generate();
  for (int i = 0; i < 1000; ++i) {
    Digest32 d{};
    fill_random(d);
    Cid cid(d);
    Ciphertext ct = encrypt_cid(key, cid);
    ASSERT_EQ(ct.body.size(), 48u);
    ASSERT_EQ(decrypt_cid(key, ct), cid);

    Bytes r = random_bytes(2);
    Ciphertext bad = ct;
    std::size_t bit = (r[0] | (r[1] << 8)) % ((12 + bad.body.size()) * 8);
    if (bit < 96) {
      bad.nonce[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
    } else {
      bit -= 96;
      bad.body[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
    }
    try {
      decrypt_cid(key, bad);
      FAIL() << "tampered ciphertext accepted";
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), Errc::AuthFailure);
    }
  }
}

TEST(Aes256Gcm, WrongKeyFails) {
  Cid cid(sha256(as_bytes("x")));
  Ciphertext ct = encrypt_cid(SymmetricKey::generate(), cid);
  EXPECT_THROW(decrypt_cid(SymmetricKey::generate(), ct), Error);
}

TEST(Aes256Gcm, NoncesNeverRepeat) {
  SymmetricKey key = SymmetricKey::generate();
  Cid cid(sha256(as_bytes("nonce")));
  std::set<Nonce> seen;
  for (int i = 0; i < 10000; ++i) {
    ASSERT_TRUE(seen.insert(encrypt_cid(key, cid).nonce).second);
  }
}

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(hex_encode(sha256({})),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(hex_encode(sha256(as_bytes("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Sha256 h;
  h.update(as_bytes("a")).update(as_bytes("bc"));
  EXPECT_EQ(hex_encode(h.finish()), hex_encode(sha256(as_bytes("abc"))));
}

TEST(Hmac, Rfc4231Case2) {
  EXPECT_EQ(hex_encode(hmac_sha256(as_bytes("Jefe"),
                                   as_bytes("what do ya want for nothing?"))),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

class TokenTest : public ::testing::Test {
 protected:
  Bytes secret = random_bytes(32);
  const int64_t now = 1'700'000'000;
};

TEST_F(TokenTest, IssueThenVerify) {
  std::string tok = issue_token(secret, "alice", Role::Applicant, 3600, now);
  TokenClaims c = verify_token(secret, tok, now);
  EXPECT_EQ(c.sub, "alice");
  EXPECT_EQ(c.role, Role::Applicant);
  EXPECT_EQ(c.exp, now + 3600);
}

TEST_F(TokenTest, WireFormIsCanonical) {
  std::string tok = issue_token(secret, "bob", Role::Company, 60, now);
  auto dot1 = tok.find('.');
  auto dot2 = tok.find('.', dot1 + 1);
  EXPECT_EQ(to_string(base64url_decode(tok.substr(0, dot1))),
            R"({"alg":"HS256","typ":"token"})");
  EXPECT_EQ(to_string(base64url_decode(tok.substr(dot1 + 1, dot2 - dot1 - 1))),
            R"({"exp":1700000060,"role":"company","sub":"bob"})");
  Digest32 mac = hmac_sha256(secret, as_bytes(tok.substr(0, dot2)));
  EXPECT_EQ(tok.substr(dot2 + 1), base64url_encode(mac));
}

TEST_F(TokenTest, AlteredMacCharacterIsBadSignature) {
  std::string tok = issue_token(secret, "alice", Role::Admin, 3600, now);
  for (char replacement : {'A', 'B', 'Q', 'w', '0', '-'}) {
    std::string bad = tok;
    if (bad.back() == replacement) continue;
    bad.back() = replacement;
    try {
      verify_token(secret, bad, now);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::TokenBadSignature);
    }
  }
}

TEST_F(TokenTest, ExpiredAtAndAfterExp) {
  std::string tok = issue_token(secret, "alice", Role::Applicant, 1, now);
  EXPECT_NO_THROW(verify_token(secret, tok, now));
  for (int64_t t : {now + 1, now + 2}) {
    try {
      verify_token(secret, tok, t);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::TokenExpired);
    }
  }
}

TEST_F(TokenTest, MalformedAndWrongSecret) {
  for (std::string bad : {"", "abc", "a.b", "a.b.c.d", "!!.??.**"}) {
    try {
      verify_token(secret, bad, now);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::TokenMalformed) << bad;
    }
  }
  std::string tok = issue_token(secret, "alice", Role::Applicant, 60, now);
  try {
    verify_token(random_bytes(32), tok, now);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TokenBadSignature);
  }
}

TEST_F(TokenTest, ZeroTtlRejected) {
  EXPECT_THROW(issue_token(secret, "a", Role::Applicant, 0, now), Error);
}

TEST(Codec, Base64AndHex) {
  Bytes data = to_bytes("any carnal pleas");
  EXPECT_EQ(base64_encode(data), "YW55IGNhcm5hbCBwbGVhcw==");
  EXPECT_EQ(base64_decode("YW55IGNhcm5hbCBwbGVhcw=="), data);
  EXPECT_EQ(base64url_decode(base64url_encode(data)), data);
  EXPECT_THROW(base64_decode("YW5=IGNh"), Error);
  EXPECT_THROW(hex_decode("abc"), Error);
  EXPECT_THROW(hex_decode_fixed<2>("ABCD"), Error);
  for (int n = 0; n < 64; ++n) {
    Bytes r = random_bytes(static_cast<std::size_t>(n));
    ASSERT_EQ(base64_decode(base64_encode(r)), r);
    ASSERT_EQ(base64url_decode(base64url_encode(r)), r);
    ASSERT_EQ(hex_decode(hex_encode(r)), r);
  }
}

}  // namespace
}  // namespace verifi::crypto
