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

#include "verifi/ed25519_batch.h"

#include <sodium.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <vector>

namespace verifi::crypto {
namespace {

// ---------------------------------------------------------------------------
// GF(2^255 - 19), radix 2^51. Every operation returns limbs below 2^52.
// ---------------------------------------------------------------------------

using u64 = uint64_t;
using u128 = unsigned __int128;

constexpr u64 kMask51 = (u64{1} << 51) - 1;

struct Fe {
  u64 v[5];
};

constexpr Fe kZero{{0, 0, 0, 0, 0}};
constexpr Fe kOne{{1, 0, 0, 0, 0}};

u64 load64_le(const uint8_t* p) {
  u64 r = 0;
  for (int i = 7; i >= 0; --i) r = (r << 8) | p[i];
  return r;
}

void store64_le(uint8_t* p, u64 v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

inline Fe fe_carry(Fe a) {
  u64 c;
  c = a.v[0] >> 51; a.v[0] &= kMask51; a.v[1] += c;
  c = a.v[1] >> 51; a.v[1] &= kMask51; a.v[2] += c;
  c = a.v[2] >> 51; a.v[2] &= kMask51; a.v[3] += c;
  c = a.v[3] >> 51; a.v[3] &= kMask51; a.v[4] += c;
  c = a.v[4] >> 51; a.v[4] &= kMask51; a.v[0] += c * 19;
  return a;
}

inline Fe fe_add(const Fe& a, const Fe& b) {
  Fe r;
  for (int i = 0; i < 5; ++i) r.v[i] = a.v[i] + b.v[i];
  return fe_carry(r);
}

// a - b computed as a + 4p - b.
inline Fe fe_sub(const Fe& a, const Fe& b) {
  constexpr u64 k4p0 = 0x1FFFFFFFFFFFB4ULL;
  constexpr u64 k4pi = 0x1FFFFFFFFFFFFCULL;
  Fe r;
  r.v[0] = a.v[0] + k4p0 - b.v[0];
  for (int i = 1; i < 5; ++i) r.v[i] = a.v[i] + k4pi - b.v[i];
  return fe_carry(r);
}

inline Fe fe_neg(const Fe& a) { return fe_sub(kZero, a); }

inline Fe fe_reduce_wide(u128 r0, u128 r1, u128 r2, u128 r3, u128 r4) {
  Fe out;
  r1 += static_cast<u64>(r0 >> 51);
  out.v[0] = static_cast<u64>(r0) & kMask51;
  r2 += static_cast<u64>(r1 >> 51);
  out.v[1] = static_cast<u64>(r1) & kMask51;
  r3 += static_cast<u64>(r2 >> 51);
  out.v[2] = static_cast<u64>(r2) & kMask51;
  r4 += static_cast<u64>(r3 >> 51);
  out.v[3] = static_cast<u64>(r3) & kMask51;
  u64 c = static_cast<u64>(r4 >> 51);
  out.v[4] = static_cast<u64>(r4) & kMask51;
  out.v[0] += c * 19;
  c = out.v[0] >> 51;
  out.v[0] &= kMask51;
  out.v[1] += c;
  return out;
}

inline Fe fe_mul(const Fe& a, const Fe& b) {
  const u64 a0 = a.v[0], a1 = a.v[1], a2 = a.v[2], a3 = a.v[3], a4 = a.v[4];
  const u64 b0 = b.v[0], b1 = b.v[1], b2 = b.v[2], b3 = b.v[3], b4 = b.v[4];
  const u64 b1_19 = b1 * 19, b2_19 = b2 * 19, b3_19 = b3 * 19, b4_19 = b4 * 19;

  u128 r0 = (u128)a0 * b0 + (u128)a1 * b4_19 + (u128)a2 * b3_19 +
            (u128)a3 * b2_19 + (u128)a4 * b1_19;
  u128 r1 = (u128)a0 * b1 + (u128)a1 * b0 + (u128)a2 * b4_19 +
            (u128)a3 * b3_19 + (u128)a4 * b2_19;
  u128 r2 = (u128)a0 * b2 + (u128)a1 * b1 + (u128)a2 * b0 +
            (u128)a3 * b4_19 + (u128)a4 * b3_19;
  u128 r3 = (u128)a0 * b3 + (u128)a1 * b2 + (u128)a2 * b1 + (u128)a3 * b0 +
            (u128)a4 * b4_19;
  u128 r4 = (u128)a0 * b4 + (u128)a1 * b3 + (u128)a2 * b2 + (u128)a3 * b1 +
            (u128)a4 * b0;

  return fe_reduce_wide(r0, r1, r2, r3, r4);
}

inline Fe fe_sq(const Fe& a) {
  const u64 a0 = a.v[0], a1 = a.v[1], a2 = a.v[2], a3 = a.v[3], a4 = a.v[4];
  const u64 d0 = 2 * a0, d1 = 2 * a1, d2 = 2 * a2;
  const u64 a3_19 = 19 * a3, a4_19 = 19 * a4;
  u128 r0 = (u128)a0 * a0 + (u128)d1 * a4_19 + (u128)d2 * a3_19;
  u128 r1 = (u128)d0 * a1 + (u128)d2 * a4_19 + (u128)a3 * a3_19;
  u128 r2 = (u128)d0 * a2 + (u128)a1 * a1 + (u128)(2 * a3) * a4_19;
  u128 r3 = (u128)d0 * a3 + (u128)d1 * a2 + (u128)a4 * a4_19;
  u128 r4 = (u128)d0 * a4 + (u128)d1 * a3 + (u128)a2 * a2;
  return fe_reduce_wide(r0, r1, r2, r3, r4);
}

Fe fe_sq_n(Fe a, int n) {
  for (int i = 0; i < n; ++i) a = fe_sq(a);
  return a;
}

Fe fe_frombytes(const uint8_t* s) {
  Fe h;
  h.v[0] = load64_le(s) & kMask51;
  h.v[1] = (load64_le(s + 6) >> 3) & kMask51;
  h.v[2] = (load64_le(s + 12) >> 6) & kMask51;
  h.v[3] = (load64_le(s + 19) >> 1) & kMask51;
  h.v[4] = (load64_le(s + 24) >> 12) & kMask51;
  return h;
}

// Fully reduced little-endian encoding.
std::array<uint8_t, 32> fe_tobytes(Fe h) {
  h = fe_carry(fe_carry(h));
  u64 q = (h.v[0] + 19) >> 51;
  q = (h.v[1] + q) >> 51;
  q = (h.v[2] + q) >> 51;
  q = (h.v[3] + q) >> 51;
  q = (h.v[4] + q) >> 51;
  h.v[0] += 19 * q;
  u64 c;
  c = h.v[0] >> 51; h.v[0] &= kMask51; h.v[1] += c;
  c = h.v[1] >> 51; h.v[1] &= kMask51; h.v[2] += c;
  c = h.v[2] >> 51; h.v[2] &= kMask51; h.v[3] += c;
  c = h.v[3] >> 51; h.v[3] &= kMask51; h.v[4] += c;
  h.v[4] &= kMask51;

  std::array<uint8_t, 32> s{};
  store64_le(s.data(), h.v[0] | (h.v[1] << 51));
  store64_le(s.data() + 8, (h.v[1] >> 13) | (h.v[2] << 38));
  store64_le(s.data() + 16, (h.v[2] >> 26) | (h.v[3] << 25));
  store64_le(s.data() + 24, (h.v[3] >> 39) | (h.v[4] << 12));
  return s;
}

bool fe_is_zero(const Fe& a) {
  auto s = fe_tobytes(a);
  return std::all_of(s.begin(), s.end(), [](uint8_t b) { return b == 0; });
}

bool fe_equal(const Fe& a, const Fe& b) { return fe_is_zero(fe_sub(a, b)); }

bool fe_is_negative(const Fe& a) { return (fe_tobytes(a)[0] & 1) != 0; }

// z^((p-5)/8) = z^(2^252 - 3)
Fe fe_pow22523(const Fe& z) {
  Fe t0 = fe_sq(z);                   // 2
  Fe t1 = fe_sq_n(t0, 2);             // 8
  t1 = fe_mul(z, t1);                 // 9
  t0 = fe_mul(t0, t1);                // 11
  t0 = fe_sq(t0);                     // 22
  t0 = fe_mul(t1, t0);                // 2^5 - 1
  t1 = fe_sq_n(t0, 5);
  t0 = fe_mul(t1, t0);                // 2^10 - 1
  t1 = fe_sq_n(t0, 10);
  t1 = fe_mul(t1, t0);                // 2^20 - 1
  Fe t2 = fe_sq_n(t1, 20);
  t1 = fe_mul(t2, t1);                // 2^40 - 1
  t1 = fe_sq_n(t1, 10);
  t0 = fe_mul(t1, t0);                // 2^50 - 1
  t1 = fe_sq_n(t0, 50);
  t1 = fe_mul(t1, t0);                // 2^100 - 1
  t2 = fe_sq_n(t1, 100);
  t1 = fe_mul(t2, t1);                // 2^200 - 1
  t1 = fe_sq_n(t1, 50);
  t0 = fe_mul(t1, t0);                // 2^250 - 1
  t0 = fe_sq_n(t0, 2);                // 2^252 - 4
  return fe_mul(t0, z);               // 2^252 - 3
}

// z^(p-2)
Fe fe_invert(const Fe& z) {
  Fe t0 = fe_sq(z);                   // 2
  Fe t1 = fe_sq_n(t0, 2);             // 8
  t1 = fe_mul(z, t1);                 // 9
  t0 = fe_mul(t0, t1);                // 11
  Fe t2 = fe_sq(t0);                  // 22
  t1 = fe_mul(t1, t2);                // 2^5 - 1
  t2 = fe_sq_n(t1, 5);
  t1 = fe_mul(t2, t1);                // 2^10 - 1
  t2 = fe_sq_n(t1, 10);
  t2 = fe_mul(t2, t1);                // 2^20 - 1
  Fe t3 = fe_sq_n(t2, 20);
  t2 = fe_mul(t3, t2);                // 2^40 - 1
  t2 = fe_sq_n(t2, 10);
  t1 = fe_mul(t2, t1);                // 2^50 - 1
  t2 = fe_sq_n(t1, 50);
  t2 = fe_mul(t2, t1);                // 2^100 - 1
  t3 = fe_sq_n(t2, 100);
  t2 = fe_mul(t3, t2);                // 2^200 - 1
  t2 = fe_sq_n(t2, 50);
  t1 = fe_mul(t2, t1);                // 2^250 - 1
  t1 = fe_sq_n(t1, 5);                // 2^255 - 2^5
  return fe_mul(t1, t0);              // 2^255 - 21
}

Fe fe_from_hex_le(const char* hex) {
  auto raw = hex_decode(hex);
  return fe_frombytes(raw.data());
}

struct Constants {
  Fe d = fe_from_hex_le(
      "a3785913ca4deb75abd841414d0a700098e879777940c78c73fe6f2bee6c0352");
  Fe d2 = fe_from_hex_le(
      "59f1b226949bd6eb56b183829a14e00030d1f3eef2808e19e7fcdf56dcd90624");
  Fe sqrtm1 = fe_from_hex_le(
      "b0a00e4a271beec478e42fad0618432fa7d7fb3d99004d2b0bdfc14f8024832b");
};

const Constants& constants() {
  static const Constants c;
  return c;
}

// ---------------------------------------------------------------------------
// Extended twisted Edwards coordinates, a = -1.
// ---------------------------------------------------------------------------

struct Ge {
  Fe X, Y, Z, T;
};

Ge ge_identity() { return {kZero, kOne, kOne, kZero}; }

Ge ge_add(const Ge& p, const Ge& q) {
  const Fe& d2 = constants().d2;
  Fe a = fe_mul(fe_sub(p.Y, p.X), fe_sub(q.Y, q.X));
  Fe b = fe_mul(fe_add(p.Y, p.X), fe_add(q.Y, q.X));
  Fe c = fe_mul(fe_mul(p.T, d2), q.T);
  Fe zz = fe_mul(p.Z, q.Z);
  Fe d = fe_add(zz, zz);
  Fe e = fe_sub(b, a);
  Fe f = fe_sub(d, c);
  Fe g = fe_add(d, c);
  Fe h = fe_add(b, a);
  return {fe_mul(e, f), fe_mul(g, h), fe_mul(f, g), fe_mul(e, h)};
}

Ge ge_dbl(const Ge& p) {
  Fe a = fe_sq(p.X);
  Fe b = fe_sq(p.Y);
  Fe zz = fe_sq(p.Z);
  Fe c = fe_add(zz, zz);
  Fe d = fe_neg(a);
  Fe e = fe_sub(fe_sub(fe_sq(fe_add(p.X, p.Y)), a), b);
  Fe g = fe_add(d, b);
  Fe f = fe_sub(g, c);
  Fe h = fe_sub(d, b);
  return {fe_mul(e, f), fe_mul(g, h), fe_mul(f, g), fe_mul(e, h)};
}

bool ge_is_identity(const Ge& p) {
  return fe_is_zero(p.X) && fe_equal(p.Y, p.Z);
}

bool ge_has_small_order(const Ge& p) {
  return ge_is_identity(ge_dbl(ge_dbl(ge_dbl(p))));
}

// Rejects non-canonical y (y >= p) and points not on the curve.
bool ge_decode(const uint8_t* s, Ge& out) {
  const Constants& k = constants();
  Fe y = fe_frombytes(s);
  auto canon = fe_tobytes(y);
  for (int i = 0; i < 31; ++i) {
    if (canon[i] != s[i]) return false;
  }
  if (canon[31] != (s[31] & 0x7f)) return false;
  const bool sign = (s[31] >> 7) != 0;

  Fe y2 = fe_sq(y);
  Fe u = fe_sub(y2, kOne);
  Fe v = fe_add(fe_mul(k.d, y2), kOne);
  Fe v3 = fe_mul(fe_sq(v), v);
  Fe v7 = fe_mul(fe_sq(v3), v);
  Fe x = fe_mul(fe_mul(u, v3), fe_pow22523(fe_mul(u, v7)));
  Fe vx2 = fe_mul(v, fe_sq(x));
  if (!fe_equal(vx2, u)) {
    if (!fe_equal(vx2, fe_neg(u))) return false;
    x = fe_mul(x, k.sqrtm1);
  }
  if (fe_is_zero(x) && sign) return false;
  if (fe_is_negative(x) != sign) x = fe_neg(x);
  out = {x, y, kOne, fe_mul(x, y)};
  return true;
}

detail::Encoded ge_encode(const Ge& p) {
  Fe zi = fe_invert(p.Z);
  Fe x = fe_mul(p.X, zi);
  Fe y = fe_mul(p.Y, zi);
  auto s = fe_tobytes(y);
  s[31] ^= static_cast<uint8_t>(fe_is_negative(x) ? 0x80 : 0);
  return s;
}

const Ge& base_point() {
  static const Ge b = [] {
    auto raw = hex_decode(
        "5866666666666666666666666666666666666666666666666666666666666666");
    Ge g;
    ge_decode(raw.data(), g);
    return g;
  }();
  return b;
}

// ---------------------------------------------------------------------------
// Multi-scalar multiplication (bucket method, variable time).
// ---------------------------------------------------------------------------

using Scalar = detail::Encoded;

unsigned scalar_bits(const Scalar& s) {
  for (int i = 31; i >= 0; --i) {
    if (s[i] != 0) return static_cast<unsigned>(8 * i + 32 - __builtin_clz(s[i]));
  }
  return 0;
}

unsigned window_digit(const Scalar& s, unsigned pos, unsigned width) {
  unsigned idx = pos / 8;
  unsigned shift = pos % 8;
  uint32_t v = 0;
  for (unsigned i = 0; i < 4 && idx + i < 32; ++i) {
    v |= uint32_t{s[idx + i]} << (8 * i);
  }
  return (v >> shift) & ((1u << width) - 1);
}

Ge msm(std::span<const Ge> points, std::span<const Scalar> scalars) {
  const std::size_t n = points.size();
  unsigned max_bits = 0;
  for (const auto& s : scalars) max_bits = std::max(max_bits, scalar_bits(s));
  if (n == 0 || max_bits == 0) return ge_identity();

  unsigned log2n = 0;
  while ((std::size_t{1} << (log2n + 1)) <= n) ++log2n;
  const unsigned width = std::clamp(log2n >= 3 ? log2n - 3 : 0u, 3u, 16u);
  const unsigned windows = (max_bits + width - 1) / width;
  const std::size_t bucket_count = (std::size_t{1} << width) - 1;

  std::vector<Ge> buckets(bucket_count);
  std::vector<uint8_t> used(bucket_count);
  Ge acc = ge_identity();
  bool acc_set = false;

  for (unsigned w = windows; w-- > 0;) {
    if (acc_set) {
      for (unsigned i = 0; i < width; ++i) acc = ge_dbl(acc);
    }
    std::fill(used.begin(), used.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      unsigned digit = window_digit(scalars[i], w * width, width);
      if (digit == 0) continue;
      if (used[digit - 1]) {
        buckets[digit - 1] = ge_add(buckets[digit - 1], points[i]);
      } else {
        buckets[digit - 1] = points[i];
        used[digit - 1] = 1;
      }
    }
    // sum_j j * bucket_j via running sums.
    Ge running{}, total{};
    bool running_set = false, total_set = false;
    for (std::size_t j = bucket_count; j-- > 0;) {
      if (used[j]) {
        running = running_set ? ge_add(running, buckets[j]) : buckets[j];
        running_set = true;
      }
      if (running_set) {
        total = total_set ? ge_add(total, running) : running;
        total_set = true;
      }
    }
    if (total_set) {
      acc = acc_set ? ge_add(acc, total) : total;
      acc_set = true;
    }
  }
  return acc;
}

bool scalar_is_canonical(const uint8_t* s) {
  // L = 2^252 + 27742317777372353535851937790883648493, little-endian.
  static constexpr uint8_t kL[32] = {
      0xed, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58, 0xd6, 0x9c, 0xf7,
      0xa2, 0xde, 0xf9, 0xde, 0x14, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
      0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10};
  for (int i = 31; i >= 0; --i) {
    if (s[i] < kL[i]) return true;
    if (s[i] > kL[i]) return false;
  }
  return false;
}

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw Error(Errc::Internal, "libsodium initialization failed");
}

}  // namespace

bool verify_batch(std::span<const SignatureCheck> items) {
  for (const auto& item : items) {
    if (item.public_key.size() != 32) {
      throw Error(Errc::Malformed, "public key must be 32 bytes");
    }
    if (item.signature.size() != 64) {
      throw Error(Errc::Malformed, "signature must be 64 bytes");
    }
  }
  if (items.empty()) return true;
  ensure_sodium();

  const std::size_t n = items.size();
  std::vector<Ge> r_points(n);
  std::vector<Scalar> r_scalars(n);
  Scalar base_coeff{};

  struct KeyTerm {
    Ge point;
    Scalar coeff{};
  };
  std::map<Scalar, KeyTerm> keys;

  Bytes z_random(16 * n);
  randombytes_buf(z_random.data(), z_random.size());

  for (std::size_t i = 0; i < n; ++i) {
    const auto& item = items[i];
    const uint8_t* sig = item.signature.data();
    if (!scalar_is_canonical(sig + 32)) return false;
    if (!ge_decode(sig, r_points[i]) || ge_has_small_order(r_points[i])) {
      return false;
    }
    Scalar pk{};
    std::copy(item.public_key.begin(), item.public_key.end(), pk.begin());
    auto it = keys.find(pk);
    if (it == keys.end()) {
      KeyTerm term;
      if (!ge_decode(pk.data(), term.point) || ge_has_small_order(term.point)) {
        return false;
      }
      it = keys.emplace(pk, term).first;
    }

    // k = SHA-512(R || A || M) mod L
    uint8_t digest[64];
    crypto_hash_sha512_state st;
    crypto_hash_sha512_init(&st);
    crypto_hash_sha512_update(&st, sig, 32);
    crypto_hash_sha512_update(&st, pk.data(), 32);
    crypto_hash_sha512_update(&st, item.message.data(), item.message.size());
    crypto_hash_sha512_final(&st, digest);
    Scalar k{};
    crypto_core_ed25519_scalar_reduce(k.data(), digest);

    Scalar z{};
    std::memcpy(z.data(), z_random.data() + 16 * i, 16);
    if (std::all_of(z.begin(), z.begin() + 16, [](uint8_t b) { return b == 0; })) {
      z[0] = 1;
    }
    r_scalars[i] = z;

    Scalar tmp{};
    crypto_core_ed25519_scalar_mul(tmp.data(), z.data(), sig + 32);
    crypto_core_ed25519_scalar_add(base_coeff.data(), base_coeff.data(), tmp.data());
    crypto_core_ed25519_scalar_mul(tmp.data(), z.data(), k.data());
    crypto_core_ed25519_scalar_add(it->second.coeff.data(),
                                   it->second.coeff.data(), tmp.data());
  }

  std::vector<Ge> big_points{base_point()};
  std::vector<Scalar> big_scalars(1);
  crypto_core_ed25519_scalar_negate(big_scalars[0].data(), base_coeff.data());
  for (const auto& [pk, term] : keys) {
    big_points.push_back(term.point);
    big_scalars.push_back(term.coeff);
  }

  Ge sum = ge_add(msm(r_points, r_scalars), msm(big_points, big_scalars));
  return ge_has_small_order(sum);
}

namespace detail {

bool multiscalar_mul(std::span<const Encoded> points,
                     std::span<const Encoded> scalars, Encoded& out) {
  if (points.size() != scalars.size()) {
    throw Error(Errc::InvalidArgument, "points and scalars differ in length");
  }
  std::vector<Ge> decoded(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!ge_decode(points[i].data(), decoded[i])) return false;
  }
  out = ge_encode(msm(decoded, scalars));
  return true;
}

}  // namespace detail
}  // namespace verifi::crypto
