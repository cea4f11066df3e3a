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
#include <span>

#include "verifi/bytes.h"

namespace verifi::crypto {

struct SignatureCheck {
  ByteView public_key;
  ByteView message;
  ByteView signature;
};

// Randomized batch verification of Ed25519 signatures.
//
// Checks [8](sum z_i*s_i)B == [8](sum z_i*R_i + sum (z_i*k_i)A_i) for random
// 128-bit z_i with one multi-scalar multiplication. Returns true iff the
// combined equation holds; a false result means at least one signature is
// invalid and callers should narrow down with smaller batches or verify_sig.
// Encoding checks match libsodium: s must be reduced, R and A must be
// canonical and not of small order.
//
// Throws Error(Malformed) on wrong key or signature lengths.
bool verify_batch(std::span<const SignatureCheck> items);

namespace detail {

using Encoded = std::array<uint8_t, 32>;

// sum scalars[i] * points[i] over Ed25519, result encoded. Returns false if
// any point fails to decode. Scalars are little-endian and < 2^256.
bool multiscalar_mul(std::span<const Encoded> points,
                     std::span<const Encoded> scalars, Encoded& out);

}  // namespace detail
}  // namespace verifi::crypto
