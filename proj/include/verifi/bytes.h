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

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "verifi/error.h"

namespace verifi {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;
using Digest32 = std::array<uint8_t, 32>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) {
  auto v = as_bytes(s);
  return {v.begin(), v.end()};
}

inline std::string to_string(ByteView b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

// Lowercase hex.
std::string hex_encode(ByteView data);

// Accepts lowercase or uppercase; throws Error(InvalidArgument) on odd length
// or non-hex characters.
Bytes hex_decode(std::string_view text);

bool is_lower_hex(std::string_view text, std::size_t expected_chars);

// Decodes exactly N bytes of lowercase hex (64 chars for a digest). Uppercase
// is rejected so that every value has a single textual form.
template <std::size_t N>
std::array<uint8_t, N> hex_decode_fixed(std::string_view text) {
  if (!is_lower_hex(text, 2 * N)) {
    throw Error(Errc::InvalidArgument,
                "expected " + std::to_string(2 * N) + " lowercase hex chars");
  }
  auto raw = hex_decode(text);
  std::array<uint8_t, N> out{};
  std::copy(raw.begin(), raw.end(), out.begin());
  return out;
}

// RFC 4648 standard alphabet with padding.
std::string base64_encode(ByteView data);
Bytes base64_decode(std::string_view text);

// RFC 4648 url-safe alphabet, no padding.
std::string base64url_encode(ByteView data);
Bytes base64url_decode(std::string_view text);

void append_be32(Bytes& out, uint32_t v);
void append_be64(Bytes& out, uint64_t v);
uint32_t load_be32(const uint8_t* p);
uint64_t load_be64(const uint8_t* p);

inline void append(Bytes& out, ByteView data) {
  out.insert(out.end(), data.begin(), data.end());
}

}  // namespace verifi
