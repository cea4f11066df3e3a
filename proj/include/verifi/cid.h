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

#include <compare>
#include <string>
#include <string_view>

#include "verifi/bytes.h"

namespace verifi {

// Content identifier: SHA-256 of exactly one canonical DAG-node encoding.
class Cid {
 public:
  static constexpr std::string_view kPrefix = "vc1:";

  Cid() = default;
  explicit Cid(const Digest32& digest) : digest_(digest) {}

  const Digest32& digest() const { return digest_; }
  std::string hex() const { return hex_encode(digest_); }
  // "vc1:<64 lowercase hex>"
  std::string to_string() const { return std::string(kPrefix) + hex(); }

  // Accepts only the prefixed text form.
  static Cid parse(std::string_view text);
  static Cid from_hex(std::string_view hex);

  friend auto operator<=>(const Cid&, const Cid&) = default;

 private:
  Digest32 digest_{};
};

}  // namespace verifi

template <>
struct std::hash<verifi::Cid> {
  std::size_t operator()(const verifi::Cid& c) const noexcept {
    std::size_t h = 0;
    for (int i = 0; i < 8; ++i) h = (h << 8) | c.digest()[i];
    return h;
  }
};
