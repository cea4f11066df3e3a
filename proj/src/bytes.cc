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

#include "verifi/bytes.h"

#include <openssl/evp.h>

namespace verifi {
namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool is_base64_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
         (c >= '0' && c <= '9') || c == '+' || c == '/';
}

}  // namespace

std::string hex_encode(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(data.size() * 2, '\0');
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[2 * i] = kDigits[data[i] >> 4];
    out[2 * i + 1] = kDigits[data[i] & 0x0f];
  }
  return out;
}

Bytes hex_decode(std::string_view text) {
  if (text.size() % 2 != 0) {
    throw Error(Errc::InvalidArgument, "hex string has odd length");
  }
  Bytes out(text.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(text[2 * i]);
    int lo = hex_value(text[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw Error(Errc::InvalidArgument, "invalid hex character");
    }
    out[i] = static_cast<uint8_t>((hi << 4) | lo);
  }
  return out;
}

bool is_lower_hex(std::string_view text, std::size_t expected_chars) {
  if (text.size() != expected_chars) return false;
  for (char c : text) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

std::string base64_encode(ByteView data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw Error(Errc::InvalidArgument, "base64 length is not a multiple of 4");
  }
  std::size_t padding = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '=') {
      if (i + 2 < text.size()) {
        throw Error(Errc::InvalidArgument, "misplaced base64 padding");
      }
      ++padding;
    } else if (padding != 0 || !is_base64_char(c)) {
      throw Error(Errc::InvalidArgument, "invalid base64 character");
    }
  }
  if (text.empty()) return {};
  Bytes out(3 * text.size() / 4);
  int n = EVP_DecodeBlock(out.data(),
                          reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::InvalidArgument, "invalid base64");
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::string base64url_encode(ByteView data) {
  std::string s = base64_encode(data);
  while (!s.empty() && s.back() == '=') s.pop_back();
  for (char& c : s) {
    if (c == '+') c = '-';
    else if (c == '/') c = '_';
  }
  return s;
}

Bytes base64url_decode(std::string_view text) {
  std::string s;
  s.reserve(text.size() + 3);
  for (char c : text) {
    if (c == '+' || c == '/' || c == '=') {
      throw Error(Errc::InvalidArgument, "invalid base64url character");
    }
    s.push_back(c == '-' ? '+' : c == '_' ? '/' : c);
  }
  if (s.size() % 4 == 1) {
    throw Error(Errc::InvalidArgument, "invalid base64url length");
  }
  while (s.size() % 4 != 0) s.push_back('=');
  return base64_decode(s);
}

void append_be32(Bytes& out, uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<uint8_t>(v >> shift));
  }
}

void append_be64(Bytes& out, uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<uint8_t>(v >> shift));
  }
}

uint32_t load_be32(const uint8_t* p) {
  return (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) |
         (uint32_t{p[2]} << 8) | uint32_t{p[3]};
}

uint64_t load_be64(const uint8_t* p) {
  return (uint64_t{load_be32(p)} << 32) | load_be32(p + 4);
}

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::Internal: return "Internal";
    case Errc::NotFound: return "NotFound";
    case Errc::CorruptObject: return "CorruptObject";
    case Errc::Malformed: return "Malformed";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::TokenMalformed: return "TokenMalformed";
    case Errc::TokenBadSignature: return "TokenBadSignature";
    case Errc::TokenExpired: return "TokenExpired";
    case Errc::BadSignature: return "BadSignature";
    case Errc::FeeNotApproved: return "FeeNotApproved";
    case Errc::InsufficientBalance: return "InsufficientBalance";
    case Errc::DuplicateTx: return "DuplicateTx";
    case Errc::QuorumNotReached: return "QuorumNotReached";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::UnknownTx: return "UnknownTx";
    case Errc::DuplicateUser: return "DuplicateUser";
    case Errc::BadCredentials: return "BadCredentials";
    case Errc::Unauthenticated: return "Unauthenticated";
    case Errc::Unauthorized: return "Unauthorized";
    case Errc::Forbidden: return "Forbidden";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::TooLarge: return "TooLarge";
    case Errc::WrongState: return "WrongState";
    case Errc::AnchorFailed: return "AnchorFailed";
    case Errc::DuplicatePending: return "DuplicatePending";
    case Errc::TamperDetected: return "TamperDetected";
    case Errc::AlreadyInitialized: return "AlreadyInitialized";
    case Errc::NotInitialized: return "NotInitialized";
    case Errc::Locked: return "Locked";
  }
  return "Unknown";
}

}  // namespace verifi
