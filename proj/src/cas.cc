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

#include "verifi/cas.h"

#include <fstream>
#include <functional>
#include <set>
#include <system_error>

#include "verifi/crypto.h"

namespace verifi::cas {

namespace fs = std::filesystem;

uint64_t InternalNode::subtree_size() const {
  uint64_t total = 0;
  for (const auto& c : children) total += c.subtree_size;
  return total;
}

uint64_t subtree_size(const DagNode& node) {
  if (const auto* leaf = std::get_if<LeafNode>(&node)) {
    return leaf->payload.size();
  }
  return std::get<InternalNode>(node).subtree_size();
}

std::vector<LeafNode> chunk_bytes(ByteView data, std::size_t chunk_size) {
  if (chunk_size == 0) {
    throw Error(Errc::InvalidArgument, "chunk size must be positive");
  }
  std::vector<LeafNode> leaves;
  if (data.empty()) {
    leaves.push_back({});
    return leaves;
  }
  leaves.reserve((data.size() + chunk_size - 1) / chunk_size);
  for (std::size_t off = 0; off < data.size(); off += chunk_size) {
    auto piece = data.subspan(off, std::min(chunk_size, data.size() - off));
    leaves.push_back({Bytes(piece.begin(), piece.end())});
  }
  return leaves;
}

Bytes encode_node(const DagNode& node) {
  Bytes out;
  if (const auto* leaf = std::get_if<LeafNode>(&node)) {
    if (leaf->payload.size() > kMaxLeafPayload) {
      throw Error(Errc::InvalidArgument, "leaf payload exceeds 262144 bytes");
    }
    out.reserve(5 + leaf->payload.size());
    out.push_back(0x00);
    append_be32(out, static_cast<uint32_t>(leaf->payload.size()));
    append(out, leaf->payload);
    return out;
  }
  const auto& internal = std::get<InternalNode>(node);
  const std::size_t n = internal.children.size();
  if (n < kMinChildren || n > kMaxChildren) {
    throw Error(Errc::InvalidArgument,
                "internal node must have 2..32 children, got " + std::to_string(n));
  }
  out.reserve(5 + 40 * n);
  out.push_back(0x01);
  append_be32(out, static_cast<uint32_t>(n));
  for (const auto& child : internal.children) {
    append(out, child.cid.digest());
    append_be64(out, child.subtree_size);
  }
  return out;
}

DagNode decode_node(ByteView bytes) {
  if (bytes.size() < 5) throw Error(Errc::Malformed, "node shorter than header");
  const uint32_t count = load_be32(bytes.data() + 1);
  if (bytes[0] == 0x00) {
    if (count > kMaxLeafPayload || bytes.size() != 5 + std::size_t{count}) {
      throw Error(Errc::Malformed, "leaf length mismatch");
    }
    return LeafNode{Bytes(bytes.begin() + 5, bytes.end())};
  }
  if (bytes[0] != 0x01) throw Error(Errc::Malformed, "unknown node kind");
  if (count < kMinChildren || count > kMaxChildren ||
      bytes.size() != 5 + 40 * std::size_t{count}) {
    throw Error(Errc::Malformed, "internal node length mismatch");
  }
  InternalNode node;
  node.children.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint8_t* p = bytes.data() + 5 + 40 * i;
    Digest32 d{};
    std::copy(p, p + 32, d.begin());
    node.children.push_back({Cid(d), load_be64(p + 32)});
  }
  return node;
}

Cid cid_of(const DagNode& node) { return Cid(crypto::sha256(encode_node(node))); }

ObjectStore::ObjectStore(fs::path root_dir) : root_(std::move(root_dir)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + root_.string() + ": " + ec.message());
}

fs::path ObjectStore::object_path(const Cid& cid) const {
  std::string hex = cid.hex();
  return root_ / hex.substr(0, 2) / hex.substr(2, 2) / hex;
}

bool ObjectStore::contains(const Cid& cid) const {
  std::error_code ec;
  return fs::is_regular_file(object_path(cid), ec);
}

void ObjectStore::write_object(const Cid& cid, ByteView encoded) {
  fs::path path = object_path(cid);
  if (contains(cid)) return;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(Errc::Io, "cannot create " + path.parent_path().string());

  fs::path tmp = path;
  tmp += ".tmp." + hex_encode(crypto::random_bytes(8));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(encoded.data()),
              static_cast<std::streamsize>(encoded.size()));
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::Io, "cannot rename object into place: " + path.string());
  }
}

Cid ObjectStore::put_node(const DagNode& node) {
  Bytes encoded = encode_node(node);
  Cid cid(crypto::sha256(encoded));
  write_object(cid, encoded);
  return cid;
}

Cid ObjectStore::put(ByteView data) {
  std::vector<ChildLink> level;
  for (auto& leaf : chunk_bytes(data)) {
    uint64_t size = leaf.payload.size();
    level.push_back({put_node(leaf), size});
  }
  while (level.size() > 1) {
    std::vector<ChildLink> next;
    for (std::size_t i = 0; i < level.size(); i += kMaxChildren) {
      std::size_t end = std::min(level.size(), i + kMaxChildren);
      if (end - i == 1) {
        // A lone trailing node moves up unchanged.
        next.push_back(level[i]);
        continue;
      }
      InternalNode node{{level.begin() + static_cast<std::ptrdiff_t>(i),
                         level.begin() + static_cast<std::ptrdiff_t>(end)}};
      uint64_t size = node.subtree_size();
      next.push_back({put_node(node), size});
    }
    level = std::move(next);
  }
  return level.front().cid;
}

Bytes ObjectStore::read_object(const Cid& cid) const {
  fs::path path = object_path(cid);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingObjectError(cid);
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::Io, "cannot read " + path.string());
  if (crypto::sha256(bytes) != cid.digest()) throw CorruptObjectError(cid);
  return bytes;
}

namespace {

void assemble(const Cid& cid, Bytes& out,
              const std::function<Bytes(const Cid&)>& read) {
  DagNode node;
  try {
    node = decode_node(read(cid));
  } catch (const Error& e) {
    if (e.code() == Errc::Malformed) throw CorruptObjectError(cid);
    throw;
  }
  if (auto* leaf = std::get_if<LeafNode>(&node)) {
    append(out, leaf->payload);
    return;
  }
  for (const auto& child : std::get<InternalNode>(node).children) {
    const std::size_t before = out.size();
    assemble(child.cid, out, read);
    if (out.size() - before != child.subtree_size) throw CorruptObjectError(cid);
  }
}

}  // namespace

Bytes ObjectStore::get(const Cid& cid) const {
  Bytes out;
  assemble(cid, out, [this](const Cid& c) { return read_object(c); });
  return out;
}

std::vector<Cid> ObjectStore::list() const {
  std::vector<Cid> out;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(root_, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    std::string name = it->path().filename().string();
    if (!is_lower_hex(name, 64)) continue;
    out.push_back(Cid::from_hex(name));
  }
  if (ec) throw Error(Errc::Io, "cannot list " + root_.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

IntegrityReport ObjectStore::verify() const {
  IntegrityReport report;
  std::set<Cid> missing;
  for (const Cid& cid : list()) {
    Bytes bytes;
    try {
      bytes = read_object(cid);
    } catch (const CorruptObjectError&) {
      report.corrupt.push_back(cid);
      continue;
    }
    DagNode node;
    try {
      node = decode_node(bytes);
    } catch (const Error&) {
      report.corrupt.push_back(cid);
      continue;
    }
    if (auto* internal = std::get_if<InternalNode>(&node)) {
      for (const auto& child : internal->children) {
        if (!contains(child.cid)) missing.insert(child.cid);
      }
    }
  }
  report.missing.assign(missing.begin(), missing.end());
  return report;
}

}  // namespace verifi::cas
