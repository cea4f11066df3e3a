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

// Content-addressed object store over a Merkle DAG.
//
// Files are cut into fixed-size leaves, leaves are grouped up to 32 at a time
// into internal nodes until a single root remains, and every node is stored
// under the SHA-256 of its canonical encoding:
//
//   Leaf     := 0x00 || be32(len) || payload
//   Internal := 0x01 || be32(count) || { digest(32) || be64(subtree_size) }*
//
// On disk: <root>/<hex[0..2]>/<hex[2..4]>/<hex>, written temp-then-rename so
// readers never see a partial object.

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "verifi/bytes.h"
#include "verifi/cid.h"
#include "verifi/error.h"

namespace verifi::cas {

inline constexpr std::size_t kChunkSize = 262144;
inline constexpr std::size_t kMaxLeafPayload = 262144;
inline constexpr std::size_t kMinChildren = 2;
inline constexpr std::size_t kMaxChildren = 32;

struct LeafNode {
  Bytes payload;
};

struct ChildLink {
  Cid cid;
  uint64_t subtree_size = 0;
};

struct InternalNode {
  std::vector<ChildLink> children;

  uint64_t subtree_size() const;
};

using DagNode = std::variant<LeafNode, InternalNode>;

uint64_t subtree_size(const DagNode& node);

// Empty input yields one empty leaf. Throws InvalidArgument if chunk_size==0.
std::vector<LeafNode> chunk_bytes(ByteView data,
                                  std::size_t chunk_size = kChunkSize);

// Throws InvalidArgument for a leaf over 256 KiB or an internal node with a
// child count outside 2..32.
Bytes encode_node(const DagNode& node);

// Inverse of encode_node; throws Malformed for anything encode_node could not
// have produced.
DagNode decode_node(ByteView bytes);

Cid cid_of(const DagNode& node);

// Thrown by ObjectStore::get when a stored object no longer hashes to its
// name. cid() is the offending object, not necessarily the requested root.
class CorruptObjectError : public Error {
 public:
  explicit CorruptObjectError(const Cid& cid)
      : Error(Errc::CorruptObject, "corrupt object " + cid.to_string()),
        cid_(cid) {}
  const Cid& cid() const { return cid_; }

 private:
  Cid cid_;
};

class MissingObjectError : public Error {
 public:
  explicit MissingObjectError(const Cid& cid)
      : Error(Errc::NotFound, "object not found " + cid.to_string()),
        cid_(cid) {}
  const Cid& cid() const { return cid_; }

 private:
  Cid cid_;
};

struct IntegrityReport {
  std::vector<Cid> corrupt;  // file content does not hash to its name
  std::vector<Cid> missing;  // referenced by a stored node but absent

  bool clean() const { return corrupt.empty() && missing.empty(); }
};

class ObjectStore {
 public:
  // Creates root_dir if needed.
  explicit ObjectStore(std::filesystem::path root_dir);

  const std::filesystem::path& root() const { return root_; }

  // Stores data as a balanced DAG and returns the root Cid. Objects already
  // present are not rewritten.
  Cid put(ByteView data);

  // Reassembles the content under cid, re-hashing every node on the way.
  // Throws MissingObjectError or CorruptObjectError.
  Bytes get(const Cid& cid) const;

  // Stores one node; returns its Cid.
  Cid put_node(const DagNode& node);

  bool contains(const Cid& cid) const;
  std::filesystem::path object_path(const Cid& cid) const;

  // Every object file currently in the store.
  std::vector<Cid> list() const;
  std::size_t object_count() const { return list().size(); }

  // Exhaustive re-hash of all objects plus a check that every referenced
  // child exists.
  IntegrityReport verify() const;

 private:
  Bytes read_object(const Cid& cid) const;
  void write_object(const Cid& cid, ByteView encoded);

  std::filesystem::path root_;
};

}  // namespace verifi::cas
