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

// REST service over the workflow and ledger. JSON bodies use sorted keys and
// no whitespace; byte fields are standard base64; errors are
// {"code":<STABLE_CODE>,"message":<text>}.

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "verifi/error.h"
#include "verifi/role.h"
#include "verifi/services.h"

namespace verifi::api {

inline constexpr std::size_t kDefaultPageLimit = 50;
inline constexpr std::size_t kMaxPageLimit = 100;
inline constexpr std::size_t kMaxBlockRange = 100;
inline constexpr std::string_view kDefaultBind = "127.0.0.1:8080";

struct ApiError {
  int status = 500;
  std::string code;
};

// Every error code maps to exactly one (status, code) pair.
ApiError map_error(Errc code);

enum class Access {
  Public,         // no token needed
  Authenticated,  // any role
  Roles,          // one of `roles`
};

struct RouteSpec {
  std::string method;
  std::string pattern;  // path template, e.g. /admin/queue/{certificate_id}/claim
  Access access = Access::Public;
  std::set<Role> roles;
};

// The declared route table and its role gates.
const std::vector<RouteSpec>& route_table();

// "host:port"; throws InvalidArgument.
std::pair<std::string, int> parse_bind(std::string_view text);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> web_root;
};

class Server {
 public:
  Server(Services& services, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds the listening socket and returns the port. Throws Io on failure.
  int bind();
  // Serves until stop(); requires bind().
  void run();
  // bind() then run() on a background thread.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace verifi::api
