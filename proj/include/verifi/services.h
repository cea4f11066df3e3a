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

#include <functional>
#include <mutex>
#include <optional>

#include "verifi/cas.h"
#include "verifi/datadir.h"
#include "verifi/ledger.h"
#include "verifi/workflow.h"

namespace verifi {

struct ServiceOptions {
  bool fsync = true;
  uint32_t password_iterations = workflow::kPasswordIterations;
  std::size_t block_capacity = ledger::kDefaultBlockCapacity;
  std::function<int64_t()> clock;  // unix seconds; system clock if empty
};

// Everything a running node needs, opened from an initialized data dir.
// A tamper scan raises a TamperAlert to every admin when it finds a violation
// other than the one last reported.
class Services {
 public:
  explicit Services(const DataDir& dir, const ServiceOptions& options = {});

  DataDir dir;
  cas::ObjectStore cas;
  ledger::Ledger ledger;
  workflow::Workflow workflow;

 private:
  std::mutex alert_mutex_;
  std::optional<std::pair<uint64_t, ledger::ViolationKind>> last_alert_;
};

}  // namespace verifi
