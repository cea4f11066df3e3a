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

#include "verifi/services.h"

namespace verifi {

namespace {

const DataDir& checked(const DataDir& dir) {
  dir.require_initialized();
  return dir;
}

ledger::LedgerOptions ledger_options(const ServiceOptions& o) {
  ledger::LedgerOptions lo;
  lo.block_capacity = o.block_capacity;
  lo.fsync_on_commit = o.fsync;
  if (o.clock) lo.clock = [clock = o.clock] { return static_cast<uint64_t>(clock()); };
  return lo;
}

workflow::WorkflowOptions workflow_options(const ServiceOptions& o) {
  workflow::WorkflowOptions wo;
  wo.fsync = o.fsync;
  wo.password_iterations = o.password_iterations;
  wo.clock = o.clock;
  return wo;
}

}  // namespace

Services::Services(const DataDir& d, const ServiceOptions& options)
    : dir(checked(d)),
      cas(dir.cas_dir()),
      ledger(dir.ledger_dir(), dir.validators(), dir.ledger_keys(), ledger_options(options)),
      workflow(dir.db_dir(), cas, ledger, dir.token_secret(), workflow_options(options)) {
  ledger.set_tamper_listener([this](const ledger::Violation& v) {
    {
      std::lock_guard lock(alert_mutex_);
      auto key = std::make_pair(v.height, v.kind);
      if (last_alert_ == key) return;
      last_alert_ = key;
    }
    workflow.raise_tamper_alert("chain violation at height " + std::to_string(v.height) + ": " +
                                std::string(ledger::violation_name(v.kind)));
  });
}

}  // namespace verifi
