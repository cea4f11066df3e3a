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

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "support/api_harness.h"
#include "verifi/crypto.h"

namespace verifi::testing {
namespace {

class ApiTest : public ::testing::Test {
 protected:
  ApiHarness h;
  ApiClient& c = h.client();
};

TEST_F(ApiTest, EveryRouteHasSweepFixture) {
  for (const auto& spec : api::route_table()) {
    for (std::optional<Role> caller :
         {std::optional<Role>(), std::optional<Role>(Role::Applicant)}) {
      EXPECT_FALSE(sweep_request(h, spec, caller).path.empty()) << spec.pattern;
    }
  }
}

TEST_F(ApiTest, RoleGateMatrix) {
  auto cells = role_gate_sweep(h);
  EXPECT_EQ(cells.size(), api::route_table().size() * 4);
  for (const auto& cell : cells) {
    EXPECT_EQ(cell.got, cell.expected) << cell.route << " as " << cell.caller << ": " << cell.body;
  }
}

TEST_F(ApiTest, EndToEndScenario) {
  EXPECT_GE(known_secrets(h).size(), 15u);
  auto failures = end_to_end(h);
  for (const auto& f : failures) ADD_FAILURE() << f;
  EXPECT_TRUE(failures.empty());
}

TEST_F(ApiTest, ErrorsUseStableJsonShape) {
  auto r = c.post("/auth/login", {{"user_id", "alice"}, {"password", "wrong-password"}});
  EXPECT_EQ(r.status, 401);
  EXPECT_EQ(r.body["code"], "BAD_CREDENTIALS");
  EXPECT_TRUE(r.body["message"].is_string());
  EXPECT_EQ(r.body.size(), 2u);

  auto unknown = c.post("/auth/login", {{"user_id", "nobody"}, {"password", "wrong-password"}});
  EXPECT_EQ(unknown.status, 401);
  EXPECT_EQ(unknown.body["code"], "BAD_CREDENTIALS");

  auto missing = c.get("/no/such/route");
  EXPECT_EQ(missing.status, 404);
  EXPECT_EQ(missing.body["code"], "NOT_FOUND");
}

TEST_F(ApiTest, TokenFailures) {
  EXPECT_EQ(c.get("/certificates").body["code"], "UNAUTHENTICATED");
  EXPECT_EQ(c.get("/certificates", "not-a-token").body["code"], "TOKEN_MALFORMED");

  auto forged = crypto::issue_token(to_bytes("some other secret"), "alice", Role::Applicant,
                                    3600, std::time(nullptr));
  auto r = c.get("/certificates", forged);
  EXPECT_EQ(r.status, 401);
  EXPECT_EQ(r.body["code"], "TOKEN_INVALID");

  auto expired = crypto::issue_token(h.services().dir.token_secret(), "alice", Role::Applicant,
                                     60, std::time(nullptr) - 3600);
  r = c.get("/certificates", expired);
  EXPECT_EQ(r.status, 401);
  EXPECT_EQ(r.body["code"], "TOKEN_EXPIRED");

  // A valid token for a role it does not hold is still refused by the gate.
  auto company_token = h.token(Role::Company);
  EXPECT_EQ(c.get("/admin/queue", company_token).status, 403);
}

TEST_F(ApiTest, ValidationErrors) {
  const auto& ta = h.token(Role::Applicant);
  auto bad_json = c.post_raw("/certificates", "{not json", ta);
  EXPECT_EQ(bad_json.status, 422);
  EXPECT_EQ(bad_json.body["code"], "VALIDATION");

  auto missing = c.post("/certificates", {{"title", "x"}}, ta);
  EXPECT_EQ(missing.status, 422);

  auto bad_b64 = c.post("/certificates",
                        {{"title", "x"}, {"issuer_name", "y"}, {"file_bytes", "@@@"}}, ta);
  EXPECT_EQ(bad_b64.status, 422);

  auto empty = c.post("/certificates",
                      {{"title", "x"}, {"issuer_name", "y"}, {"file_bytes", ""}}, ta);
  EXPECT_EQ(empty.status, 422);
  EXPECT_EQ(empty.body["code"], "EMPTY_FILE");

  auto admin_reg = c.post("/auth/register", {{"user_id", "mallory"},
                                             {"role", "admin"},
                                             {"display_name", "M"},
                                             {"password", "long-enough"}});
  EXPECT_EQ(admin_reg.status, 422);

  auto dup = c.post("/auth/register", {{"user_id", "alice"},
                                       {"role", "applicant"},
                                       {"display_name", "A"},
                                       {"password", "long-enough"}});
  EXPECT_EQ(dup.status, 409);
  EXPECT_EQ(dup.body["code"], "DUPLICATE_USER");

  EXPECT_EQ(c.get("/certificates?limit=0", ta).status, 422);
  EXPECT_EQ(c.get("/certificates?limit=101", ta).status, 422);
  EXPECT_EQ(c.get("/certificates?offset=-1", ta).status, 422);
  EXPECT_EQ(c.get("/ledger/blocks?from=0&to=500").status, 422);
  EXPECT_EQ(c.get("/ledger/tx/xyz").status, 422);
  auto unknown_tx = c.get("/ledger/tx/" + std::string(64, 'a'));
  EXPECT_EQ(unknown_tx.status, 404);
  EXPECT_EQ(unknown_tx.body["code"], "UNKNOWN_TX");

  auto bad_decision = c.post("/admin/queue/" + h.claimed() + "/decision",
                             {{"decision", "maybe"}}, h.token(Role::Admin));
  EXPECT_EQ(bad_decision.status, 422);
}

TEST_F(ApiTest, Pagination) {
  for (int i = 0; i < 7; ++i) h.upload();
  const auto& ta = h.token(Role::Applicant);
  auto page = c.get("/certificates?offset=5&limit=5", ta);
  ASSERT_EQ(page.status, 200);
  EXPECT_EQ(page.body["total"], 7);
  EXPECT_EQ(page.body["items"].size(), 2u);
  EXPECT_EQ(page.body["offset"], 5);
  EXPECT_EQ(page.body["limit"], 5);
  auto past = c.get("/certificates?offset=50", ta);
  EXPECT_EQ(past.body["items"].size(), 0u);
}

TEST_F(ApiTest, GetsAreIdempotent) {
  end_to_end(h);
  std::vector<std::pair<std::string, std::string>> gets = {
      {"/healthz", ""},
      {"/certificates", h.token(Role::Applicant)},
      {"/admin/queue", h.token(Role::Admin)},
      {"/access-requests", h.token(Role::Company)},
      {"/notifications", h.token(Role::Applicant)},
      {"/ledger/blocks?from=0&to=5", ""},
      {"/ledger/scan", ""},
  };
  for (const auto& [path, token] : gets) {
    auto a = c.get(path, token);
    auto b = c.get(path, token);
    EXPECT_EQ(a.status, 200) << path;
    EXPECT_EQ(a.raw, b.raw) << path;
  }
}

TEST_F(ApiTest, CorsAllowsOnlyLocalOrigins) {
  auto local = c.get("/healthz", "", {{"Origin", "http://localhost:5173"}});
  EXPECT_EQ(local.headers["Access-Control-Allow-Origin"], "http://localhost:5173");
  auto foreign = c.get("/healthz", "", {{"Origin", "https://evil.example"}});
  EXPECT_EQ(foreign.headers.count("Access-Control-Allow-Origin"), 0u);
  auto pre = c.options("/certificates", {{"Origin", "http://127.0.0.1:3000"},
                                          {"Access-Control-Request-Method", "POST"}});
  EXPECT_EQ(pre.status, 204);
  EXPECT_EQ(pre.headers["Access-Control-Allow-Origin"], "http://127.0.0.1:3000");
}

TEST_F(ApiTest, TamperShowsOnScanAndBlocksViewing) {
  auto code = h.granted_code();
  auto chain = ledger::Ledger::chain_path(h.services().ledger.dir());
  auto block1 = h.services().ledger.block_at(1).encode();
  {
    std::ifstream in(chain, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), {});
    auto pos = all.find(to_string(block1));
    ASSERT_NE(pos, std::string::npos);
    std::fstream io(chain, std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(static_cast<std::streamoff>(pos + 20));  // inside prev_hash
    char byte = static_cast<char>(all[pos + 20] ^ 0x01);
    io.write(&byte, 1);
  }
  auto scan = c.get("/ledger/scan");
  ASSERT_EQ(scan.status, 200);
  EXPECT_EQ(scan.body["tampered"], true);
  EXPECT_EQ(scan.body["height"], 1);
  EXPECT_EQ(scan.body["kind"], "PrevLinkBroken");

  auto view = c.get("/certificates/" + code + "/content", h.token(Role::Company));
  EXPECT_EQ(view.status, 409);
  EXPECT_EQ(view.body["code"], "TAMPER_DETECTED");
  EXPECT_EQ(view.raw.find("file_bytes"), std::string::npos);

  auto alerts = h.wf().list_notifications(h.admin);
  auto n = std::count_if(alerts.begin(), alerts.end(), [](const auto& a) {
    return a.kind == workflow::NotificationKind::TamperAlert;
  });
  EXPECT_GE(n, 1);
  c.get("/ledger/scan");
  auto again = h.wf().list_notifications(h.admin);
  EXPECT_EQ(std::count_if(again.begin(), again.end(),
                          [](const auto& a) {
                            return a.kind == workflow::NotificationKind::TamperAlert;
                          }),
            n);
}

TEST(ApiMapping, EveryErrorCodeHasOneStatus) {
  std::set<int> statuses = {401, 403, 404, 409, 422, 500};
  for (int i = 0; i <= static_cast<int>(Errc::Locked); ++i) {
    auto e = api::map_error(static_cast<Errc>(i));
    EXPECT_TRUE(statuses.count(e.status)) << i;
    EXPECT_FALSE(e.code.empty());
  }
}

TEST(ApiMapping, ParseBind) {
  EXPECT_EQ(api::parse_bind("127.0.0.1:8080"), std::make_pair(std::string("127.0.0.1"), 8080));
  EXPECT_EQ(api::parse_bind("0.0.0.0:0").second, 0);
  EXPECT_THROW(api::parse_bind("localhost"), Error);
  EXPECT_THROW(api::parse_bind("host:99999"), Error);
  EXPECT_THROW(api::parse_bind("host:abc"), Error);
}

}  // namespace
}  // namespace verifi::testing
