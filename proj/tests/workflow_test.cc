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

#include "verifi/workflow.h"

#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>

#include "support/model_check.h"
#include "support/stack.h"

namespace verifi::workflow {
namespace {

using verifi::testing::TestStack;

template <typename F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::Internal;
}

std::size_t count_kind(const std::vector<Notification>& ns, NotificationKind k) {
  return static_cast<std::size_t>(
      std::count_if(ns.begin(), ns.end(), [&](const Notification& n) { return n.kind == k; }));
}

class WorkflowTest : public ::testing::Test {
 protected:
  WorkflowTest() {
    wf().create_admin("admin1", "Admin One", "admin1-password");
    wf().create_admin("admin2", "Admin Two", "admin2-password");
    wf().register_user("alice", Role::Applicant, "Alice Liddell", "alice-password");
    wf().register_user("bob", Role::Applicant, "Bob", "bob-password");
    wf().register_user("acme", Role::Company, "Acme Corp", "acme-password");
    wf().register_user("globex", Role::Company, "Globex", "globex-password");
  }

  Workflow& wf() { return stack_.wf(); }

  // Upload, claim and approve; returns the certificate id.
  std::string verified_cert(const Bytes& bytes) {
    auto r = wf().upload_certificate(alice_, "BSc Physics", "Wonderland University", bytes);
    wf().admin_claim(admin_, r.certificate_id);
    wf().admin_decide(admin_, r.certificate_id, Decision::Approve, "registrar confirmed", true);
    return r.certificate_id;
  }

  std::string share_code(const std::string& id) { return *wf().certificate(id)->share_code(); }

  TestStack stack_;
  Principal admin_{"admin1", Role::Admin};
  Principal alice_{"alice", Role::Applicant};
  Principal bob_{"bob", Role::Applicant};
  Principal acme_{"acme", Role::Company};
  Principal globex_{"globex", Role::Company};
  Bytes file_ = to_bytes("%PDF-1.7 certificate of Alice Liddell, grade A");
};

TEST_F(WorkflowTest, RegisterAuthenticate) {
  std::string token = wf().authenticate("alice", "alice-password");
  Principal p = wf().authorize(token);
  EXPECT_EQ(p.user_id, "alice");
  EXPECT_EQ(p.role, Role::Applicant);
  EXPECT_EQ(wf().authorize(wf().authenticate("acme", "acme-password")).role, Role::Company);

  EXPECT_EQ(error_of([&] { wf().authenticate("alice", "wrong-password"); }),
            Errc::BadCredentials);
  EXPECT_EQ(error_of([&] { wf().authenticate("nobody", "whatever1"); }), Errc::BadCredentials);
  EXPECT_EQ(error_of([&] { wf().register_user("alice", Role::Company, "X", "password1"); }),
            Errc::DuplicateUser);
  EXPECT_EQ(error_of([&] { wf().register_user("eve", Role::Admin, "Eve", "password1"); }),
            Errc::InvalidArgument);
  EXPECT_EQ(error_of([&] { wf().register_user("bad id", Role::Company, "X", "password1"); }),
            Errc::InvalidArgument);
  EXPECT_EQ(error_of([&] { wf().register_user("carol", Role::Company, "X", "short"); }),
            Errc::InvalidArgument);

  EXPECT_EQ(error_of([&] { wf().authorize("garbage"); }), Errc::TokenMalformed);
  std::string tampered = token;
  tampered.back() = tampered.back() == 'A' ? 'B' : 'A';
  EXPECT_EQ(error_of([&] { wf().authorize(tampered); }), Errc::TokenBadSignature);
}

TEST_F(WorkflowTest, KeyMaterialAndPasswordHashing) {
  auto alice = *wf().user("alice");
  EXPECT_TRUE(alice.keypair && alice.vault_key);
  EXPECT_EQ(alice.password_salt.size(), 16u);
  EXPECT_EQ(alice.password_hash,
            crypto::pbkdf2_sha256("alice-password", alice.password_salt, 1000));
  auto acme = *wf().user("acme");
  EXPECT_FALSE(acme.keypair || acme.vault_key);
  auto admin = *wf().user("admin1");
  EXPECT_TRUE(admin.keypair && !admin.vault_key);
  EXPECT_EQ(stack_->ledger.balance(admin.keypair->public_key), ledger::kInitialIssuerBalance);
  EXPECT_EQ(WorkflowOptions{}.password_iterations, 100000u);
}

TEST_F(WorkflowTest, UploadNotifiesEveryAdmin) {
  auto r1 = wf().upload_certificate(alice_, "BSc", "Uni", file_);
  auto r2 = wf().upload_certificate(alice_, "BSc", "Uni", file_);
  EXPECT_NE(r1.certificate_id, r2.certificate_id);
  EXPECT_NE(r1.upload_receipt_id, r2.upload_receipt_id);
  EXPECT_EQ(wf().certificate(r1.certificate_id)->state, CertState::PendingVerification);
  EXPECT_TRUE(wf().pending_bytes_present(r1.certificate_id));
  for (const char* a : {"admin1", "admin2"}) {
    auto ns = wf().list_notifications({a, Role::Admin});
    EXPECT_EQ(count_kind(ns, NotificationKind::VerificationRequested), 2u) << a;
  }
  EXPECT_EQ(wf().list_own_certificates(alice_).size(), 2u);
  EXPECT_EQ(wf().list_own_certificates(bob_).size(), 0u);
  EXPECT_EQ(wf().admin_queue(admin_).size(), 2u);
  EXPECT_EQ(wf().pending_content(admin_, r1.certificate_id), file_);
}

TEST_F(WorkflowTest, UploadValidation) {
  EXPECT_EQ(error_of([&] { wf().upload_certificate(acme_, "t", "i", file_); }),
            Errc::Unauthorized);
  EXPECT_EQ(error_of([&] { wf().upload_certificate(admin_, "t", "i", file_); }),
            Errc::Unauthorized);
  EXPECT_EQ(error_of([&] { wf().upload_certificate(alice_, "t", "i", {}); }), Errc::EmptyFile);
  Bytes big(kMaxFileBytes + 1, 'x');
  EXPECT_EQ(error_of([&] { wf().upload_certificate(alice_, "t", "i", big); }), Errc::TooLarge);
  Bytes max(kMaxFileBytes, 'x');
  EXPECT_NO_THROW(wf().upload_certificate(alice_, "t", "i", max));
  EXPECT_EQ(error_of([&] { wf().upload_certificate(alice_, "", "i", file_); }),
            Errc::InvalidArgument);
}

TEST_F(WorkflowTest, ApprovePipeline) {
  auto r = wf().upload_certificate(alice_, "BSc", "Uni", file_);
  EXPECT_EQ(error_of([&] {
              wf().admin_decide(admin_, r.certificate_id, Decision::Approve, "", true);
            }),
            Errc::WrongState);
  wf().admin_claim(admin_, r.certificate_id);
  EXPECT_EQ(error_of([&] { wf().admin_claim(admin_, r.certificate_id); }), Errc::WrongState);

  const uint64_t height = stack_->ledger.tip_height();
  EXPECT_EQ(error_of([&] {
              wf().admin_decide(admin_, r.certificate_id, Decision::Approve, "", false);
            }),
            Errc::FeeNotApproved);
  EXPECT_EQ(wf().certificate(r.certificate_id)->state, CertState::UnderReview);
  EXPECT_EQ(stack_->ledger.tip_height(), height);

  CertificateRecord c =
      wf().admin_decide(admin_, r.certificate_id, Decision::Approve, "called registrar", true);
  EXPECT_EQ(c.state, CertState::Verified);
  EXPECT_TRUE(c.fee_approved);
  EXPECT_EQ(c.decision_note, "called registrar");
  EXPECT_EQ(stack_->ledger.tip_height(), height + 1);
  ASSERT_TRUE(c.share_code());
  EXPECT_EQ(c.share_code()->size(), 64u);
  auto loc = stack_->ledger.find_tx(*c.anchor_tx_hash);
  ASSERT_TRUE(loc);
  EXPECT_EQ(loc->height, *c.anchored_height);
  EXPECT_FALSE(wf().pending_bytes_present(r.certificate_id));
  EXPECT_EQ(stack_->cas.get(*c.cid), file_);

  // The chain stores only the encrypted cid.
  auto tx = stack_->ledger.block_at(loc->height).txs[loc->index];
  EXPECT_EQ(tx.certificate_id, r.certificate_id);
  EXPECT_EQ(crypto::decrypt_cid(*wf().user("alice")->vault_key,
                                {tx.encrypted_cid_nonce, tx.encrypted_cid_body}),
            *c.cid);
  std::ifstream chain(ledger::Ledger::chain_path(stack_->dir.ledger_dir()), std::ios::binary);
  std::string raw((std::istreambuf_iterator<char>(chain)), std::istreambuf_iterator<char>());
  EXPECT_EQ(raw.find(c.cid->hex()), std::string::npos);

  auto ns = wf().list_notifications(alice_);
  ASSERT_FALSE(ns.empty());
  EXPECT_EQ(ns.front().kind, NotificationKind::VerificationDecided);

  EXPECT_EQ(error_of([&] {
              wf().admin_decide(admin_, r.certificate_id, Decision::Approve, "", true);
            }),
            Errc::WrongState);
  EXPECT_EQ(stack_->ledger.tip_height(), height + 1);
}

TEST_F(WorkflowTest, RejectErasesPlaintext) {
  auto r = wf().upload_certificate(alice_, "BSc", "Uni", file_);
  wf().admin_claim(admin_, r.certificate_id);
  auto c = wf().admin_decide(admin_, r.certificate_id, Decision::Reject, "forged seal", false);
  EXPECT_EQ(c.state, CertState::Rejected);
  EXPECT_FALSE(c.share_code());
  EXPECT_FALSE(wf().pending_bytes_present(r.certificate_id));
  EXPECT_EQ(stack_->ledger.tip_height(), 0u);
  EXPECT_EQ(stack_->cas.object_count(), 0u);
  EXPECT_EQ(error_of([&] { wf().pending_content(admin_, r.certificate_id); }),
            Errc::WrongState);
  EXPECT_EQ(count_kind(wf().list_notifications(alice_), NotificationKind::VerificationDecided),
            1u);
  // Still listed for the applicant.
  EXPECT_EQ(wf().list_own_certificates(alice_).front().state, CertState::Rejected);
}

TEST_F(WorkflowTest, AnchorFailureKeepsUnderReview) {
  // A fresh admin whose fee account was never seeded cannot pay the fee.
  auto r = wf().upload_certificate(alice_, "BSc", "Uni", file_);
  wf().admin_claim(admin_, r.certificate_id);
  stack_.close();
  std::filesystem::remove(stack_.root() / "ledger" / "accounts.log");
  stack_.reopen();
  EXPECT_EQ(error_of([&] {
              wf().admin_decide(admin_, r.certificate_id, Decision::Approve, "", true);
            }),
            Errc::AnchorFailed);
  auto c = *wf().certificate(r.certificate_id);
  EXPECT_EQ(c.state, CertState::UnderReview);
  EXPECT_TRUE(wf().pending_bytes_present(r.certificate_id));
  EXPECT_EQ(stack_->ledger.pending_count(), 0u);
  EXPECT_EQ(stack_->ledger.tip_height(), 0u);

  // After funding the same certificate anchors once.
  stack_->ledger.seed_account(wf().user("admin1")->keypair->public_key, 1'000'000);
  EXPECT_EQ(wf().admin_decide(admin_, r.certificate_id, Decision::Approve, "", true).state,
            CertState::Verified);
  EXPECT_EQ(stack_->ledger.tip_height(), 1u);
}

TEST_F(WorkflowTest, SearchShowsMetadataOnly) {
  const std::string id = verified_cert(file_);
  auto c = *wf().certificate(id);
  PublicSummary s = wf().search_by_share_code(acme_, share_code(id));
  EXPECT_EQ(s.applicant_display_name, "Alice Liddell");
  EXPECT_EQ(s.title, "BSc Physics");
  EXPECT_EQ(s.issuer_name, "Wonderland University");
  EXPECT_EQ(s.state, CertState::Verified);
  EXPECT_EQ(s.anchored_height, *c.anchored_height);

  EXPECT_EQ(error_of([&] { wf().search_by_share_code(acme_, std::string(64, 'a')); }),
            Errc::NotFound);
  EXPECT_EQ(error_of([&] { wf().search_by_share_code(alice_, share_code(id)); }),
            Errc::Unauthorized);

  auto r = wf().upload_certificate(alice_, "MSc", "Uni", file_);
  wf().admin_claim(admin_, r.certificate_id);
  wf().admin_decide(admin_, r.certificate_id, Decision::Reject, "", false);
  for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
           {"name", s.applicant_display_name}, {"title", s.title}, {"issuer", s.issuer_name}}) {
    EXPECT_EQ(v.find(c.cid->hex()), std::string::npos) << k;
  }
}

TEST_F(WorkflowTest, AccessRequestLifecycle) {
  const std::string id = verified_cert(file_);
  const std::string code = share_code(id);
  EXPECT_EQ(error_of([&] { wf().view_certificate(acme_, code); }), Errc::Forbidden);

  AccessRequest req = wf().request_access(acme_, code);
  EXPECT_EQ(req.state, RequestState::Pending);
  EXPECT_EQ(req.applicant_id, "alice");
  EXPECT_EQ(count_kind(wf().list_notifications(alice_), NotificationKind::AccessRequested), 1u);
  EXPECT_EQ(error_of([&] { wf().request_access(acme_, code); }), Errc::DuplicatePending);
  EXPECT_EQ(error_of([&] { wf().request_access(acme_, std::string(64, '1')); }),
            Errc::NotFound);

  EXPECT_EQ(error_of([&] { wf().decide_access(bob_, req.request_id, AccessDecision::Grant); }),
            Errc::Unauthorized);
  EXPECT_EQ(error_of([&] { wf().decide_access(acme_, req.request_id, AccessDecision::Grant); }),
            Errc::Unauthorized);
  EXPECT_EQ(error_of([&] { wf().view_certificate(acme_, code); }), Errc::Forbidden);

  AccessRequest granted = wf().decide_access(alice_, req.request_id, AccessDecision::Grant);
  EXPECT_EQ(granted.state, RequestState::Granted);
  EXPECT_EQ(count_kind(wf().list_notifications(acme_), NotificationKind::AccessDecided), 1u);
  EXPECT_EQ(error_of([&] { wf().decide_access(alice_, req.request_id, AccessDecision::Deny); }),
            Errc::WrongState);

  CertificateView view = wf().view_certificate(acme_, code);
  EXPECT_EQ(view.file_bytes, file_);
  const auto& p = view.proof;
  EXPECT_EQ(p.tx_hash, p.anchor_tx.tx_hash());
  EXPECT_TRUE(p.anchor_tx.signature_valid());
  EXPECT_TRUE(ledger::verify_inclusion(p.tx_hash, p.inclusion_proof, p.header.merkle_root));
  EXPECT_TRUE(ledger::quorum_valid(p.header, p.signatures, stack_->ledger.validators()));
  EXPECT_EQ(hex_encode(p.tx_hash), code);

  // Grants are per company.
  EXPECT_EQ(error_of([&] { wf().view_certificate(globex_, code); }), Errc::Forbidden);
  AccessRequest denied = wf().request_access(globex_, code);
  wf().decide_access(alice_, denied.request_id, AccessDecision::Deny);
  EXPECT_EQ(error_of([&] { wf().view_certificate(globex_, code); }), Errc::Forbidden);

  EXPECT_EQ(wf().list_access_requests(alice_).size(), 2u);
  EXPECT_EQ(wf().list_access_requests(acme_).size(), 1u);
  EXPECT_EQ(error_of([&] { wf().list_access_requests(admin_); }), Errc::Unauthorized);
}

TEST_F(WorkflowTest, CasTamperRaisesAlertToAllAdmins) {
  const std::string id = verified_cert(file_);
  const std::string code = share_code(id);
  auto req = wf().request_access(acme_, code);
  wf().decide_access(alice_, req.request_id, AccessDecision::Grant);
  ASSERT_EQ(wf().view_certificate(acme_, code).file_bytes, file_);

  auto path = stack_->cas.object_path(*wf().certificate(id)->cid);
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(8);
    f.put('#');
  }
  EXPECT_EQ(error_of([&] { wf().view_certificate(acme_, code); }), Errc::TamperDetected);
  for (const char* a : {"admin1", "admin2"}) {
    auto ns = wf().list_notifications({a, Role::Admin});
    ASSERT_FALSE(ns.empty());
    EXPECT_EQ(ns.front().kind, NotificationKind::TamperAlert) << a;
  }
}

TEST_F(WorkflowTest, ChainTamperDetectedOnView) {
  const std::string id = verified_cert(file_);
  const std::string code = share_code(id);
  auto req = wf().request_access(acme_, code);
  wf().decide_access(alice_, req.request_id, AccessDecision::Grant);
  auto chain = ledger::Ledger::chain_path(stack_->dir.ledger_dir());
  {
    std::fstream f(chain, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(-3, std::ios::end);  // inside the last validator signature
    char ch;
    f.seekg(-3, std::ios::end);
    f.get(ch);
    f.seekp(-3, std::ios::end);
    f.put(static_cast<char>(ch ^ 0x10));
  }
  EXPECT_EQ(error_of([&] { wf().view_certificate(acme_, code); }), Errc::TamperDetected);
  EXPECT_EQ(count_kind(wf().list_notifications(admin_), NotificationKind::TamperAlert), 1u);

  auto report = stack_->ledger.scan_chain();
  ASSERT_FALSE(report.clean());
  EXPECT_EQ(report.violation->kind, ledger::ViolationKind::QuorumInvalid);
  EXPECT_EQ(count_kind(wf().list_notifications(admin_), NotificationKind::TamperAlert), 2u);
}

TEST_F(WorkflowTest, NotificationsNewestFirstAndMarkRead) {
  wf().upload_certificate(alice_, "A", "Uni", file_);
  wf().upload_certificate(alice_, "B", "Uni", file_);
  auto ns = wf().list_notifications(admin_);
  ASSERT_EQ(ns.size(), 2u);
  EXPECT_GT(ns[0].seq, ns[1].seq);
  EXPECT_NE(ns[0].payload.find("\"B\""), std::string::npos);

  Notification once = wf().mark_read(admin_, ns[0].notification_id);
  Notification twice = wf().mark_read(admin_, ns[0].notification_id);
  EXPECT_TRUE(once.read);
  EXPECT_EQ(twice.read, once.read);
  EXPECT_EQ(error_of([&] { wf().mark_read(alice_, ns[1].notification_id); }), Errc::NotFound);
  EXPECT_EQ(error_of([&] { wf().mark_read(admin_, "ntf-missing"); }), Errc::NotFound);
}

TEST_F(WorkflowTest, StateSurvivesRestart) {
  const std::string id = verified_cert(file_);
  const std::string code = share_code(id);
  auto req = wf().request_access(acme_, code);
  wf().decide_access(alice_, req.request_id, AccessDecision::Grant);
  auto pending = wf().upload_certificate(alice_, "Other", "Uni", file_);
  std::string token = wf().authenticate("acme", "acme-password");
  auto notes = wf().list_notifications(admin_);
  wf().mark_read(admin_, notes.back().notification_id);

  stack_.reopen();
  EXPECT_EQ(wf().authorize(token).user_id, "acme");
  EXPECT_EQ(wf().certificate(id)->state, CertState::Verified);
  EXPECT_EQ(wf().view_certificate(acme_, code).file_bytes, file_);
  EXPECT_EQ(wf().certificate(pending.certificate_id)->state, CertState::PendingVerification);
  EXPECT_TRUE(wf().pending_bytes_present(pending.certificate_id));
  auto after = wf().list_notifications(admin_);
  ASSERT_EQ(after.size(), notes.size());
  EXPECT_TRUE(after.back().read);
}

TEST_F(WorkflowTest, TornLogTailIsDropped) {
  wf().upload_certificate(alice_, "A", "Uni", file_);
  stack_.close();
  {
    std::ofstream f(stack_.root() / "db" / "certificates.log", std::ios::app);
    f << "{\"applicant_id\":\"al";
  }
  stack_.reopen();
  EXPECT_EQ(wf().list_own_certificates(alice_).size(), 1u);
  wf().upload_certificate(alice_, "B", "Uni", file_);
  stack_.reopen();
  EXPECT_EQ(wf().list_own_certificates(alice_).size(), 2u);
}

TEST_F(WorkflowTest, CrashAfterCommitIsReconciled) {
  // Reproduces the window between the block commit and the Verified record.
  auto r = wf().upload_certificate(alice_, "BSc", "Uni", file_);
  wf().admin_claim(admin_, r.certificate_id);
  auto alice = *wf().user("alice");
  auto admin = *wf().user("admin1");
  Cid cid = stack_->cas.put(file_);
  auto ct = crypto::encrypt_cid(*alice.vault_key, cid);
  ledger::AnchorTx tx;
  tx.applicant_id = "alice";
  tx.certificate_id = r.certificate_id;
  tx.encrypted_cid_nonce = ct.nonce;
  tx.encrypted_cid_body = ct.body;
  tx.fee_units = ledger::anchor_fee(ct.body.size());
  tx.timestamp = 1;
  tx.sign(*admin.keypair);
  stack_->ledger.submit_tx(tx, true);
  stack_->ledger.propose_and_commit_block();
  stack_.close();
  {
    std::ifstream in(stack_.root() / "db" / "certificates.log");
    std::string line, last;
    while (std::getline(in, line)) last = line;
    auto j = nlohmann::json::parse(last);
    j["anchor_intent"] = {{"cid", cid.to_string()}, {"tx_hash", hex_encode(tx.tx_hash())}};
    std::ofstream(stack_.root() / "db" / "certificates.log", std::ios::app) << j.dump() << "\n";
  }
  stack_.reopen();
  auto c = *wf().certificate(r.certificate_id);
  EXPECT_EQ(c.state, CertState::Verified);
  EXPECT_EQ(*c.share_code(), hex_encode(tx.tx_hash()));
  EXPECT_FALSE(wf().pending_bytes_present(r.certificate_id));
  EXPECT_EQ(error_of([&] {
              wf().admin_decide(admin_, r.certificate_id, Decision::Approve, "", true);
            }),
            Errc::WrongState);
}

TEST(WorkflowModelCheck, NoReachableStateViolatesSafety) {
  verifi::testing::WorkflowModel model(6);
  auto result = model.run();
  std::cout << "model check: " << result.states << " states, " << result.transitions
            << " transitions, depth " << result.max_depth_reached << "\n";
  for (const auto& v : result.violations) ADD_FAILURE() << v;
  EXPECT_EQ(result.max_depth_reached, 6u);
  EXPECT_GT(result.states, 10u);
}

}  // namespace
}  // namespace verifi::workflow
