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

// Certificate lifecycle, verification queue, access grants and notifications.
//
// State lives in append-only logs under <db_dir>:
//
//   users.log, certificates.log, access_requests.log, notifications.log
//
// one sorted-key JSON snapshot per line; replay keeps the last snapshot per id.
// Plaintext awaiting review sits in <db_dir>/pending/<certificate_id> and is
// deleted once the certificate is decided.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "verifi/bytes.h"
#include "verifi/cas.h"
#include "verifi/crypto.h"
#include "verifi/ledger.h"
#include "verifi/role.h"

namespace verifi::workflow {

inline constexpr std::size_t kMaxFileBytes = 16u << 20;
inline constexpr uint32_t kPasswordIterations = 100'000;
inline constexpr std::size_t kMinPasswordLength = 8;

enum class CertState { PendingVerification, UnderReview, Verified, Rejected };
enum class RequestState { Pending, Granted, Denied };
enum class NotificationKind {
  VerificationRequested,
  VerificationDecided,
  AccessRequested,
  AccessDecided,
  TamperAlert,
};
enum class Decision { Approve, Reject };
enum class AccessDecision { Grant, Deny };

std::string_view cert_state_name(CertState s);
std::string_view request_state_name(RequestState s);
std::string_view notification_kind_name(NotificationKind k);

struct UserAccount {
  std::string user_id;
  Role role = Role::Applicant;
  std::string display_name;
  Bytes password_salt;
  Digest32 password_hash{};
  std::optional<crypto::KeyPair> keypair;        // Applicant, Admin
  std::optional<crypto::SymmetricKey> vault_key;  // Applicant
  int64_t created_at = 0;
};

struct CertificateRecord {
  std::string certificate_id;
  std::string applicant_id;
  std::string title;
  std::string issuer_name;
  CertState state = CertState::PendingVerification;
  std::string upload_receipt_id;
  uint64_t file_size = 0;
  std::optional<std::string> reviewer_id;
  std::optional<std::string> decision_note;
  bool fee_approved = false;
  std::optional<Cid> cid;
  std::optional<Digest32> anchor_tx_hash;
  std::optional<uint64_t> anchored_height;
  int64_t created_at = 0;
  int64_t updated_at = 0;

  // Hex anchor tx hash, present once Verified.
  std::optional<std::string> share_code() const;
};

struct AccessRequest {
  std::string request_id;
  std::string company_id;
  std::string applicant_id;
  std::string certificate_id;
  RequestState state = RequestState::Pending;
  int64_t created_at = 0;
  std::optional<int64_t> decided_at;
};

struct Notification {
  std::string notification_id;
  uint64_t seq = 0;  // global creation order
  std::string recipient_id;
  NotificationKind kind = NotificationKind::VerificationRequested;
  std::string payload;
  int64_t created_at = 0;
  bool read = false;
};

struct Principal {
  std::string user_id;
  Role role = Role::Applicant;
};

struct UploadReceipt {
  std::string certificate_id;
  std::string upload_receipt_id;
};

// What a company may learn from a share code: metadata only.
struct PublicSummary {
  std::string applicant_display_name;
  std::string title;
  std::string issuer_name;
  CertState state = CertState::Verified;
  uint64_t anchored_height = 0;
};

struct ProofBundle {
  ledger::AnchorTx anchor_tx;
  Digest32 tx_hash{};
  uint64_t height = 0;
  ledger::InclusionProof inclusion_proof;
  ledger::BlockHeader header;
  std::vector<ledger::ValidatorSignature> signatures;
};

struct CertificateView {
  Bytes file_bytes;
  ProofBundle proof;
};

struct WorkflowOptions {
  int64_t token_ttl = crypto::kDefaultTokenTtl;
  uint32_t password_iterations = kPasswordIterations;
  bool fsync = true;
  std::function<int64_t()> clock;  // unix seconds; system clock if empty
};

class Workflow {
 public:
  // Replays the logs under db_dir and finishes any approval whose anchor
  // reached the chain before a crash.
  Workflow(std::filesystem::path db_dir, cas::ObjectStore& cas, ledger::Ledger& ledger,
           Bytes token_secret, WorkflowOptions options = {});
  ~Workflow();
  Workflow(const Workflow&) = delete;
  Workflow& operator=(const Workflow&) = delete;

  // --- accounts -----------------------------------------------------------
  // Applicant or Company only; InvalidArgument for Admin or bad fields.
  UserAccount register_user(const std::string& user_id, Role role,
                            const std::string& display_name, const std::string& password);
  // Admin bootstrap (operator tooling only). Seeds the admin's fee account.
  UserAccount create_admin(const std::string& user_id, const std::string& display_name,
                           const std::string& password);
  // Returns a bearer token; BadCredentials on unknown user or wrong password.
  std::string authenticate(const std::string& user_id, const std::string& password);
  // Token -> principal. Throws TokenMalformed, TokenBadSignature, TokenExpired
  // or Unauthenticated (unknown user, stale role).
  Principal authorize(std::string_view token) const;

  // --- certificates -------------------------------------------------------
  UploadReceipt upload_certificate(const Principal& who, const std::string& title,
                                   const std::string& issuer_name, ByteView file_bytes);
  std::vector<CertificateRecord> list_own_certificates(const Principal& who) const;
  // Certificates awaiting a decision, oldest first.
  std::vector<CertificateRecord> admin_queue(const Principal& who) const;
  // Plaintext of a certificate under review, for the deciding admin.
  Bytes pending_content(const Principal& who, const std::string& certificate_id) const;
  CertificateRecord admin_claim(const Principal& who, const std::string& certificate_id);
  // Approve requires approve_fee; otherwise FeeNotApproved and no change.
  CertificateRecord admin_decide(const Principal& who, const std::string& certificate_id,
                                 Decision decision, const std::string& note,
                                 bool approve_fee);

  // --- companies ----------------------------------------------------------
  PublicSummary search_by_share_code(const Principal& who, const std::string& share_code) const;
  AccessRequest request_access(const Principal& who, const std::string& share_code);
  // Applicants see requests for their certificates, companies their own.
  std::vector<AccessRequest> list_access_requests(const Principal& who) const;
  AccessRequest decide_access(const Principal& who, const std::string& request_id,
                              AccessDecision decision);
  // Re-verifies the anchor tx, inclusion, header, chain link, quorum and CAS
  // content. Any failure raises a TamperAlert and throws TamperDetected.
  CertificateView view_certificate(const Principal& who, const std::string& share_code);

  // --- notifications ------------------------------------------------------
  std::vector<Notification> list_notifications(const Principal& who) const;  // newest first
  Notification mark_read(const Principal& who, const std::string& notification_id);
  // Delivers a TamperAlert to every admin.
  void raise_tamper_alert(const std::string& detail);

  // --- inspection ---------------------------------------------------------
  std::optional<UserAccount> user(const std::string& user_id) const;
  std::optional<CertificateRecord> certificate(const std::string& certificate_id) const;
  std::optional<AccessRequest> access_request(const std::string& request_id) const;
  std::vector<std::string> admin_ids() const;
  bool pending_bytes_present(const std::string& certificate_id) const;
  std::filesystem::path pending_path(const std::string& certificate_id) const;

  cas::ObjectStore& cas() { return cas_; }
  ledger::Ledger& ledger() { return ledger_; }

 private:
  class RecordLog;
  struct AnchorIntent {
    Digest32 tx_hash{};
    Cid cid;
  };

  int64_t now() const;
  std::string new_id(std::string_view prefix) const;
  void load();
  void recover_intents();

  const UserAccount& require_user(const std::string& id) const;
  CertificateRecord& require_cert(const std::string& id);
  const CertificateRecord* cert_by_share_code(const std::string& share_code) const;
  static void require_role(const Principal& who, Role role);

  void put_user(const UserAccount& u);
  void put_cert(const CertificateRecord& c);
  void put_intent(const std::string& certificate_id, const std::optional<AnchorIntent>& i);
  void put_request(const AccessRequest& r);
  void notify(const std::string& recipient, NotificationKind kind, const std::string& payload);
  void notify_admins(NotificationKind kind, const std::string& payload);
  void erase_pending(const std::string& certificate_id);

  void anchor(CertificateRecord& cert, const UserAccount& admin);
  CertificateView verify_and_fetch(const CertificateRecord& cert);

  std::filesystem::path db_dir_;
  cas::ObjectStore& cas_;
  ledger::Ledger& ledger_;
  Bytes token_secret_;
  WorkflowOptions options_;

  mutable std::mutex mutex_;
  std::unique_ptr<RecordLog> users_log_;
  std::unique_ptr<RecordLog> certs_log_;
  std::unique_ptr<RecordLog> requests_log_;
  std::unique_ptr<RecordLog> notes_log_;

  std::map<std::string, UserAccount> users_;
  std::map<std::string, CertificateRecord> certs_;
  std::map<std::string, AnchorIntent> intents_;
  std::map<std::string, std::string> share_index_;  // share code -> certificate id
  std::map<std::string, AccessRequest> requests_;
  std::map<std::string, Notification> notifications_;
  uint64_t next_seq_ = 0;
};

}  // namespace verifi::workflow
