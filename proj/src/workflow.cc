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

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <json.hpp>

namespace verifi::workflow {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view cert_state_name(CertState s) {
  switch (s) {
    case CertState::PendingVerification: return "PendingVerification";
    case CertState::UnderReview: return "UnderReview";
    case CertState::Verified: return "Verified";
    case CertState::Rejected: return "Rejected";
  }
  return "Unknown";
}

std::string_view request_state_name(RequestState s) {
  switch (s) {
    case RequestState::Pending: return "Pending";
    case RequestState::Granted: return "Granted";
    case RequestState::Denied: return "Denied";
  }
  return "Unknown";
}

std::string_view notification_kind_name(NotificationKind k) {
  switch (k) {
    case NotificationKind::VerificationRequested: return "VerificationRequested";
    case NotificationKind::VerificationDecided: return "VerificationDecided";
    case NotificationKind::AccessRequested: return "AccessRequested";
    case NotificationKind::AccessDecided: return "AccessDecided";
    case NotificationKind::TamperAlert: return "TamperAlert";
  }
  return "Unknown";
}

std::optional<std::string> CertificateRecord::share_code() const {
  if (state != CertState::Verified || !anchor_tx_hash) return std::nullopt;
  return hex_encode(*anchor_tx_hash);
}

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& text, std::string_view (*name)(E)) {
  for (std::size_t i = 0; i < N; ++i) {
    if (name(static_cast<E>(i)) == text) return static_cast<E>(i);
  }
  throw Error(Errc::Malformed, "unknown enum value " + text);
}

// ---------------------------------------------------------------------------
// Record (de)serialization
// ---------------------------------------------------------------------------

json to_json(const UserAccount& u) {
  json j = {{"created_at", u.created_at},
            {"display_name", u.display_name},
            {"password_hash", hex_encode(u.password_hash)},
            {"password_salt", hex_encode(u.password_salt)},
            {"role", role_name(u.role)},
            {"user_id", u.user_id}};
  if (u.keypair) j["signing_seed"] = hex_encode(u.keypair->secret_seed);
  if (u.vault_key) j["vault_key"] = hex_encode(u.vault_key->key);
  return j;
}

UserAccount user_from_json(const json& j) {
  UserAccount u;
  u.user_id = j.at("user_id").get<std::string>();
  auto role = parse_role(j.at("role").get<std::string>());
  if (!role) throw Error(Errc::Malformed, "bad role in users log");
  u.role = *role;
  u.display_name = j.at("display_name").get<std::string>();
  u.password_salt = hex_decode(j.at("password_salt").get<std::string>());
  u.password_hash = hex_decode_fixed<32>(j.at("password_hash").get<std::string>());
  u.created_at = j.at("created_at").get<int64_t>();
  if (j.contains("signing_seed")) {
    u.keypair = crypto::keypair_from_seed(
        hex_decode_fixed<32>(j.at("signing_seed").get<std::string>()));
  }
  if (j.contains("vault_key")) {
    u.vault_key = crypto::SymmetricKey{hex_decode_fixed<32>(j.at("vault_key").get<std::string>())};
  }
  return u;
}

json to_json(const CertificateRecord& c) {
  json j = {{"applicant_id", c.applicant_id},
            {"certificate_id", c.certificate_id},
            {"created_at", c.created_at},
            {"fee_approved", c.fee_approved},
            {"file_size", c.file_size},
            {"issuer_name", c.issuer_name},
            {"state", cert_state_name(c.state)},
            {"title", c.title},
            {"updated_at", c.updated_at},
            {"upload_receipt_id", c.upload_receipt_id}};
  if (c.reviewer_id) j["reviewer_id"] = *c.reviewer_id;
  if (c.decision_note) j["decision_note"] = *c.decision_note;
  if (c.cid) j["cid"] = c.cid->to_string();
  if (c.anchor_tx_hash) j["anchor_tx_hash"] = hex_encode(*c.anchor_tx_hash);
  if (c.anchored_height) j["anchored_height"] = *c.anchored_height;
  return j;
}

CertificateRecord cert_from_json(const json& j) {
  CertificateRecord c;
  c.certificate_id = j.at("certificate_id").get<std::string>();
  c.applicant_id = j.at("applicant_id").get<std::string>();
  c.title = j.at("title").get<std::string>();
  c.issuer_name = j.at("issuer_name").get<std::string>();
  c.state = parse_enum<CertState, 4>(j.at("state").get<std::string>(), cert_state_name);
  c.upload_receipt_id = j.at("upload_receipt_id").get<std::string>();
  c.file_size = j.at("file_size").get<uint64_t>();
  c.fee_approved = j.at("fee_approved").get<bool>();
  c.created_at = j.at("created_at").get<int64_t>();
  c.updated_at = j.at("updated_at").get<int64_t>();
  if (j.contains("reviewer_id")) c.reviewer_id = j.at("reviewer_id").get<std::string>();
  if (j.contains("decision_note")) c.decision_note = j.at("decision_note").get<std::string>();
  if (j.contains("cid")) c.cid = Cid::parse(j.at("cid").get<std::string>());
  if (j.contains("anchor_tx_hash")) {
    c.anchor_tx_hash = hex_decode_fixed<32>(j.at("anchor_tx_hash").get<std::string>());
  }
  if (j.contains("anchored_height")) c.anchored_height = j.at("anchored_height").get<uint64_t>();
  return c;
}

json to_json(const AccessRequest& r) {
  json j = {{"applicant_id", r.applicant_id},
            {"certificate_id", r.certificate_id},
            {"company_id", r.company_id},
            {"created_at", r.created_at},
            {"request_id", r.request_id},
            {"state", request_state_name(r.state)}};
  if (r.decided_at) j["decided_at"] = *r.decided_at;
  return j;
}

AccessRequest request_from_json(const json& j) {
  AccessRequest r;
  r.request_id = j.at("request_id").get<std::string>();
  r.company_id = j.at("company_id").get<std::string>();
  r.applicant_id = j.at("applicant_id").get<std::string>();
  r.certificate_id = j.at("certificate_id").get<std::string>();
  r.state = parse_enum<RequestState, 3>(j.at("state").get<std::string>(), request_state_name);
  r.created_at = j.at("created_at").get<int64_t>();
  if (j.contains("decided_at")) r.decided_at = j.at("decided_at").get<int64_t>();
  return r;
}

json to_json(const Notification& n) {
  return {{"created_at", n.created_at},
          {"kind", notification_kind_name(n.kind)},
          {"notification_id", n.notification_id},
          {"payload", n.payload},
          {"read", n.read},
          {"recipient_id", n.recipient_id},
          {"seq", n.seq}};
}

Notification notification_from_json(const json& j) {
  Notification n;
  n.notification_id = j.at("notification_id").get<std::string>();
  n.seq = j.at("seq").get<uint64_t>();
  n.recipient_id = j.at("recipient_id").get<std::string>();
  n.kind = parse_enum<NotificationKind, 5>(j.at("kind").get<std::string>(),
                                           notification_kind_name);
  n.payload = j.at("payload").get<std::string>();
  n.created_at = j.at("created_at").get<int64_t>();
  n.read = j.at("read").get<bool>();
  return n;
}

// ---------------------------------------------------------------------------
// Field validation
// ---------------------------------------------------------------------------

bool valid_utf8(const std::string& s) {
  try {
    (void)json(s).dump();
    return true;
  } catch (const json::type_error&) {
    return false;
  }
}

void check_text(const std::string& value, std::string_view field, std::size_t max_len) {
  if (value.empty() || value.size() > max_len || !valid_utf8(value)) {
    throw Error(Errc::InvalidArgument, std::string(field) + " must be 1.." +
                                           std::to_string(max_len) + " bytes of UTF-8");
  }
}

void check_user_id(const std::string& id) {
  const bool ok = !id.empty() && id.size() <= 64 &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
                           c == '_' || c == '-';
                  });
  if (!ok) throw Error(Errc::InvalidArgument, "user_id must be 1..64 of [A-Za-z0-9._-]");
}

void check_password(const std::string& password) {
  if (password.size() < kMinPasswordLength || password.size() > 1024) {
    throw Error(Errc::InvalidArgument, "password must be at least 8 characters");
  }
}

std::string payload(json j) { return j.dump(); }

}  // namespace

// ---------------------------------------------------------------------------
// Append-only record log
// ---------------------------------------------------------------------------

class Workflow::RecordLog {
 public:
  // Replays complete lines through `apply`, drops a torn trailing line left by
  // a crash, then opens the file for appending.
  RecordLog(fs::path path, bool fsync, const std::function<void(const json&)>& apply)
      : path_(std::move(path)), fsync_(fsync) {
    std::size_t valid = 0;
    {
      std::ifstream in(path_, std::ios::binary);
      std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      std::size_t pos = 0, line_no = 0;
      while (pos < data.size()) {
        std::size_t nl = data.find('\n', pos);
        if (nl == std::string::npos) break;
        ++line_no;
        std::string_view line(data.data() + pos, nl - pos);
        if (!line.empty()) {
          try {
            apply(json::parse(line));
          } catch (const json::exception& e) {
            throw Error(Errc::Malformed, path_.string() + ":" + std::to_string(line_no) +
                                             ": " + e.what());
          }
        }
        pos = nl + 1;
        valid = pos;
      }
      if (valid < data.size()) fs::resize_file(path_, valid);
    }
    fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0600);
    if (fd_ < 0) throw Error(Errc::Io, "cannot open " + path_.string());
  }

  ~RecordLog() {
    if (fd_ >= 0) ::close(fd_);
  }

  void append(const json& record) {
    const std::string line = record.dump() + "\n";
    std::size_t done = 0;
    while (done < line.size()) {
      ssize_t n = ::write(fd_, line.data() + done, line.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::Io, "write failed: " + path_.string());
      }
      done += static_cast<std::size_t>(n);
    }
    if (fsync_ && ::fdatasync(fd_) != 0) throw Error(Errc::Io, "fsync failed: " + path_.string());
  }

 private:
  fs::path path_;
  bool fsync_;
  int fd_ = -1;
};

// ---------------------------------------------------------------------------
// Construction and persistence
// ---------------------------------------------------------------------------

Workflow::Workflow(fs::path db_dir, cas::ObjectStore& cas, ledger::Ledger& ledger,
                   Bytes token_secret, WorkflowOptions options)
    : db_dir_(std::move(db_dir)),
      cas_(cas),
      ledger_(ledger),
      token_secret_(std::move(token_secret)),
      options_(std::move(options)) {
  if (token_secret_.size() < 16) {
    throw Error(Errc::InvalidArgument, "token secret must be at least 16 bytes");
  }
  std::error_code ec;
  fs::create_directories(db_dir_ / "pending", ec);
  if (ec) throw Error(Errc::Io, "cannot create " + db_dir_.string());
  load();
  recover_intents();
}

Workflow::~Workflow() = default;

void Workflow::load() {
  users_log_ = std::make_unique<RecordLog>(db_dir_ / "users.log", options_.fsync,
                                           [&](const json& j) {
                                             UserAccount u = user_from_json(j);
                                             users_[u.user_id] = std::move(u);
                                           });
  certs_log_ = std::make_unique<RecordLog>(
      db_dir_ / "certificates.log", options_.fsync, [&](const json& j) {
        CertificateRecord c = cert_from_json(j);
        if (j.contains("anchor_intent")) {
          const json& i = j.at("anchor_intent");
          intents_[c.certificate_id] = {
              hex_decode_fixed<32>(i.at("tx_hash").get<std::string>()),
              Cid::parse(i.at("cid").get<std::string>())};
        } else {
          intents_.erase(c.certificate_id);
        }
        if (auto code = c.share_code()) share_index_[*code] = c.certificate_id;
        certs_[c.certificate_id] = std::move(c);
      });
  requests_log_ = std::make_unique<RecordLog>(db_dir_ / "access_requests.log", options_.fsync,
                                              [&](const json& j) {
                                                AccessRequest r = request_from_json(j);
                                                requests_[r.request_id] = std::move(r);
                                              });
  notes_log_ = std::make_unique<RecordLog>(
      db_dir_ / "notifications.log", options_.fsync, [&](const json& j) {
        Notification n = notification_from_json(j);
        next_seq_ = std::max(next_seq_, n.seq + 1);
        notifications_[n.notification_id] = std::move(n);
      });
  // Plaintext of decided certificates left behind by a crash.
  for (const auto& [id, c] : certs_) {
    if (c.state == CertState::Verified || c.state == CertState::Rejected) erase_pending(id);
  }
}

void Workflow::recover_intents() {
  auto pending = intents_;
  for (const auto& [id, intent] : pending) {
    CertificateRecord& c = certs_.at(id);
    auto loc = ledger_.find_tx(intent.tx_hash);
    if (c.state == CertState::UnderReview && loc) {
      c.state = CertState::Verified;
      c.cid = intent.cid;
      c.anchor_tx_hash = intent.tx_hash;
      c.anchored_height = loc->height;
      c.fee_approved = true;
      c.updated_at = now();
      intents_.erase(id);
      put_cert(c);
      share_index_[*c.share_code()] = id;
      erase_pending(id);
      notify(c.applicant_id, NotificationKind::VerificationDecided,
             payload({{"certificate_id", id}, {"decision", "Approve"},
                      {"share_code", *c.share_code()}}));
    } else {
      put_intent(id, std::nullopt);
    }
  }
}

int64_t Workflow::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string Workflow::new_id(std::string_view prefix) const {
  return std::string(prefix) + "-" + hex_encode(crypto::random_bytes(8));
}

void Workflow::put_user(const UserAccount& u) {
  users_log_->append(to_json(u));
  users_[u.user_id] = u;
}

void Workflow::put_cert(const CertificateRecord& c) {
  json j = to_json(c);
  if (auto it = intents_.find(c.certificate_id); it != intents_.end()) {
    j["anchor_intent"] = {{"cid", it->second.cid.to_string()},
                          {"tx_hash", hex_encode(it->second.tx_hash)}};
  }
  certs_log_->append(j);
  certs_[c.certificate_id] = c;
}

void Workflow::put_intent(const std::string& certificate_id,
                          const std::optional<AnchorIntent>& intent) {
  if (intent) {
    intents_[certificate_id] = *intent;
  } else {
    intents_.erase(certificate_id);
  }
  put_cert(certs_.at(certificate_id));
}

void Workflow::put_request(const AccessRequest& r) {
  requests_log_->append(to_json(r));
  requests_[r.request_id] = r;
}

void Workflow::notify(const std::string& recipient, NotificationKind kind,
                      const std::string& text) {
  Notification n;
  n.notification_id = new_id("ntf");
  n.seq = next_seq_++;
  n.recipient_id = recipient;
  n.kind = kind;
  n.payload = text;
  n.created_at = now();
  notes_log_->append(to_json(n));
  notifications_[n.notification_id] = std::move(n);
}

void Workflow::notify_admins(NotificationKind kind, const std::string& text) {
  for (const auto& [id, u] : users_) {
    if (u.role == Role::Admin) notify(id, kind, text);
  }
}

fs::path Workflow::pending_path(const std::string& certificate_id) const {
  return db_dir_ / "pending" / certificate_id;
}

void Workflow::erase_pending(const std::string& certificate_id) {
  std::error_code ec;
  fs::remove(pending_path(certificate_id), ec);
  if (ec) throw Error(Errc::Io, "cannot erase pending bytes of " + certificate_id);
}

// ---------------------------------------------------------------------------
// Accounts
// ---------------------------------------------------------------------------

namespace {

UserAccount make_account(const std::string& user_id, Role role, const std::string& display_name,
                         const std::string& password, uint32_t iterations, int64_t now) {
  check_user_id(user_id);
  check_text(display_name, "display_name", 128);
  check_password(password);
  UserAccount u;
  u.user_id = user_id;
  u.role = role;
  u.display_name = display_name;
  u.password_salt = crypto::random_bytes(16);
  u.password_hash = crypto::pbkdf2_sha256(password, u.password_salt, iterations);
  u.created_at = now;
  if (role == Role::Applicant || role == Role::Admin) u.keypair = crypto::keygen();
  if (role == Role::Applicant) u.vault_key = crypto::SymmetricKey::generate();
  return u;
}

}  // namespace

UserAccount Workflow::register_user(const std::string& user_id, Role role,
                                    const std::string& display_name,
                                    const std::string& password) {
  if (role == Role::Admin) {
    throw Error(Errc::InvalidArgument, "admins are created with `verifi admin create`");
  }
  UserAccount u = make_account(user_id, role, display_name, password,
                               options_.password_iterations, now());
  std::lock_guard lock(mutex_);
  if (users_.count(user_id)) throw Error(Errc::DuplicateUser, "user_id already taken");
  put_user(u);
  return u;
}

UserAccount Workflow::create_admin(const std::string& user_id, const std::string& display_name,
                                   const std::string& password) {
  UserAccount u = make_account(user_id, Role::Admin, display_name, password,
                               options_.password_iterations, now());
  std::lock_guard lock(mutex_);
  if (users_.count(user_id)) throw Error(Errc::DuplicateUser, "user_id already taken");
  put_user(u);
  // Admins sign anchor transactions, so they are the fee-paying issuers.
  ledger_.seed_account(u.keypair->public_key, ledger::kInitialIssuerBalance);
  return u;
}

std::string Workflow::authenticate(const std::string& user_id, const std::string& password) {
  std::optional<UserAccount> u;
  {
    std::lock_guard lock(mutex_);
    if (auto it = users_.find(user_id); it != users_.end()) u = it->second;
  }
  // Unknown users cost the same PBKDF2 work as known ones.
  static const Bytes kDummySalt(16, 0);
  Digest32 got = crypto::pbkdf2_sha256(password, u ? u->password_salt : kDummySalt,
                                       options_.password_iterations);
  if (!u || !crypto::equal_ct(got, u->password_hash)) {
    throw Error(Errc::BadCredentials, "unknown user or wrong password");
  }
  return crypto::issue_token(token_secret_, u->user_id, u->role, options_.token_ttl, now());
}

Principal Workflow::authorize(std::string_view token) const {
  crypto::TokenClaims claims = crypto::verify_token(token_secret_, token, now());
  std::lock_guard lock(mutex_);
  auto it = users_.find(claims.sub);
  if (it == users_.end() || it->second.role != claims.role) {
    throw Error(Errc::Unauthenticated, "token subject is not a current user");
  }
  return {claims.sub, claims.role};
}

const UserAccount& Workflow::require_user(const std::string& id) const {
  auto it = users_.find(id);
  if (it == users_.end()) throw Error(Errc::Unauthenticated, "unknown user " + id);
  return it->second;
}

void Workflow::require_role(const Principal& who, Role role) {
  if (who.role != role) {
    throw Error(Errc::Unauthorized,
                "requires role " + std::string(role_name(role)) + ", caller is " +
                    std::string(role_name(who.role)));
  }
}

CertificateRecord& Workflow::require_cert(const std::string& id) {
  auto it = certs_.find(id);
  if (it == certs_.end()) throw Error(Errc::NotFound, "unknown certificate " + id);
  return it->second;
}

const CertificateRecord* Workflow::cert_by_share_code(const std::string& share_code) const {
  auto it = share_index_.find(share_code);
  if (it == share_index_.end()) return nullptr;
  const CertificateRecord& c = certs_.at(it->second);
  return c.state == CertState::Verified ? &c : nullptr;
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

UploadReceipt Workflow::upload_certificate(const Principal& who, const std::string& title,
                                           const std::string& issuer_name,
                                           ByteView file_bytes) {
  require_role(who, Role::Applicant);
  check_text(title, "title", 256);
  check_text(issuer_name, "issuer_name", 256);
  if (file_bytes.empty()) throw Error(Errc::EmptyFile, "file is empty");
  if (file_bytes.size() > kMaxFileBytes) throw Error(Errc::TooLarge, "file exceeds 16 MiB");

  std::lock_guard lock(mutex_);
  require_user(who.user_id);
  CertificateRecord c;
  c.certificate_id = new_id("cert");
  c.upload_receipt_id = new_id("rcpt");
  c.applicant_id = who.user_id;
  c.title = title;
  c.issuer_name = issuer_name;
  c.file_size = file_bytes.size();
  c.created_at = c.updated_at = now();

  const fs::path path = pending_path(c.certificate_id);
  const fs::path tmp = path.string() + ".tmp";
  {
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (fd < 0) throw Error(Errc::Io, "cannot store pending bytes");
    ssize_t n = ::write(fd, file_bytes.data(), file_bytes.size());
    if (options_.fsync) ::fdatasync(fd);
    ::close(fd);
    if (n != static_cast<ssize_t>(file_bytes.size())) {
      fs::remove(tmp);
      throw Error(Errc::Io, "short write of pending bytes");
    }
  }
  fs::rename(tmp, path);
  put_cert(c);
  notify_admins(NotificationKind::VerificationRequested,
                payload({{"applicant_id", c.applicant_id},
                         {"certificate_id", c.certificate_id},
                         {"title", c.title}}));
  return {c.certificate_id, c.upload_receipt_id};
}

std::vector<CertificateRecord> Workflow::list_own_certificates(const Principal& who) const {
  require_role(who, Role::Applicant);
  std::lock_guard lock(mutex_);
  std::vector<CertificateRecord> out;
  for (const auto& [id, c] : certs_) {
    if (c.applicant_id == who.user_id) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.created_at, a.certificate_id) < std::tie(b.created_at, b.certificate_id);
  });
  return out;
}

std::vector<CertificateRecord> Workflow::admin_queue(const Principal& who) const {
  require_role(who, Role::Admin);
  std::lock_guard lock(mutex_);
  std::vector<CertificateRecord> out;
  for (const auto& [id, c] : certs_) {
    if (c.state == CertState::PendingVerification || c.state == CertState::UnderReview) {
      out.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.created_at, a.certificate_id) < std::tie(b.created_at, b.certificate_id);
  });
  return out;
}

Bytes Workflow::pending_content(const Principal& who, const std::string& certificate_id) const {
  require_role(who, Role::Admin);
  std::lock_guard lock(mutex_);
  auto it = certs_.find(certificate_id);
  if (it == certs_.end()) throw Error(Errc::NotFound, "unknown certificate " + certificate_id);
  if (it->second.state != CertState::PendingVerification &&
      it->second.state != CertState::UnderReview) {
    throw Error(Errc::WrongState, "certificate already decided");
  }
  std::ifstream in(pending_path(certificate_id), std::ios::binary);
  if (!in) throw Error(Errc::Io, "pending bytes missing for " + certificate_id);
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

CertificateRecord Workflow::admin_claim(const Principal& who, const std::string& certificate_id) {
  require_role(who, Role::Admin);
  std::lock_guard lock(mutex_);
  CertificateRecord c = require_cert(certificate_id);
  if (c.state != CertState::PendingVerification) {
    throw Error(Errc::WrongState, "certificate is " + std::string(cert_state_name(c.state)) +
                                      ", expected PendingVerification");
  }
  c.state = CertState::UnderReview;
  c.reviewer_id = who.user_id;
  c.updated_at = now();
  put_cert(c);
  return c;
}

CertificateRecord Workflow::admin_decide(const Principal& who, const std::string& certificate_id,
                                         Decision decision, const std::string& note,
                                         bool approve_fee) {
  require_role(who, Role::Admin);
  if (note.size() > 4096 || !valid_utf8(note)) {
    throw Error(Errc::InvalidArgument, "note must be at most 4096 bytes of UTF-8");
  }
  std::lock_guard lock(mutex_);
  const UserAccount& admin = require_user(who.user_id);
  CertificateRecord c = require_cert(certificate_id);
  if (c.state != CertState::UnderReview) {
    throw Error(Errc::WrongState, "certificate is " + std::string(cert_state_name(c.state)) +
                                      ", expected UnderReview");
  }
  c.reviewer_id = who.user_id;
  if (!note.empty()) c.decision_note = note;

  if (decision == Decision::Reject) {
    c.state = CertState::Rejected;
    c.updated_at = now();
    put_cert(c);
    erase_pending(c.certificate_id);
    notify(c.applicant_id, NotificationKind::VerificationDecided,
           payload({{"certificate_id", c.certificate_id}, {"decision", "Reject"}}));
    return c;
  }

  if (!approve_fee) {
    throw Error(Errc::FeeNotApproved, "approving requires approval of the anchoring fee");
  }
  c.fee_approved = true;
  anchor(c, admin);
  return c;
}

void Workflow::anchor(CertificateRecord& c, const UserAccount& admin) {
  const UserAccount& applicant = require_user(c.applicant_id);
  if (!admin.keypair || !applicant.vault_key) {
    throw Error(Errc::Internal, "account is missing key material");
  }
  Bytes bytes;
  {
    std::ifstream in(pending_path(c.certificate_id), std::ios::binary);
    if (!in) throw Error(Errc::AnchorFailed, "pending bytes missing for " + c.certificate_id);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  Cid cid;
  ledger::AnchorTx tx;
  try {
    cid = cas_.put(bytes);
    crypto::Ciphertext ct = crypto::encrypt_cid(*applicant.vault_key, cid);
    tx.applicant_id = c.applicant_id;
    tx.certificate_id = c.certificate_id;
    tx.encrypted_cid_nonce = ct.nonce;
    tx.encrypted_cid_body = std::move(ct.body);
    tx.fee_units = ledger::anchor_fee(tx.encrypted_cid_body.size());
    tx.timestamp = static_cast<uint64_t>(now());
    tx.sign(*admin.keypair);
  } catch (const Error& e) {
    throw Error(Errc::AnchorFailed, std::string("anchoring failed: ") + e.what());
  }
  const Digest32 hash = tx.tx_hash();

  // Recorded before submission so that a crash mid-commit can be reconciled
  // against the chain on restart.
  put_intent(c.certificate_id, AnchorIntent{hash, cid});
  std::optional<ledger::TxLocation> loc;
  try {
    ledger_.submit_tx(tx, c.fee_approved);
    ledger_.propose_and_commit_block();
    loc = ledger_.find_tx(hash);
    if (!loc) throw Error(Errc::Internal, "anchor tx missing after commit");
  } catch (const Error& e) {
    ledger_.drop_pending(hash);
    put_intent(c.certificate_id, std::nullopt);
    throw Error(Errc::AnchorFailed, std::string("anchoring failed: ") + e.what());
  }

  c.state = CertState::Verified;
  c.cid = cid;
  c.anchor_tx_hash = hash;
  c.anchored_height = loc->height;
  c.updated_at = now();
  intents_.erase(c.certificate_id);
  put_cert(c);
  share_index_[*c.share_code()] = c.certificate_id;
  erase_pending(c.certificate_id);
  notify(c.applicant_id, NotificationKind::VerificationDecided,
         payload({{"certificate_id", c.certificate_id},
                  {"decision", "Approve"},
                  {"share_code", *c.share_code()}}));
}

// ---------------------------------------------------------------------------
// Companies
// ---------------------------------------------------------------------------

PublicSummary Workflow::search_by_share_code(const Principal& who,
                                             const std::string& share_code) const {
  require_role(who, Role::Company);
  std::lock_guard lock(mutex_);
  const CertificateRecord* c = cert_by_share_code(share_code);
  if (!c) throw Error(Errc::NotFound, "no anchored certificate for that share code");
  PublicSummary s;
  s.applicant_display_name = users_.at(c->applicant_id).display_name;
  s.title = c->title;
  s.issuer_name = c->issuer_name;
  s.state = c->state;
  s.anchored_height = *c->anchored_height;
  return s;
}

AccessRequest Workflow::request_access(const Principal& who, const std::string& share_code) {
  require_role(who, Role::Company);
  std::lock_guard lock(mutex_);
  require_user(who.user_id);
  const CertificateRecord* c = cert_by_share_code(share_code);
  if (!c) throw Error(Errc::NotFound, "no anchored certificate for that share code");
  for (const auto& [id, r] : requests_) {
    if (r.company_id == who.user_id && r.certificate_id == c->certificate_id &&
        r.state == RequestState::Pending) {
      throw Error(Errc::DuplicatePending, "a request for this certificate is already pending");
    }
  }
  AccessRequest r;
  r.request_id = new_id("req");
  r.company_id = who.user_id;
  r.applicant_id = c->applicant_id;
  r.certificate_id = c->certificate_id;
  r.created_at = now();
  put_request(r);
  notify(r.applicant_id, NotificationKind::AccessRequested,
         payload({{"certificate_id", r.certificate_id},
                  {"company_id", r.company_id},
                  {"request_id", r.request_id}}));
  return r;
}

std::vector<AccessRequest> Workflow::list_access_requests(const Principal& who) const {
  if (who.role == Role::Admin) {
    throw Error(Errc::Unauthorized, "access requests are visible to applicants and companies");
  }
  std::lock_guard lock(mutex_);
  std::vector<AccessRequest> out;
  for (const auto& [id, r] : requests_) {
    const std::string& party = who.role == Role::Company ? r.company_id : r.applicant_id;
    if (party == who.user_id) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.created_at, a.request_id) < std::tie(b.created_at, b.request_id);
  });
  return out;
}

AccessRequest Workflow::decide_access(const Principal& who, const std::string& request_id,
                                      AccessDecision decision) {
  require_role(who, Role::Applicant);
  std::lock_guard lock(mutex_);
  auto it = requests_.find(request_id);
  if (it == requests_.end()) throw Error(Errc::NotFound, "unknown access request " + request_id);
  AccessRequest r = it->second;
  if (r.applicant_id != who.user_id) {
    throw Error(Errc::Unauthorized, "only the certificate's applicant may decide");
  }
  if (r.state != RequestState::Pending) {
    throw Error(Errc::WrongState, "request already decided");
  }
  r.state = decision == AccessDecision::Grant ? RequestState::Granted : RequestState::Denied;
  r.decided_at = now();
  put_request(r);
  notify(r.company_id, NotificationKind::AccessDecided,
         payload({{"certificate_id", r.certificate_id},
                  {"decision", decision == AccessDecision::Grant ? "Grant" : "Deny"},
                  {"request_id", r.request_id}}));
  return r;
}

CertificateView Workflow::view_certificate(const Principal& who, const std::string& share_code) {
  require_role(who, Role::Company);
  std::lock_guard lock(mutex_);
  const CertificateRecord* c = cert_by_share_code(share_code);
  if (!c) throw Error(Errc::NotFound, "no anchored certificate for that share code");
  const bool granted = std::any_of(requests_.begin(), requests_.end(), [&](const auto& kv) {
    const AccessRequest& r = kv.second;
    return r.company_id == who.user_id && r.certificate_id == c->certificate_id &&
           r.state == RequestState::Granted;
  });
  if (!granted) throw Error(Errc::Forbidden, "no access granted for this certificate");
  return verify_and_fetch(*c);
}

CertificateView Workflow::verify_and_fetch(const CertificateRecord& c) {
  auto tampered = [&](const std::string& why) {
    const std::string detail = "certificate " + c.certificate_id + ": " + why;
    notify_admins(NotificationKind::TamperAlert,
                  payload({{"certificate_id", c.certificate_id}, {"detail", why}}));
    return Error(Errc::TamperDetected, "verification failed for " + detail);
  };

  const Digest32 hash = *c.anchor_tx_hash;
  auto loc = ledger_.find_tx(hash);
  if (!loc || loc->height != *c.anchored_height) throw tampered("anchor tx not on chain");
  ledger::Block block, parent;
  try {
    block = ledger_.block_at(loc->height);
    parent = ledger_.block_at(loc->height - 1);
  } catch (const Error& e) {
    throw tampered(std::string("block unreadable: ") + e.what());
  }
  if (loc->index >= block.txs.size()) throw tampered("tx index out of range");
  const ledger::AnchorTx& tx = block.txs[loc->index];
  if (tx.tx_hash() != hash) throw tampered("tx hash mismatch");
  if (!tx.signature_valid()) throw tampered("issuer signature invalid");
  if (tx.certificate_id != c.certificate_id || tx.applicant_id != c.applicant_id) {
    throw tampered("tx does not reference this certificate");
  }
  const bool issuer_is_admin = std::any_of(users_.begin(), users_.end(), [&](const auto& kv) {
    return kv.second.role == Role::Admin && kv.second.keypair &&
           kv.second.keypair->public_key == tx.issuer_pubkey;
  });
  if (!issuer_is_admin) throw tampered("tx issuer is not an admin");

  ProofBundle proof;
  proof.anchor_tx = tx;
  proof.tx_hash = hash;
  proof.height = loc->height;
  proof.inclusion_proof = ledger::merkle_proof(block.tx_hashes(), loc->index);
  proof.header = block.header;
  proof.signatures = block.signatures;
  if (!ledger::verify_inclusion(hash, proof.inclusion_proof, block.header.merkle_root)) {
    throw tampered("inclusion proof does not reach the merkle root");
  }
  if (parent.hash() != block.header.prev_hash) throw tampered("prev_hash link broken");
  if (!ledger::quorum_valid(block.header, block.signatures, ledger_.validators())) {
    throw tampered("validator quorum invalid");
  }

  const UserAccount& applicant = users_.at(c.applicant_id);
  Cid cid;
  try {
    cid = crypto::decrypt_cid(*applicant.vault_key, {tx.encrypted_cid_nonce, tx.encrypted_cid_body});
  } catch (const Error&) {
    throw tampered("encrypted cid does not open");
  }
  if (!c.cid || cid != *c.cid) throw tampered("cid mismatch");
  CertificateView view;
  try {
    view.file_bytes = cas_.get(cid);
  } catch (const Error& e) {
    throw tampered(std::string("content store: ") + e.what());
  }
  view.proof = std::move(proof);
  return view;
}

// ---------------------------------------------------------------------------
// Notifications
// ---------------------------------------------------------------------------

std::vector<Notification> Workflow::list_notifications(const Principal& who) const {
  std::lock_guard lock(mutex_);
  std::vector<Notification> out;
  for (const auto& [id, n] : notifications_) {
    if (n.recipient_id == who.user_id) out.push_back(n);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.seq > b.seq; });
  return out;
}

Notification Workflow::mark_read(const Principal& who, const std::string& notification_id) {
  std::lock_guard lock(mutex_);
  auto it = notifications_.find(notification_id);
  if (it == notifications_.end() || it->second.recipient_id != who.user_id) {
    throw Error(Errc::NotFound, "unknown notification " + notification_id);
  }
  if (!it->second.read) {
    Notification n = it->second;
    n.read = true;
    notes_log_->append(to_json(n));
    it->second = n;
  }
  return it->second;
}

void Workflow::raise_tamper_alert(const std::string& detail) {
  std::lock_guard lock(mutex_);
  notify_admins(NotificationKind::TamperAlert, payload({{"detail", detail}}));
}

// ---------------------------------------------------------------------------
// Inspection
// ---------------------------------------------------------------------------

std::optional<UserAccount> Workflow::user(const std::string& user_id) const {
  std::lock_guard lock(mutex_);
  auto it = users_.find(user_id);
  if (it == users_.end()) return std::nullopt;
  return it->second;
}

std::optional<CertificateRecord> Workflow::certificate(const std::string& certificate_id) const {
  std::lock_guard lock(mutex_);
  auto it = certs_.find(certificate_id);
  if (it == certs_.end()) return std::nullopt;
  return it->second;
}

std::optional<AccessRequest> Workflow::access_request(const std::string& request_id) const {
  std::lock_guard lock(mutex_);
  auto it = requests_.find(request_id);
  if (it == requests_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Workflow::admin_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, u] : users_) {
    if (u.role == Role::Admin) out.push_back(id);
  }
  return out;
}

bool Workflow::pending_bytes_present(const std::string& certificate_id) const {
  return fs::exists(pending_path(certificate_id));
}

}  // namespace verifi::workflow
