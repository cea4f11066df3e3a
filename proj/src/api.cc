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

#include "verifi/api.h"

#include <httplib.h>

#include <atomic>
#include <charconv>
#include <functional>
#include <json.hpp>
#include <regex>
#include <thread>

namespace verifi::api {

using nlohmann::json;
using workflow::Principal;

ApiError map_error(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return {422, "VALIDATION"};
    case Errc::EmptyFile: return {422, "EMPTY_FILE"};
    case Errc::TooLarge: return {422, "TOO_LARGE"};
    case Errc::FeeNotApproved: return {422, "FEE_NOT_APPROVED"};
    case Errc::BadSignature: return {422, "BAD_SIGNATURE"};

    case Errc::Unauthenticated: return {401, "UNAUTHENTICATED"};
    case Errc::TokenMalformed: return {401, "TOKEN_MALFORMED"};
    case Errc::TokenBadSignature: return {401, "TOKEN_INVALID"};
    case Errc::TokenExpired: return {401, "TOKEN_EXPIRED"};
    case Errc::BadCredentials: return {401, "BAD_CREDENTIALS"};

    case Errc::Unauthorized: return {403, "UNAUTHORIZED"};
    case Errc::Forbidden: return {403, "FORBIDDEN"};

    case Errc::NotFound: return {404, "NOT_FOUND"};
    case Errc::UnknownTx: return {404, "UNKNOWN_TX"};

    case Errc::DuplicateUser: return {409, "DUPLICATE_USER"};
    case Errc::WrongState: return {409, "WRONG_STATE"};
    case Errc::DuplicatePending: return {409, "DUPLICATE_PENDING"};
    case Errc::DuplicateTx: return {409, "DUPLICATE_TX"};
    case Errc::AnchorFailed: return {409, "ANCHOR_FAILED"};
    case Errc::TamperDetected: return {409, "TAMPER_DETECTED"};
    case Errc::CorruptObject: return {409, "CORRUPT_OBJECT"};
    case Errc::InsufficientBalance: return {409, "INSUFFICIENT_BALANCE"};
    case Errc::QuorumNotReached: return {409, "QUORUM_NOT_REACHED"};
    case Errc::EmptyPool: return {409, "EMPTY_POOL"};

    case Errc::Io: return {500, "IO_ERROR"};
    case Errc::Malformed: return {500, "CORRUPT_STATE"};
    case Errc::AuthFailure:
    case Errc::Internal:
    case Errc::AlreadyInitialized:
    case Errc::NotInitialized:
    case Errc::Locked: return {500, "INTERNAL"};
  }
  return {500, "INTERNAL"};
}

std::pair<std::string, int> parse_bind(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(Errc::InvalidArgument, "bind address must be host:port");
  }
  std::string_view port_text = text.substr(colon + 1);
  int port = -1;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 ||
      port > 65535) {
    throw Error(Errc::InvalidArgument, "bind port must be 0..65535");
  }
  return {std::string(text.substr(0, colon)), port};
}

namespace {

// ---------------------------------------------------------------------------
// Request context and body helpers
// ---------------------------------------------------------------------------

struct Ctx {
  Ctx(Services& services, const httplib::Request& request) : s(services), req(request) {}

  Services& s;
  const httplib::Request& req;
  std::optional<Principal> who;
  int status = 200;

  const Principal& principal() const { return *who; }
  std::string param(std::size_t i) const { return req.matches[static_cast<int>(i)].str(); }

  const json& body() {
    if (!parsed_) {
      try {
        body_ = json::parse(req.body);
      } catch (const json::exception&) {
        throw Error(Errc::InvalidArgument, "request body is not valid JSON");
      }
      if (!body_.is_object()) throw Error(Errc::InvalidArgument, "request body must be an object");
      parsed_ = true;
    }
    return body_;
  }

 private:
  json body_;
  bool parsed_ = false;
};

std::string req_str(const json& b, const char* key) {
  auto it = b.find(key);
  if (it == b.end() || !it->is_string()) {
    throw Error(Errc::InvalidArgument, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::string opt_str(const json& b, const char* key) {
  auto it = b.find(key);
  if (it == b.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw Error(Errc::InvalidArgument, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

bool opt_bool(const json& b, const char* key) {
  auto it = b.find(key);
  if (it == b.end() || it->is_null()) return false;
  if (!it->is_boolean()) {
    throw Error(Errc::InvalidArgument, std::string("field '") + key + "' must be a boolean");
  }
  return it->get<bool>();
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error(Errc::InvalidArgument, std::string("query '") + key + "' must be an integer");
  }
  return out;
}

json paged(const httplib::Request& req, const std::vector<json>& items) {
  const std::size_t offset = query_size(req, "offset", 0);
  const std::size_t limit = query_size(req, "limit", kDefaultPageLimit);
  if (limit < 1 || limit > kMaxPageLimit) {
    throw Error(Errc::InvalidArgument, "limit must be 1..100");
  }
  json out = json::array();
  for (std::size_t i = offset; i < items.size() && i < offset + limit; ++i) out.push_back(items[i]);
  return {{"items", out}, {"limit", limit}, {"offset", offset}, {"total", items.size()}};
}

// ---------------------------------------------------------------------------
// Resource views (never include secret material)
// ---------------------------------------------------------------------------

json user_json(const workflow::UserAccount& u) {
  return {{"created_at", u.created_at},
          {"display_name", u.display_name},
          {"role", role_name(u.role)},
          {"user_id", u.user_id}};
}

json cert_json(const workflow::CertificateRecord& c) {
  json j = {{"applicant_id", c.applicant_id},
            {"certificate_id", c.certificate_id},
            {"created_at", c.created_at},
            {"fee_approved", c.fee_approved},
            {"file_size", c.file_size},
            {"issuer_name", c.issuer_name},
            {"state", workflow::cert_state_name(c.state)},
            {"title", c.title},
            {"updated_at", c.updated_at},
            {"upload_receipt_id", c.upload_receipt_id}};
  if (c.reviewer_id) j["reviewer_id"] = *c.reviewer_id;
  if (c.decision_note) j["decision_note"] = *c.decision_note;
  if (auto code = c.share_code()) j["share_code"] = *code;
  if (c.anchored_height) j["anchored_height"] = *c.anchored_height;
  return j;
}

json request_json(const workflow::AccessRequest& r) {
  json j = {{"applicant_id", r.applicant_id},
            {"certificate_id", r.certificate_id},
            {"company_id", r.company_id},
            {"created_at", r.created_at},
            {"request_id", r.request_id},
            {"state", workflow::request_state_name(r.state)}};
  if (r.decided_at) j["decided_at"] = *r.decided_at;
  return j;
}

json notification_json(const workflow::Notification& n) {
  return {{"created_at", n.created_at},
          {"kind", workflow::notification_kind_name(n.kind)},
          {"notification_id", n.notification_id},
          {"payload", n.payload},
          {"read", n.read}};
}

json header_json(const ledger::BlockHeader& h) {
  return {{"hash", hex_encode(h.hash())},
          {"height", h.height},
          {"merkle_root", hex_encode(h.merkle_root)},
          {"prev_hash", hex_encode(h.prev_hash)},
          {"proposer_pubkey", hex_encode(h.proposer_pubkey)},
          {"timestamp", h.timestamp},
          {"version", h.version}};
}

json signatures_json(const std::vector<ledger::ValidatorSignature>& sigs) {
  json out = json::array();
  for (const auto& s : sigs) {
    out.push_back({{"signature", hex_encode(s.signature)}, {"validator", hex_encode(s.validator)}});
  }
  return out;
}

json proof_json(const ledger::InclusionProof& p) {
  json out = json::array();
  for (const auto& step : p.path) {
    out.push_back({{"side", step.side == ledger::Side::Left ? "left" : "right"},
                   {"sibling", hex_encode(step.sibling)}});
  }
  return out;
}

json tx_json(const ledger::AnchorTx& tx) { return json::parse(to_string(tx.canonical_bytes())); }

Digest32 parse_hash(const std::string& text) {
  if (!is_lower_hex(text, 64)) {
    throw Error(Errc::InvalidArgument, "expected 64 lowercase hex characters");
  }
  return hex_decode_fixed<32>(text);
}

// ---------------------------------------------------------------------------
// Routes
// ---------------------------------------------------------------------------

using Handler = std::function<json(Ctx&)>;

struct Route {
  RouteSpec spec;
  Handler handler;
};

RouteSpec pub(std::string method, std::string pattern) {
  return {std::move(method), std::move(pattern), Access::Public, {}};
}
RouteSpec any(std::string method, std::string pattern) {
  return {std::move(method), std::move(pattern), Access::Authenticated, {}};
}
RouteSpec only(std::string method, std::string pattern, std::set<Role> roles) {
  return {std::move(method), std::move(pattern), Access::Roles, std::move(roles)};
}

const std::vector<Route>& routes() {
  static const std::vector<Route> table = [] {
    std::vector<Route> r;
    const auto A = Role::Applicant;
    const auto C = Role::Company;
    const auto D = Role::Admin;

    r.push_back({pub("GET", "/healthz"), [](Ctx& c) -> json {
                   return {{"chain_height", c.s.ledger.tip_height()}, {"status", "ok"}};
                 }});

    r.push_back({pub("POST", "/auth/register"), [](Ctx& c) -> json {
                   const json& b = c.body();
                   auto role = parse_role(lower(req_str(b, "role")));
                   if (!role) throw Error(Errc::InvalidArgument, "role must be applicant or company");
                   auto u = c.s.workflow.register_user(req_str(b, "user_id"), *role,
                                                       req_str(b, "display_name"),
                                                       req_str(b, "password"));
                   c.status = 201;
                   return user_json(u);
                 }});

    r.push_back({pub("POST", "/auth/login"), [](Ctx& c) -> json {
                   const json& b = c.body();
                   const std::string user_id = req_str(b, "user_id");
                   std::string token = c.s.workflow.authenticate(user_id, req_str(b, "password"));
                   Principal p = c.s.workflow.authorize(token);
                   return {{"expires_in", crypto::kDefaultTokenTtl},
                           {"role", role_name(p.role)},
                           {"token", token},
                           {"user_id", p.user_id}};
                 }});

    r.push_back({only("POST", "/certificates", {A}), [](Ctx& c) -> json {
                   const json& b = c.body();
                   Bytes file;
                   try {
                     file = base64_decode(req_str(b, "file_bytes"));
                   } catch (const Error&) {
                     throw Error(Errc::InvalidArgument, "file_bytes must be base64");
                   }
                   auto receipt = c.s.workflow.upload_certificate(
                       c.principal(), req_str(b, "title"), req_str(b, "issuer_name"), file);
                   c.status = 201;
                   return {{"certificate_id", receipt.certificate_id},
                           {"state", "PendingVerification"},
                           {"upload_receipt_id", receipt.upload_receipt_id}};
                 }});

    r.push_back({only("GET", "/certificates", {A}), [](Ctx& c) -> json {
                   std::vector<json> items;
                   for (const auto& cert : c.s.workflow.list_own_certificates(c.principal())) {
                     items.push_back(cert_json(cert));
                   }
                   return paged(c.req, items);
                 }});

    r.push_back({only("GET", "/admin/queue", {D}), [](Ctx& c) -> json {
                   std::vector<json> items;
                   for (const auto& cert : c.s.workflow.admin_queue(c.principal())) {
                     items.push_back(cert_json(cert));
                   }
                   return paged(c.req, items);
                 }});

    r.push_back({only("GET", "/admin/queue/{certificate_id}/content", {D}), [](Ctx& c) -> json {
                   Bytes bytes = c.s.workflow.pending_content(c.principal(), c.param(1));
                   return {{"certificate_id", c.param(1)}, {"file_bytes", base64_encode(bytes)}};
                 }});

    r.push_back({only("POST", "/admin/queue/{certificate_id}/claim", {D}), [](Ctx& c) -> json {
                   return cert_json(c.s.workflow.admin_claim(c.principal(), c.param(1)));
                 }});

    r.push_back({only("POST", "/admin/queue/{certificate_id}/decision", {D}), [](Ctx& c) -> json {
                   const json& b = c.body();
                   const std::string d = lower(req_str(b, "decision"));
                   workflow::Decision decision;
                   if (d == "approve") {
                     decision = workflow::Decision::Approve;
                   } else if (d == "reject") {
                     decision = workflow::Decision::Reject;
                   } else {
                     throw Error(Errc::InvalidArgument, "decision must be approve or reject");
                   }
                   return cert_json(c.s.workflow.admin_decide(c.principal(), c.param(1), decision,
                                                              opt_str(b, "note"),
                                                              opt_bool(b, "approve_fee")));
                 }});

    r.push_back({only("GET", "/search/{share_code}", {C}), [](Ctx& c) -> json {
                   auto s = c.s.workflow.search_by_share_code(c.principal(), c.param(1));
                   return {{"anchored_height", s.anchored_height},
                           {"applicant_display_name", s.applicant_display_name},
                           {"issuer_name", s.issuer_name},
                           {"state", workflow::cert_state_name(s.state)},
                           {"title", s.title}};
                 }});

    r.push_back({only("POST", "/access-requests", {C}), [](Ctx& c) -> json {
                   auto req = c.s.workflow.request_access(c.principal(),
                                                          req_str(c.body(), "share_code"));
                   c.status = 201;
                   return request_json(req);
                 }});

    r.push_back({only("GET", "/access-requests", {A, C}), [](Ctx& c) -> json {
                   std::vector<json> items;
                   for (const auto& req : c.s.workflow.list_access_requests(c.principal())) {
                     items.push_back(request_json(req));
                   }
                   return paged(c.req, items);
                 }});

    r.push_back({only("POST", "/access-requests/{request_id}/decision", {A}), [](Ctx& c) -> json {
                   const std::string d = lower(req_str(c.body(), "decision"));
                   workflow::AccessDecision decision;
                   if (d == "grant") {
                     decision = workflow::AccessDecision::Grant;
                   } else if (d == "deny") {
                     decision = workflow::AccessDecision::Deny;
                   } else {
                     throw Error(Errc::InvalidArgument, "decision must be grant or deny");
                   }
                   return request_json(
                       c.s.workflow.decide_access(c.principal(), c.param(1), decision));
                 }});

    r.push_back({only("GET", "/certificates/{share_code}/content", {C}), [](Ctx& c) -> json {
                   auto view = c.s.workflow.view_certificate(c.principal(), c.param(1));
                   const auto& p = view.proof;
                   const bool included =
                       ledger::verify_inclusion(p.tx_hash, p.inclusion_proof, p.header.merkle_root);
                   json proof = {{"anchor_tx", tx_json(p.anchor_tx)},
                                 {"header", header_json(p.header)},
                                 {"height", p.height},
                                 {"inclusion_proof", proof_json(p.inclusion_proof)},
                                 {"inclusion_verified", included},
                                 {"quorum", c.s.ledger.validators().quorum},
                                 {"signatures", signatures_json(p.signatures)},
                                 {"tx_hash", hex_encode(p.tx_hash)}};
                   return {{"file_bytes", base64_encode(view.file_bytes)}, {"proof", proof}};
                 }});

    r.push_back({any("GET", "/notifications"), [](Ctx& c) -> json {
                   std::vector<json> items;
                   for (const auto& n : c.s.workflow.list_notifications(c.principal())) {
                     items.push_back(notification_json(n));
                   }
                   return paged(c.req, items);
                 }});

    r.push_back({any("POST", "/notifications/{notification_id}/read"), [](Ctx& c) -> json {
                   return notification_json(c.s.workflow.mark_read(c.principal(), c.param(1)));
                 }});

    r.push_back({pub("GET", "/ledger/blocks"), [](Ctx& c) -> json {
                   const uint64_t tip = c.s.ledger.tip_height();
                   const uint64_t to = query_size(c.req, "to", tip);
                   const uint64_t from =
                       query_size(c.req, "from", to >= kMaxBlockRange - 1 ? to - (kMaxBlockRange - 1) : 0);
                   if (from > to || to - from + 1 > kMaxBlockRange) {
                     throw Error(Errc::InvalidArgument, "need from <= to and at most 100 blocks");
                   }
                   json blocks = json::array();
                   for (uint64_t h = from; h <= std::min(to, tip); ++h) {
                     ledger::Block b = c.s.ledger.block_at(h);
                     json hashes = json::array();
                     for (const auto& th : b.tx_hashes()) hashes.push_back(hex_encode(th));
                     json j = header_json(b.header);
                     j["signatures"] = signatures_json(b.signatures);
                     j["tx_count"] = b.txs.size();
                     j["tx_hashes"] = hashes;
                     blocks.push_back(j);
                   }
                   return {{"blocks", blocks}, {"tip_height", tip}};
                 }});

    r.push_back({pub("GET", "/ledger/tx/{tx_hash}"), [](Ctx& c) -> json {
                   const Digest32 hash = parse_hash(c.param(1));
                   auto loc = c.s.ledger.find_tx(hash);
                   if (!loc) throw Error(Errc::UnknownTx, "no such transaction on chain");
                   ledger::Block b = c.s.ledger.block_at(loc->height);
                   auto proof = ledger::merkle_proof(b.tx_hashes(), loc->index);
                   return {{"block_hash", hex_encode(b.hash())},
                           {"height", loc->height},
                           {"inclusion_proof", proof_json(proof)},
                           {"inclusion_verified",
                            ledger::verify_inclusion(hash, proof, b.header.merkle_root)},
                           {"index", loc->index},
                           {"merkle_root", hex_encode(b.header.merkle_root)},
                           {"tx", tx_json(b.txs[loc->index])},
                           {"tx_hash", hex_encode(hash)}};
                 }});

    r.push_back({pub("GET", "/ledger/scan"), [](Ctx& c) -> json {
                   ledger::TamperReport report = c.s.ledger.scan_chain();
                   if (report.clean()) return {{"tampered", false}};
                   return {{"detail", report.violation->detail},
                           {"height", report.violation->height},
                           {"kind", ledger::violation_name(report.violation->kind)},
                           {"tampered", true}};
                 }});
    return r;
  }();
  return table;
}

std::string to_regex(const std::string& pattern) {
  static const std::regex param(R"(\{[a-z_]+\})");
  return std::regex_replace(pattern, param, "([^/]+)");
}

bool localhost_origin(const std::string& origin) {
  static const std::regex re(R"(^https?://(localhost|127\.0\.0\.1|\[::1\])(:[0-9]{1,5})?$)");
  return std::regex_match(origin, re);
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, Errc code, const std::string& message) {
  ApiError e = map_error(code);
  send_json(res, e.status, {{"code", e.code}, {"message", message}});
}

}  // namespace

const std::vector<RouteSpec>& route_table() {
  static const std::vector<RouteSpec> specs = [] {
    std::vector<RouteSpec> out;
    for (const auto& r : routes()) out.push_back(r.spec);
    return out;
  }();
  return specs;
}

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------

struct Server::Impl {
  Services& services;
  ServerOptions options;
  httplib::Server http;
  std::thread thread;
  bool bound = false;

  Impl(Services& s, ServerOptions o) : services(s), options(std::move(o)) {}

  void dispatch(const Route& route, const httplib::Request& req, httplib::Response& res) {
    Ctx ctx(services, req);
    try {
      if (route.spec.access != Access::Public) {
        const std::string auth = req.get_header_value("Authorization");
        constexpr std::string_view kBearer = "Bearer ";
        if (auth.size() <= kBearer.size() || auth.compare(0, kBearer.size(), kBearer) != 0) {
          throw Error(Errc::Unauthenticated, "missing bearer token");
        }
        ctx.who = services.workflow.authorize(std::string_view(auth).substr(kBearer.size()));
        if (route.spec.access == Access::Roles && !route.spec.roles.count(ctx.who->role)) {
          throw Error(Errc::Unauthorized, "role " + std::string(role_name(ctx.who->role)) +
                                              " may not call " + route.spec.method + " " +
                                              route.spec.pattern);
        }
      }
      json body = route.handler(ctx);
      send_json(res, ctx.status, body);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      send_error(res, Errc::Internal, e.what());
    }
  }

  void install() {
    http.set_payload_max_length(24u << 20);
    for (const auto& route : routes()) {
      const std::string re = to_regex(route.spec.pattern);
      auto handler = [this, &route](const httplib::Request& req, httplib::Response& res) {
        dispatch(route, req, res);
      };
      if (route.spec.method == "GET") {
        http.Get(re, handler);
      } else {
        http.Post(re, handler);
      }
    }
    http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    http.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
      const std::string origin = req.get_header_value("Origin");
      if (!origin.empty() && localhost_origin(origin)) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Vary", "Origin");
        res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      }
    });
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const std::string code = res.status == 404   ? "NOT_FOUND"
                               : res.status == 413 ? "TOO_LARGE"
                                                   : "HTTP_ERROR";
      send_json(res, res.status, {{"code", code}, {"message", httplib::status_message(res.status)}});
    });
    if (options.web_root && std::filesystem::is_directory(*options.web_root)) {
      http.set_mount_point("/", options.web_root->string());
    }
  }
};

Server::Server(Services& services, ServerOptions options)
    : impl_(std::make_unique<Impl>(services, std::move(options))) {
  impl_->install();
}

Server::~Server() { stop(); }

int Server::bind() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->http.bind_to_any_port(impl_->options.host);
    if (port < 0) throw Error(Errc::Io, "cannot bind " + impl_->options.host);
  } else if (!impl_->http.bind_to_port(impl_->options.host, port)) {
    throw Error(Errc::Io, "cannot bind " + impl_->options.host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return port;
}

void Server::run() {
  if (!impl_->bound) throw Error(Errc::Internal, "bind() before run()");
  impl_->http.listen_after_bind();
}

int Server::start() {
  int port = bind();
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace verifi::api
