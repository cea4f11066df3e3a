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

#include "verifi/cli.h"

#include <CLI11.hpp>
#include <signal.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "verifi/api.h"
#include "verifi/cas.h"
#include "verifi/crypto.h"
#include "verifi/datadir.h"
#include "verifi/ledger.h"
#include "verifi/services.h"

namespace verifi::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string env_or(const char* name, std::string_view fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::string(fallback);
}

// One-time passwords: 18 random bytes, url-safe base64.
std::string fresh_password() { return base64url_encode(crypto::random_bytes(18)); }

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
}

DataDir open_dir(const fs::path& root) {
  DataDir dir(root);
  dir.require_initialized();
  return dir;
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

json tx_json(const ledger::AnchorTx& tx) { return json::parse(to_string(tx.canonical_bytes())); }

json block_json(const ledger::Block& b) {
  json txs = json::array();
  for (const auto& tx : b.txs) {
    txs.push_back({{"tx", tx_json(tx)}, {"tx_hash", hex_encode(tx.tx_hash())}});
  }
  json sigs = json::array();
  for (const auto& s : b.signatures) {
    sigs.push_back({{"signature", hex_encode(s.signature)}, {"validator", hex_encode(s.validator)}});
  }
  return {{"header", header_json(b.header)}, {"signatures", sigs}, {"txs", txs}};
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_init(const fs::path& root, std::ostream& out) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + root.string());
  DataDir probe(root);
  DirLock lock(probe, DirLock::Mode::Exclusive);
  InitOptions opts;
  opts.quorum_spec = env_or("VERIFI_QUORUM", kDefaultQuorumSpec);
  if (const char* s = std::getenv("VERIFI_TOKEN_SECRET"); s && *s) opts.token_secret = hex_decode(s);
  DataDir dir = DataDir::init(root, opts);
  auto set = dir.validators();
  out << "initialized " << fs::absolute(root).string() << "\n";
  out << "quorum " << set.quorum << "of" << set.validators.size() << "\n";
  out << "genesis " << hex_encode(ledger::genesis_block().hash()) << "\n";
  return kExitOk;
}

int cmd_serve(const fs::path& root, const std::string& bind, std::ostream& out) {
  DataDir dir = open_dir(root);
  DirLock lock(dir, DirLock::Mode::Shared);
  auto [host, port] = api::parse_bind(bind);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  // Worker threads inherit the mask, so only sigwait below sees the signal.
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Services services(dir);
  api::ServerOptions opts{host, port, std::nullopt};
  if (fs::is_directory(dir.web_dir())) opts.web_root = dir.web_dir();
  api::Server server(services, opts);
  int bound = server.start();
  out << "listening on http://" << host << ":" << bound << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  out << "stopped" << std::endl;
  return kExitOk;
}

int cmd_admin_create(const fs::path& root, const std::string& user_id, const std::string& name,
                     std::ostream& out) {
  DataDir dir = open_dir(root);
  DirLock lock(dir, DirLock::Mode::Exclusive);
  Services services(dir);
  std::string password = fresh_password();
  services.workflow.create_admin(user_id, name.empty() ? user_id : name, password);
  out << "admin " << user_id << " created\n";
  out << "password " << password << "\n";
  return kExitOk;
}

int cmd_ledger_verify(const fs::path& root, std::ostream& out) {
  DataDir dir = open_dir(root);
  auto report = ledger::scan_chain_file(ledger::Ledger::chain_path(dir.ledger_dir()),
                                        dir.validators());
  if (report.clean()) {
    out << "ok blocks=" << report.blocks_scanned << "\n";
    return kExitOk;
  }
  const auto& v = *report.violation;
  out << "TAMPERED height=" << v.height << " kind=" << ledger::violation_name(v.kind)
      << " detail=" << v.detail << "\n";
  return kExitTamper;
}

std::optional<uint64_t> parse_height(const std::string& text) {
  uint64_t h = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), h);
  if (ec != std::errc() || p != text.data() + text.size() || text.size() >= 64) return std::nullopt;
  return h;
}

int cmd_ledger_show(const fs::path& root, const std::string& what, std::ostream& out) {
  DataDir dir = open_dir(root);
  DirLock lock(dir, DirLock::Mode::Exclusive);
  ledger::LedgerOptions lo;
  lo.fsync_on_commit = false;
  ledger::Ledger ledger(dir.ledger_dir(), dir.validators(), dir.ledger_keys(), lo);
  if (auto height = parse_height(what)) {
    out << block_json(ledger.block_at(*height)).dump() << "\n";
    return kExitOk;
  }
  if (!is_lower_hex(what, 64)) {
    throw Error(Errc::InvalidArgument, "expected a block height or a 64-char tx hash");
  }
  Digest32 hash = hex_decode_fixed<32>(what);
  auto loc = ledger.find_tx(hash);
  if (!loc) throw Error(Errc::UnknownTx, "unknown tx " + what);
  auto block = ledger.block_at(loc->height);
  json j = {{"block_hash", hex_encode(block.hash())},
            {"height", loc->height},
            {"index", loc->index},
            {"tx", tx_json(block.txs[loc->index])},
            {"tx_hash", what}};
  out << j.dump() << "\n";
  return kExitOk;
}

int cmd_cas_add(const fs::path& root, const fs::path& file, std::ostream& out) {
  DataDir dir = open_dir(root);
  DirLock lock(dir, DirLock::Mode::Exclusive);
  cas::ObjectStore store(dir.cas_dir());
  out << store.put(read_file(file)).to_string() << "\n";
  return kExitOk;
}

int cmd_cas_get(const fs::path& root, const std::string& cid, const fs::path& file,
                std::ostream& out) {
  DataDir dir = open_dir(root);
  DirLock lock(dir, DirLock::Mode::Exclusive);
  cas::ObjectStore store(dir.cas_dir());
  Bytes data = store.get(Cid::parse(cid));
  write_file(file, data);
  out << "wrote " << data.size() << " bytes to " << file.string() << "\n";
  return kExitOk;
}

int cmd_cas_verify(const fs::path& root, std::ostream& out) {
  DataDir dir = open_dir(root);
  cas::ObjectStore store(dir.cas_dir());
  auto report = store.verify();
  for (const auto& c : report.corrupt) out << "corrupt " << c.to_string() << "\n";
  for (const auto& c : report.missing) out << "missing " << c.to_string() << "\n";
  if (report.clean()) {
    out << "ok objects=" << store.object_count() << "\n";
    return kExitOk;
  }
  out << "CORRUPT corrupt=" << report.corrupt.size() << " missing=" << report.missing.size()
      << "\n";
  return kExitTamper;
}

Bytes demo_document(const std::string& holder, const std::string& title) {
  std::string text = "Certificate of completion\nHolder: " + holder + "\nAward: " + title + "\n";
  for (int i = 0; i < 64; ++i) text += "This line pads the document to a few kilobytes.\n";
  return to_bytes(text);
}

int cmd_demo_seed(const fs::path& root, std::ostream& out) {
  DataDir dir = open_dir(root);
  DirLock lock(dir, DirLock::Mode::Exclusive);
  Services services(dir);
  auto& wf = services.workflow;

  struct Person {
    std::string id;
    Role role;
    std::string name;
    std::string password;
  };
  std::vector<Person> people = {{"admin", Role::Admin, "Registry Admin", fresh_password()},
                                {"alice", Role::Applicant, "Alice Moreau", fresh_password()},
                                {"bob", Role::Applicant, "Bob Okafor", fresh_password()},
                                {"acme", Role::Company, "Acme Recruiting", fresh_password()}};
  for (const auto& p : people) {
    if (p.role == Role::Admin) {
      wf.create_admin(p.id, p.name, p.password);
    } else {
      wf.register_user(p.id, p.role, p.name, p.password);
    }
    out << "user " << p.id << " " << role_name(p.role) << " password " << p.password << "\n";
  }

  const workflow::Principal admin{"admin", Role::Admin};
  const std::vector<std::tuple<std::string, std::string, std::string>> certs = {
      {"alice", "BSc Computer Science", "Northfield University"},
      {"alice", "MSc Data Engineering", "Northfield University"},
      {"bob", "BA Economics", "Lakeside College"}};
  for (const auto& [holder, title, issuer] : certs) {
    auto receipt = wf.upload_certificate({holder, Role::Applicant}, title, issuer,
                                         demo_document(holder, title));
    wf.admin_claim(admin, receipt.certificate_id);
    auto rec = wf.admin_decide(admin, receipt.certificate_id, workflow::Decision::Approve,
                               "demo approval", true);
    out << "certificate " << rec.certificate_id << " " << holder << " share_code "
        << rec.share_code().value_or("") << "\n";
  }
  out << "chain height " << services.ledger.tip_height() << "\n";
  return kExitOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::CorruptObject:
    case Errc::TamperDetected:
    case Errc::Malformed: return kExitTamper;
    default: return kExitError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Verifi credential registry"};
  app.require_subcommand(1);
  std::string data_dir = default_data_dir().string();
  app.add_option("--data-dir", data_dir, "data directory (env VERIFI_DATA_DIR)");

  std::function<int()> action;

  app.add_subcommand("init", "create the data directory, genesis block and keys")
      ->callback([&] { action = [&] { return cmd_init(data_dir, out); }; });

  std::string bind = env_or("VERIFI_BIND", api::kDefaultBind);
  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  serve->add_option("--bind", bind, "host:port (env VERIFI_BIND)");
  serve->callback([&] { action = [&] { return cmd_serve(data_dir, bind, out); }; });

  auto* admin = app.add_subcommand("admin", "account tools");
  admin->require_subcommand(1);
  std::string user_id, display_name;
  auto* create = admin->add_subcommand("create", "create an admin and print its password");
  create->add_option("user_id", user_id)->required();
  create->add_option("--name", display_name, "display name");
  create->callback(
      [&] { action = [&] { return cmd_admin_create(data_dir, user_id, display_name, out); }; });

  auto* ledger_cmd = app.add_subcommand("ledger", "ledger tools");
  ledger_cmd->require_subcommand(1);
  ledger_cmd->add_subcommand("verify", "scan the chain for tampering")->callback([&] {
    action = [&] { return cmd_ledger_verify(data_dir, out); };
  });
  std::string target;
  auto* show = ledger_cmd->add_subcommand("show", "print a block or transaction");
  show->add_option("target", target, "block height or tx hash")->required();
  show->callback([&] { action = [&] { return cmd_ledger_show(data_dir, target, out); }; });

  auto* cas_cmd = app.add_subcommand("cas", "object store tools");
  cas_cmd->require_subcommand(1);
  std::string in_file, cid_text, out_file;
  auto* add = cas_cmd->add_subcommand("add", "store a file and print its CID");
  add->add_option("file", in_file)->required();
  add->callback([&] { action = [&] { return cmd_cas_add(data_dir, in_file, out); }; });
  auto* get = cas_cmd->add_subcommand("get", "write the content of a CID to a file");
  get->add_option("cid", cid_text)->required();
  get->add_option("out", out_file)->required();
  get->callback([&] { action = [&] { return cmd_cas_get(data_dir, cid_text, out_file, out); }; });
  cas_cmd->add_subcommand("verify", "re-hash every stored object")->callback([&] {
    action = [&] { return cmd_cas_verify(data_dir, out); };
  });

  auto* demo = app.add_subcommand("demo", "demo data");
  demo->require_subcommand(1);
  demo->add_subcommand("seed", "create demo users and verified certificates")->callback([&] {
    action = [&] { return cmd_demo_seed(data_dir, out); };
  });

  std::vector<const char*> argv{"verifi"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    return action ? action() : kExitError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace verifi::cli
