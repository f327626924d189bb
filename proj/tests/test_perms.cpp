#include <doctest.h>

#include <random>

#include "gridfs/error.hpp"
#include "gridfs/perms/accounts.hpp"
#include "gridfs/perms/guard.hpp"
#include "gridfs/perms/permissions.hpp"
#include "support.hpp"

using namespace gridfs;
using namespace gridfs::perms;

namespace {

const char* kSampleDoc = R"(<?xml version="1.0" encoding="utf-8"?>
<permissions AccountType="Others">
  <UnmanagedCode value="True">
Ability to call unmanaged code.
  </UnmanagedCode>
  <SocketPermission value="False"/>
  <Execution value="False"/>
  <FileIOPermission value="False">
Controls the ability to access files and folders.</FileIOPermission >
  <RegistryPermission value="False"/>
  <SqlClientPermission value="True"/>
</permissions>
)";

Account others(PermissionDoc doc, const std::filesystem::path& root) {
  Account a;
  a.username = "u";
  a.sandbox_root = root;
  a.perms = std::move(doc);
  return a;
}

}  // namespace

TEST_CASE("sample document parses to its six flags") {
  auto d = parse_permissions(kSampleDoc);
  CHECK(d.account_type == AccountType::Others);
  CHECK(d.allows(Flag::UnmanagedCode));
  CHECK_FALSE(d.allows(Flag::SocketPermission));
  CHECK_FALSE(d.allows(Flag::Execution));
  CHECK_FALSE(d.allows(Flag::FileIOPermission));
  CHECK_FALSE(d.allows(Flag::RegistryPermission));
  CHECK(d.allows(Flag::SqlClientPermission));
  CHECK(d.flags[0].description == "Ability to call unmanaged code.");
  CHECK(d.flags[3].description == "Controls the ability to access files and folders.");
}

TEST_CASE("serialize round-trips") {
  auto d = parse_permissions(kSampleDoc);
  auto text = serialize_permissions(d);
  auto again = parse_permissions(text);
  CHECK(again == d);
  CHECK(serialize_permissions(again) == text);

  // Element order is fixed.
  std::size_t last = 0;
  for (auto f : kAllFlags) {
    auto at = text.find("<" + std::string(flag_name(f)));
    REQUIRE(at != std::string::npos);
    CHECK(at > last);
    last = at;
  }
}

TEST_CASE("parsing rules") {
  SUBCASE("missing elements default to false") {
    auto d = parse_permissions(R"(<permissions AccountType="Others"><Execution value="true"/></permissions>)");
    CHECK(d.allows(Flag::Execution));
    CHECK_FALSE(d.allows(Flag::SocketPermission));
    CHECK_FALSE(d.allows(Flag::FileIOPermission));
  }
  SUBCASE("value is case-insensitive") {
    auto d = parse_permissions(
        R"(<permissions AccountType="Others"><SocketPermission value="TRUE"/><Execution value="fAlSe"/></permissions>)");
    CHECK(d.allows(Flag::SocketPermission));
    CHECK_FALSE(d.allows(Flag::Execution));
  }
  SUBCASE("administrator without flags") {
    auto d = parse_permissions(R"(<permissions AccountType="Administrator"/>)");
    CHECK(d.account_type == AccountType::Administrator);
  }
  SUBCASE("errors") {
    auto code_of = [](const char* xml) {
      try {
        (void)parse_permissions(xml);
      } catch (const Error& e) {
        return e.code();
      }
      return Errc::Ok;
    };
    CHECK(code_of(R"(<permissions AccountType="Root"/>)") == Errc::UnknownAccountType);
    CHECK(code_of(R"(<permissions AccountType="Others">)") == Errc::MalformedDocument);
    CHECK(code_of("not xml at all") == Errc::MalformedDocument);
    CHECK(code_of(R"(<other AccountType="Others"/>)") == Errc::MalformedDocument);
    CHECK(code_of(R"(<permissions AccountType="Others"><Execution value="maybe"/></permissions>)") ==
          Errc::MalformedDocument);
  }
}

TEST_CASE("flag names") {
  for (auto f : kAllFlags) CHECK(parse_flag(flag_name(f)) == f);
  CHECK_THROWS_AS(parse_flag("Teleport"), Error);
}

TEST_CASE("check rules for Others") {
  testing::TempDir dir;
  auto root = std::filesystem::canonical(dir.path());
  auto sample = others(parse_permissions(kSampleDoc), root);

  auto exec = check(sample, {ActionKind::Execution, {}});
  CHECK_FALSE(exec.allowed);
  CHECK(exec.reason == "Execution");
  CHECK_FALSE(check(sample, {ActionKind::FileIo, root / "a.txt"}).allowed);
  CHECK_FALSE(check(sample, {ActionKind::Socket, {}}).allowed);
  CHECK(check(sample, {ActionKind::Unmanaged, {}}).allowed);
  CHECK(check(sample, {ActionKind::Sql, {}}).allowed);
  CHECK_FALSE(check(sample, {ActionKind::Registry, {}}).allowed);

  auto fileio = others(testing::doc_with({Flag::FileIOPermission}), root);
  CHECK(check(fileio, {ActionKind::FileIo, root / "sub" / "a.txt"}).allowed);
  auto escape = check(fileio, {ActionKind::FileIo, root / ".." / "etc" / "passwd"});
  CHECK_FALSE(escape.allowed);
  CHECK(escape.reason == "sandbox");
  CHECK_FALSE(check(fileio, {ActionKind::FileIo, "/etc/passwd"}).allowed);

  // A symlink out of the sandbox does not count as inside.
  std::filesystem::create_directory_symlink("/tmp", root / "link");
  CHECK_FALSE(check(fileio, {ActionKind::FileIo, root / "link" / "x"}).allowed);
}

TEST_CASE("task actions follow declared capabilities") {
  auto acts = task_actions({});
  REQUIRE(acts.size() == 1);
  CHECK(acts[0].kind == ActionKind::Execution);
  acts = task_actions({true, false, false, true});
  REQUIRE(acts.size() == 3);
  CHECK(acts[1].kind == ActionKind::Socket);
  CHECK(acts[2].kind == ActionKind::Sql);

  Account a = others(testing::doc_with({Flag::Execution}), "/nonexistent");
  CHECK(check_all(a, task_actions({})).allowed);
  auto d = check_all(a, task_actions({true, false, false, false}));
  CHECK_FALSE(d.allowed);
  CHECK(d.reason == "SocketPermission");
}

TEST_CASE("administrators pass every check under fuzzed flags") {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    PermissionDoc d;
    d.account_type = AccountType::Administrator;
    for (auto f : kAllFlags) d.set(f, rng() & 1);
    Account a = others(d, "/nonexistent-root");
    for (auto k : {ActionKind::FileIo, ActionKind::Execution, ActionKind::Socket,
                   ActionKind::Unmanaged, ActionKind::Registry, ActionKind::Sql}) {
      CHECK(check(a, {k, "/anywhere/at/all"}).allowed);
    }
    CHECK(check_all(a, task_actions({true, true, true, true})).allowed);
  }
}

TEST_CASE("credential file") {
  testing::TempDir dir;
  auto file = dir / "credentials";
  testing::write_text(file,
                      "# comment\n\nalice:00ff\nbroken line\nbob:zz\nalice:0102\ncarol:aabbcc\n");
  std::vector<std::string> warnings;
  auto creds = read_credentials(file, &warnings);
  REQUIRE(creds.size() == 2);
  CHECK(creds[0].username == "alice");
  CHECK(creds[0].psk == Bytes{1, 2});
  CHECK(creds[1].username == "carol");
  CHECK(warnings.size() == 3);

  write_credentials(file, creds);
  auto back = read_credentials(file);
  REQUIRE(back.size() == 2);
  CHECK(back[1].psk == Bytes{0xaa, 0xbb, 0xcc});
}

TEST_CASE("loading accounts") {
  testing::TempDir dir;
  auto accounts = dir / "accounts";
  std::filesystem::create_directories(accounts);

  SUBCASE("empty directory serves only the built-in admin") {
    write_credentials(dir / "credentials", {{"admin", Bytes(32, 1)}, {"alice", Bytes(32, 2)}});
    std::vector<std::string> warnings;
    auto set = load_accounts(accounts, dir / "credentials", dir / "storage", &warnings);
    CHECK(set.size() == 1);
    REQUIRE(set.find("admin"));
    CHECK(set.find("admin")->is_admin());
    CHECK(set.find("alice") == nullptr);
    CHECK(warnings.size() == 1);
  }
  SUBCASE("documents, malformed files and duplicates") {
    testing::write_text(accounts / "alice.xml", kSampleDoc);
    testing::write_text(accounts / "alice.old.xml",
                        serialize_permissions(testing::doc_with({Flag::Execution})));
    testing::write_text(accounts / "bob.xml", "<permissions AccountType=");
    write_credentials(dir / "credentials",
                      {{"alice", Bytes(32, 2)}, {"bob", Bytes(32, 3)}});
    std::vector<std::string> warnings;
    auto set = load_accounts(accounts, dir / "credentials", dir / "storage", &warnings);
    REQUIRE(set.find("alice"));
    // alice.old.xml sorts first, so alice.xml is the later file.
    CHECK(set.find("alice")->perms == parse_permissions(kSampleDoc));
    CHECK(set.find("bob") == nullptr);
    CHECK(std::filesystem::is_directory(set.find("alice")->sandbox_root));
    CHECK(set.find("alice")->psk == Bytes(32, 2));
    bool saw_dup = false, saw_bad = false;
    for (auto& w : warnings) {
      saw_dup |= w.find("duplicate") != std::string::npos;
      saw_bad |= w.find("bob.xml") != std::string::npos;
    }
    CHECK(saw_dup);
    CHECK(saw_bad);
  }
}

TEST_CASE("account store swaps snapshots") {
  AccountStore store;
  auto before = store.snapshot();
  CHECK(before->size() == 0);
  AccountSet s;
  s.put(Account{"x", {}, "/", {}});
  store.replace(std::move(s));
  CHECK(before->size() == 0);
  CHECK(store.snapshot()->size() == 1);
}
