#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gridfs/bytes.hpp"
#include "gridfs/perms/permissions.hpp"

namespace gridfs::perms {

struct Account {
  std::string username;
  Bytes psk;
  std::filesystem::path sandbox_root;
  PermissionDoc perms;

  bool is_admin() const { return perms.account_type == AccountType::Administrator; }
};

// Username that receives an implicit Administrator document when it has a
// credential line but no accounts/<user>.xml.
inline constexpr std::string_view kBuiltinAdmin = "admin";

class AccountSet {
 public:
  const Account* find(std::string_view username) const;
  void put(Account account);
  std::size_t size() const { return accounts_.size(); }
  const std::map<std::string, Account, std::less<>>& all() const { return accounts_; }

 private:
  std::map<std::string, Account, std::less<>> accounts_;
};

struct Credential {
  std::string username;
  Bytes psk;
};

// `username:hex(psk)` per line; '#' comments and blank lines ignored.
// Malformed lines are skipped with a warning; duplicates resolve to the last.
std::vector<Credential> read_credentials(const std::filesystem::path& file,
                                         std::vector<std::string>* warnings = nullptr);
void write_credentials(const std::filesystem::path& file, const std::vector<Credential>& creds);

// Reads accounts/<user>.xml plus the credential file. Malformed documents are
// skipped with a warning. Sandbox roots are <storage_root>/<username> and are
// created if missing.
AccountSet load_accounts(const std::filesystem::path& accounts_dir,
                         const std::filesystem::path& credentials_file,
                         const std::filesystem::path& storage_root,
                         std::vector<std::string>* warnings = nullptr);

// Immutable snapshot with atomic swap on reload.
class AccountStore {
 public:
  AccountStore() : current_(std::make_shared<const AccountSet>()) {}
  explicit AccountStore(AccountSet set) : current_(std::make_shared<const AccountSet>(std::move(set))) {}

  std::shared_ptr<const AccountSet> snapshot() const {
    std::lock_guard lock(mu_);
    return current_;
  }
  void replace(AccountSet set) {
    auto next = std::make_shared<const AccountSet>(std::move(set));
    std::lock_guard lock(mu_);
    current_ = std::move(next);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const AccountSet> current_;
};

}  // namespace gridfs::perms
