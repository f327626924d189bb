#include "gridfs/perms/accounts.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gridfs/error.hpp"

namespace gridfs::perms {

namespace fs = std::filesystem;

const Account* AccountSet::find(std::string_view username) const {
  auto it = accounts_.find(username);
  return it == accounts_.end() ? nullptr : &it->second;
}

void AccountSet::put(Account account) {
  auto name = account.username;
  accounts_.insert_or_assign(std::move(name), std::move(account));
}

namespace {
void warn(std::vector<std::string>* sink, std::string msg) {
  spdlog::warn("{}", msg);
  if (sink) sink->push_back(std::move(msg));
}

bool valid_username(std::string_view u) {
  if (u.empty() || u.size() > 64) return false;
  return std::all_of(u.begin(), u.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}
}  // namespace

std::vector<Credential> read_credentials(const fs::path& file, std::vector<std::string>* warnings) {
  std::vector<Credential> out;
  std::ifstream in(file);
  if (!in) return out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto colon = line.find(':');
    std::string user = line.substr(0, colon);
    if (colon == std::string::npos || !valid_username(user)) {
      warn(warnings, file.string() + ":" + std::to_string(lineno) + ": malformed credential line");
      continue;
    }
    try {
      Bytes psk = from_hex(line.substr(colon + 1));
      if (psk.empty()) throw Error(Errc::InvalidArgument, "empty psk");
      auto dup = std::find_if(out.begin(), out.end(), [&](auto& c) { return c.username == user; });
      if (dup != out.end()) {
        warn(warnings, "duplicate credential for " + user + ", later line wins");
        out.erase(dup);
      }
      out.push_back(Credential{user, std::move(psk)});
    } catch (const Error&) {
      warn(warnings, file.string() + ":" + std::to_string(lineno) + ": bad psk hex");
    }
  }
  return out;
}

void write_credentials(const fs::path& file, const std::vector<Credential>& creds) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& c : creds) out << c.username << ':' << to_hex(c.psk) << '\n';
    if (!out) throw Error(Errc::Internal, "cannot write " + tmp.string());
  }
  fs::rename(tmp, file);
}

AccountSet load_accounts(const fs::path& accounts_dir, const fs::path& credentials_file,
                         const fs::path& storage_root, std::vector<std::string>* warnings) {
  std::map<std::string, PermissionDoc, std::less<>> docs;
  std::error_code ec;
  if (fs::is_directory(accounts_dir, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(accounts_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".xml") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
      auto fname = path.filename().string();
      std::string user = fname.substr(0, fname.find('.'));
      std::ifstream in(path);
      std::stringstream text;
      text << in.rdbuf();
      try {
        auto doc = parse_permissions(text.str());
        if (docs.contains(user)) warn(warnings, "duplicate account " + user + ", later file wins");
        docs.insert_or_assign(user, std::move(doc));
      } catch (const Error& e) {
        warn(warnings, path.string() + ": " + e.what() + " (skipped)");
      }
    }
  }

  AccountSet set;
  for (auto& cred : read_credentials(credentials_file, warnings)) {
    PermissionDoc doc;
    if (auto it = docs.find(cred.username); it != docs.end()) {
      doc = it->second;
    } else if (cred.username == kBuiltinAdmin) {
      doc.account_type = AccountType::Administrator;
    } else {
      warn(warnings, "credential for " + cred.username + " has no permission document (skipped)");
      continue;
    }
    Account acct;
    acct.username = cred.username;
    acct.psk = std::move(cred.psk);
    acct.sandbox_root = storage_root / cred.username;
    fs::create_directories(acct.sandbox_root);
    acct.sandbox_root = fs::canonical(acct.sandbox_root);
    acct.perms = std::move(doc);
    set.put(std::move(acct));
  }
  return set;
}

}  // namespace gridfs::perms
