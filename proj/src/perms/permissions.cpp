#include "gridfs/perms/permissions.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <sstream>

#include "gridfs/error.hpp"

namespace gridfs::perms {

namespace pt = boost::property_tree;

std::string_view flag_name(Flag f) noexcept {
  switch (f) {
    case Flag::UnmanagedCode: return "UnmanagedCode";
    case Flag::SocketPermission: return "SocketPermission";
    case Flag::Execution: return "Execution";
    case Flag::FileIOPermission: return "FileIOPermission";
    case Flag::RegistryPermission: return "RegistryPermission";
    case Flag::SqlClientPermission: return "SqlClientPermission";
  }
  return "?";
}

Flag parse_flag(std::string_view name) {
  for (auto f : kAllFlags) {
    if (flag_name(f) == name) return f;
  }
  throw Error(Errc::InvalidArgument, "unknown permission flag '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto b = std::find_if_not(s.begin(), s.end(), is_space);
  auto e = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  return b < e ? std::string(b, e) : std::string();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool parse_bool(const std::string& text, std::string_view element) {
  auto v = lower(trim(text));
  if (v == "true") return true;
  if (v == "false") return false;
  throw Error(Errc::MalformedDocument,
              "element " + std::string(element) + " has value '" + text + "'");
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

PermissionDoc parse_permissions(std::string_view xml) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error(Errc::MalformedDocument, e.what());
  }
  auto root = tree.get_child_optional("permissions");
  if (!root) throw Error(Errc::MalformedDocument, "missing <permissions> root");

  PermissionDoc doc;
  auto type = root->get_optional<std::string>("<xmlattr>.AccountType");
  if (!type) throw Error(Errc::MalformedDocument, "missing AccountType attribute");
  if (*type == "Administrator") {
    doc.account_type = AccountType::Administrator;
  } else if (*type == "Others") {
    doc.account_type = AccountType::Others;
  } else {
    throw Error(Errc::UnknownAccountType, *type);
  }

  for (auto f : kAllFlags) {
    auto node = root->get_child_optional(std::string(flag_name(f)));
    if (!node) continue;
    auto& slot = doc.flags[static_cast<std::size_t>(f)];
    auto value = node->get_optional<std::string>("<xmlattr>.value");
    if (!value) throw Error(Errc::MalformedDocument, std::string(flag_name(f)) + " lacks value");
    slot.value = parse_bool(*value, flag_name(f));
    slot.description = trim(node->data());
  }
  return doc;
}

std::string serialize_permissions(const PermissionDoc& doc) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n";
  out << "<permissions AccountType=\""
      << (doc.account_type == AccountType::Administrator ? "Administrator" : "Others") << "\">\n";
  for (auto f : kAllFlags) {
    const auto& slot = doc.flags[static_cast<std::size_t>(f)];
    out << "  <" << flag_name(f) << " value=\"" << (slot.value ? "True" : "False") << "\"";
    if (slot.description.empty()) {
      out << "/>\n";
    } else {
      out << ">" << escape(slot.description) << "</" << flag_name(f) << ">\n";
    }
  }
  out << "</permissions>\n";
  return out.str();
}

}  // namespace gridfs::perms
