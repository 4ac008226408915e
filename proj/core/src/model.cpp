#include "gridcert/model.hpp"

#include <algorithm>
#include <array>

#include <json.hpp>

#include "gridcert/error.hpp"

namespace gridcert {

using nlohmann::json;

namespace {

bool valid_attribute_name(std::string_view a) {
  if (a.empty()) return false;
  return std::all_of(a.begin(), a.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
           c == '-';
  });
}

void check_rdn(const Rdn& rdn) {
  if (!valid_attribute_name(rdn.attribute)) {
    throw Error(Errc::MalformedDn, "bad attribute name '" + rdn.attribute + "'");
  }
  if (rdn.value.empty()) throw Error(Errc::MalformedDn, "empty value for " + rdn.attribute);
}

bool fqan_component_ok(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '.' || c == '-';
  });
}

constexpr std::array kUsageNames{
    std::pair{KeyUsage::DigitalSignature, "digitalSignature"},
    std::pair{KeyUsage::KeyEncipherment, "keyEncipherment"},
    std::pair{KeyUsage::DataEncipherment, "dataEncipherment"},
    std::pair{KeyUsage::ClientAuth, "clientAuth"},
};

}  // namespace

// --- SubjectDn --------------------------------------------------------------

SubjectDn::SubjectDn(std::vector<Rdn> rdns) : rdns_(std::move(rdns)) {
  if (rdns_.empty()) throw Error(Errc::MalformedDn, "empty DN");
  for (const auto& r : rdns_) check_rdn(r);
}

std::string canonicalize_dn(const std::vector<Rdn>& rdns) {
  if (rdns.empty()) throw Error(Errc::MalformedDn, "empty DN");
  std::string out;
  for (const auto& r : rdns) {
    check_rdn(r);
    out += '/';
    out += r.attribute;
    out += '=';
    for (char c : r.value) {
      if (c == '/' || c == '\\') out += '\\';
      out += c;
    }
  }
  return out;
}

std::string SubjectDn::str() const { return canonicalize_dn(rdns_); }

SubjectDn SubjectDn::parse(std::string_view text) {
  if (text.empty() || text.front() != '/') {
    throw Error(Errc::MalformedDn, "DN must start with '/'");
  }
  std::vector<Rdn> rdns;
  std::string component;
  auto flush = [&] {
    auto eq = component.find('=');
    if (eq == std::string::npos) throw Error(Errc::MalformedDn, "component without '='");
    Rdn rdn{component.substr(0, eq), component.substr(eq + 1)};
    check_rdn(rdn);
    rdns.push_back(std::move(rdn));
    component.clear();
  };
  // Escapes are resolved while splitting; an escaped '/' never splits.
  for (std::size_t i = 1; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\\') {
      if (i + 1 >= text.size() || (text[i + 1] != '/' && text[i + 1] != '\\')) {
        throw Error(Errc::MalformedDn, "bad escape");
      }
      if (component.find('=') == std::string::npos) {
        throw Error(Errc::MalformedDn, "escape inside attribute name");
      }
      component += text[++i];
    } else if (c == '/') {
      flush();
    } else {
      component += c;
    }
  }
  flush();
  return SubjectDn(std::move(rdns));
}

SubjectDn SubjectDn::with_appended_cn(std::string value) const {
  auto rdns = rdns_;
  rdns.push_back({"CN", std::move(value)});
  return SubjectDn(std::move(rdns));
}

bool SubjectDn::extends_by_one_cn(const SubjectDn& base) const {
  if (rdns_.size() != base.rdns_.size() + 1) return false;
  if (rdns_.back().attribute != "CN") return false;
  return std::equal(base.rdns_.begin(), base.rdns_.end(), rdns_.begin());
}

// --- Fqan -------------------------------------------------------------------

Fqan Fqan::parse(std::string_view text) {
  if (text.size() < 2 || text.front() != '/') {
    throw Error(Errc::MalformedFqan, "FQAN must start with '/': " + std::string(text));
  }
  std::vector<std::string_view> parts;
  std::size_t start = 1;
  while (true) {
    auto slash = text.find('/', start);
    parts.push_back(text.substr(start, slash == std::string_view::npos ? slash : slash - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }

  Fqan f;
  enum class Stage { Vo, Groups, Role, Capability } stage = Stage::Vo;
  for (auto part : parts) {
    if (part.starts_with("Role=")) {
      if (stage == Stage::Vo || stage >= Stage::Role) throw Error(Errc::MalformedFqan, "misplaced Role");
      auto v = part.substr(5);
      if (!fqan_component_ok(v)) throw Error(Errc::MalformedFqan, "bad role");
      f.role = std::string(v);
      stage = Stage::Role;
    } else if (part.starts_with("Capability=")) {
      if (stage == Stage::Vo || stage >= Stage::Capability) {
        throw Error(Errc::MalformedFqan, "misplaced Capability");
      }
      auto v = part.substr(11);
      if (!fqan_component_ok(v)) throw Error(Errc::MalformedFqan, "bad capability");
      f.capability = std::string(v);
      stage = Stage::Capability;
    } else {
      if (!fqan_component_ok(part)) {
        throw Error(Errc::MalformedFqan, "bad component in " + std::string(text));
      }
      if (stage == Stage::Vo) {
        f.vo = std::string(part);
        stage = Stage::Groups;
      } else if (stage == Stage::Groups) {
        f.groups.emplace_back(part);
      } else {
        throw Error(Errc::MalformedFqan, "group after Role/Capability");
      }
    }
  }
  return f;
}

Fqan Fqan::from_request(std::string_view text) {
  if (!text.empty() && text.front() == '/') return parse(text);
  if (!fqan_component_ok(text)) throw Error(Errc::MalformedFqan, "bad VO name: " + std::string(text));
  return Fqan{std::string(text), {}, std::nullopt, std::nullopt};
}

std::string Fqan::str() const {
  if (!fqan_component_ok(vo)) throw Error(Errc::MalformedFqan, "bad VO name");
  std::string out = "/" + vo;
  for (const auto& g : groups) {
    if (!fqan_component_ok(g)) throw Error(Errc::MalformedFqan, "bad group");
    out += "/" + g;
  }
  if (role) out += "/Role=" + *role;
  if (capability) out += "/Capability=" + *capability;
  return out;
}

// --- Assertion --------------------------------------------------------------

namespace {

json assertion_body(const Assertion& a) {
  return json{{"id", a.id},
              {"subject", a.subject},
              {"issuer", a.issuer},
              {"issued_at", to_unix(a.issued_at)},
              {"validity", a.validity.count()},
              {"attributes", a.attributes}};
}

}  // namespace

std::string Assertion::signing_input() const {
  // nlohmann::json objects are key-sorted, which makes dump() canonical.
  return "gridcert-assertion-v1\n" + assertion_body(*this).dump();
}

bool assertion_expired(const Assertion& a, Timestamp now) noexcept { return a.expired(now); }

std::string serialize_assertion(const Assertion& a) {
  auto j = assertion_body(a);
  j["signature"] = a.signature;
  return j.dump();
}

Assertion parse_assertion(std::string_view text) {
  try {
    auto j = json::parse(text);
    Assertion a;
    a.id = j.at("id").get<std::string>();
    a.subject = j.at("subject").get<std::string>();
    a.issuer = j.at("issuer").get<std::string>();
    a.issued_at = from_unix(j.at("issued_at").get<std::int64_t>());
    a.validity = Duration{j.at("validity").get<std::int64_t>()};
    a.attributes = j.at("attributes").get<std::map<std::string, std::string>>();
    a.signature = j.at("signature").get<std::string>();
    if (a.subject.empty() || a.validity.count() <= 0) {
      throw Error(Errc::MalformedAssertion, "empty subject or non-positive validity");
    }
    return a;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedAssertion, e.what());
  }
}

// --- Constraints / login response ---------------------------------------------

void CertificateConstraints::validate() const {
  if (max_lifetime <= Duration::zero() || max_lifetime > kMaxCertificateLifetime) {
    throw Error(Errc::InvalidConfig,
                "max lifetime must be in (0, " + std::to_string(kMaxCertificateLifetime.count()) + "]");
  }
  if (key_size_min < 1024) throw Error(Errc::InvalidConfig, "key size minimum below 1024");
}

std::string serialize_login_response(const SlcsLoginResponse& r) {
  json usages = json::array();
  for (const auto& [flag, name] : kUsageNames) {
    if (has_usage(r.constraints.allowed_key_usages, flag)) usages.push_back(name);
  }
  return json{{"dn", r.dn.str()},
              {"token", r.auth_token},
              {"constraints",
               {{"max_lifetime", r.constraints.max_lifetime.count()},
                {"key_size_min", r.constraints.key_size_min},
                {"key_usages", usages}}}}
      .dump();
}

SlcsLoginResponse parse_login_response(std::string_view text) {
  try {
    auto j = json::parse(text);
    SlcsLoginResponse r;
    r.dn = SubjectDn::parse(j.at("dn").get<std::string>());
    r.auth_token = j.at("token").get<std::string>();
    const auto& c = j.at("constraints");
    r.constraints.max_lifetime = Duration{c.at("max_lifetime").get<std::int64_t>()};
    r.constraints.key_size_min = c.at("key_size_min").get<int>();
    r.constraints.allowed_key_usages = KeyUsage::None;
    for (const auto& u : c.at("key_usages")) {
      for (const auto& [flag, name] : kUsageNames) {
        if (u.get<std::string>() == name) {
          r.constraints.allowed_key_usages = r.constraints.allowed_key_usages | flag;
        }
      }
    }
    r.constraints.validate();
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::IssuanceFailed, std::string("malformed login response: ") + e.what());
  }
}

}  // namespace gridcert
