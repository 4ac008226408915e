#include "gridcert/voms.hpp"

#include <json.hpp>

#include "gridcert/error.hpp"
#include "http.hpp"

namespace gridcert::voms {

using nlohmann::json;

namespace {

json payload_json(const AttributeGrant& g) {
  json fqans = json::array();
  for (const auto& f : g.fqans) fqans.push_back(f.str());
  return json{{"holder", g.holder.str()},
              {"issuer", g.issuer},
              {"fqans", fqans},
              {"not_before", to_unix(g.not_before)},
              {"not_after", to_unix(g.not_after)}};
}

AttributeGrant from_payload(const json& j) {
  AttributeGrant g;
  g.holder = SubjectDn::parse(j.at("holder").get<std::string>());
  g.issuer = j.at("issuer").get<std::string>();
  for (const auto& f : j.at("fqans")) g.fqans.push_back(Fqan::parse(f.get<std::string>()));
  g.not_before = from_unix(j.at("not_before").get<std::int64_t>());
  g.not_after = from_unix(j.at("not_after").get<std::int64_t>());
  return g;
}

}  // namespace

std::string AttributeGrant::payload() const { return payload_json(*this).dump(); }

bool AttributeGrant::verify(const crypto::PublicKey& issuer_key) const {
  std::vector<std::uint8_t> sig;
  try {
    sig = crypto::base64_decode(signature);
  } catch (const Error&) {
    return false;
  }
  return issuer_key.verify(payload(), sig);
}

std::string serialize_grant(const AttributeGrant& g) {
  auto j = payload_json(g);
  j["signature"] = g.signature;
  return j.dump();
}

AttributeGrant parse_grant(std::string_view text) {
  try {
    auto j = json::parse(text);
    auto g = from_payload(j);
    g.signature = j.at("signature").get<std::string>();
    return g;
  } catch (const json::exception& e) {
    throw Error(Errc::AttributeDenied, std::string("malformed grant: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::AttributeDenied, std::string("malformed grant: ") + e.what());
  }
}

std::string encode_grants(const std::vector<AttributeGrant>& grants) {
  json arr = json::array();
  for (const auto& g : grants) {
    auto p = g.payload();
    arr.push_back({{"payload", crypto::base64_encode({reinterpret_cast<const std::uint8_t*>(p.data()), p.size()})},
                   {"signature", g.signature}});
  }
  return arr.dump();
}

std::vector<AttributeGrant> decode_grants(std::string_view text) try {
  std::vector<AttributeGrant> out;
  auto arr = json::parse(text);
  if (!arr.is_array()) throw Error(Errc::CryptoFailure, "grant extension is not a list");
  for (const auto& item : arr) {
    auto raw = crypto::base64_decode(item.at("payload").get<std::string>());
    auto g = from_payload(json::parse(std::string(raw.begin(), raw.end())));
    g.signature = item.at("signature").get<std::string>();
    // A payload that does not re-serialize identically would verify against
    // different bytes than were signed.
    if (g.payload() != std::string(raw.begin(), raw.end())) {
      throw Error(Errc::CryptoFailure, "grant payload is not canonical");
    }
    out.push_back(std::move(g));
  }
  return out;
} catch (const json::exception& e) {
  throw Error(Errc::CryptoFailure, std::string("malformed grant list: ") + e.what());
}

// --- server -----------------------------------------------------------------------

VomsServer::VomsServer(std::string vo, std::string issuer_name)
    : vo_(std::move(vo)),
      issuer_(std::move(issuer_name)),
      key_(crypto::PrivateKey::generate_ed25519()),
      public_key_(key_.public_key()) {
  Fqan::from_request(vo_);
}

void VomsServer::add_member(const SubjectDn& member, const std::vector<Fqan>& fqans) {
  std::lock_guard lock(mu_);
  auto& held = members_[member.str()];
  held.insert(Fqan::from_request(vo_).str());
  for (const auto& f : fqans) {
    if (f.vo != vo_) throw Error(Errc::InvalidConfig, f.str() + " is not in VO " + vo_);
    held.insert(f.str());
  }
}

AttributeGrant VomsServer::grant(const SubjectDn& holder, const std::vector<Fqan>& requested, Duration lifetime,
                                 Timestamp now) const {
  for (const auto& f : requested) {
    if (f.vo != vo_) throw Error(Errc::AttributeDenied, f.str() + " is not served by VO " + vo_);
  }
  if (lifetime.count() <= 0) throw Error(Errc::AttributeDenied, "grant lifetime must be positive");

  AttributeGrant g;
  {
    std::lock_guard lock(mu_);
    auto it = members_.find(holder.str());
    if (it == members_.end()) {
      for (auto m = members_.begin(); m != members_.end(); ++m) {
        if (holder.extends_by_one_cn(SubjectDn::parse(m->first))) {
          it = m;
          break;
        }
      }
    }
    if (it == members_.end()) throw Error(Errc::AttributeDenied, holder.str() + " is not a member of " + vo_);
    for (const auto& f : requested) {
      if (it->second.count(f.str())) g.fqans.push_back(f);
    }
  }
  g.holder = holder;
  g.issuer = issuer_;
  g.not_before = now;
  g.not_after = now + std::min(lifetime, kMaxGrantLifetime);
  auto p = g.payload();
  g.signature = crypto::base64_encode(key_.sign(p));
  return g;
}

// --- client -----------------------------------------------------------------------

AttributeGrant voms_fetch(std::string_view endpoint, const SubjectDn& holder, const std::vector<Fqan>& requested,
                          Duration lifetime) {
  json fqans = json::array();
  for (const auto& f : requested) fqans.push_back(f.str());
  json body{{"holder", holder.str()}, {"fqans", fqans}, {"lifetime", lifetime.count()}};
  http::Response r;
  try {
    r = http::send("POST", endpoint, body.dump());
  } catch (const Error& e) {
    throw Error(Errc::AttributeDenied, std::string("attribute service unreachable: ") + e.what());
  }
  if (r.status != 200) {
    try {
      http::throw_remote_error(r, "voms");
    } catch (const Error& e) {
      throw Error(Errc::AttributeDenied, e.detail());
    }
  }
  return parse_grant(r.body);
}

}  // namespace gridcert::voms
