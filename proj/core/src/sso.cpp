#include "gridcert/sso.hpp"

#include "gridcert/error.hpp"
#include "gridcert/url.hpp"

namespace gridcert::sso {

std::string_view to_string(RedirectStep::Kind k) noexcept {
  switch (k) {
    case RedirectStep::Kind::Logout: return "logout";
    case RedirectStep::Kind::RenewEntry: return "renew";
    case RedirectStep::Kind::ReAuth: return "re-auth";
    case RedirectStep::Kind::Return: return "return";
  }
  return "?";
}

bool verify_assertion(const Assertion& a, const crypto::PublicKey& idp_key) {
  std::vector<std::uint8_t> sig;
  try {
    sig = crypto::base64_decode(a.signature);
  } catch (const Error&) {
    return false;
  }
  return idp_key.verify(a.signing_input(), sig);
}

// --- IdentityProvider -----------------------------------------------------------

IdentityProvider::IdentityProvider() : IdentityProvider(Config{}) {}

IdentityProvider::IdentityProvider(Config config)
    : config_(std::move(config)),
      signing_key_(crypto::PrivateKey::generate_ed25519()),
      public_key_(signing_key_.public_key()) {}

void IdentityProvider::register_user(std::string user_id, std::map<std::string, std::string> attributes) {
  std::lock_guard lock(mu_);
  users_[std::move(user_id)] = std::move(attributes);
}

bool IdentityProvider::has_user(std::string_view user_id) const {
  std::lock_guard lock(mu_);
  return users_.find(user_id) != users_.end();
}

IdpSession IdentityProvider::login(std::string_view user_id, Timestamp now) {
  std::lock_guard lock(mu_);
  if (users_.find(user_id) == users_.end()) {
    throw Error(Errc::UnknownUser, std::string(user_id));
  }
  IdpSession s{crypto::random_token(24), std::string(user_id), now, config_.session_validity};
  sessions_.emplace(s.id, s);
  return s;
}

std::optional<IdpSession> IdentityProvider::find_session(std::string_view session_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

Assertion IdentityProvider::issue_assertion(const IdpSession& session, Timestamp now) const {
  if (!session.active(now)) {
    throw Error(Errc::SessionExpired, "IdP session for " + session.user_id + " expired; login required");
  }
  Assertion a;
  a.id = crypto::random_token(16);
  a.subject = session.user_id;
  a.issuer = config_.entity_id;
  a.issued_at = now;
  a.validity = config_.assertion_validity;
  {
    std::lock_guard lock(mu_);
    auto it = users_.find(session.user_id);
    if (it == users_.end()) throw Error(Errc::UnknownUser, session.user_id);
    a.attributes = it->second;
  }
  a.signature = crypto::base64_encode(signing_key_.sign(a.signing_input()));
  return a;
}

Assertion IdentityProvider::issue_assertion(std::string_view session_id, Timestamp now) const {
  auto s = find_session(session_id);
  if (!s) throw Error(Errc::SessionExpired, "no IdP session; login required");
  return issue_assertion(*s, now);
}

// --- ServiceProvider ------------------------------------------------------------

SpSession ServiceProvider::establish(Assertion assertion, std::string idp_session_id, Timestamp now) {
  SpSession s{crypto::random_token(24), std::move(assertion), std::move(idp_session_id), now,
              config_.session_validity};
  std::lock_guard lock(mu_);
  sessions_.emplace(s.id, s);
  return s;
}

std::optional<SpSession> ServiceProvider::find(std::string_view session_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

bool ServiceProvider::contains(std::string_view session_id) const {
  std::lock_guard lock(mu_);
  return sessions_.find(session_id) != sessions_.end();
}

RedirectStep ServiceProvider::logout(std::string_view session_id, std::string return_url) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(Errc::NoSuchSession, std::string(session_id));
  sessions_.erase(it);
  return RedirectStep{RedirectStep::Kind::RenewEntry, std::move(return_url), {}, false};
}

// --- Return URL codec ---------------------------------------------------------------

std::string encode_return_url(std::string_view base, std::string_view original, std::size_t limit) {
  if (original.size() > limit) {
    throw Error(Errc::UrlTooLong, std::to_string(original.size()) + " > " + std::to_string(limit));
  }
  if (!url::is_absolute(original)) {
    throw Error(Errc::MalformedReturnUrl, "return address must be absolute: " + std::string(original));
  }
  while (!base.empty() && base.back() == '/') base.remove_suffix(1);
  return std::string(base) + "/" + url::percent_encode(original);
}

std::string decode_return_url(std::string_view renewal_url) {
  auto slash = renewal_url.rfind('/');
  if (slash == std::string_view::npos) throw Error(Errc::MalformedReturnUrl, "no path segment");
  auto segment = renewal_url.substr(slash + 1);
  if (segment.empty()) throw Error(Errc::MalformedReturnUrl, "empty return segment");
  for (char c : segment) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
              c == '.' || c == '_' || c == '~' || c == '%';
    if (!ok) throw Error(Errc::MalformedReturnUrl, "unescaped character in return segment");
  }
  std::string decoded;
  if (!url::percent_decode(segment, decoded)) throw Error(Errc::MalformedReturnUrl, "bad escape");
  if (!url::is_absolute(decoded)) throw Error(Errc::MalformedReturnUrl, "decoded URL is not absolute");
  return decoded;
}

// --- Renewal state machine -----------------------------------------------------------

AssertionRenewal::Result AssertionRenewal::run(const SpSession& session, std::string_view original_url,
                                               Timestamp now, const CookieMap& carried) {
  const std::string renew = renewal_url_for(original_url);

  auto idp_session = idp_.find_session(session.idp_session_id);
  if (!idp_session || !idp_session->active(now)) {
    throw Error(Errc::SessionExpired, "IdP session expired; renewal needs user login");
  }

  CookieMap kept;
  for (const auto& [name, value] : carried) {
    if (config_.cookie_whitelist.count(name)) kept.emplace(name, value);
  }

  Result result;
  CookieMap at_logout = carried;
  at_logout[config_.session_cookie] = session.id;
  result.trace.push_back({RedirectStep::Kind::Logout, url::append_query(config_.logout_url, "return", renew),
                          std::move(at_logout), false});

  auto back = sp_.logout(session.id, renew);
  back.cookies = kept;
  result.trace.push_back(std::move(back));

  auto fresh = idp_.issue_assertion(*idp_session, now);
  result.trace.push_back(
      {RedirectStep::Kind::ReAuth, url::append_query(config_.idp_url, "return", renew), kept, false});
  result.session = sp_.establish(std::move(fresh), idp_session->id, now);

  CookieMap final_cookies = kept;
  final_cookies[config_.session_cookie] = result.session.id;
  result.trace.push_back({RedirectStep::Kind::Return, decode_return_url(renew), std::move(final_cookies), false});
  return result;
}

}  // namespace gridcert::sso
