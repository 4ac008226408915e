#include "gridcert/slcs_client.hpp"

#include <unistd.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridcert/error.hpp"
#include "gridcert/x509_builder.hpp"
#include "http.hpp"

namespace gridcert::slcs {
namespace {

std::string read_file(const fs::path& p, Errc code) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(code, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void note(EventLog* log, std::string event) {
  if (log) log->record(std::move(event));
}

}  // namespace

SlcsFactoryConfig SlcsFactoryConfig::from_properties(const Properties& p) {
  SlcsFactoryConfig c;
  c.login_url = p.require("slcs.login_url");
  c.sign_url = p.require("slcs.sign_url");
  c.store_directory = p.require("slcs.store_dir");
  c.ca_certificate_pem = read_file(p.require("slcs.ca_cert"), Errc::InvalidConfig);
  c.default_lifetime = p.get_duration_or("slcs.default_lifetime", c.default_lifetime);
  c.key_size = static_cast<int>(p.get_int_or("slcs.key_size", c.key_size));
  if (c.default_lifetime.count() <= 0) throw Error(Errc::InvalidConfig, "slcs.default_lifetime must be positive");
  return c;
}

// --- wire client ------------------------------------------------------------------

SlcsLoginResponse SlcsEndpointClient::login(const Assertion& delegated) const {
  auto r = http::send("POST", login_url_, serialize_assertion(delegated));
  if (r.status != 200) http::throw_remote_error(r, "slcs login");
  return parse_login_response(r.body);
}

std::string SlcsEndpointClient::sign(std::string_view csr_pem, std::string_view auth_token,
                                     Duration lifetime) const {
  nlohmann::json body{{"csr", csr_pem}, {"token", auth_token}, {"lifetime", lifetime.count()}};
  auto r = http::send("POST", sign_url_, body.dump());
  if (r.status != 200) http::throw_remote_error(r, "slcs sign");
  return r.body;
}

std::string build_csr(const crypto::PrivateKey& key, const SubjectDn& dn, const CertificateConstraints& c) {
  if (key.bits() < c.key_size_min) {
    throw Error(Errc::WeakKey, std::to_string(key.bits()) + " < " + std::to_string(c.key_size_min) + " bits");
  }
  return crypto::build_request(key, dn).to_pem();
}

// --- requestor --------------------------------------------------------------------

SlcsRequestor::SlcsRequestor(const SlcsFactoryConfig& config, EventLog* log)
    : config_(config),
      client_(config.login_url, config.sign_url),
      anchor_(crypto::Certificate::from_pem(config.ca_certificate_pem)),
      log_(log) {}

IssuedCredential SlcsRequestor::run(const Assertion& delegated, Duration lifetime, std::string passphrase,
                                    Timestamp now) const {
  if (assertion_expired(delegated, now)) {
    throw Error(Errc::ExpiredAssertion, "assertion " + delegated.id + " has expired; renewal required");
  }
  if (lifetime.count() <= 0) throw Error(Errc::IssuanceFailed, "lifetime must be positive");

  SlcsLoginResponse login;
  try {
    login = client_.login(delegated);
  } catch (const Error& e) {
    if (e.code() == Errc::ExpiredAssertion || e.code() == Errc::InvalidAssertion ||
        e.code() == Errc::ServiceUnavailable) {
      throw;
    }
    throw Error(Errc::IssuanceFailed, std::string("login: ") + e.what());
  }
  note(log_, "slcs.login");

  auto key = crypto::PrivateKey::generate_rsa(config_.key_size);
  note(log_, "slcs.keygen");
  auto csr = build_csr(key, login.dn, login.constraints);
  note(log_, "slcs.csr");

  std::string pem;
  try {
    pem = client_.sign(csr, login.auth_token, lifetime);
  } catch (const Error& e) {
    if (e.code() == Errc::WeakKey || e.code() == Errc::ServiceUnavailable) throw;
    throw Error(Errc::IssuanceFailed, std::string("sign: ") + e.what());
  }
  note(log_, "slcs.signed");

  crypto::Certificate cert;
  try {
    cert = crypto::Certificate::from_pem(pem);
  } catch (const Error& e) {
    throw Error(Errc::IssuanceFailed, std::string("unreadable certificate: ") + e.what());
  }
  if (!cert.signed_by(anchor_.public_key())) throw Error(Errc::IssuanceFailed, "certificate not signed by CA");
  if (cert.subject() != login.dn) throw Error(Errc::IssuanceFailed, "certificate subject differs from mapped DN");
  if (!(cert.public_key() == key.public_key())) throw Error(Errc::IssuanceFailed, "certificate key mismatch");

  IssuedCredential out;
  out.certificate_pem = cert.to_pem();
  out.encrypted_key_pem = key.to_encrypted_pem(passphrase);
  out.passphrase = std::move(passphrase);
  out.subject = cert.subject();
  out.not_before = cert.not_before();
  out.not_after = cert.not_after();
  return out;
}

// --- factory ----------------------------------------------------------------------

SlcsFactory::SlcsFactory(SlcsFactoryConfig config, const Clock& clock) : config_(std::move(config)), clock_(clock) {
  std::error_code ec;
  if (!fs::is_directory(config_.store_directory, ec)) {
    throw Error(Errc::InvalidConfig, "store directory does not exist: " + config_.store_directory.string());
  }
  if (::access(config_.store_directory.c_str(), W_OK | X_OK) != 0) {
    throw Error(Errc::InvalidConfig, "store directory not writable: " + config_.store_directory.string());
  }
  if (config_.login_url.empty() || config_.sign_url.empty()) throw Error(Errc::InvalidConfig, "CA endpoints unset");
  if (config_.default_lifetime.count() <= 0) throw Error(Errc::InvalidConfig, "default lifetime must be positive");
  crypto::Certificate::from_pem(config_.ca_certificate_pem);
}

IssuedCredential SlcsFactory::request(const Assertion& delegated, std::optional<Duration> lifetime,
                                      std::optional<std::string> passphrase) const {
  SlcsRequestor requestor(config_, log_);
  return requestor.run(delegated, lifetime.value_or(config_.default_lifetime),
                       passphrase.value_or(crypto::random_alnum(config_.passphrase_length)), clock_.now());
}

Credential SlcsFactory::persist(const IssuedCredential& issued, const CredentialOverrides& overrides) const {
  const std::string stem = crypto::random_hex(16);
  Credential c;
  c.certificate_path = overrides.certificate_path.value_or(config_.store_directory / (stem + ".pem"));
  c.private_key_path = overrides.private_key_path.value_or(config_.store_directory / (stem + ".key"));
  c.passphrase = issued.passphrase;
  c.subject = issued.subject;
  c.not_before = issued.not_before;
  c.not_after = issued.not_after;

  std::vector<store::StoredFile> files;
  files.push_back({c.certificate_path, issued.certificate_pem,
                   store::kOwnerOnly | fs::perms::group_read | fs::perms::others_read, issued.not_after});
  files.push_back({c.private_key_path, issued.encrypted_key_pem, store::kOwnerOnly, std::nullopt});
  if (overrides.passphrase_path) {
    files.push_back({*overrides.passphrase_path, issued.passphrase + "\n", store::kOwnerOnly, std::nullopt});
  }
  store::persist_atomically(files, clock_.now(), log_);
  return c;
}

Credential SlcsFactory::new_slcs(const Assertion& delegated, const CredentialOverrides& overrides,
                                 std::optional<Duration> lifetime) {
  auto issued = request(delegated, lifetime, overrides.passphrase);
  return persist(issued, overrides);
}

Credential load_credential(const fs::path& certificate, const fs::path& private_key, std::string passphrase) {
  auto cert = crypto::Certificate::from_pem(read_file(certificate, Errc::CryptoFailure));
  auto key = crypto::PrivateKey::from_pem(read_file(private_key, Errc::CryptoFailure), passphrase);
  if (!(cert.public_key() == key.public_key())) {
    throw Error(Errc::CryptoFailure, "certificate and key do not match");
  }
  Credential c;
  c.certificate_path = certificate;
  c.private_key_path = private_key;
  c.passphrase = std::move(passphrase);
  c.subject = cert.subject();
  c.not_before = cert.not_before();
  c.not_after = cert.not_after();
  return c;
}

}  // namespace gridcert::slcs
