#pragma once

// Client side of short-lived credential issuance: delegate an assertion to the
// online CA, generate a key pair, submit a CSR, and persist the result.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "gridcert/clock.hpp"
#include "gridcert/crypto.hpp"
#include "gridcert/event_log.hpp"
#include "gridcert/model.hpp"
#include "gridcert/properties.hpp"
#include "gridcert/store.hpp"

namespace gridcert::slcs {

namespace fs = std::filesystem;

struct SlcsFactoryConfig {
  std::string login_url;
  std::string sign_url;
  fs::path store_directory;
  std::string ca_certificate_pem;
  Duration default_lifetime{kMaxCertificateLifetime};
  int key_size = 2048;
  std::size_t passphrase_length = 32;

  // Keys: slcs.login_url, slcs.sign_url, slcs.store_dir, slcs.ca_cert (file),
  // slcs.default_lifetime, slcs.key_size. Throws InvalidConfig.
  static SlcsFactoryConfig from_properties(const Properties& p);
  static SlcsFactoryConfig from_file(const fs::path& file) { return from_properties(Properties::load(file)); }
};

struct CredentialOverrides {
  std::optional<fs::path> certificate_path;
  std::optional<fs::path> private_key_path;
  std::optional<std::string> passphrase;
  // When set, the passphrase is written there (owner-only) with the other two files.
  std::optional<fs::path> passphrase_path;
};

// A freshly issued credential that has not touched the filesystem yet.
struct IssuedCredential {
  std::string certificate_pem;
  std::string encrypted_key_pem;
  std::string passphrase;
  SubjectDn subject;
  Timestamp not_before{};
  Timestamp not_after{};
};

class SlcsEndpointClient {
 public:
  SlcsEndpointClient(std::string login_url, std::string sign_url)
      : login_url_(std::move(login_url)), sign_url_(std::move(sign_url)) {}

  // Errors reported by the CA are rethrown with their original code.
  SlcsLoginResponse login(const Assertion& delegated) const;
  std::string sign(std::string_view csr_pem, std::string_view auth_token, Duration lifetime) const;

 private:
  std::string login_url_;
  std::string sign_url_;
};

// PEM CSR for dn. Throws WeakKey when key is below constraints.key_size_min.
std::string build_csr(const crypto::PrivateKey& key, const SubjectDn& dn, const CertificateConstraints& c);

// Runs login, key generation, CSR and signing entirely in memory. Throws
// ExpiredAssertion before contacting the CA when the assertion has lapsed,
// InvalidAssertion, WeakKey, IssuanceFailed or ServiceUnavailable.
class SlcsRequestor {
 public:
  SlcsRequestor(const SlcsFactoryConfig& config, EventLog* log = nullptr);

  IssuedCredential run(const Assertion& delegated, Duration lifetime, std::string passphrase, Timestamp now) const;

 private:
  const SlcsFactoryConfig& config_;
  SlcsEndpointClient client_;
  crypto::Certificate anchor_;
  EventLog* log_;
};

class SlcsFactory {
 public:
  // Throws InvalidConfig when the store directory is missing or not writable.
  SlcsFactory(SlcsFactoryConfig config, const Clock& clock);

  // Request and persist. Certificate and key are written only after the CA
  // has signed; either both files exist afterwards or neither does.
  Credential new_slcs(const Assertion& delegated, const CredentialOverrides& overrides = {},
                      std::optional<Duration> lifetime = {});

  IssuedCredential request(const Assertion& delegated, std::optional<Duration> lifetime = {},
                           std::optional<std::string> passphrase = {}) const;
  Credential persist(const IssuedCredential& issued, const CredentialOverrides& overrides = {}) const;

  void set_event_log(EventLog* log) noexcept { log_ = log; }
  const SlcsFactoryConfig& config() const noexcept { return config_; }

 private:
  SlcsFactoryConfig config_;
  const Clock& clock_;
  EventLog* log_ = nullptr;
};

// Reads a certificate/key pair from disk and checks that they belong together.
// Validity is not checked here. Throws CryptoFailure on a mismatched pair.
Credential load_credential(const fs::path& certificate, const fs::path& private_key, std::string passphrase);

}  // namespace gridcert::slcs
