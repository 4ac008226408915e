#pragma once

// Thin RAII layer over OpenSSL: keys, certificates, requests, randomness.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>
#include <openssl/x509.h>

#include "gridcert/clock.hpp"
#include "gridcert/model.hpp"

namespace gridcert::crypto {

template <typename T>
struct OsslDelete;
template <> struct OsslDelete<EVP_PKEY> { void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); } };
template <> struct OsslDelete<X509> { void operator()(X509* p) const { X509_free(p); } };
template <> struct OsslDelete<X509_REQ> { void operator()(X509_REQ* p) const { X509_REQ_free(p); } };
template <> struct OsslDelete<X509_NAME> { void operator()(X509_NAME* p) const { X509_NAME_free(p); } };
template <> struct OsslDelete<ASN1_OBJECT> { void operator()(ASN1_OBJECT* p) const { ASN1_OBJECT_free(p); } };

template <typename T>
using OsslPtr = std::unique_ptr<T, OsslDelete<T>>;

// Throws Error(CryptoFailure) carrying the drained OpenSSL error queue.
[[noreturn]] void throw_openssl(const std::string& what);

class PublicKey {
 public:
  PublicKey() = default;
  explicit PublicKey(OsslPtr<EVP_PKEY> key) : key_(std::move(key)) {}
  PublicKey(const PublicKey& other);
  PublicKey& operator=(const PublicKey& other);
  PublicKey(PublicKey&&) noexcept = default;
  PublicKey& operator=(PublicKey&&) noexcept = default;

  static PublicKey from_pem(std::string_view pem);
  std::string to_pem() const;
  // DER SubjectPublicKeyInfo; used for key equality.
  std::vector<std::uint8_t> to_der() const;

  // Ed25519 detached signature check.
  bool verify(std::string_view message, std::span<const std::uint8_t> signature) const;
  int bits() const;

  EVP_PKEY* get() const noexcept { return key_.get(); }
  explicit operator bool() const noexcept { return static_cast<bool>(key_); }
  friend bool operator==(const PublicKey& a, const PublicKey& b) { return a.to_der() == b.to_der(); }

 private:
  OsslPtr<EVP_PKEY> key_;
};

class PrivateKey {
 public:
  PrivateKey() = default;
  explicit PrivateKey(OsslPtr<EVP_PKEY> key) : key_(std::move(key)) {}

  static PrivateKey generate_rsa(int bits);
  static PrivateKey generate_ed25519();
  // Decrypts when a passphrase is supplied; throws CryptoFailure on a wrong one.
  static PrivateKey from_pem(std::string_view pem, std::optional<std::string_view> passphrase = {});

  // Unencrypted traditional PEM (grid convention for proxy keys).
  std::string to_pem() const;
  // PKCS#8 PEM encrypted with AES-256-CBC under a PBKDF2-derived key.
  std::string to_encrypted_pem(std::string_view passphrase) const;

  PublicKey public_key() const;
  int bits() const;
  // Ed25519 detached signature.
  std::vector<std::uint8_t> sign(std::string_view message) const;

  EVP_PKEY* get() const noexcept { return key_.get(); }
  explicit operator bool() const noexcept { return static_cast<bool>(key_); }

 private:
  OsslPtr<EVP_PKEY> key_;
};

// Conversions between the canonical DN model and X509_NAME.
OsslPtr<X509_NAME> to_x509_name(const SubjectDn& dn);
SubjectDn from_x509_name(const X509_NAME* name);

class Certificate {
 public:
  Certificate() = default;
  explicit Certificate(OsslPtr<X509> cert) : cert_(std::move(cert)) {}
  Certificate(const Certificate& other);
  Certificate& operator=(const Certificate& other);
  Certificate(Certificate&&) noexcept = default;
  Certificate& operator=(Certificate&&) noexcept = default;

  static Certificate from_pem(std::string_view pem);
  // Parses every certificate in a PEM bundle, in order; keys are skipped.
  static std::vector<Certificate> all_from_pem(std::string_view pem);

  std::string to_pem() const;
  std::vector<std::uint8_t> to_der() const;

  SubjectDn subject() const;
  SubjectDn issuer() const;
  Timestamp not_before() const;
  Timestamp not_after() const;
  std::string serial_decimal() const;
  PublicKey public_key() const;

  bool signed_by(const PublicKey& issuer_key) const;
  bool is_proxy() const;
  // Raw content of an extension identified by dotted OID, if present.
  std::optional<std::string> extension_value(std::string_view oid) const;

  X509* get() const noexcept { return cert_.get(); }
  explicit operator bool() const noexcept { return static_cast<bool>(cert_); }

 private:
  OsslPtr<X509> cert_;
};

class CertificateRequest {
 public:
  CertificateRequest() = default;
  explicit CertificateRequest(OsslPtr<X509_REQ> req) : req_(std::move(req)) {}

  static CertificateRequest from_pem(std::string_view pem);
  std::string to_pem() const;

  SubjectDn subject() const;
  PublicKey public_key() const;
  bool self_signature_valid() const;

  X509_REQ* get() const noexcept { return req_.get(); }

 private:
  OsslPtr<X509_REQ> req_;
};

// Cryptographic randomness.
std::vector<std::uint8_t> random_bytes(std::size_t n);
std::string random_hex(std::size_t chars);
// Uniform over [A-Za-z0-9] by rejection sampling.
std::string random_alnum(std::size_t chars);
// URL-safe base64 without padding.
std::string random_token(std::size_t bytes);

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);
std::string base64url_encode(std::span<const std::uint8_t> data);

// Constant-time equality for secrets of possibly different length.
bool secure_equal(std::string_view a, std::string_view b) noexcept;

}  // namespace gridcert::crypto
