#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridcert {

// Error categories surfaced by every module. The CLI prints the category name.
enum class Errc {
  MalformedDn,
  MalformedFqan,
  MalformedAssertion,
  UnknownUser,
  SessionExpired,
  NoSuchSession,
  UrlTooLong,
  MalformedReturnUrl,
  ExpiredAssertion,
  InvalidAssertion,
  InvalidToken,
  DnMismatch,
  WeakKey,
  IssuanceFailed,
  StorageFailed,
  CredentialExpired,
  UnknownVo,
  AttributeDenied,
  HandshakeRejected,
  PrefixViolation,
  ServiceUnavailable,
  CryptoFailure,
  InvalidConfig,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

// Reverse of to_string(); used when an error crosses an HTTP boundary.
bool errc_from_string(std::string_view name, Errc& out) noexcept;

}  // namespace gridcert
