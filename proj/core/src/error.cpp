#include "gridcert/error.hpp"

#include <array>
#include <utility>

namespace gridcert {
namespace {

constexpr std::array kNames{
    std::pair{Errc::MalformedDn, std::string_view{"MalformedDn"}},
    std::pair{Errc::MalformedFqan, std::string_view{"MalformedFqan"}},
    std::pair{Errc::MalformedAssertion, std::string_view{"MalformedAssertion"}},
    std::pair{Errc::UnknownUser, std::string_view{"UnknownUser"}},
    std::pair{Errc::SessionExpired, std::string_view{"SessionExpired"}},
    std::pair{Errc::NoSuchSession, std::string_view{"NoSuchSession"}},
    std::pair{Errc::UrlTooLong, std::string_view{"UrlTooLong"}},
    std::pair{Errc::MalformedReturnUrl, std::string_view{"MalformedReturnUrl"}},
    std::pair{Errc::ExpiredAssertion, std::string_view{"ExpiredAssertion"}},
    std::pair{Errc::InvalidAssertion, std::string_view{"InvalidAssertion"}},
    std::pair{Errc::InvalidToken, std::string_view{"InvalidToken"}},
    std::pair{Errc::DnMismatch, std::string_view{"DnMismatch"}},
    std::pair{Errc::WeakKey, std::string_view{"WeakKey"}},
    std::pair{Errc::IssuanceFailed, std::string_view{"IssuanceFailed"}},
    std::pair{Errc::StorageFailed, std::string_view{"StorageFailed"}},
    std::pair{Errc::CredentialExpired, std::string_view{"CredentialExpired"}},
    std::pair{Errc::UnknownVo, std::string_view{"UnknownVo"}},
    std::pair{Errc::AttributeDenied, std::string_view{"AttributeDenied"}},
    std::pair{Errc::HandshakeRejected, std::string_view{"HandshakeRejected"}},
    std::pair{Errc::PrefixViolation, std::string_view{"PrefixViolation"}},
    std::pair{Errc::ServiceUnavailable, std::string_view{"ServiceUnavailable"}},
    std::pair{Errc::CryptoFailure, std::string_view{"CryptoFailure"}},
    std::pair{Errc::InvalidConfig, std::string_view{"InvalidConfig"}},
};

}  // namespace

std::string_view to_string(Errc code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

bool errc_from_string(std::string_view name, Errc& out) noexcept {
  for (const auto& [c, n] : kNames) {
    if (n == name) {
      out = c;
      return true;
    }
  }
  return false;
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)),
      code_(code),
      detail_(detail) {}

}  // namespace gridcert
