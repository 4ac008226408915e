#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gridcert/clock.hpp"
#include "gridcert/crypto.hpp"
#include "gridcert/model.hpp"
#include "oracle.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p);
void write_file(const fs::path& p, const std::string& contents);
std::string fixture(const std::string& name);

// RSA keys are slow to make; tests draw from a small pool created on demand.
const gridcert::crypto::PrivateKey& pooled_key(std::size_t index);

gridcert::Timestamp fixed_now();

// A CA built directly from the X.509 builder, bypassing the SLCS and SSO
// modules. Used to pre-provision credentials.
class LocalCa {
 public:
  explicit LocalCa(gridcert::Timestamp now, std::size_t key_index = 0);
  const gridcert::crypto::Certificate& certificate() const { return cert_; }
  std::string certificate_pem() const { return cert_.to_pem(); }

  gridcert::crypto::Certificate issue(const gridcert::SubjectDn& subject, const gridcert::crypto::PublicKey& key,
                                      gridcert::Timestamp not_before, gridcert::Timestamp not_after);
  // Writes <stem>.pem and <stem>.key (encrypted with passphrase) into dir.
  gridcert::Credential provision(const fs::path& dir, const std::string& stem, const gridcert::SubjectDn& subject,
                                 gridcert::Timestamp not_before, gridcert::Timestamp not_after,
                                 std::size_t key_index = 1, const std::string& passphrase = "provisioned-pass");

 private:
  const gridcert::crypto::PrivateKey& key_;
  gridcert::crypto::Certificate cert_;
  std::uint64_t serial_ = 100;
};

// Oracle verdict for a PEM chain (leaf first) against a PEM anchor.
oracle::Report oracle_chain(const std::vector<std::string>& chain_pems, const std::string& anchor_pem,
                            std::int64_t now);

}  // namespace testing_support
