#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include <openssl/objects.h>

#include "gridcert/x509_builder.hpp"

namespace testing_support {

using namespace gridcert;

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "gridcert-test-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = fs::canonical(tmpl);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::permissions(path_, fs::perms::owner_all, ec);
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& contents) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << contents;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string fixture(const std::string& name) { return read_file(fs::path(GRIDCERT_FIXTURE_DIR) / name); }

const crypto::PrivateKey& pooled_key(std::size_t index) {
  static std::mutex mu;
  static std::map<std::size_t, crypto::PrivateKey> pool;
  std::lock_guard lock(mu);
  auto it = pool.find(index);
  if (it == pool.end()) it = pool.emplace(index, crypto::PrivateKey::generate_rsa(2048)).first;
  return it->second;
}

Timestamp fixed_now() { return from_unix(1'800'000'000); }

LocalCa::LocalCa(Timestamp now, std::size_t key_index) : key_(pooled_key(key_index)) {
  auto dn = SubjectDn::parse("/C=CH/O=Local Test/CN=Local Test CA");
  cert_ = crypto::CertificateBuilder{}
              .serial(1)
              .subject(dn)
              .validity(now - Duration{86'400}, now + Duration{10LL * 365 * 86'400})
              .public_key(key_.public_key())
              .extension(NID_basic_constraints, "critical,CA:TRUE")
              .extension(NID_key_usage, "critical,keyCertSign,cRLSign")
              .sign(key_);
}

crypto::Certificate LocalCa::issue(const SubjectDn& subject, const crypto::PublicKey& key, Timestamp not_before,
                                   Timestamp not_after) {
  return crypto::CertificateBuilder{}
      .serial(++serial_)
      .subject(subject)
      .validity(not_before, not_after)
      .public_key(key)
      .extension(NID_basic_constraints, "critical,CA:FALSE")
      .extension(NID_key_usage, "critical,digitalSignature,keyEncipherment")
      .sign(key_, &cert_);
}

Credential LocalCa::provision(const fs::path& dir, const std::string& stem, const SubjectDn& subject,
                              Timestamp not_before, Timestamp not_after, std::size_t key_index,
                              const std::string& passphrase) {
  const auto& key = pooled_key(key_index);
  auto cert = issue(subject, key.public_key(), not_before, not_after);
  Credential c;
  c.certificate_path = dir / (stem + ".pem");
  c.private_key_path = dir / (stem + ".key");
  c.passphrase = passphrase;
  c.subject = subject;
  c.not_before = not_before;
  c.not_after = not_after;
  write_file(c.certificate_path, cert.to_pem());
  write_file(c.private_key_path, key.to_encrypted_pem(passphrase));
  return c;
}

oracle::Report oracle_chain(const std::vector<std::string>& chain_pems, const std::string& anchor_pem,
                            std::int64_t now) {
  try {
    std::vector<oracle::Certificate> chain;
    for (const auto& pem : chain_pems) chain.push_back(oracle::parse_certificate_pem(pem));
    return oracle::verify_chain(chain, oracle::parse_certificate_pem(anchor_pem), now);
  } catch (const std::exception& e) {
    oracle::Report r;
    r.problems.push_back(std::string("oracle could not parse: ") + e.what());
    return r;
  }
}

}  // namespace testing_support
