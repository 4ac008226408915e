#include "gridcert/crypto.hpp"

#include <cstring>
#include <ctime>

#include <openssl/asn1.h>
#include <openssl/bio.h>
#include <openssl/bn.h>
#include <openssl/crypto.h>
#include <openssl/err.h>
#include <openssl/objects.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/x509v3.h>

#include "gridcert/error.hpp"

namespace gridcert::crypto {
namespace {

struct BioDelete {
  void operator()(BIO* b) const { BIO_free_all(b); }
};
using BioPtr = std::unique_ptr<BIO, BioDelete>;

BioPtr mem_bio() {
  BioPtr b(BIO_new(BIO_s_mem()));
  if (!b) throw_openssl("BIO_new");
  return b;
}

BioPtr read_bio(std::string_view data) {
  BioPtr b(BIO_new_mem_buf(data.data(), static_cast<int>(data.size())));
  if (!b) throw_openssl("BIO_new_mem_buf");
  return b;
}

std::string drain(BIO* b) {
  char* ptr = nullptr;
  long len = BIO_get_mem_data(b, &ptr);
  return std::string(ptr, static_cast<std::size_t>(len));
}

Timestamp asn1_to_timestamp(const ASN1_TIME* t) {
  std::tm tm{};
  if (ASN1_TIME_to_tm(t, &tm) != 1) throw_openssl("ASN1_TIME_to_tm");
  return from_unix(static_cast<std::int64_t>(timegm(&tm)));
}

struct PassphraseArg {
  std::string_view value;
};

int passphrase_cb(char* buf, int size, int /*rwflag*/, void* u) {
  const auto* arg = static_cast<PassphraseArg*>(u);
  if (!arg || static_cast<int>(arg->value.size()) > size) return -1;
  std::memcpy(buf, arg->value.data(), arg->value.size());
  return static_cast<int>(arg->value.size());
}

}  // namespace

void throw_openssl(const std::string& what) {
  std::string msg = what;
  char buf[256];
  while (unsigned long e = ERR_get_error()) {
    ERR_error_string_n(e, buf, sizeof buf);
    msg += "; ";
    msg += buf;
  }
  throw Error(Errc::CryptoFailure, msg);
}

// --- PublicKey ----------------------------------------------------------------

PublicKey::PublicKey(const PublicKey& other) {
  if (other.key_) {
    EVP_PKEY_up_ref(other.key_.get());
    key_.reset(other.key_.get());
  }
}

PublicKey& PublicKey::operator=(const PublicKey& other) {
  if (this != &other) {
    PublicKey copy(other);
    key_ = std::move(copy.key_);
  }
  return *this;
}

PublicKey PublicKey::from_pem(std::string_view pem) {
  auto bio = read_bio(pem);
  OsslPtr<EVP_PKEY> k(PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr));
  if (!k) throw_openssl("PEM_read_bio_PUBKEY");
  return PublicKey(std::move(k));
}

std::string PublicKey::to_pem() const {
  auto bio = mem_bio();
  if (PEM_write_bio_PUBKEY(bio.get(), key_.get()) != 1) throw_openssl("PEM_write_bio_PUBKEY");
  return drain(bio.get());
}

std::vector<std::uint8_t> PublicKey::to_der() const {
  if (!key_) return {};
  int len = i2d_PUBKEY(key_.get(), nullptr);
  if (len <= 0) throw_openssl("i2d_PUBKEY");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(len));
  unsigned char* p = out.data();
  i2d_PUBKEY(key_.get(), &p);
  return out;
}

bool PublicKey::verify(std::string_view message, std::span<const std::uint8_t> signature) const {
  if (!key_) return false;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key_.get()) != 1) {
    ERR_clear_error();
    return false;
  }
  int rc = EVP_DigestVerify(ctx.get(), signature.data(), signature.size(),
                            reinterpret_cast<const unsigned char*>(message.data()), message.size());
  ERR_clear_error();
  return rc == 1;
}

int PublicKey::bits() const { return key_ ? EVP_PKEY_get_bits(key_.get()) : 0; }

// --- PrivateKey ---------------------------------------------------------------

PrivateKey PrivateKey::generate_rsa(int bits) {
  OsslPtr<EVP_PKEY> k(EVP_RSA_gen(static_cast<unsigned>(bits)));
  if (!k) throw_openssl("EVP_RSA_gen");
  return PrivateKey(std::move(k));
}

PrivateKey PrivateKey::generate_ed25519() {
  OsslPtr<EVP_PKEY> k(EVP_PKEY_Q_keygen(nullptr, nullptr, "ED25519"));
  if (!k) throw_openssl("EVP_PKEY_Q_keygen(ED25519)");
  return PrivateKey(std::move(k));
}

PrivateKey PrivateKey::from_pem(std::string_view pem, std::optional<std::string_view> passphrase) {
  auto bio = read_bio(pem);
  PassphraseArg arg{passphrase.value_or(std::string_view{})};
  OsslPtr<EVP_PKEY> k(PEM_read_bio_PrivateKey(bio.get(), nullptr, passphrase_cb, &arg));
  if (!k) throw_openssl("cannot load private key (wrong passphrase?)");
  return PrivateKey(std::move(k));
}

std::string PrivateKey::to_pem() const {
  auto bio = mem_bio();
  if (PEM_write_bio_PrivateKey_traditional(bio.get(), key_.get(), nullptr, nullptr, 0, nullptr,
                                           nullptr) != 1) {
    throw_openssl("PEM_write_bio_PrivateKey_traditional");
  }
  return drain(bio.get());
}

std::string PrivateKey::to_encrypted_pem(std::string_view passphrase) const {
  auto bio = mem_bio();
  PassphraseArg arg{passphrase};
  if (PEM_write_bio_PKCS8PrivateKey(bio.get(), key_.get(), EVP_aes_256_cbc(), nullptr, 0,
                                    passphrase_cb, &arg) != 1) {
    throw_openssl("PEM_write_bio_PKCS8PrivateKey");
  }
  return drain(bio.get());
}

PublicKey PrivateKey::public_key() const {
  // Round-trip through DER so the public half carries no private material.
  int len = i2d_PUBKEY(key_.get(), nullptr);
  if (len <= 0) throw_openssl("i2d_PUBKEY");
  std::vector<unsigned char> der(static_cast<std::size_t>(len));
  unsigned char* w = der.data();
  i2d_PUBKEY(key_.get(), &w);
  const unsigned char* r = der.data();
  OsslPtr<EVP_PKEY> pub(d2i_PUBKEY(nullptr, &r, len));
  if (!pub) throw_openssl("d2i_PUBKEY");
  return PublicKey(std::move(pub));
}

int PrivateKey::bits() const { return key_ ? EVP_PKEY_get_bits(key_.get()) : 0; }

std::vector<std::uint8_t> PrivateKey::sign(std::string_view message) const {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key_.get()) != 1) {
    throw_openssl("EVP_DigestSignInit");
  }
  std::size_t len = 0;
  const auto* msg = reinterpret_cast<const unsigned char*>(message.data());
  if (EVP_DigestSign(ctx.get(), nullptr, &len, msg, message.size()) != 1) throw_openssl("EVP_DigestSign");
  std::vector<std::uint8_t> sig(len);
  if (EVP_DigestSign(ctx.get(), sig.data(), &len, msg, message.size()) != 1) {
    throw_openssl("EVP_DigestSign");
  }
  sig.resize(len);
  return sig;
}

// --- Names --------------------------------------------------------------------

OsslPtr<X509_NAME> to_x509_name(const SubjectDn& dn) {
  OsslPtr<X509_NAME> name(X509_NAME_new());
  if (!name) throw_openssl("X509_NAME_new");
  for (const auto& rdn : dn.rdns()) {
    const auto* value = reinterpret_cast<const unsigned char*>(rdn.value.c_str());
    if (X509_NAME_add_entry_by_txt(name.get(), rdn.attribute.c_str(), MBSTRING_UTF8, value, -1, -1, 0) !=
        1) {
      throw_openssl("unsupported DN attribute " + rdn.attribute);
    }
  }
  return name;
}

SubjectDn from_x509_name(const X509_NAME* name) {
  std::vector<Rdn> rdns;
  int n = X509_NAME_entry_count(name);
  for (int i = 0; i < n; ++i) {
    const X509_NAME_ENTRY* e = X509_NAME_get_entry(name, i);
    const ASN1_OBJECT* obj = X509_NAME_ENTRY_get_object(e);
    int nid = OBJ_obj2nid(obj);
    std::string attr;
    if (nid != NID_undef && OBJ_nid2sn(nid)) {
      attr = OBJ_nid2sn(nid);
    } else {
      char buf[128];
      OBJ_obj2txt(buf, sizeof buf, obj, 1);
      attr = buf;
    }
    unsigned char* utf8 = nullptr;
    int len = ASN1_STRING_to_UTF8(&utf8, X509_NAME_ENTRY_get_data(e));
    if (len < 0) throw_openssl("ASN1_STRING_to_UTF8");
    std::string value(reinterpret_cast<char*>(utf8), static_cast<std::size_t>(len));
    OPENSSL_free(utf8);
    rdns.push_back({std::move(attr), std::move(value)});
  }
  return SubjectDn(std::move(rdns));
}

// --- Certificate --------------------------------------------------------------

Certificate::Certificate(const Certificate& other) {
  if (other.cert_) {
    X509_up_ref(other.cert_.get());
    cert_.reset(other.cert_.get());
  }
}

Certificate& Certificate::operator=(const Certificate& other) {
  if (this != &other) {
    Certificate copy(other);
    cert_ = std::move(copy.cert_);
  }
  return *this;
}

Certificate Certificate::from_pem(std::string_view pem) {
  auto bio = read_bio(pem);
  OsslPtr<X509> c(PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr));
  if (!c) throw_openssl("PEM_read_bio_X509");
  return Certificate(std::move(c));
}

std::vector<Certificate> Certificate::all_from_pem(std::string_view pem) {
  std::vector<Certificate> out;
  static constexpr std::string_view kBegin = "-----BEGIN CERTIFICATE-----";
  static constexpr std::string_view kEnd = "-----END CERTIFICATE-----";
  std::size_t pos = 0;
  while ((pos = pem.find(kBegin, pos)) != std::string_view::npos) {
    auto end = pem.find(kEnd, pos);
    if (end == std::string_view::npos) throw Error(Errc::CryptoFailure, "truncated PEM certificate");
    end += kEnd.size();
    out.push_back(from_pem(pem.substr(pos, end - pos)));
    pos = end;
  }
  return out;
}

std::string Certificate::to_pem() const {
  auto bio = mem_bio();
  if (PEM_write_bio_X509(bio.get(), cert_.get()) != 1) throw_openssl("PEM_write_bio_X509");
  return drain(bio.get());
}

std::vector<std::uint8_t> Certificate::to_der() const {
  int len = i2d_X509(cert_.get(), nullptr);
  if (len <= 0) throw_openssl("i2d_X509");
  std::vector<std::uint8_t> out(static_cast<std::size_t>(len));
  unsigned char* p = out.data();
  i2d_X509(cert_.get(), &p);
  return out;
}

SubjectDn Certificate::subject() const { return from_x509_name(X509_get_subject_name(cert_.get())); }
SubjectDn Certificate::issuer() const { return from_x509_name(X509_get_issuer_name(cert_.get())); }
Timestamp Certificate::not_before() const { return asn1_to_timestamp(X509_get0_notBefore(cert_.get())); }
Timestamp Certificate::not_after() const { return asn1_to_timestamp(X509_get0_notAfter(cert_.get())); }

std::string Certificate::serial_decimal() const {
  BIGNUM* bn = ASN1_INTEGER_to_BN(X509_get0_serialNumber(cert_.get()), nullptr);
  if (!bn) throw_openssl("ASN1_INTEGER_to_BN");
  char* dec = BN_bn2dec(bn);
  BN_free(bn);
  if (!dec) throw_openssl("BN_bn2dec");
  std::string out(dec);
  OPENSSL_free(dec);
  return out;
}

PublicKey Certificate::public_key() const {
  EVP_PKEY* k = X509_get_pubkey(cert_.get());
  if (!k) throw_openssl("X509_get_pubkey");
  return PublicKey(OsslPtr<EVP_PKEY>(k));
}

bool Certificate::signed_by(const PublicKey& issuer_key) const {
  int rc = X509_verify(cert_.get(), issuer_key.get());
  ERR_clear_error();
  return rc == 1;
}

bool Certificate::is_proxy() const {
  return X509_get_ext_by_NID(cert_.get(), NID_proxyCertInfo, -1) >= 0;
}

std::optional<std::string> Certificate::extension_value(std::string_view oid) const {
  OsslPtr<ASN1_OBJECT> obj(OBJ_txt2obj(std::string(oid).c_str(), 1));
  if (!obj) throw_openssl("OBJ_txt2obj");
  int idx = X509_get_ext_by_OBJ(cert_.get(), obj.get(), -1);
  if (idx < 0) return std::nullopt;
  X509_EXTENSION* ext = X509_get_ext(cert_.get(), idx);
  const ASN1_OCTET_STRING* data = X509_EXTENSION_get_data(ext);
  return std::string(reinterpret_cast<const char*>(ASN1_STRING_get0_data(data)),
                     static_cast<std::size_t>(ASN1_STRING_length(data)));
}

// --- CertificateRequest -------------------------------------------------------

CertificateRequest CertificateRequest::from_pem(std::string_view pem) {
  auto bio = read_bio(pem);
  OsslPtr<X509_REQ> r(PEM_read_bio_X509_REQ(bio.get(), nullptr, nullptr, nullptr));
  if (!r) throw_openssl("PEM_read_bio_X509_REQ");
  return CertificateRequest(std::move(r));
}

std::string CertificateRequest::to_pem() const {
  auto bio = mem_bio();
  if (PEM_write_bio_X509_REQ(bio.get(), req_.get()) != 1) throw_openssl("PEM_write_bio_X509_REQ");
  return drain(bio.get());
}

SubjectDn CertificateRequest::subject() const {
  return from_x509_name(X509_REQ_get_subject_name(req_.get()));
}

PublicKey CertificateRequest::public_key() const {
  EVP_PKEY* k = X509_REQ_get_pubkey(req_.get());
  if (!k) throw_openssl("X509_REQ_get_pubkey");
  return PublicKey(OsslPtr<EVP_PKEY>(k));
}

bool CertificateRequest::self_signature_valid() const {
  auto key = public_key();
  int rc = X509_REQ_verify(req_.get(), key.get());
  ERR_clear_error();
  return rc == 1;
}

// --- Randomness / encoding ----------------------------------------------------

std::vector<std::uint8_t> random_bytes(std::size_t n) {
  std::vector<std::uint8_t> out(n);
  if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1) throw_openssl("RAND_bytes");
  return out;
}

std::string random_hex(std::size_t chars) {
  static constexpr char kDigits[] = "0123456789abcdef";
  auto bytes = random_bytes((chars + 1) / 2);
  std::string out;
  out.reserve(chars);
  for (auto b : bytes) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0xf];
  }
  out.resize(chars);
  return out;
}

std::string random_alnum(std::size_t chars) {
  static constexpr std::string_view kAlphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  static_assert(kAlphabet.size() == 62);
  // 248 = 4 * 62; bytes at or above it would bias the distribution.
  std::string out;
  out.reserve(chars);
  while (out.size() < chars) {
    for (auto b : random_bytes(chars)) {
      if (b < 248 && out.size() < chars) out += kAlphabet[b % 62];
    }
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                          static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(Errc::CryptoFailure, "base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::CryptoFailure, "invalid base64");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string base64url_encode(std::span<const std::uint8_t> data) {
  auto s = base64_encode(data);
  while (!s.empty() && s.back() == '=') s.pop_back();
  for (auto& c : s) {
    if (c == '+') c = '-';
    else if (c == '/') c = '_';
  }
  return s;
}

std::string random_token(std::size_t bytes) { return base64url_encode(random_bytes(bytes)); }

bool secure_equal(std::string_view a, std::string_view b) noexcept {
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace gridcert::crypto
