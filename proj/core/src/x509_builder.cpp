#include "gridcert/x509_builder.hpp"

#include <openssl/asn1.h>
#include <openssl/err.h>
#include <openssl/objects.h>
#include <openssl/x509v3.h>

#include "gridcert/error.hpp"

namespace gridcert::crypto {

CertificateBuilder& CertificateBuilder::serial(std::uint64_t value) {
  serial_ = value;
  return *this;
}

CertificateBuilder& CertificateBuilder::subject(const SubjectDn& dn) {
  subject_ = dn;
  return *this;
}

CertificateBuilder& CertificateBuilder::issuer(const SubjectDn& dn) {
  issuer_ = dn;
  return *this;
}

CertificateBuilder& CertificateBuilder::validity(Timestamp not_before, Timestamp not_after) {
  not_before_ = not_before;
  not_after_ = not_after;
  return *this;
}

CertificateBuilder& CertificateBuilder::public_key(const PublicKey& key) {
  public_key_ = key;
  return *this;
}

CertificateBuilder& CertificateBuilder::extension(int nid, std::string value) {
  extensions_.emplace_back(nid, std::move(value));
  return *this;
}

CertificateBuilder& CertificateBuilder::raw_extension(std::string oid, bool critical, std::string der) {
  raw_extensions_.push_back({std::move(oid), critical, std::move(der)});
  return *this;
}

Certificate CertificateBuilder::sign(const PrivateKey& signing_key, const Certificate* issuer_cert) const {
  OsslPtr<X509> x(X509_new());
  if (!x) throw_openssl("X509_new");
  if (X509_set_version(x.get(), X509_VERSION_3) != 1) throw_openssl("X509_set_version");
  if (ASN1_INTEGER_set_uint64(X509_get_serialNumber(x.get()), serial_) != 1) throw_openssl("serial");

  auto subject = to_x509_name(subject_);
  if (X509_set_subject_name(x.get(), subject.get()) != 1) throw_openssl("X509_set_subject_name");
  if (issuer_cert) {
    if (X509_set_issuer_name(x.get(), X509_get_subject_name(issuer_cert->get())) != 1) {
      throw_openssl("X509_set_issuer_name");
    }
  } else {
    auto issuer = to_x509_name(issuer_.empty() ? subject_ : issuer_);
    if (X509_set_issuer_name(x.get(), issuer.get()) != 1) throw_openssl("X509_set_issuer_name");
  }

  if (!ASN1_TIME_set(X509_getm_notBefore(x.get()), static_cast<time_t>(to_unix(not_before_))) ||
      !ASN1_TIME_set(X509_getm_notAfter(x.get()), static_cast<time_t>(to_unix(not_after_)))) {
    throw_openssl("ASN1_TIME_set");
  }
  if (X509_set_pubkey(x.get(), public_key_.get()) != 1) throw_openssl("X509_set_pubkey");

  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, issuer_cert ? issuer_cert->get() : x.get(), x.get(), nullptr, nullptr, 0);
  for (const auto& [nid, value] : extensions_) {
    X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value.c_str());
    if (!ext) throw_openssl("extension " + std::string(OBJ_nid2sn(nid)) + "=" + value);
    int ok = X509_add_ext(x.get(), ext, -1);
    X509_EXTENSION_free(ext);
    if (ok != 1) throw_openssl("X509_add_ext");
  }
  for (const auto& raw : raw_extensions_) {
    OsslPtr<ASN1_OBJECT> obj(OBJ_txt2obj(raw.oid.c_str(), 1));
    if (!obj) throw_openssl("OBJ_txt2obj " + raw.oid);
    ASN1_OCTET_STRING* data = ASN1_OCTET_STRING_new();
    if (!data) throw_openssl("ASN1_OCTET_STRING_new");
    ASN1_OCTET_STRING_set(data, reinterpret_cast<const unsigned char*>(raw.der.data()),
                          static_cast<int>(raw.der.size()));
    X509_EXTENSION* ext = X509_EXTENSION_create_by_OBJ(nullptr, obj.get(), raw.critical ? 1 : 0, data);
    ASN1_OCTET_STRING_free(data);
    if (!ext) throw_openssl("X509_EXTENSION_create_by_OBJ");
    int ok = X509_add_ext(x.get(), ext, -1);
    X509_EXTENSION_free(ext);
    if (ok != 1) throw_openssl("X509_add_ext");
  }

  if (X509_sign(x.get(), signing_key.get(), EVP_sha256()) <= 0) throw_openssl("X509_sign");
  return Certificate(std::move(x));
}

CertificateRequest build_request(const PrivateKey& key, const SubjectDn& subject) {
  OsslPtr<X509_REQ> req(X509_REQ_new());
  if (!req) throw_openssl("X509_REQ_new");
  if (X509_REQ_set_version(req.get(), 0) != 1) throw_openssl("X509_REQ_set_version");
  auto name = to_x509_name(subject);
  if (X509_REQ_set_subject_name(req.get(), name.get()) != 1) throw_openssl("X509_REQ_set_subject_name");
  if (X509_REQ_set_pubkey(req.get(), key.get()) != 1) throw_openssl("X509_REQ_set_pubkey");
  if (X509_REQ_sign(req.get(), key.get(), EVP_sha256()) <= 0) throw_openssl("X509_REQ_sign");
  return CertificateRequest(std::move(req));
}

std::string der_octet_string(std::string_view content) {
  ASN1_OCTET_STRING* s = ASN1_OCTET_STRING_new();
  if (!s) throw_openssl("ASN1_OCTET_STRING_new");
  ASN1_OCTET_STRING_set(s, reinterpret_cast<const unsigned char*>(content.data()),
                        static_cast<int>(content.size()));
  unsigned char* out = nullptr;
  int len = i2d_ASN1_OCTET_STRING(s, &out);
  ASN1_OCTET_STRING_free(s);
  if (len <= 0) throw_openssl("i2d_ASN1_OCTET_STRING");
  std::string der(reinterpret_cast<char*>(out), static_cast<std::size_t>(len));
  OPENSSL_free(out);
  return der;
}

std::string der_octet_string_content(std::string_view der) {
  const auto* p = reinterpret_cast<const unsigned char*>(der.data());
  ASN1_OCTET_STRING* s = d2i_ASN1_OCTET_STRING(nullptr, &p, static_cast<long>(der.size()));
  if (!s) throw_openssl("d2i_ASN1_OCTET_STRING");
  std::string out(reinterpret_cast<const char*>(ASN1_STRING_get0_data(s)),
                  static_cast<std::size_t>(ASN1_STRING_length(s)));
  bool trailing = p != reinterpret_cast<const unsigned char*>(der.data()) + der.size();
  ASN1_OCTET_STRING_free(s);
  if (trailing) throw Error(Errc::CryptoFailure, "trailing bytes after OCTET STRING");
  return out;
}

}  // namespace gridcert::crypto
