#include <gtest/gtest.h>

#include "gridcert/crypto.hpp"
#include "gridcert/x509_builder.hpp"
#include "oracle.hpp"
#include "support.hpp"

using testing_support::fixture;

namespace {

oracle::Bytes from_hex(std::string_view hex) {
  oracle::Bytes out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  }
  return out;
}

std::string to_hex(const oracle::Bytes& b) {
  static const char* d = "0123456789abcdef";
  std::string s;
  for (auto c : b) {
    s += d[c >> 4];
    s += d[c & 15];
  }
  return s;
}

}  // namespace

TEST(OracleSelfTest, Sha256KnownAnswers) {
  std::string abc = "abc";
  EXPECT_EQ(to_hex(oracle::sha256(oracle::Bytes(abc.begin(), abc.end()))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(to_hex(oracle::sha256(oracle::Bytes{})),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(OracleSelfTest, Ed25519Rfc8032TestVector1) {
  auto key = oracle::ed25519_key_from_pem(fixture("rfc8032_test1.pub"));
  EXPECT_EQ(to_hex(key), "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a");
  auto sig_hex = fixture("rfc8032_test1.sig");
  while (!sig_hex.empty() && (sig_hex.back() == '\n' || sig_hex.back() == '\r')) sig_hex.pop_back();
  auto sig = from_hex(sig_hex);
  ASSERT_EQ(sig.size(), 64u);
  EXPECT_TRUE(oracle::ed25519_verify(key, {}, sig));
  EXPECT_FALSE(oracle::ed25519_verify(key, oracle::Bytes{0x00}, sig));
  sig[0] ^= 1;
  EXPECT_FALSE(oracle::ed25519_verify(key, {}, sig));
}

TEST(OracleSelfTest, FixtureCaFields) {
  auto ca = oracle::parse_certificate_pem(fixture("fixture_ca.pem"));
  EXPECT_EQ(ca.version, 3);
  EXPECT_EQ(ca.subject.slash(), "/C=CH/O=Fixture Org/CN=Fixture CA");
  EXPECT_EQ(ca.issuer.der, ca.subject.der);
  EXPECT_EQ(ca.serial_decimal, "81985529216486895");
  EXPECT_EQ(ca.not_before, 1577836800);
  EXPECT_EQ(ca.not_after, 2524607999);
  EXPECT_EQ(oracle::modulus_bits(ca.rsa), 2048u);
  auto bc = ca.find("2.5.29.19");
  ASSERT_NE(bc, nullptr);
  EXPECT_TRUE(bc->critical);
  EXPECT_TRUE(oracle::signed_by(ca, ca));
}

TEST(OracleSelfTest, FixtureEndEntityFields) {
  auto ca = oracle::parse_certificate_pem(fixture("fixture_ca.pem"));
  auto ee = oracle::parse_certificate_pem(fixture("fixture_ee.pem"));
  EXPECT_EQ(ee.subject.slash(), "/C=CH/O=Fixture Org/CN=a\\/b\\\\c");
  EXPECT_EQ(ee.serial_decimal, "2");
  EXPECT_EQ(ee.not_before, 1577836800);
  EXPECT_EQ(ee.not_after, 2524608000);
  EXPECT_EQ(ee.issuer.der, ca.subject.der);
  EXPECT_TRUE(oracle::signed_by(ee, ca));
  EXPECT_FALSE(oracle::signed_by(ca, ee));
  EXPECT_TRUE(oracle::verify_chain({ee}, ca, 1'700'000'000).ok);
  EXPECT_FALSE(oracle::verify_chain({ee}, ca, 1'500'000'000).ok);
  EXPECT_FALSE(oracle::verify_chain({ee}, ee, 1'700'000'000).ok);
}

TEST(OracleSelfTest, SignatureTamperingIsDetected) {
  auto ca = oracle::parse_certificate_pem(fixture("fixture_ca.pem"));
  auto ee = oracle::parse_certificate_pem(fixture("fixture_ee.pem"));
  auto bad = ee;
  bad.signature[bad.signature.size() / 2] ^= 0x01;
  EXPECT_FALSE(oracle::signed_by(bad, ca));
  auto bad_tbs = ee;
  bad_tbs.tbs[bad_tbs.tbs.size() - 3] ^= 0x01;
  EXPECT_FALSE(oracle::signed_by(bad_tbs, ca));
}

TEST(OracleSelfTest, MalformedInputThrows) {
  EXPECT_THROW(oracle::parse_certificate(oracle::Bytes{0x30, 0x82, 0xff}), oracle::ParseError);
  EXPECT_THROW(oracle::parse_certificate(oracle::Bytes{0x04, 0x00}), oracle::ParseError);
  EXPECT_THROW(oracle::pem_decode("nothing here", "CERTIFICATE"), oracle::ParseError);
  EXPECT_EQ(oracle::pem_count(fixture("fixture_ca.pem") + fixture("fixture_ee.pem"), "CERTIFICATE"), 2u);
}

TEST(OracleCrossCheck, AgreesWithLibraryOnBuiltCertificates) {
  using namespace gridcert;
  auto now = testing_support::fixed_now();
  testing_support::LocalCa ca(now);
  const auto& key = testing_support::pooled_key(1);
  auto dn = SubjectDn::parse("/C=CH/O=Cross/CN=x\\/y");
  auto cert = ca.issue(dn, key.public_key(), now, now + Duration{12'345});
  auto oc = oracle::parse_certificate_pem(cert.to_pem());
  EXPECT_EQ(oc.subject.slash(), cert.subject().str());
  EXPECT_EQ(oc.issuer.slash(), cert.issuer().str());
  EXPECT_EQ(oc.serial_decimal, cert.serial_decimal());
  EXPECT_EQ(oc.not_before, to_unix(cert.not_before()));
  EXPECT_EQ(oc.not_after, to_unix(cert.not_after()));
  EXPECT_TRUE(oracle::signed_by(oc, oracle::parse_certificate_pem(ca.certificate_pem())));

  auto req_pem = crypto::build_request(key, dn).to_pem();
  auto req = oracle::parse_request_pem(req_pem);
  EXPECT_TRUE(oracle::request_self_signed(req));
  EXPECT_EQ(req.subject.slash(), dn.str());
}
