#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <set>
#include <thread>

#include "gridcert/ca.hpp"
#include "gridcert/error.hpp"
#include "gridcert/sso.hpp"
#include "gridcert/x509_builder.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace gridcert;

namespace {

struct Fixture {
  Timestamp t0 = testing_support::fixed_now();
  sso::IdentityProvider idp;
  ca::CertificateAuthority ca{ca::CaConfig{}, t0};

  Fixture() {
    idp.register_user("alice");
    ca.trust_idp(idp.config().entity_id, idp.public_key());
  }

  Assertion assertion_at(Timestamp t, const std::string& user = "alice") {
    idp.register_user(user);
    return idp.issue_assertion(idp.login(user, t), t);
  }

  std::string csr(const SubjectDn& dn, std::size_t key = 1) {
    return crypto::build_request(testing_support::pooled_key(key), dn).to_pem();
  }
};

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::InvalidConfig;
}

}  // namespace

TEST(CaLogin, MapsDnAndIssuesToken) {
  Fixture f;
  auto r = f.ca.login(f.assertion_at(f.t0), f.t0);
  EXPECT_EQ(r.dn.str(), "/C=CH/O=SimFed/CN=alice");
  EXPECT_GE(r.auth_token.size(), 40u);
  EXPECT_EQ(r.constraints.max_lifetime, Duration{1'000'000});
  EXPECT_EQ(f.ca.outstanding_tokens(), 1u);
}

TEST(CaLogin, ExpiryUsesClockSkew) {
  Fixture f;
  auto a = f.assertion_at(f.t0);
  EXPECT_NO_THROW(f.ca.login(a, f.t0 + Duration{360}));
  EXPECT_EQ(code_of([&] { f.ca.login(a, f.t0 + Duration{361}); }), Errc::ExpiredAssertion);
  auto future = f.assertion_at(f.t0 + Duration{61});
  EXPECT_EQ(code_of([&] { f.ca.login(future, f.t0); }), Errc::InvalidAssertion);
  auto near_future = f.assertion_at(f.t0 + Duration{60});
  EXPECT_NO_THROW(f.ca.login(near_future, f.t0));
}

TEST(CaLogin, RejectsForgedAndUntrustedAssertions) {
  Fixture f;
  auto a = f.assertion_at(f.t0);
  a.subject = "root";
  EXPECT_EQ(code_of([&] { f.ca.login(a, f.t0); }), Errc::InvalidAssertion);
  sso::IdentityProvider other(sso::IdentityProvider::Config{"https://evil.example/idp"});
  other.register_user("alice");
  auto b = other.issue_assertion(other.login("alice", f.t0), f.t0);
  EXPECT_EQ(code_of([&] { f.ca.login(b, f.t0); }), Errc::InvalidAssertion);
  // Same issuer name, different key.
  sso::IdentityProvider impostor;
  impostor.register_user("alice");
  auto c = impostor.issue_assertion(impostor.login("alice", f.t0), f.t0);
  EXPECT_EQ(code_of([&] { f.ca.login(c, f.t0); }), Errc::InvalidAssertion);
}

TEST(CaSign, LifetimeIsMinOfRequestAndCeiling) {
  Fixture f;
  for (std::int64_t req : {1LL, 3600LL, 999'999LL, 1'000'000LL, 1'000'001LL, 3'000'000LL}) {
    auto r = f.ca.login(f.assertion_at(f.t0), f.t0);
    auto pem = f.ca.sign_csr(f.csr(r.dn), r.auth_token, Duration{req}, f.t0);
    auto c = oracle::parse_certificate_pem(pem);
    EXPECT_EQ(c.not_before, to_unix(f.t0));
    EXPECT_EQ(c.not_after - c.not_before, std::min<std::int64_t>(req, 1'000'000)) << req;
  }
}

TEST(CaSign, CertificateVerifiesUnderOracle) {
  Fixture f;
  auto r = f.ca.login(f.assertion_at(f.t0), f.t0);
  auto pem = f.ca.sign_csr(f.csr(r.dn), r.auth_token, Duration{86'400}, f.t0);
  auto report = testing_support::oracle_chain({pem}, f.ca.certificate_pem(), to_unix(f.t0) + 10);
  EXPECT_TRUE(report.ok) << report.summary();
  auto c = oracle::parse_certificate_pem(pem);
  EXPECT_EQ(c.subject.slash(), "/C=CH/O=SimFed/CN=alice");
  EXPECT_EQ(c.version, 3);
  EXPECT_EQ(oracle::modulus_bits(c.rsa), 2048u);
  auto ku = c.find("2.5.29.15");
  ASSERT_NE(ku, nullptr);
  EXPECT_TRUE(ku->critical);
  EXPECT_NE(c.find("2.5.29.37"), nullptr);
  auto anchor = oracle::parse_certificate_pem(f.ca.certificate_pem());
  EXPECT_EQ(anchor.serial_decimal, "1");
}

TEST(CaSign, TokenIsSingleUseAndConsumedOnlyOnSuccess) {
  Fixture f;
  auto r = f.ca.login(f.assertion_at(f.t0), f.t0);
  auto wrong_dn = SubjectDn::parse("/C=CH/O=SimFed/CN=bob");
  EXPECT_EQ(code_of([&] { f.ca.sign_csr(f.csr(wrong_dn), r.auth_token, Duration{100}, f.t0); }), Errc::DnMismatch);
  auto weak = crypto::PrivateKey::generate_rsa(1024);
  auto weak_csr = crypto::build_request(weak, r.dn).to_pem();
  EXPECT_EQ(code_of([&] { f.ca.sign_csr(weak_csr, r.auth_token, Duration{100}, f.t0); }), Errc::WeakKey);
  EXPECT_EQ(code_of([&] { f.ca.sign_csr("garbage", r.auth_token, Duration{100}, f.t0); }), Errc::IssuanceFailed);
  EXPECT_NO_THROW(f.ca.sign_csr(f.csr(r.dn), r.auth_token, Duration{100}, f.t0));
  EXPECT_EQ(code_of([&] { f.ca.sign_csr(f.csr(r.dn), r.auth_token, Duration{100}, f.t0); }), Errc::InvalidToken);
  EXPECT_EQ(code_of([&] { f.ca.sign_csr(f.csr(r.dn), "made-up", Duration{100}, f.t0); }), Errc::InvalidToken);
}

TEST(CaSign, TokenExpires) {
  Fixture f;
  auto r = f.ca.login(f.assertion_at(f.t0), f.t0);
  EXPECT_EQ(code_of([&] { f.ca.sign_csr(f.csr(r.dn), r.auth_token, Duration{100}, f.t0 + Duration{301}); }),
            Errc::InvalidToken);
  auto r2 = f.ca.login(f.assertion_at(f.t0), f.t0);
  EXPECT_NO_THROW(f.ca.sign_csr(f.csr(r2.dn), r2.auth_token, Duration{100}, f.t0 + Duration{300}));
}

TEST(CaSign, ConcurrentRedemptionHasExactlyOneWinner) {
  Fixture f;
  auto r = f.ca.login(f.assertion_at(f.t0), f.t0);
  auto csr = f.csr(r.dn);
  std::atomic<int> ok{0}, invalid{0}, other{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 16; ++i) {
    threads.emplace_back([&] {
      try {
        f.ca.sign_csr(csr, r.auth_token, Duration{100}, f.t0);
        ++ok;
      } catch (const Error& e) {
        (e.code() == Errc::InvalidToken ? invalid : other)++;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(invalid.load(), 15);
  EXPECT_EQ(other.load(), 0);
}

TEST(CaSign, SerialsAreUniqueAndStartAfterCa) {
  Fixture f;
  std::set<std::string> serials;
  for (int i = 0; i < 5; ++i) {
    auto r = f.ca.login(f.assertion_at(f.t0), f.t0);
    serials.insert(crypto::Certificate::from_pem(f.ca.sign_csr(f.csr(r.dn), r.auth_token, Duration{10}, f.t0))
                       .serial_decimal());
  }
  EXPECT_EQ(serials, (std::set<std::string>{"2", "3", "4", "5", "6"}));
  EXPECT_EQ(f.ca.issued_count(), 5u);
}

TEST(CaConfig, CeilingAboveHardLimitIsRejected) {
  ca::CaConfig c;
  c.constraints.max_lifetime = Duration{1'000'001};
  EXPECT_EQ(code_of([&] { ca::CertificateAuthority(c, testing_support::fixed_now()); }), Errc::InvalidConfig);
}

TEST(CaSignProperty, RandomLifetimesAreClamped) {
  Fixture f;
  std::mt19937_64 rng(0x5eed0301);
  auto csr = f.csr(SubjectDn::parse("/C=CH/O=SimFed/CN=alice"));
  for (int i = 0; i < 30; ++i) {
    std::int64_t req = 1 + static_cast<std::int64_t>(rng() % 3'000'000);
    auto r = f.ca.login(f.assertion_at(f.t0), f.t0);
    auto c = crypto::Certificate::from_pem(f.ca.sign_csr(csr, r.auth_token, Duration{req}, f.t0));
    ASSERT_EQ((c.not_after() - c.not_before()).count(), std::min<std::int64_t>(req, 1'000'000));
  }
}
