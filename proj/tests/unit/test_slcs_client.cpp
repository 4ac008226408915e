#include <gtest/gtest.h>

#include <algorithm>

#include "gridcert/error.hpp"
#include "gridcert/services.hpp"
#include "gridcert/slcs_client.hpp"
#include "gridcert/store.hpp"
#include "support.hpp"

using namespace gridcert;
namespace fs = std::filesystem;

namespace {

services::SimulatedFederation::Options no_voms() {
  services::SimulatedFederation::Options o;
  o.start_voms = false;
  return o;
}

struct Fixture {
  ManualClock clock{testing_support::fixed_now()};
  services::SimulatedFederation fed{clock, no_voms()};
  testing_support::TempDir dir;

  Fixture() { fed.enroll("alice"); }

  Assertion fresh() {
    auto now = clock.now();
    return fed.idp().issue_assertion(fed.idp().login("alice", now), now);
  }
  slcs::SlcsFactory factory() { return slcs::SlcsFactory(fed.slcs_config(dir.path()), clock); }
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

std::size_t file_count(const fs::path& d) {
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(d), fs::directory_iterator()));
}

}  // namespace

TEST(SlcsFactory, IssuesAndPersistsCredential) {
  Fixture f;
  auto factory = f.factory();
  auto cred = factory.new_slcs(f.fresh());
  EXPECT_EQ(cred.subject.str(), "/C=CH/O=SimFed/CN=alice");
  EXPECT_EQ(cred.not_before, f.clock.now());
  EXPECT_EQ(cred.not_after, f.clock.now() + Duration{1'000'000});
  EXPECT_EQ(cred.passphrase.size(), 32u);
  EXPECT_TRUE(std::all_of(cred.passphrase.begin(), cred.passphrase.end(),
                          [](char c) { return std::isalnum(static_cast<unsigned char>(c)); }));
  EXPECT_EQ(cred.certificate_path.parent_path(), f.dir.path());

  auto key_perms = fs::status(cred.private_key_path).permissions() & fs::perms::all;
  EXPECT_EQ(key_perms, store::kOwnerOnly);
  auto cert_perms = fs::status(cred.certificate_path).permissions() & fs::perms::all;
  EXPECT_EQ(cert_perms, fs::perms::owner_read | fs::perms::owner_write | fs::perms::group_read |
                            fs::perms::others_read);

  auto key_pem = testing_support::read_file(cred.private_key_path);
  EXPECT_NE(key_pem.find("ENCRYPTED"), std::string::npos);
  auto loaded = slcs::load_credential(cred.certificate_path, cred.private_key_path, cred.passphrase);
  EXPECT_EQ(loaded.subject, cred.subject);
  EXPECT_EQ(code_of([&] { slcs::load_credential(cred.certificate_path, cred.private_key_path, "nope"); }),
            Errc::CryptoFailure);

  auto report = testing_support::oracle_chain({testing_support::read_file(cred.certificate_path)},
                                              f.fed.ca().certificate_pem(), to_unix(f.clock.now()));
  EXPECT_TRUE(report.ok) << report.summary();
  EXPECT_EQ(store::read_sidecar(cred.certificate_path), cred.not_after);
}

TEST(SlcsFactory, NothingIsWrittenBeforeTheCaSigns) {
  Fixture f;
  auto factory = f.factory();
  EventLog log;
  factory.set_event_log(&log);
  factory.new_slcs(f.fresh());
  auto events = log.events();
  auto signed_at = std::find(events.begin(), events.end(), "slcs.signed");
  ASSERT_NE(signed_at, events.end());
  std::vector<std::string> head(events.begin(), signed_at);
  EXPECT_EQ(head, (std::vector<std::string>{"slcs.login", "slcs.keygen", "slcs.csr"}));
  auto writes = std::count_if(signed_at, events.end(), [](const std::string& e) { return e.starts_with("store.write"); });
  EXPECT_EQ(writes, 3);  // certificate, its sidecar, key
  for (auto it = events.begin(); it != signed_at; ++it) EXPECT_FALSE(it->starts_with("store.write")) << *it;
}

TEST(SlcsFactory, OverridesAndPassphraseFile) {
  Fixture f;
  auto factory = f.factory();
  slcs::CredentialOverrides o;
  o.certificate_path = f.dir / "usercert.pem";
  o.private_key_path = f.dir / "userkey.pem";
  o.passphrase = "chosen-passphrase";
  o.passphrase_path = f.dir / "userkey.pass";
  auto cred = factory.new_slcs(f.fresh(), o, Duration{7200});
  EXPECT_EQ(cred.not_after - cred.not_before, Duration{7200});
  EXPECT_EQ(testing_support::read_file(f.dir / "userkey.pass"), "chosen-passphrase\n");
  EXPECT_EQ(fs::status(f.dir / "userkey.pass").permissions() & fs::perms::all, store::kOwnerOnly);
  EXPECT_NO_THROW(slcs::load_credential(f.dir / "usercert.pem", f.dir / "userkey.pem", "chosen-passphrase"));
}

TEST(SlcsFactory, LifetimeAboveCeilingIsClamped) {
  Fixture f;
  auto cred = f.factory().new_slcs(f.fresh(), {}, Duration{5'000'000});
  EXPECT_EQ(cred.not_after - cred.not_before, Duration{1'000'000});
}

TEST(SlcsFactory, ExpiredAssertionFailsLocallyWithoutFiles) {
  Fixture f;
  auto factory = f.factory();
  auto a = f.fresh();
  f.clock.advance(Duration{300});
  EXPECT_NO_THROW(factory.request(a));
  auto before = f.fed.ca().outstanding_tokens();
  f.clock.advance(Duration{1});
  EXPECT_EQ(code_of([&] { factory.new_slcs(a); }), Errc::ExpiredAssertion);
  EXPECT_EQ(f.fed.ca().outstanding_tokens(), before);
  EXPECT_EQ(file_count(f.dir.path()), 0u);
}

TEST(SlcsFactory, StorageFailureLeavesNoFiles) {
  Fixture f;
  auto factory = f.factory();
  slcs::CredentialOverrides o;
  o.passphrase_path = f.dir / "missing-subdir" / "userkey.pass";
  EXPECT_EQ(code_of([&] { factory.new_slcs(f.fresh(), o); }), Errc::StorageFailed);
  EXPECT_EQ(file_count(f.dir.path()), 0u);
}

TEST(SlcsFactory, MissingStoreDirectoryIsInvalidConfig) {
  Fixture f;
  auto cfg = f.fed.slcs_config(f.dir / "does-not-exist");
  EXPECT_EQ(code_of([&] { slcs::SlcsFactory(cfg, f.clock); }), Errc::InvalidConfig);
}

TEST(SlcsFactory, WeakKeyConfigIsRejectedBeforeSigning) {
  Fixture f;
  auto cfg = f.fed.slcs_config(f.dir.path());
  cfg.key_size = 1024;
  slcs::SlcsFactory factory(cfg, f.clock);
  EventLog log;
  factory.set_event_log(&log);
  EXPECT_EQ(code_of([&] { factory.new_slcs(f.fresh()); }), Errc::WeakKey);
  auto events = log.events();
  EXPECT_EQ(std::count(events.begin(), events.end(), "slcs.signed"), 0);
  EXPECT_EQ(file_count(f.dir.path()), 0u);
}

TEST(SlcsFactory, CaDownIsServiceUnavailable) {
  Fixture f;
  auto factory = f.factory();
  f.fed.ca_http().stop();
  EXPECT_EQ(code_of([&] { factory.new_slcs(f.fresh()); }), Errc::ServiceUnavailable);
  EXPECT_EQ(file_count(f.dir.path()), 0u);
}

TEST(SlcsFactory, ForgedAssertionIsInvalid) {
  Fixture f;
  auto a = f.fresh();
  a.subject = "bob";
  EXPECT_EQ(code_of([&] { f.factory().new_slcs(a); }), Errc::InvalidAssertion);
}

TEST(SlcsFactoryConfig, FromProperties) {
  testing_support::TempDir d;
  testing_support::write_file(d / "ca.pem", testing_support::fixture("fixture_ca.pem"));
  auto p = Properties::parse("slcs.login_url=http://h/login\nslcs.sign_url=http://h/sign\nslcs.store_dir=" +
                             d.path().string() + "\nslcs.ca_cert=" + (d / "ca.pem").string() +
                             "\nslcs.default_lifetime=3600\nslcs.key_size=3072\n");
  auto c = slcs::SlcsFactoryConfig::from_properties(p);
  EXPECT_EQ(c.login_url, "http://h/login");
  EXPECT_EQ(c.default_lifetime, Duration{3600});
  EXPECT_EQ(c.key_size, 3072);
  EXPECT_EQ(c.ca_certificate_pem, testing_support::fixture("fixture_ca.pem"));
  EXPECT_EQ(code_of([] { slcs::SlcsFactoryConfig::from_properties(Properties::parse("slcs.login_url=x\n")); }),
            Errc::InvalidConfig);
}
