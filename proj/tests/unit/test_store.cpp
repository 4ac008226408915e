#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <set>
#include <thread>

#include <sys/stat.h>

#include "gridcert/error.hpp"
#include "gridcert/store.hpp"
#include "support.hpp"

using namespace gridcert;
using namespace gridcert::store;

namespace {

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::InvalidConfig;
}

std::int64_t mtime_of(const fs::path& p) {
  struct stat st {};
  EXPECT_EQ(::stat(p.c_str(), &st), 0);
  return st.st_mtim.tv_sec;
}

}  // namespace

TEST(Persist, WritesAllFilesWithPermsMtimeAndSidecar) {
  testing_support::TempDir d;
  auto t = testing_support::fixed_now();
  persist_atomically({{d / "a.pem", "A", kOwnerOnly | fs::perms::others_read, t + Duration{1000}},
                      {d / "b.key", "B", kOwnerOnly, std::nullopt}},
                     t);
  EXPECT_EQ(testing_support::read_file(d / "a.pem"), "A");
  EXPECT_EQ(testing_support::read_file(d / "b.key"), "B");
  EXPECT_EQ(fs::status(d / "a.pem").permissions() & fs::perms::all, kOwnerOnly | fs::perms::others_read);
  EXPECT_EQ(fs::status(d / "b.key").permissions() & fs::perms::all, kOwnerOnly);
  EXPECT_EQ(mtime_of(d / "a.pem"), to_unix(t));
  EXPECT_EQ(testing_support::read_file(sidecar_path(d / "a.pem")),
            "not-after=" + std::to_string(to_unix(t) + 1000) + "\n");
  EXPECT_EQ(read_sidecar(d / "a.pem"), t + Duration{1000});
  EXPECT_FALSE(read_sidecar(d / "b.key").has_value());
  EXPECT_EQ(std::distance(fs::directory_iterator(d.path()), fs::directory_iterator()), 3);
}

TEST(Persist, FailureRestoresPreviousContents) {
  testing_support::TempDir d;
  auto t = testing_support::fixed_now();
  testing_support::write_file(d / "a.pem", "old");
  EXPECT_EQ(code_of([&] {
              persist_atomically({{d / "a.pem", "new", kOwnerOnly, std::nullopt},
                                  {d / "nope" / "b.key", "B", kOwnerOnly, std::nullopt}},
                                 t);
            }),
            Errc::StorageFailed);
  EXPECT_EQ(testing_support::read_file(d / "a.pem"), "old");
  EXPECT_EQ(std::distance(fs::directory_iterator(d.path()), fs::directory_iterator()), 1);
}

TEST(Persist, OverwritesExistingAtomically) {
  testing_support::TempDir d;
  auto t = testing_support::fixed_now();
  testing_support::write_file(d / "a.pem", "old");
  persist_atomically({{d / "a.pem", "new", kOwnerOnly, std::nullopt}}, t);
  EXPECT_EQ(testing_support::read_file(d / "a.pem"), "new");
  EXPECT_EQ(std::distance(fs::directory_iterator(d.path()), fs::directory_iterator()), 1);
}

TEST(Persist, RefusesSymlinkTargetsViaTemporaries) {
  testing_support::TempDir d;
  testing_support::write_file(d / "victim", "keep");
  fs::create_symlink(d / "victim", d / "link.pem");
  persist_atomically({{d / "link.pem", "x", kOwnerOnly, std::nullopt}}, testing_support::fixed_now());
  // The link itself is replaced; the file it pointed at is untouched.
  EXPECT_EQ(testing_support::read_file(d / "victim"), "keep");
  EXPECT_FALSE(fs::is_symlink(d / "link.pem"));
}

TEST(Freshness, BoundaryExamples) {
  testing_support::TempDir d;
  auto t = testing_support::fixed_now();
  persist_atomically({{d / "c.pem", "C", kOwnerOnly, t + Duration{1000}}}, t);
  EXPECT_TRUE(freshness_check(d / "c.pem", Duration{100}, t));
  EXPECT_TRUE(freshness_check(d / "c.pem", Duration{100}, t + Duration{899}));
  EXPECT_FALSE(freshness_check(d / "c.pem", Duration{100}, t + Duration{900}));
  EXPECT_FALSE(freshness_check(d / "c.pem", Duration{1000}, t));
  EXPECT_TRUE(freshness_check(d / "c.pem", Duration{999}, t));
  EXPECT_FALSE(freshness_check(d / "missing.pem", Duration{0}, t));
  testing_support::write_file(d / "bare.pem", "no sidecar");
  EXPECT_FALSE(freshness_check(d / "bare.pem", Duration{0}, t));
  testing_support::write_file(sidecar_path(d / "bare.pem"), "not-after=abc\n");
  EXPECT_FALSE(freshness_check(d / "bare.pem", Duration{0}, t));
}

TEST(FreshnessProperty, MatchesClosedForm) {
  testing_support::TempDir d;
  std::mt19937_64 rng(0x5eed0401);
  for (int i = 0; i < 300; ++i) {
    auto written = from_unix(1'600'000'000 + static_cast<std::int64_t>(rng() % 100'000'000));
    auto lifetime = static_cast<std::int64_t>(rng() % 2'000'000);
    auto min_remaining = static_cast<std::int64_t>(rng() % 200'000);
    auto age = static_cast<std::int64_t>(rng() % 2'500'000);
    auto p = d / ("f" + std::to_string(i));
    persist_atomically({{p, "x", kOwnerOnly, written + Duration{lifetime}}}, written);
    bool expected = age < lifetime - min_remaining;
    ASSERT_EQ(freshness_check(p, Duration{min_remaining}, written + Duration{age}), expected) << i;
  }
}

TEST(CredentialStore, UserDirectoriesAndContainment) {
  testing_support::TempDir d;
  CredentialStore s(d / "root");
  auto u = s.user_directory("alice");
  EXPECT_TRUE(fs::is_directory(u));
  EXPECT_EQ(fs::status(u).permissions() & fs::perms::all, fs::perms::owner_all);
  EXPECT_TRUE(s.contains(u / "x"));
  EXPECT_FALSE(s.contains(d / "elsewhere"));
  EXPECT_FALSE(s.contains(u / ".." / ".." / "escape"));
  for (const char* bad : {"", ".", "..", "a/b", "a b"}) {
    EXPECT_EQ(code_of([&] { s.user_directory(bad); }), Errc::StorageFailed) << bad;
  }
  EXPECT_EQ(code_of([&] { s.persist({{d / "out", "x", kOwnerOnly, std::nullopt}}, testing_support::fixed_now()); }),
            Errc::StorageFailed);
  EXPECT_FALSE(fs::exists(d / "out"));
}

TEST(Handshake, PrepareCreatesFreshDirectoryWithMarker) {
  testing_support::TempDir d;
  auto h = prepare_handshake(d.path(), "alice");
  EXPECT_EQ(h.location.parent_path(), d / "alice");
  EXPECT_EQ(h.secret.size(), 64u);
  EXPECT_EQ(testing_support::read_file(h.location / kMarkerFileName), h.secret);
  EXPECT_EQ(fs::status(h.location).permissions() & fs::perms::all, fs::perms::owner_all);
  EXPECT_EQ(fs::status(h.location / kMarkerFileName).permissions() & fs::perms::all, kOwnerOnly);
  auto h2 = prepare_handshake(d.path(), "alice");
  EXPECT_NE(h.location, h2.location);
  EXPECT_NE(h.secret, h2.secret);
  EXPECT_EQ(code_of([&] { prepare_handshake(d.path(), ".."); }), Errc::StorageFailed);
}

TEST(Handshake, ConsumeIsSingleUseAndWrongSecretKeepsMarker) {
  testing_support::TempDir d;
  auto h = prepare_handshake(d.path(), "alice");
  EXPECT_EQ(code_of([&] { consume_handshake(h.location, std::string(64, '0'), d.path()); }),
            Errc::HandshakeRejected);
  EXPECT_TRUE(fs::exists(h.location / kMarkerFileName));
  EXPECT_EQ(check_handshake(h.location, h.secret, d.path()), fs::canonical(h.location));
  auto auth = consume_handshake(h.location, h.secret, d.path());
  EXPECT_EQ(auth.location(), fs::canonical(h.location));
  EXPECT_EQ(auth.file("usercert.pem"), fs::canonical(h.location) / "usercert.pem");
  EXPECT_EQ(code_of([&] { auth.file("../x"); }), Errc::HandshakeRejected);
  EXPECT_EQ(code_of([&] { auth.file(".."); }), Errc::HandshakeRejected);
  EXPECT_FALSE(fs::exists(h.location / kMarkerFileName));
  EXPECT_EQ(code_of([&] { consume_handshake(h.location, h.secret, d.path()); }), Errc::HandshakeRejected);
}

TEST(Handshake, PrefixRulesResolveTraversalAndSymlinks) {
  testing_support::TempDir d;
  fs::create_directories(d / "allowed");
  fs::create_directories(d / "outside");
  auto inside = prepare_handshake(d / "allowed", "alice");
  auto outside = prepare_handshake(d / "outside", "alice");

  EXPECT_EQ(code_of([&] { check_handshake(outside.location, outside.secret, d / "allowed"); }),
            Errc::PrefixViolation);
  auto traversal = d / "allowed" / ".." / "outside" / "alice" / outside.location.filename();
  EXPECT_EQ(code_of([&] { check_handshake(traversal, outside.secret, d / "allowed"); }), Errc::PrefixViolation);
  fs::create_directory_symlink(outside.location, d / "allowed" / "sneaky");
  EXPECT_EQ(code_of([&] { check_handshake(d / "allowed" / "sneaky", outside.secret, d / "allowed"); }),
            Errc::PrefixViolation);
  EXPECT_EQ(code_of([&] { check_handshake(d / "allowed", "x", d / "allowed"); }), Errc::PrefixViolation);
  EXPECT_EQ(code_of([&] { check_handshake("relative/path", "x", std::nullopt); }), Errc::HandshakeRejected);
  EXPECT_NO_THROW(check_handshake(inside.location, inside.secret, d / "allowed"));
  EXPECT_NO_THROW(check_handshake(inside.location, inside.secret, d / "allowed/"));
  EXPECT_NO_THROW(check_handshake(outside.location, outside.secret, std::nullopt));
}

TEST(Handshake, ConcurrentConsumeHasOneWinner) {
  testing_support::TempDir d;
  for (int round = 0; round < 50; ++round) {
    auto h = prepare_handshake(d.path(), "alice");
    std::atomic<int> ok{0}, rejected{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 16; ++i) {
      threads.emplace_back([&] {
        try {
          consume_handshake(h.location, h.secret, d.path());
          ++ok;
        } catch (const Error& e) {
          if (e.code() == Errc::HandshakeRejected) ++rejected;
        }
      });
    }
    for (auto& t : threads) t.join();
    ASSERT_EQ(ok.load(), 1) << round;
    ASSERT_EQ(rejected.load(), 15) << round;
  }
}

TEST(Handshake, RearmReplacesSecret) {
  testing_support::TempDir d;
  auto h = prepare_handshake(d.path(), "alice");
  consume_handshake(h.location, h.secret, d.path());
  auto again = rearm_handshake(h.location);
  EXPECT_EQ(again.location, h.location);
  EXPECT_NE(again.secret, h.secret);
  EXPECT_EQ(code_of([&] { consume_handshake(h.location, h.secret, d.path()); }), Errc::HandshakeRejected);
  EXPECT_NO_THROW(consume_handshake(h.location, again.secret, d.path()));
  EXPECT_EQ(code_of([&] { rearm_handshake(d / "nope"); }), Errc::StorageFailed);
}

TEST(Freshness, LifetimeAnchoredExamples) {
  testing_support::TempDir d;
  auto t = testing_support::fixed_now();
  persist_atomically({{d / "cert.pem", "C", kOwnerOnly, t + Duration{1'000'000}}}, t);
  EXPECT_TRUE(freshness_check(d / "cert.pem", Duration{86'400}, t + Duration{500'000}));
  EXPECT_FALSE(freshness_check(d / "cert.pem", Duration{86'400}, t + Duration{999'000}));
}

TEST(Handshake, SecretsArePairwiseDistinct) {
  testing_support::TempDir d;
  std::set<std::string> secrets;
  std::set<fs::path> locations;
  for (int i = 0; i < 10'000; ++i) {
    auto h = prepare_handshake(d.path(), "alice");
    secrets.insert(h.secret);
    locations.insert(h.location);
  }
  EXPECT_EQ(secrets.size(), 10'000u);
  EXPECT_EQ(locations.size(), 10'000u);
}

TEST(Handshake, UnwritableRootIsStorageFailed) {
  testing_support::TempDir d;
  testing_support::write_file(d / "plain-file", "x");
  EXPECT_EQ(code_of([&] { prepare_handshake(d / "plain-file", "alice"); }), Errc::StorageFailed);
}
