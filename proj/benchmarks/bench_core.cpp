#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "gridcert/ca.hpp"
#include "gridcert/crypto.hpp"
#include "gridcert/model.hpp"
#include "gridcert/slcs_client.hpp"
#include "gridcert/sso.hpp"
#include "gridcert/store.hpp"

using namespace gridcert;
namespace fs = std::filesystem;

namespace {

const Timestamp kNow = from_unix(1'800'000'000);

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gridcert-bench-" + name + "-" + crypto::random_hex(6));
  fs::create_directories(p);
  return p;
}

void BM_FreshnessCheck(benchmark::State& state) {
  auto dir = scratch("fresh");
  auto file = dir / "usercert.pem";
  store::persist_atomically({{file, "x", store::kOwnerOnly, kNow + Duration{1'000'000}}}, kNow);
  for (auto _ : state) {
    benchmark::DoNotOptimize(store::freshness_check(file, Duration{86'400}, kNow + Duration{500'000}));
  }
  fs::remove_all(dir);
}
BENCHMARK(BM_FreshnessCheck);

void BM_HandshakePrepareConsume(benchmark::State& state) {
  auto root = fs::canonical(scratch("hs"));
  for (auto _ : state) {
    auto h = store::prepare_handshake(root, "alice");
    benchmark::DoNotOptimize(store::consume_handshake(h.location, h.secret, root));
  }
  fs::remove_all(root);
}
BENCHMARK(BM_HandshakePrepareConsume);

void BM_SubjectDnParse(benchmark::State& state) {
  const std::string dn = "/C=CH/O=SimFed/CN=alice/CN=1234567890123456789";
  for (auto _ : state) benchmark::DoNotOptimize(SubjectDn::parse(dn));
}
BENCHMARK(BM_SubjectDnParse);

void BM_FqanParse(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fqan::parse("/life/analysis/Role=production"));
}
BENCHMARK(BM_FqanParse);

void BM_AssertionVerify(benchmark::State& state) {
  sso::IdentityProvider idp;
  idp.register_user("alice");
  auto a = idp.issue_assertion(idp.login("alice", kNow), kNow);
  for (auto _ : state) benchmark::DoNotOptimize(sso::verify_assertion(a, idp.public_key()));
}
BENCHMARK(BM_AssertionVerify);

void BM_CaSignCsr(benchmark::State& state) {
  ca::CertificateAuthority ca(ca::CaConfig{}, kNow);
  sso::IdentityProvider idp;
  idp.register_user("alice");
  ca.trust_idp(idp.config().entity_id, idp.public_key());
  auto key = crypto::PrivateKey::generate_rsa(2048);
  for (auto _ : state) {
    state.PauseTiming();
    auto login = ca.login(idp.issue_assertion(idp.login("alice", kNow), kNow), kNow);
    auto csr = slcs::build_csr(key, login.dn, login.constraints);
    state.ResumeTiming();
    benchmark::DoNotOptimize(ca.sign_csr(csr, login.auth_token, Duration{3'600}, kNow));
  }
}
BENCHMARK(BM_CaSignCsr)->Unit(benchmark::kMicrosecond);

void BM_RsaKeygen(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(crypto::PrivateKey::generate_rsa(static_cast<int>(state.range(0))));
}
BENCHMARK(BM_RsaKeygen)->Arg(2048)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
