#pragma once

// End-to-end walk through the whole pipeline against in-process services:
// federated login, portal guard, certificate issuance, attribute-bearing
// proxy, and the files left for grid middleware.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gridcert/model.hpp"

namespace gridcert::demo {

namespace fs = std::filesystem;

struct DemoOptions {
  std::string user = "alice";
  std::string vo = "life";
  fs::path store_dir;
  // Let the SSO assertion lapse before the portal is visited, so issuance
  // goes through the renewal redirects.
  bool stale_assertion = false;
  Duration stale_by{600};
  // Points the credential endpoints at another CA, e.g. one that is down.
  std::optional<std::string> ca_url;
};

struct DemoResult {
  bool ok = false;
  std::string failure;
  std::vector<std::string> trace;
  int redirects = 0;
  int interactive_steps = 0;
  fs::path certificate;
  fs::path private_key;
  fs::path passphrase_file;
  fs::path proxy;
  fs::path ca_certificate;
  fs::path voms_anchor;
  std::vector<Fqan> fqans;
  std::string handler_output;
};

// Writes progress to log. Never throws for pipeline failures; they end up in
// DemoResult::failure.
DemoResult run_demo(const DemoOptions& options, std::ostream& log);

}  // namespace gridcert::demo
