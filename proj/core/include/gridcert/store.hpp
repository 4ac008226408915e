#pragma once

// Filesystem persistence for credentials and proxies, the mtime-based
// freshness check, and the marker-file handshake that authorizes one process
// to write into a directory chosen by another.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridcert/clock.hpp"
#include "gridcert/event_log.hpp"

namespace gridcert::store {

namespace fs = std::filesystem;

inline constexpr std::string_view kMarkerFileName = ".gridcert-marker";
inline constexpr std::string_view kSidecarSuffix = ".meta";
inline constexpr fs::perms kOwnerOnly = fs::perms::owner_read | fs::perms::owner_write;

struct StoredFile {
  fs::path path;
  std::string contents;
  fs::perms perms = kOwnerOnly;
  // When set, a sidecar "<path>.meta" holding "not-after=<unix-seconds>" is
  // written alongside, which is what freshness_check() reads.
  std::optional<Timestamp> not_after;
};

// Writes every file or none: contents go to exclusive temporaries first and
// are renamed into place only when all writes succeeded; files that existed
// before are restored on failure. Modification times are set to written_at.
// Throws StorageFailed.
void persist_atomically(const std::vector<StoredFile>& files, Timestamp written_at, EventLog* log = nullptr);

fs::path sidecar_path(const fs::path& credential);
std::optional<Timestamp> read_sidecar(const fs::path& credential);

// (now - mtime) < (lifetime_at_write - min_remaining), where
// lifetime_at_write = sidecar not-after - mtime. Never parses the credential;
// a missing file or sidecar counts as stale.
bool freshness_check(const fs::path& path, Duration min_remaining, Timestamp now);

// Letters, digits, '.', '_' and '-'; not "." or "..".
bool valid_user_id(std::string_view user_id);

class CredentialStore {
 public:
  // Creates root (owner-only) if needed. Throws StorageFailed.
  explicit CredentialStore(fs::path root);

  const fs::path& root() const noexcept { return root_; }

  // root/<user_id>, created on demand with owner-only permissions.
  fs::path user_directory(std::string_view user_id) const;

  // persist_atomically() restricted to paths under root.
  void persist(const std::vector<StoredFile>& files, Timestamp written_at) const;

  void set_event_log(EventLog* log) noexcept { log_ = log; }
  EventLog* event_log() const noexcept { return log_; }

  bool contains(const fs::path& p) const;

 private:
  fs::path root_;
  EventLog* log_ = nullptr;
};

struct MarkerHandshake {
  fs::path location;  // L
  std::string secret;  // K, 256 bits as 64 hex digits
  std::optional<fs::path> prefix_allowlist;
};

// Proof, valid for one request, that the caller may write into location().
class WriteAuthorization {
 public:
  const fs::path& location() const noexcept { return location_; }
  // location()/name; rejects names that would leave the directory.
  fs::path file(std::string_view name) const;

 private:
  friend WriteAuthorization consume_handshake(const fs::path&, std::string_view,
                                              const std::optional<fs::path>&);
  explicit WriteAuthorization(fs::path location) : location_(std::move(location)) {}
  fs::path location_;
};

// Creates a fresh empty directory under root/<user_id>/ and a marker file in
// it holding a new random secret. Throws StorageFailed.
MarkerHandshake prepare_handshake(const fs::path& root, std::string_view user_id);
// Writes a new marker/secret into an existing directory the caller owns.
MarkerHandshake rearm_handshake(const fs::path& location);

// Validates (L, K) without consuming the marker. Returns the canonical L.
// Throws PrefixViolation or HandshakeRejected.
fs::path check_handshake(const fs::path& location, std::string_view secret,
                         const std::optional<fs::path>& prefix_allowlist);
// Validates and deletes the marker; at most one caller succeeds per marker.
// A wrong secret leaves the marker in place.
WriteAuthorization consume_handshake(const fs::path& location, std::string_view secret,
                                     const std::optional<fs::path>& prefix_allowlist);

}  // namespace gridcert::store
