#include "gridcert/store.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <functional>
#include <mutex>
#include <set>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include "gridcert/crypto.hpp"
#include "gridcert/error.hpp"

namespace gridcert::store {
namespace {

// File creation is serialized per target path through a fixed set of
// striped locks.
std::array<std::mutex, 64>& path_stripes() {
  static std::array<std::mutex, 64> stripes;
  return stripes;
}

std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  int get() const { return fd_; }
  int release() { return std::exchange(fd_, -1); }

 private:
  int fd_;
};

void write_all(int fd, std::string_view data, const fs::path& p) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::StorageFailed, errno_text("write " + p.string()));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Creates a new file exclusively; never follows a symlink at the final component.
void create_exclusive(const fs::path& p, std::string_view contents, fs::perms perms,
                      std::optional<Timestamp> mtime) {
  Fd fd(::open(p.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_NOFOLLOW | O_CLOEXEC, 0600));
  if (fd.get() < 0) throw Error(Errc::StorageFailed, errno_text("create " + p.string()));
  write_all(fd.get(), contents, p);
  if (::fchmod(fd.get(), static_cast<mode_t>(perms)) != 0) {
    throw Error(Errc::StorageFailed, errno_text("chmod " + p.string()));
  }
  if (mtime) {
    struct timespec times[2];
    times[0].tv_sec = times[1].tv_sec = static_cast<time_t>(to_unix(*mtime));
    times[0].tv_nsec = times[1].tv_nsec = 0;
    if (::futimens(fd.get(), times) != 0) {
      throw Error(Errc::StorageFailed, errno_text("futimens " + p.string()));
    }
  }
  if (::fsync(fd.get()) != 0) throw Error(Errc::StorageFailed, errno_text("fsync " + p.string()));
  if (::close(fd.release()) != 0) throw Error(Errc::StorageFailed, errno_text("close " + p.string()));
}

std::optional<std::string> read_small(const fs::path& p, std::size_t limit) {
  Fd fd(::open(p.c_str(), O_RDONLY | O_NOFOLLOW | O_CLOEXEC));
  if (fd.get() < 0) return std::nullopt;
  std::string out(limit + 1, '\0');
  std::size_t got = 0;
  while (got < out.size()) {
    ssize_t n = ::read(fd.get(), out.data() + got, out.size() - got);
    if (n < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    if (n == 0) break;
    got += static_cast<std::size_t>(n);
  }
  if (got > limit) return std::nullopt;
  out.resize(got);
  return out;
}

fs::path temp_sibling(const fs::path& p, std::string_view tag) {
  return p.parent_path() / ("." + p.filename().string() + "." + std::string(tag) + "-" + crypto::random_hex(12));
}

bool is_within(const fs::path& candidate, const fs::path& prefix) {
  auto c = candidate.begin();
  for (auto p = prefix.begin(); p != prefix.end(); ++p, ++c) {
    if (p->empty()) continue;  // trailing separator
    if (c == candidate.end() || *c != *p) return false;
  }
  return c != candidate.end();
}

fs::path normalized(const fs::path& p) {
  std::error_code ec;
  auto out = fs::weakly_canonical(p, ec);
  if (ec) return p.lexically_normal();
  return out;
}

void write_marker(const fs::path& location, const std::string& secret) {
  auto marker = location / kMarkerFileName;
  auto tmp = temp_sibling(marker, "new");
  create_exclusive(tmp, secret, kOwnerOnly, std::nullopt);
  if (::rename(tmp.c_str(), marker.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw Error(Errc::StorageFailed, errno_text("install marker in " + location.string()));
  }
}

}  // namespace

// --- Persistence ------------------------------------------------------------------

void persist_atomically(const std::vector<StoredFile>& files, Timestamp written_at, EventLog* log) {
  struct Pending {
    fs::path target;
    fs::path temp;
    std::optional<fs::path> backup;
    bool committed = false;
  };

  std::vector<StoredFile> all;
  for (const auto& f : files) {
    all.push_back(f);
    if (f.not_after) {
      all.push_back({sidecar_path(f.path), "not-after=" + std::to_string(to_unix(*f.not_after)) + "\n",
                     kOwnerOnly, std::nullopt});
    }
  }

  std::set<std::size_t> stripe_ids;
  for (const auto& f : all) stripe_ids.insert(std::hash<std::string>{}(f.path.string()) % path_stripes().size());
  std::vector<std::unique_lock<std::mutex>> locks;
  for (auto id : stripe_ids) locks.emplace_back(path_stripes()[id]);

  std::vector<Pending> pending;
  auto rollback = [&] {
    for (auto it = pending.rbegin(); it != pending.rend(); ++it) {
      if (it->committed) {
        ::unlink(it->target.c_str());
        if (it->backup) ::rename(it->backup->c_str(), it->target.c_str());
      } else {
        ::unlink(it->temp.c_str());
        if (it->backup) ::rename(it->backup->c_str(), it->target.c_str());
      }
    }
  };

  try {
    for (const auto& f : all) {
      if (f.path.empty() || !f.path.has_filename()) throw Error(Errc::StorageFailed, "empty target path");
      Pending p{f.path, temp_sibling(f.path, "tmp"), std::nullopt, false};
      if (log) log->record("store.write " + f.path.string());
      create_exclusive(p.temp, f.contents, f.perms, written_at);
      pending.push_back(std::move(p));
    }
    for (auto& p : pending) {
      struct stat st {};
      if (::lstat(p.target.c_str(), &st) == 0) {
        fs::path bak = temp_sibling(p.target, "bak");
        if (::rename(p.target.c_str(), bak.c_str()) != 0) {
          throw Error(Errc::StorageFailed, errno_text("backup " + p.target.string()));
        }
        p.backup = bak;
      }
      if (::rename(p.temp.c_str(), p.target.c_str()) != 0) {
        throw Error(Errc::StorageFailed, errno_text("rename into " + p.target.string()));
      }
      p.committed = true;
    }
  } catch (...) {
    rollback();
    throw;
  }
  for (const auto& p : pending) {
    if (p.backup) ::unlink(p.backup->c_str());
  }
}

fs::path sidecar_path(const fs::path& credential) {
  fs::path p = credential;
  p += kSidecarSuffix;
  return p;
}

std::optional<Timestamp> read_sidecar(const fs::path& credential) {
  auto text = read_small(sidecar_path(credential), 64);
  if (!text) return std::nullopt;
  std::string_view s = *text;
  static constexpr std::string_view kKey = "not-after=";
  if (!s.starts_with(kKey)) return std::nullopt;
  s.remove_prefix(kKey.size());
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return from_unix(v);
}

bool freshness_check(const fs::path& path, Duration min_remaining, Timestamp now) {
  struct stat st {};
  if (::stat(path.c_str(), &st) != 0) return false;
  auto not_after = read_sidecar(path);
  if (!not_after) return false;
  const Timestamp mtime = from_unix(static_cast<std::int64_t>(st.st_mtim.tv_sec));
  const Duration lifetime_at_write = *not_after - mtime;
  return (now - mtime) < (lifetime_at_write - min_remaining);
}

bool valid_user_id(std::string_view user_id) {
  if (user_id.empty() || user_id == "." || user_id == ".." || user_id.size() > 128) return false;
  return std::all_of(user_id.begin(), user_id.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
           c == '_' || c == '-';
  });
}

// --- CredentialStore --------------------------------------------------------------

CredentialStore::CredentialStore(fs::path root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) {
    throw Error(Errc::StorageFailed, "cannot create store root " + root.string());
  }
  root_ = fs::canonical(root, ec);
  if (ec) throw Error(Errc::StorageFailed, "cannot resolve store root " + root.string());
  if (::access(root_.c_str(), W_OK | X_OK) != 0) {
    throw Error(Errc::StorageFailed, "store root not writable: " + root_.string());
  }
}

fs::path CredentialStore::user_directory(std::string_view user_id) const {
  if (!valid_user_id(user_id)) throw Error(Errc::StorageFailed, "invalid user id");
  fs::path dir = root_ / std::string(user_id);
  if (::mkdir(dir.c_str(), 0700) != 0 && errno != EEXIST) {
    throw Error(Errc::StorageFailed, errno_text("mkdir " + dir.string()));
  }
  return dir;
}

bool CredentialStore::contains(const fs::path& p) const { return is_within(normalized(p), root_); }

void CredentialStore::persist(const std::vector<StoredFile>& files, Timestamp written_at) const {
  for (const auto& f : files) {
    if (!contains(f.path)) throw Error(Errc::StorageFailed, f.path.string() + " is outside the store root");
  }
  persist_atomically(files, written_at, log_);
}

// --- Handshake --------------------------------------------------------------------

fs::path WriteAuthorization::file(std::string_view name) const {
  if (name.empty() || name == "." || name == ".." || name.find('/') != std::string_view::npos) {
    throw Error(Errc::HandshakeRejected, "invalid file name");
  }
  return location_ / std::string(name);
}

MarkerHandshake prepare_handshake(const fs::path& root, std::string_view user_id) {
  if (!valid_user_id(user_id)) throw Error(Errc::StorageFailed, "invalid user id");
  fs::path user_dir = root / std::string(user_id);
  if (::mkdir(user_dir.c_str(), 0700) != 0 && errno != EEXIST) {
    throw Error(Errc::StorageFailed, errno_text("mkdir " + user_dir.string()));
  }
  fs::path location;
  for (int attempt = 0;; ++attempt) {
    location = user_dir / ("h-" + crypto::random_hex(16));
    if (::mkdir(location.c_str(), 0700) == 0) break;
    if (errno != EEXIST || attempt > 8) {
      throw Error(Errc::StorageFailed, errno_text("mkdir " + location.string()));
    }
  }
  MarkerHandshake h{location, crypto::random_hex(64), std::nullopt};
  try {
    create_exclusive(location / kMarkerFileName, h.secret, kOwnerOnly, std::nullopt);
  } catch (...) {
    ::rmdir(location.c_str());
    throw;
  }
  return h;
}

MarkerHandshake rearm_handshake(const fs::path& location) {
  struct stat st {};
  if (::lstat(location.c_str(), &st) != 0 || !S_ISDIR(st.st_mode)) {
    throw Error(Errc::StorageFailed, "not a directory: " + location.string());
  }
  MarkerHandshake h{location, crypto::random_hex(64), std::nullopt};
  write_marker(location, h.secret);
  return h;
}

fs::path check_handshake(const fs::path& location, std::string_view secret,
                         const std::optional<fs::path>& prefix_allowlist) {
  if (location.empty() || location.is_relative()) {
    throw Error(Errc::HandshakeRejected, "location must be an absolute path");
  }
  // Symlinks and ".." are resolved before the prefix comparison.
  fs::path target = normalized(location);
  if (prefix_allowlist && !is_within(target, normalized(*prefix_allowlist))) {
    throw Error(Errc::PrefixViolation, target.string() + " is outside " + prefix_allowlist->string());
  }
  auto content = read_small(target / kMarkerFileName, 256);
  if (!content || !crypto::secure_equal(*content, secret)) {
    throw Error(Errc::HandshakeRejected, "marker missing or secret mismatch");
  }
  return target;
}

WriteAuthorization consume_handshake(const fs::path& location, std::string_view secret,
                                     const std::optional<fs::path>& prefix_allowlist) {
  fs::path target = check_handshake(location, secret, prefix_allowlist);
  fs::path marker = target / kMarkerFileName;
  fs::path claimed = temp_sibling(marker, "consumed");
  // rename() is atomic: of several concurrent consumers exactly one moves the marker.
  if (::rename(marker.c_str(), claimed.c_str()) != 0) {
    throw Error(Errc::HandshakeRejected, "marker already consumed");
  }
  auto content = read_small(claimed, 256);
  if (!content || !crypto::secure_equal(*content, secret)) {
    // The marker was re-armed between check and claim. Put it back unless a
    // newer one already took its place.
    int relinked = ::link(claimed.c_str(), marker.c_str());
    (void)relinked;
    ::unlink(claimed.c_str());
    throw Error(Errc::HandshakeRejected, "marker changed during consumption");
  }
  ::unlink(claimed.c_str());
  return WriteAuthorization(target);
}

}  // namespace gridcert::store
