#pragma once

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "capgp/error.hpp"

namespace capgp::service {

using json = nlohmann::json;

struct StoreRecord {
  std::string record_type;
  json payload;
  std::int64_t timestamp_ms = 0;
};

/// Append-only line-delimited JSON log. Each append is written and fsynced
/// before returning. The file is created lazily with mode 0600.
class EventStore {
 public:
  explicit EventStore(std::string path) : path_(std::move(path)) {}

  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  ~EventStore() {
    if (fd_ >= 0) ::close(fd_);
  }

  const std::string& path() const { return path_; }

  void append(const std::string& record_type, const json& payload, std::int64_t timestamp_ms) {
    if (fd_ < 0) {
      fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, S_IRUSR | S_IWUSR);
      if (fd_ < 0) throw Error(Errc::IoError, "cannot open store '" + path_ + "': " + std::strerror(errno));
    }
    const json line = {{"record_type", record_type}, {"payload", payload}, {"timestamp", timestamp_ms}};
    const std::string text = line.dump() + "\n";
    std::size_t written = 0;
    while (written < text.size()) {
      const auto n = ::write(fd_, text.data() + written, text.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::IoError, std::string("store write failed: ") + std::strerror(errno));
      }
      written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error(Errc::IoError, std::string("store fsync failed: ") + std::strerror(errno));
  }

  /// Reads every record. A missing file is an empty store; a torn final line
  /// (no trailing newline) from an interrupted write is skipped.
  std::vector<StoreRecord> replay() const {
    std::vector<StoreRecord> out;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return out;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < content.size()) {
      const auto end = content.find('\n', start);
      if (end == std::string::npos) break;
      ++line_no;
      const std::string_view line(content.data() + start, end - start);
      start = end + 1;
      if (line.empty()) continue;
      try {
        const auto j = json::parse(line);
        out.push_back({j.at("record_type").get<std::string>(), j.at("payload"), j.at("timestamp").get<std::int64_t>()});
      } catch (const json::exception& e) {
        throw Error(Errc::StoreCorrupt, "store line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return out;
  }

 private:
  std::string path_;
  int fd_ = -1;
};

}  // namespace capgp::service
