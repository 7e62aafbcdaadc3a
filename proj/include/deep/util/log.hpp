#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace deep {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

// Verbosity comes from the DEEP_LOG environment variable only
// (quiet | info | debug); default info.
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("DEEP_LOG");
    if (env == nullptr) return LogLevel::Info;
    std::string v(env);
    if (v == "quiet") return LogLevel::Quiet;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
  }();
  return level;
}

// One structured line per pipeline stage: "[deep] stage=noise pairs=120 ...".
class StageLog {
 public:
  explicit StageLog(std::string stage) : stage_(std::move(stage)) {}

  template <typename T>
  StageLog& count(const std::string& key, const T& value) {
    std::ostringstream os;
    os << value;
    fields_.emplace_back(key, os.str());
    return *this;
  }

  void emit() const {
    if (log_level() == LogLevel::Quiet) return;
    std::ostringstream os;
    os << "[deep] stage=" << stage_;
    for (const auto& [k, v] : fields_) os << ' ' << k << '=' << v;
    std::cerr << os.str() << '\n';
  }

 private:
  std::string stage_;
  std::vector<std::pair<std::string, std::string>> fields_;
};

inline void log_debug(const std::string& msg) {
  if (log_level() == LogLevel::Debug) std::cerr << "[deep] " << msg << '\n';
}

}  // namespace deep
