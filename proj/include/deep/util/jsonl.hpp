#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "deep/error.hpp"

namespace deep {

using json = nlohmann::json;

// Calls fn(line_number, parsed_object) for every non-empty line.
// Parse failures surface the 1-based line number.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed JSON line");
    }
    fn(lineno, obj);
  }
}

// Writes through a temp file in the destination directory and renames into
// place, so a killed run never leaves a truncated artifact behind.
class AtomicWriter {
 public:
  explicit AtomicWriter(std::filesystem::path dest)
      : dest_(std::move(dest)),
        tmp_(dest_.string() + ".tmp." + std::to_string(::getpid())) {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot open " + tmp_.string() + " for writing");
  }

  ~AtomicWriter() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return out_; }

  void write_line(const std::string& s) { out_ << s << '\n'; }
  void write_line(const json& obj) { out_ << obj.dump() << '\n'; }

  void commit() {
    out_.flush();
    if (!out_) throw Error("write failed for " + tmp_.string());
    out_.close();
    std::filesystem::rename(tmp_, dest_);
    committed_ = true;
  }

 private:
  std::filesystem::path dest_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

}  // namespace deep
