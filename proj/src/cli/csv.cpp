#include "stratreg/cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "stratreg/error.hpp"

namespace stratreg::cli {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

CsvTable& CsvTable::add(double v) {
  rows_.back().push_back(format_number(v));
  return *this;
}

CsvTable& CsvTable::add(long long v) {
  rows_.back().push_back(std::to_string(v));
  return *this;
}

CsvTable& CsvTable::add(const std::string& v) {
  rows_.back().push_back(quote(v));
  return *this;
}

CsvTable& CsvTable::blank() {
  rows_.back().emplace_back();
  return *this;
}

std::string CsvTable::render(const std::string& config_hash) const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
  out += '\n';
  for (const auto& r : rows_) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
    out += '\n';
  }
  out += "# stratreg ";
  out += kToolVersion;
  out += " config_hash=" + config_hash + "\n";
  return out;
}

void CsvTable::write(const std::filesystem::path& path, const std::string& config_hash) const {
  write_text(path, render(config_hash));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Config, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::Config, "failed writing " + path.string());
}

}  // namespace stratreg::cli
