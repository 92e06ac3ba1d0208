#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace stratreg::cli {

inline constexpr const char* kToolVersion = "1.0.0";

/// Shortest decimal string that reads back to the same double.
std::string format_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row() {
    rows_.emplace_back();
    return *this;
  }
  CsvTable& add(double v);
  CsvTable& add(long long v);
  CsvTable& add(int v) { return add(static_cast<long long>(v)); }
  CsvTable& add(bool v) { return add(static_cast<long long>(v ? 1 : 0)); }
  CsvTable& add(const std::string& v);
  CsvTable& add(const char* v) { return add(std::string(v)); }
  /// Empty cell.
  CsvTable& blank();

  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::vector<std::vector<std::string>>& rows() { return rows_; }

  /// Header, rows, then `# stratreg <version> config_hash=<hex>`.
  std::string render(const std::string& config_hash) const;
  void write(const std::filesystem::path& path, const std::string& config_hash) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace stratreg::cli
