#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace oinn::cli {

// Shortest text that reads back to the same double ("inf", "-inf", "nan"
// for non-finite values).
std::string format_number(double v);
// RFC 4180 quoting, applied only when the field needs it.
std::string csv_field(const std::string& s);

// CSV with a fixed header and LF line endings. Rows are flushed as written
// so a crashed run keeps what it had.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  void close();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t width_;
};

// JSON numbers cannot hold inf/nan; those become null.
nlohmann::json number_or_null(double v);

// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

void ensure_directory(const std::filesystem::path& dir);

}  // namespace oinn::cli
