#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace msni::harness {

/// Shortest decimal form that round-trips to the same double ("nan", "inf"
/// and "-inf" for non-finite values). Output is independent of locale.
std::string format_number(double value);

/// Minimal comma-separated writer. Fields are written verbatim; none of the
/// schemas used here contain commas or quotes.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);

  CsvWriter& field(std::string_view text);
  CsvWriter& field(double value);
  CsvWriter& field(std::size_t value);
  /// Writes an empty field (used for absent values).
  CsvWriter& empty();
  void end_row();

 private:
  void separator();

  std::ofstream out_;
  bool row_started_ = false;
};

/// Rows of a comma-separated file, header included, split on commas.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace msni::harness
