#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssvae {

/// Render a double with 17 significant digits ('%.17g', '.' separator), so
/// written values round-trip bit-exactly through text.
std::string format_real(double value);

/// Accumulate-then-write CSV table with a fixed header. Output is a pure
/// function of the rows added, so identical runs produce identical bytes.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  std::string to_string() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Write a text file in one shot (used for plot data and manifests).
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace ssvae
