#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace reinflow::harness {

inline constexpr int kMetricsSchemaVersion = 1;

// Append-only CSV with a fixed header. Rows must arrive with strictly
// increasing first column (the iteration).
class MetricsLog {
 public:
  // Starts a fresh file. With `resume_from`, keeps the existing header and the
  // rows whose iteration is below it, dropping anything written later.
  MetricsLog(const std::filesystem::path& path, std::vector<std::string> columns, std::size_t flush_every = 1,
             std::optional<std::size_t> resume_from = std::nullopt);

  void append(const std::vector<double>& values);
  void flush();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<std::string> columns_;
  std::size_t flush_every_;
  std::size_t pending_ = 0;
  std::optional<double> last_iter_;
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // Index of `name` in the header; nullopt when absent.
  std::optional<std::size_t> column(const std::string& name) const;
};

// Throws ConfigError on malformed rows.
CsvTable read_csv(const std::filesystem::path& path);

// Numbers are written with %.17g so they round-trip exactly.
std::string format_metric(double v);

}  // namespace reinflow::harness
