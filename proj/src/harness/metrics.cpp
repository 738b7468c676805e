#include "reinflow/harness/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "reinflow/errors.hpp"

namespace reinflow::harness {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string header_line(const std::vector<std::string>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  return out;
}

}  // namespace

std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

MetricsLog::MetricsLog(const std::filesystem::path& path, std::vector<std::string> columns, std::size_t flush_every,
                       std::optional<std::size_t> resume_from)
    : path_(path), columns_(std::move(columns)), flush_every_(flush_every == 0 ? 1 : flush_every) {
  std::vector<std::string> kept;
  if (resume_from.has_value() && std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    std::string line;
    if (std::getline(in, line) && line != header_line(columns_)) {
      throw ConfigError("metrics file " + path_.string() + " has a different header");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = split(line);
      const double iter = std::strtod(fields.front().c_str(), nullptr);
      if (iter < static_cast<double>(*resume_from)) {
        kept.push_back(line);
        last_iter_ = iter;
      }
    }
  }
  out_.open(path_, std::ios::trunc);
  if (!out_) throw ConfigError("cannot write metrics file " + path_.string());
  out_ << header_line(columns_) << '\n';
  for (const auto& l : kept) out_ << l << '\n';
  out_.flush();
}

void MetricsLog::append(const std::vector<double>& values) {
  if (values.size() != columns_.size()) throw ConfigError("metrics row width does not match the header");
  if (last_iter_.has_value() && !(values.front() > *last_iter_)) {
    throw ConfigError("metrics rows must be strictly increasing in iteration");
  }
  last_iter_ = values.front();
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_metric(values[i]);
  out_ << '\n';
  if (++pending_ >= flush_every_) flush();
}

void MetricsLog::flush() {
  out_.flush();
  pending_ = 0;
}

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) return t;
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != t.header.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields");
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0') {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": '" + f + "' is not a number");
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace reinflow::harness
