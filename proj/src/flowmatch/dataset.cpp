#include "reinflow/flowmatch/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "reinflow/errors.hpp"

namespace reinflow::flowmatch {

void FlowDataset::append(std::span<const double> target, std::span<const double> condition) {
  if (target.size() != chunk_dim_ || condition.size() != cond_dim_) {
    throw ConfigError("dataset record shape mismatch");
  }
  targets_.insert(targets_.end(), target.begin(), target.end());
  conditions_.insert(conditions_.end(), condition.begin(), condition.end());
}

ConstMatrixMap FlowDataset::targets() const {
  return {targets_.data(), static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(chunk_dim_)};
}

ConstMatrixMap FlowDataset::conditions() const {
  return {conditions_.data(), static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(cond_dim_)};
}

void write_dataset(const std::filesystem::path& path, const FlowDataset& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset " + path.string());
  out << data.chunk_dim() << ',' << data.cond_dim() << ',' << data.size() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    bool first = true;
    auto emit = [&](double v) {
      if (!first) out << ',';
      first = false;
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf;
    };
    for (double v : data.target(i)) emit(v);
    for (double v : data.condition(i)) emit(v);
    out << '\n';
  }
}

namespace {

std::vector<double> parse_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<double> values;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    const char* comma = std::find(p, end, ',');
    double v = 0.0;
    const auto res = std::from_chars(p, comma, v);
    if (res.ec != std::errc() || res.ptr != comma) {
      throw ConfigError("dataset line " + std::to_string(line_no) + ": bad number");
    }
    values.push_back(v);
    p = comma == end ? end : comma + 1;
  }
  return values;
}

}  // namespace

FlowDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset " + path.string() + " is empty");
  const auto header = parse_csv_line(line, 1);
  if (header.size() != 3) throw ConfigError("dataset header must be chunk_dim,cond_dim,count");
  const auto chunk = static_cast<std::size_t>(header[0]);
  const auto cond = static_cast<std::size_t>(header[1]);
  const auto count = static_cast<std::size_t>(header[2]);
  FlowDataset data(chunk, cond);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ConfigError("dataset " + path.string() + " is truncated");
    const auto values = parse_csv_line(line, i + 2);
    if (values.size() != chunk + cond) {
      throw ConfigError("dataset line " + std::to_string(i + 2) + ": expected " + std::to_string(chunk + cond) +
                        " values");
    }
    data.append(std::span(values).first(chunk), std::span(values).subspan(chunk));
  }
  if (std::getline(in, line) && !line.empty()) throw ConfigError("dataset has more records than its header");
  return data;
}

}  // namespace reinflow::flowmatch
