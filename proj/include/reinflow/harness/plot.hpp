#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace reinflow::harness {

// One SVG line chart per column against `iter`, stacked vertically. A column
// listed in `reference_lines` gets a dashed horizontal line at that value
// (the pretrained policy's score). Missing columns throw ConfigError; an
// empty table still produces the axes.
void emit_plot(const std::filesystem::path& metrics_path, const std::vector<std::string>& columns,
               const std::filesystem::path& out_path, const std::map<std::string, double>& reference_lines = {});

}  // namespace reinflow::harness
