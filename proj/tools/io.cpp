#include "io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#ifndef MDSPLINE_VERSION
#define MDSPLINE_VERSION "unknown"
#endif

namespace mdspline::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    std::string_view f = line.substr(start, pos == std::string_view::npos ? pos : pos - start);
    f = trim(f);
    if (f.size() >= 2 && f.front() == '"' && f.back() == '"') f = f.substr(1, f.size() - 2);
    out.emplace_back(f);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Non-blank lines with their 1-based line numbers; strips a UTF-8 BOM.
std::vector<std::pair<int, std::string>> read_lines(const std::filesystem::path& path) {
  std::string text = read_file(path);
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);
  std::vector<std::pair<int, std::string>> lines;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    lines.emplace_back(lineno, line);
  }
  return lines;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<double>& NumericTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("missing column '" + std::string(name) + "'");
  return columns[static_cast<std::size_t>(it - header.begin())];
}

NumericTable read_numeric_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw DataError("'" + path.string() + "' is empty; a header row is required");
  NumericTable t;
  t.header = split_fields(lines.front().second);
  for (const auto& h : t.header) {
    if (h.empty()) throw DataError("empty column name in the header of '" + path.string() + "'");
    double probe = 0.0;
    const auto res = std::from_chars(h.data(), h.data() + h.size(), probe);
    if (res.ec == std::errc() && res.ptr == h.data() + h.size()) {
      throw DataError("'" + path.string() + "' has no header row (first line is numeric)");
    }
  }
  t.columns.assign(t.header.size(), {});
  std::vector<int> missing;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto& [lineno, line] = lines[li];
    const auto fields = split_fields(line);
    if (fields.size() != t.header.size()) {
      throw DataError("line " + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    bool bad = false;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      std::string_view f = fields[c];
      if (f.starts_with('+')) f.remove_prefix(1);
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty()) {
        bad = true;
        continue;
      }
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw DataError("line " + std::to_string(lineno) + ", column '" + t.header[c] +
                        "': '" + fields[c] + "' is not a number");
      }
      if (std::isnan(v)) bad = true;
      if (std::isinf(v)) {
        throw DataError("line " + std::to_string(lineno) + ", column '" + t.header[c] +
                        "': infinite value");
      }
      row[c] = v;
    }
    if (bad) {
      missing.push_back(lineno);
      continue;
    }
    for (std::size_t c = 0; c < row.size(); ++c) t.columns[c].push_back(row[c]);
  }
  if (!missing.empty()) {
    throw DataError("'" + path.string() + "': rows with NaN or missing values at line(s) " +
                    join_ints(missing));
  }
  return t;
}

StringTable read_string_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  StringTable t;
  if (lines.empty()) return t;
  t.header = split_fields(lines.front().second);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto fields = split_fields(lines[li].second);
    if (fields.size() != t.header.size()) {
      throw DataError("line " + std::to_string(lines[li].first) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Manifest::Manifest(std::string command, std::filesystem::path out_dir, std::string stem)
    : command_(std::move(command)), out_dir_(std::move(out_dir)), stem_(std::move(stem)),
      started_(utc_now()) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir_, ec);
  if (ec) throw DataError("cannot create output directory '" + out_dir_.string() + "'");
}

void Manifest::add_input(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  inputs_.push_back({{"path", path.string()},
                     {"bytes", bytes.size()},
                     {"fnv1a64", fnv1a64_hex(bytes)}});
}

void Manifest::write_output(const std::string& name, const std::string& content) {
  const auto path = out_dir_ / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
  out.close();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
  outputs_.push_back({{"path", name}, {"bytes", content.size()}, {"fnv1a64", fnv1a64_hex(content)}});
}

void Manifest::finish() {
  const nlohmann::json j = {
      {"command", command_},
      {"version", MDSPLINE_VERSION},
      {"seed", seed_},
      {"threads", threads_},
      {"config", config_},
      {"started_at", started_},
      {"finished_at", utc_now()},
      {"inputs", inputs_},
      {"outputs", outputs_},
      {"notes", notes_},
  };
  const auto path = out_dir_ / file_name();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace mdspline::cli
