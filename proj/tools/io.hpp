#pragma once

// File plumbing for the command-line tool: strict CSV readers, checksums
// and run manifests.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mdspline::cli {

/// Bad input data or files; maps to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command-line usage; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric CSV with a required header row; columns are stored by name.
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
  /// Column by name; throws DataError naming the missing column.
  const std::vector<double>& column(std::string_view name) const;
};

/// Parses a comma-separated file with a header row. Fields must be plain
/// decimal numbers; rows containing NaN or empty fields are rejected with
/// their line numbers.
NumericTable read_numeric_csv(const std::filesystem::path& path);

struct StringTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

StringTable read_string_csv(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

/// Sidecar describing one command invocation: the configuration echo,
/// seed, version, timestamps and checksums of every input and output.
class Manifest {
 public:
  Manifest(std::string command, std::filesystem::path out_dir, std::string stem);

  nlohmann::json& config() { return config_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set_threads(int threads) { threads_ = threads; }
  void note(std::string text) { notes_.push_back(std::move(text)); }
  void add_input(const std::filesystem::path& path);

  /// File name of the manifest, relative to the output directory.
  std::string file_name() const { return stem_ + ".manifest.json"; }
  const std::filesystem::path& out_dir() const noexcept { return out_dir_; }
  const std::string& stem() const noexcept { return stem_; }

  /// Writes out_dir/name and records its checksum.
  void write_output(const std::string& name, const std::string& content);

  /// Writes the manifest itself.
  void finish();

 private:
  std::string command_;
  std::filesystem::path out_dir_;
  std::string stem_;
  std::string started_;
  nlohmann::json config_ = nlohmann::json::object();
  std::uint64_t seed_ = 0;
  int threads_ = 1;
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json outputs_ = nlohmann::json::array();
  std::vector<std::string> notes_;
};

}  // namespace mdspline::cli
