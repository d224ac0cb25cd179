#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace fixtures {

inline std::string data_path(const std::string& name) { return std::string(SENTINEL_TEST_DATA) + "/" + name; }

// input<TAB>expected rows; '#' lines are comments.
inline std::vector<std::pair<std::string, std::string>> load_normalization_cases() {
  std::ifstream in(data_path("normalization_fixtures.tsv"));
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return rows;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sentinel_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// Runs the sentinel binary with `args`; stderr lands in `err` when given.
inline int run_cli(const std::string& args, std::string* err = nullptr) {
  const auto err_path = std::filesystem::temp_directory_path() / "sentinel_cli_stderr.txt";
  const std::string cmd = std::string(SENTINEL_CLI_PATH) + " " + args + " > /dev/null 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  if (err) *err = read_file(err_path);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace fixtures
