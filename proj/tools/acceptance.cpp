// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fail.
// Usage: acceptance [scratch-dir] [id ...]

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "neuroadapt/checks.hpp"

using namespace neuroadapt;

int main(int argc, char** argv) {
  try {
    std::filesystem::path scratch = std::filesystem::temp_directory_path() / "neuroadapt-acceptance";
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (!a.empty() && a.find_first_not_of("0123456789") == std::string::npos)
        ids.push_back(std::stoi(a));
      else
        scratch = a;
    }
    if (ids.empty())
      for (int i = 1; i <= 12; ++i) ids.push_back(i);
    checks::SessionSuite suite;
    std::size_t failed = 0;
    checks::run_checks(ids, scratch, suite, [&](const checks::CheckResult& r) {
      failed += !r.pass;
      std::printf("criterion %2d %-24s %s  %s (%.1fs)\n", r.id, r.name.c_str(), r.pass ? "PASS" : "FAIL", r.detail.c_str(),
                  r.seconds);
      std::fflush(stdout);
    });
    std::printf("%zu/%zu criteria passed\n", ids.size() - failed, ids.size());
    return failed ? 1 : 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
