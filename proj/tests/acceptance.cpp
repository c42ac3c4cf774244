#include <cstdio>

#include <spdlog/spdlog.h>

#include "verify.hpp"

int main() {
  spdlog::set_level(spdlog::level::warn);
  jointbe::verify::Suite suite(JOINTBE_CONFIG_DIR);
  int failed = 0;
  for (int id : jointbe::verify::Suite::criteria("all")) {
    const auto c = suite.run(id);
    std::printf("%s\n", jointbe::verify::format_line(c).c_str());
    std::fflush(stdout);
    if (!c.pass) ++failed;
  }
  std::printf("%d of 12 acceptance criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
