#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>

#include <spdlog/spdlog.h>

int main(int argc, char** argv) {
  spdlog::set_level(std::getenv("GRIDFS_TEST_LOG") ? spdlog::level::debug : spdlog::level::err);
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
