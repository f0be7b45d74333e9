#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "anrlab/runtime.hpp"

int main(int argc, char** argv) {
  anrlab::tune_allocator();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
