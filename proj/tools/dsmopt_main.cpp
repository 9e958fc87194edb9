#include <iostream>

#include "acceptance/acceptance.hpp"
#include "dsmopt/harness.hpp"

int main(int argc, char** argv) {
  dsmopt::harness::set_selftest([] { return dsmopt::acceptance::run_all(std::cout); });
  return dsmopt::harness::cli(argc, argv);
}
