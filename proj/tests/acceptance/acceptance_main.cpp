#include <cstdlib>
#include <iostream>
#include <string>

#include "acceptance.hpp"
#include "dsmopt/tone_kernels.hpp"

// Usage: acceptance [criterion-id]
int main(int argc, char** argv) {
  dsmopt::kernels::set_worker_count(dsmopt::kernels::threads_from_env());
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  const int failures = dsmopt::acceptance::run_all(std::cout, only);
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
