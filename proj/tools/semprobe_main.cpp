// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "semprobe/gateway.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return semprobe::run_cli(args, std::cout, std::cerr);
}
