// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return treeskel::cli::run(args, std::cout, std::cerr);
}
