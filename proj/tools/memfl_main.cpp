#include <iostream>

#include "memfl/cli.hpp"

int main(int argc, char** argv) {
  return memfl::dispatch(argc, argv, std::cout, std::cerr);
}
