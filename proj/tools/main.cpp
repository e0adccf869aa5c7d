#include <iostream>

#include "pipeline.hpp"

int main(int argc, char** argv) {
  return medcurate::cli::Main(argc, argv, std::cout, std::cerr);
}
