#include <malloc.h>

#include "cli.hpp"

int main(int argc, char** argv) {
  // Activations are allocated and freed every step; keep them in the heap
  // rather than mapping and unmapping pages each time.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  return rscnet::cli::run(argc, argv);
}
