#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "prdim/pipeline.hpp"

int main(int argc, char** argv) {
    prdim::set_blas_threads(1);
    return doctest::Context(argc, argv).run();
}
