#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace freeknot {

// One independent engine per (seed, stream); draw i of a stream is a pure
// function of (seed, stream, i), so replicates can run in any order.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream);

// n i.i.d. standard normals from stream (seed, stream).
Eigen::VectorXd standard_normal_vector(std::uint64_t seed, std::uint64_t stream, int n);

}  // namespace freeknot
