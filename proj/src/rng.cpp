#include "freeknot/rng.hpp"

namespace freeknot {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Eigen::VectorXd standard_normal_vector(std::uint64_t seed, std::uint64_t stream, int n) {
  auto eng = make_engine(seed, stream);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = z(eng);
  return out;
}

}  // namespace freeknot
