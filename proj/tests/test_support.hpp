#pragma once

#include <random>
#include <string>

#include "esci/conservatism_oracle.hpp"
#include "esci/json_io.hpp"

namespace esci::testkit {

inline std::string data_path(const std::string& name) { return std::string(ESCI_DATA_DIR) + "/" + name; }

inline LoadedProblem load_builtin(const std::string& name) {
  return problem_from_json(read_json_file(data_path(name + ".json")));
}

inline Mat gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Mat a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = n01(rng);
  return a;
}

/// SPD with eigenvalues in [lo, hi] and a random eigenbasis.
inline SymMatrix random_spd(int d, std::mt19937_64& rng, double lo = 0.2, double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  const Mat q = random_orthogonal(d, rng);
  Vec ev(d);
  for (int i = 0; i < d; ++i) ev(i) = u(rng);
  return SymMatrix(q * ev.asDiagonal() * q.transpose());
}

/// PSD of the given rank (rank 0 gives zero).
inline SymMatrix random_psd(int d, int rank, std::mt19937_64& rng) {
  if (rank == 0) return SymMatrix::zero(d);
  const Mat g = gaussian(d, rank, rng);
  return SymMatrix(g * g.transpose());
}

inline Vec random_vec(int d, std::mt19937_64& rng) { return gaussian(d, 1, rng).col(0); }

/// Generic problem: SPD unknown blocks and a full SPD known centralized covariance.
inline FusionProblem random_fusion_problem(int n, int d, std::mt19937_64& rng) {
  const SymMatrix pc2 = random_spd(n * d, rng, 0.1, 3.0);
  FusionProblem p{{}, BlockMatrix(d, pc2), std::nullopt};
  for (int i = 0; i < n; ++i)
    p.estimates.push_back(SplitEstimate{random_vec(d, rng), random_spd(d, rng), SymMatrix(pc2.mat().block(i * d, i * d, d, d))});
  return p;
}

inline CommonNoiseProblem random_common_noise_problem(int n, int d, int q, std::mt19937_64& rng) {
  CommonNoiseProblem p{{}, random_spd(q, rng, 0.2, 2.0)};
  for (int i = 0; i < n; ++i)
    p.estimates.push_back(
        CommonNoiseEstimate{random_vec(d, rng), random_spd(d, rng), random_spd(d, rng, 0.1, 2.0), gaussian(d, q, rng)});
  return p;
}

/// Interior simplex point with entries bounded away from zero.
inline Simplex random_interior_simplex(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vec w(n);
  for (int i = 0; i < n; ++i) w(i) = u(rng);
  w /= w.sum();
  w(n - 1) = 1.0 - w.head(n - 1).sum();
  return Simplex(w);
}

inline double rel_frobenius(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

inline LoadedProblem as_loaded(const FusionProblem& p) { return LoadedProblem{p, std::nullopt}; }
inline LoadedProblem as_loaded(const CommonNoiseProblem& p) { return LoadedProblem{p.assemble(), p}; }

}  // namespace esci::testkit
