#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace faircca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// ---- error hierarchy ----

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct FactorizationFailure : Error {
  using Error::Error;
};
struct RankDeficientStep : Error {
  using Error::Error;
};
struct FeasibilityViolation : Error {
  using Error::Error;
};
struct NonFiniteInput : Error {
  using Error::Error;
};
struct EmptyGroup : Error {
  using Error::Error;
};
struct RankTooSmall : Error {
  using Error::Error;
};
struct DegenerateDirection : Error {
  using Error::Error;
};
struct GroupMismatch : Error {
  using Error::Error;
};
struct SamePair : Error {
  using Error::Error;
};
struct SubproblemNotConverged : Error {
  using Error::Error;
};
struct JointNotPSD : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

// splitmix64; used to derive independent substream seeds
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace faircca
