#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace malfam {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Feature matrix: one row per sample, one column per schema feature.
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;
using Labels = std::vector<int>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, rows, labels, fingerprints).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: unknown hyperparameters, out-of-range settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Which label column drives training.
enum class Task { category, family };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

/// 64-bit FNV-1a digest rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

std::uint64_t splitmix64(std::uint64_t x);

/// Seeded generator with portable derived draws (the standard distributions
/// are implementation-defined, so uniform/normal/below are spelled out here).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::string to_lower_trimmed(std::string_view text);

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double value);

}  // namespace malfam
