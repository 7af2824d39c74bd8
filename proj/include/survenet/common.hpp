#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace survenet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IndexSet = std::vector<Index>;

/// Malformed or out-of-contract input (bad CSV, wrong dimensions, invalid
/// parameters). Maps to CLI exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed to reach its tolerance. Carries the best
/// iterate found so callers can inspect or fall back on it. Maps to CLI
/// exit code 3.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, Vector best_iterate, double residual)
      : std::runtime_error(what),
        best_iterate_(std::move(best_iterate)),
        residual_(residual) {}

  const Vector& best_iterate() const noexcept { return best_iterate_; }
  double residual() const noexcept { return residual_; }

 private:
  Vector best_iterate_;
  double residual_;
};

enum class Method { Enet, AEnet, AEnetCC, WEnet, WEnetCC };

std::string to_string(Method m);
Method method_from_string(const std::string& name);  // case-insensitive

inline bool is_constrained(Method m) {
  return m == Method::AEnetCC || m == Method::WEnetCC;
}

/// Rows `rows` of `m`, in the given order.
Matrix select_rows(const Matrix& m, const IndexSet& rows);
Vector select_rows(const Vector& v, const IndexSet& rows);
Matrix select_cols(const Matrix& m, const IndexSet& cols);

/// Deterministic 64-bit seed for stream `stream` derived from `seed`
/// (splitmix64 over the pair). Used to give every replicate, fold and
/// bootstrap draw its own generator independent of scheduling.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Number of worker threads allowed, from SURVENET_THREADS (default: hardware
/// concurrency, at least 1).
unsigned worker_count();

}  // namespace survenet
