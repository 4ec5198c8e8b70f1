#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssvae {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A value failed a construction-time invariant (normalization, shape,
/// duplicate labels, non-finite entries, ...). Inputs are rejected, never
/// silently repaired.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

/// Conditioning on an outcome of zero probability.
class ZeroMarginalError : public Error {
 public:
  explicit ZeroMarginalError(std::string label)
      : Error("conditional row undefined: given-label '" + label +
              "' has zero probability"),
        label_(std::move(label)) {}
  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

/// KL-style ratio requested where the reference distribution has a zero
/// but the numerator does not.
class AbsoluteContinuityError : public Error {
 public:
  explicit AbsoluteContinuityError(std::string label)
      : Error("absolute continuity violated at label '" + label +
              "': p > 0 while q = 0"),
        label_(std::move(label)) {}
  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

/// An implicit decoder row was requested for a latent the encoder never
/// reaches (its induced marginal probability is zero).
class UnreachedLatentError : public Error {
 public:
  explicit UnreachedLatentError(std::string label)
      : Error("latent '" + label + "' has zero induced probability"),
        label_(std::move(label)) {}
  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

/// An iterative fit hit its iteration cap before meeting its gradient
/// tolerance.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(std::size_t iterations, double final_gradient_norm)
      : Error("did not converge in " + std::to_string(iterations) +
              " iterations (gradient max-norm " +
              std::to_string(final_gradient_norm) + ")"),
        iterations_(iterations),
        final_gradient_norm_(final_gradient_norm) {}
  std::size_t iterations() const { return iterations_; }
  double final_gradient_norm() const { return final_gradient_norm_; }

 private:
  std::size_t iterations_;
  double final_gradient_norm_;
};

}  // namespace ssvae
