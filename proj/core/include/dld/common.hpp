#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace dld {

/// Planar point or vector. Positions are in micrometres unless a name says otherwise.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  [[nodiscard]] double norm() const { return std::hypot(x, y); }
  [[nodiscard]] constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

constexpr double kMicron = 1e-6;

/// Failure categories. The CLI maps each onto a distinct exit code.
enum class ErrorCategory { Config = 2, Solver = 3, Data = 4, Model = 5, Domain = 6 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

struct SolverError : Error {
  explicit SolverError(const std::string& what) : Error(ErrorCategory::Solver, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

struct ModelError : Error {
  explicit ModelError(const std::string& what) : Error(ErrorCategory::Model, what) {}
};

/// Argument outside the mathematical domain of a formula (e.g. N = 0).
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(ErrorCategory::Domain, what) {}
};

}  // namespace dld
