#pragma once

#include <cmath>
#include <limits>

// Extended-real helpers. Values live in R ∪ {-inf, +inf} with total rules:
// -inf dominates addition (so maximizing objectives never see NaN), and
// suprema absorb +inf.

namespace treedp::ext {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

inline bool is_neg_inf(double v) { return std::isinf(v) && v < 0; }
inline bool is_pos_inf(double v) { return std::isinf(v) && v > 0; }
inline bool is_finite(double v) { return std::isfinite(v); }

inline double add(double a, double b) {
  if (is_neg_inf(a) || is_neg_inf(b)) return kNegInf;
  return a + b;
}

/// Linear interpolation with -inf dominance; t is clamped to [0,1].
inline double lerp(double a, double b, double t) {
  if (t <= 0.0) return a;
  if (t >= 1.0) return b;
  if (is_neg_inf(a) || is_neg_inf(b)) return kNegInf;
  if (is_pos_inf(a) || is_pos_inf(b)) return kPosInf;
  return a + t * (b - a);
}

}  // namespace treedp::ext
