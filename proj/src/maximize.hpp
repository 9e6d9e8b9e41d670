#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "treedp/errors.hpp"
#include "treedp/extended.hpp"

namespace treedp::detail {

struct MaxResult {
  double value = ext::kNegInf;
  std::vector<double> argmax;
};

/// Derivative-free pattern search (maximization). The step doubles while
/// moves keep improving and halves when a sweep stalls, down to `tol`.
/// Infeasible candidates are bisected back to the feasibility boundary, so
/// the search can follow curved constraint surfaces. The direction set is
/// the coordinate compass plus, per coordinate plane, a fan of angles whose
/// rotation advances by the golden angle each time the step halves: the
/// union over scales is asymptotically dense, which rules out stalls in the
/// narrow feasible-improving cones next to active smooth constraints.
/// Throws DivergenceError once the value exceeds `divergence_threshold`.
inline MaxResult pattern_search_max(
    const std::function<double(std::span<const double>)>& f, std::vector<double> z0, double step0,
    double tol, const std::function<bool(std::span<const double>)>& admissible = {},
    double divergence_threshold = ext::kPosInf) {
  MaxResult best;
  best.argmax = std::move(z0);
  best.value = f(best.argmax);
  if (best.value > divergence_threshold)
    throw DivergenceError("objective exceeded the divergence threshold at the start point");

  const std::size_t d = best.argmax.size();
  constexpr int kFan = 32;
  constexpr double kGolden = 0.6180339887498949;

  auto directions_at = [&](int level) {
    std::vector<std::vector<double>> dirs;
    for (std::size_t i = 0; i < d; ++i)
      for (double sign : {1.0, -1.0}) {
        std::vector<double> u(d, 0.0);
        u[i] = sign;
        dirs.push_back(std::move(u));
      }
    const double offset = std::fmod(static_cast<double>(level) * kGolden, 1.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j)
        for (int k = 0; k < kFan; ++k) {
          const double angle = 2.0 * M_PI * (static_cast<double>(k) + offset) / kFan;
          std::vector<double> u(d, 0.0);
          u[i] = std::cos(angle);
          u[j] = std::sin(angle);
          dirs.push_back(std::move(u));
        }
    return dirs;
  };

  double step = step0;
  int level = 0;
  auto dirs = directions_at(level);
  std::vector<double> cand(d);
  auto place = [&](double t, const std::vector<double>& u) {
    cand = best.argmax;
    for (std::size_t i = 0; i < d; ++i) cand[i] += t * u[i];
  };
  while (step > tol) {
    bool improved = false;
    for (const auto& u : dirs) {
      place(step, u);
      if (admissible && !admissible(cand)) {
        double lo = 0.0, hi = step;
        for (int it = 0; it < 24; ++it) {
          const double mid = 0.5 * (lo + hi);
          place(mid, u);
          (admissible(cand) ? lo : hi) = mid;
        }
        if (lo <= 0.0) continue;
        place(lo, u);
      }
      const double v = f(cand);
      if (v > best.value) {
        best.value = v;
        best.argmax = cand;
        improved = true;
        if (best.value > divergence_threshold)
          throw DivergenceError("objective diverges: exceeded " +
                                std::to_string(divergence_threshold) + " during expansion");
      }
    }
    if (improved) {
      step *= 2.0;
      if (step > std::ldexp(1.0, 62))
        throw DivergenceError("objective still improving after 62 doublings of the search step");
    } else {
      step *= 0.5;
      dirs = directions_at(++level);
    }
  }
  return best;
}

}  // namespace treedp::detail
