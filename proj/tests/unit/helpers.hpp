#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nphinfer/survdata.hpp"

namespace testutil {

inline std::vector<nphinfer::SubjectRecord> group(const std::vector<double>& times, const std::vector<int>& events,
                                                  int g) {
  std::vector<nphinfer::SubjectRecord> out;
  for (std::size_t i = 0; i < times.size(); ++i) out.push_back({times[i], events[i] != 0, g});
  return out;
}

inline std::vector<nphinfer::SubjectRecord> concat(std::vector<nphinfer::SubjectRecord> a,
                                                   const std::vector<nphinfer::SubjectRecord>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Exponential event times with exponential censoring, no ties.
inline std::vector<nphinfer::SubjectRecord> exp_sample(std::size_t n, double rate0, double rate1, double cens,
                                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<nphinfer::SubjectRecord> out;
  for (int g = 0; g < 2; ++g) {
    std::exponential_distribution<double> ev(g == 0 ? rate0 : rate1);
    std::exponential_distribution<double> ce(cens);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = ev(rng);
      const double c = std::min(ce(rng), 4.0);
      out.push_back({std::min(t, c), t <= c, g});
    }
  }
  return out;
}

}  // namespace testutil
