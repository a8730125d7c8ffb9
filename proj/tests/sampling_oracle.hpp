#pragma once

#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "cuebias/cue_render.hpp"
#include "cuebias/rng.hpp"

namespace cuebias::testing {

// Exact probability of every ordered triple drawn without replacement with
// renormalization after each draw.
inline std::map<std::array<int, 3>, double> enumerate_triples(const std::vector<double>& pmf) {
  std::map<std::array<int, 3>, double> exact;
  const int n = static_cast<int>(pmf.size());
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      for (int c = 0; c < n; ++c) {
        if (c == a || c == b) continue;
        const double pa = pmf[static_cast<std::size_t>(a)];
        const double pb = pmf[static_cast<std::size_t>(b)];
        const double pc = pmf[static_cast<std::size_t>(c)];
        exact[{a, b, c}] = pa * (pb / (1.0 - pa)) * (pc / (1.0 - pa - pb));
      }
    }
  }
  return exact;
}

// Non-uniform pmf over a 4x4 grid.
inline std::vector<double> reduced_grid_pmf() {
  std::vector<double> pmf(16);
  for (int i = 0; i < 16; ++i) pmf[static_cast<std::size_t>(i)] = 1.0 + (i % 4) + 2.0 * (i / 4);
  const double z = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (double& p : pmf) p /= z;
  return pmf;
}

struct OracleComparison {
  double total_mass = 0.0;       // of the enumeration, should be 1
  double max_abs_z = 0.0;        // largest |observed - expected| / sd
  std::size_t outcomes = 0;      // enumerated triples
  std::size_t unexpected = 0;    // observed triples missing from the enumeration
};

inline OracleComparison compare_with_enumeration(const std::vector<double>& pmf, int draws,
                                                 std::uint64_t seed) {
  const auto exact = enumerate_triples(pmf);
  OracleComparison out;
  out.outcomes = exact.size();
  for (const auto& [t, p] : exact) out.total_mass += p;
  std::map<std::array<int, 3>, int> seen;
  RngStream rng(seed, 0);
  for (int i = 0; i < draws; ++i) {
    const auto d = sample_without_replacement(pmf, 3, rng);
    ++seen[{d[0], d[1], d[2]}];
  }
  for (const auto& [triple, count] : seen) out.unexpected += exact.contains(triple) ? 0 : 1;
  for (const auto& [triple, p] : exact) {
    const double expected = draws * p;
    const double sd = std::sqrt(draws * p * (1.0 - p));
    const auto it = seen.find(triple);
    const double got = it == seen.end() ? 0.0 : it->second;
    out.max_abs_z = std::max(out.max_abs_z, std::abs(got - expected) / sd);
  }
  return out;
}

}  // namespace cuebias::testing
