#include "cuebias/cue_render.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace cuebias {

std::string_view to_string(Glyph g) noexcept { return g == Glyph::Plus ? "+" : "x"; }

std::string_view to_string(PatternDistribution d) noexcept {
  switch (d) {
    case PatternDistribution::Uniform: return "uniform";
    case PatternDistribution::Centered: return "centered";
    case PatternDistribution::Cornered: return "cornered";
  }
  return "?";
}

std::optional<PatternDistribution> parse_pattern_distribution(std::string_view s) noexcept {
  if (s == "uniform") return PatternDistribution::Uniform;
  if (s == "centered") return PatternDistribution::Centered;
  if (s == "cornered") return PatternDistribution::Cornered;
  return std::nullopt;
}

std::array<Cell, kGlyphPixels> glyph_mask(Glyph glyph) noexcept {
  std::array<Cell, kGlyphPixels> out{};
  std::size_t n = 0;
  for (int r = 0; r < kGlyphBox; ++r) {
    for (int c = 0; c < kGlyphBox; ++c) {
      const bool on = glyph == Glyph::Plus ? (r == kGlyphBox / 2 || c == kGlyphBox / 2)
                                           : (r == c || r + c == kGlyphBox - 1);
      if (on) out[n++] = {r, c};
    }
  }
  return out;
}

bool boxes_overlap(Cell a, Cell b) noexcept {
  return std::abs(a.row - b.row) < kGlyphBox && std::abs(a.col - b.col) < kGlyphBox;
}

std::vector<SymbolPlacement> place_symbols(std::span<const Glyph> glyphs, RngStream& rng,
                                           int retry_cap) {
  std::vector<SymbolPlacement> out(glyphs.size());
  for (int attempt = 0; attempt < retry_cap; ++attempt) {
    bool ok = true;
    for (std::size_t i = 0; i < glyphs.size(); ++i) {
      out[i].glyph = glyphs[i];
      out[i].anchor = {static_cast<int>(rng.below(kMaxAnchor + 1)),
                       static_cast<int>(rng.below(kMaxAnchor + 1))};
    }
    for (std::size_t i = 0; ok && i < out.size(); ++i) {
      for (std::size_t j = i + 1; j < out.size(); ++j) {
        if (boxes_overlap(out[i].anchor, out[j].anchor)) {
          ok = false;
          break;
        }
      }
    }
    if (ok) return out;
  }
  throw PlacementExhausted("no disjoint placement of " + std::to_string(glyphs.size()) +
                           " symbols after " + std::to_string(retry_cap) + " attempts");
}

std::vector<double> pattern_pmf(PatternDistribution distribution, double sigma) {
  std::vector<double> pmf(kImageCells, 1.0);
  if (distribution != PatternDistribution::Uniform) {
    const double center = distribution == PatternDistribution::Centered
                              ? (kImageSide - 1) / 2.0
                              : 0.0;
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    for (int i = 0; i < kImageCells; ++i) {
      const Cell c = Cell::from_index(i);
      const double dr = c.row - center;
      const double dc = c.col - center;
      pmf[static_cast<std::size_t>(i)] = std::exp(-(dr * dr + dc * dc) * inv_two_var);
    }
  }
  const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (double& p : pmf) p /= total;
  return pmf;
}

std::vector<int> sample_without_replacement(std::span<const double> pmf, int count,
                                            RngStream& rng) {
  const int n = static_cast<int>(pmf.size());
  if (count < 0 || count > n) {
    throw std::invalid_argument("sample_without_replacement: count out of range");
  }
  std::vector<double> weight(pmf.begin(), pmf.end());
  std::vector<bool> taken(pmf.size(), false);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    // Sum fresh each step so rounding does not accumulate across draws.
    const double remaining = std::accumulate(weight.begin(), weight.end(), 0.0);
    const double target = rng.uniform() * remaining;
    double acc = 0.0;
    int chosen = -1;
    int last_positive = -1;
    for (int i = 0; i < n; ++i) {
      const double w = weight[static_cast<std::size_t>(i)];
      if (w <= 0.0) continue;
      last_positive = i;
      acc += w;
      if (target < acc) {
        chosen = i;
        break;
      }
    }
    if (chosen < 0) chosen = last_positive;
    if (chosen < 0) {
      // Only zero-probability cells remain; take the lowest free one.
      for (int i = 0; i < n; ++i) {
        if (!taken[static_cast<std::size_t>(i)]) {
          chosen = i;
          break;
        }
      }
    }
    taken[static_cast<std::size_t>(chosen)] = true;
    weight[static_cast<std::size_t>(chosen)] = 0.0;
    out.push_back(chosen);
  }
  return out;
}

std::vector<Cell> sample_pattern(std::span<const double> pmf, int count, RngStream& rng) {
  if (count < 1 || count > kImageCells || pmf.size() != static_cast<std::size_t>(kImageCells)) {
    throw std::invalid_argument("sample_pattern: count must be in [1, 900]");
  }
  const std::vector<int> idx = sample_without_replacement(pmf, count, rng);
  std::vector<Cell> out;
  out.reserve(idx.size());
  for (const int i : idx) out.push_back(Cell::from_index(i));
  return out;
}

std::vector<Cell> sample_pattern(PatternDistribution distribution, int count, RngStream& rng,
                                 double sigma) {
  const std::vector<double> pmf = pattern_pmf(distribution, sigma);
  return sample_pattern(pmf, count, rng);
}

Bitmap render(std::span<const SymbolPlacement> placements, std::span<const Cell> pattern) {
  Bitmap out;
  for (const SymbolPlacement& p : placements) {
    for (const Cell offset : glyph_mask(p.glyph)) {
      const Cell c{p.anchor.row + offset.row, p.anchor.col + offset.col};
      if (!c.in_bounds()) throw std::invalid_argument("render: symbol outside image");
      out.set(c);
    }
  }
  for (const Cell c : pattern) {
    if (!c.in_bounds()) throw std::invalid_argument("render: pattern cell outside image");
    out.set(c);
  }
  return out;
}

}  // namespace cuebias
