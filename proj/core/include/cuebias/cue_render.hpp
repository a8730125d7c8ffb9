#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "cuebias/bitmap.hpp"
#include "cuebias/rng.hpp"

namespace cuebias {

enum class Glyph : std::uint8_t { Plus, Cross };

enum class PatternDistribution : std::uint8_t { Uniform = 0, Centered = 1, Cornered = 2 };

inline constexpr int kGlyphBox = 5;
inline constexpr int kGlyphPixels = 9;
inline constexpr int kSymbolsPerImage = 3;
inline constexpr int kMaxAnchor = kImageSide - kGlyphBox;  // 25
inline constexpr int kPatternPixels = 27;
inline constexpr double kDefaultPatternSigma = 5.0;
inline constexpr int kPlacementRetryCap = 10'000;

std::string_view to_string(Glyph g) noexcept;
std::string_view to_string(PatternDistribution d) noexcept;
std::optional<PatternDistribution> parse_pattern_distribution(std::string_view s) noexcept;

// Nine (row, col) offsets inside the 5x5 glyph box, in row-major order.
std::array<Cell, kGlyphPixels> glyph_mask(Glyph glyph) noexcept;

struct SymbolPlacement {
  Glyph glyph = Glyph::Plus;
  Cell anchor;  // top-left corner of the 5x5 box

  friend bool operator==(const SymbolPlacement&, const SymbolPlacement&) = default;
};

class PlacementExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Places each glyph with a uniform anchor in [0, 25]^2 such that all 5x5
// boxes are pairwise disjoint. The whole configuration is redrawn on any
// overlap, which keeps it uniform over disjoint configurations.
std::vector<SymbolPlacement> place_symbols(std::span<const Glyph> glyphs, RngStream& rng,
                                           int retry_cap = kPlacementRetryCap);

bool boxes_overlap(Cell a, Cell b) noexcept;

// Probability of each of the 900 cells (row-major). Centered and Cornered
// use an isotropic Gaussian kernel truncated to the grid and normalized;
// Centered sits at (14.5, 14.5), Cornered at (0, 0).
std::vector<double> pattern_pmf(PatternDistribution distribution,
                                double sigma = kDefaultPatternSigma);

// Draws `count` distinct indices from `pmf` one at a time, removing each
// drawn index and renormalizing the rest. Indices are returned in draw order.
std::vector<int> sample_without_replacement(std::span<const double> pmf, int count,
                                            RngStream& rng);

std::vector<Cell> sample_pattern(PatternDistribution distribution, int count, RngStream& rng,
                                 double sigma = kDefaultPatternSigma);
// Same as above with a precomputed pmf (hot path during dataset generation).
std::vector<Cell> sample_pattern(std::span<const double> pmf, int count, RngStream& rng);

// Logical OR of all translated glyph masks and the pattern cells.
Bitmap render(std::span<const SymbolPlacement> placements, std::span<const Cell> pattern);

}  // namespace cuebias
