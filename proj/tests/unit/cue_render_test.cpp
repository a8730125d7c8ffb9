#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "cuebias/cue_render.hpp"
#include "sampling_oracle.hpp"

namespace cuebias {
namespace {

std::size_t cell_index(int row, int col) { return static_cast<std::size_t>(Cell{row, col}.index()); }

std::set<std::pair<int, int>> as_set(const std::array<Cell, kGlyphPixels>& cells) {
  std::set<std::pair<int, int>> s;
  for (const Cell c : cells) s.insert({c.row, c.col});
  return s;
}

TEST(GlyphMask, PlusIsMiddleRowAndColumn) {
  const std::set<std::pair<int, int>> expected{{0, 2}, {1, 2}, {2, 0}, {2, 1}, {2, 2},
                                               {2, 3}, {2, 4}, {3, 2}, {4, 2}};
  EXPECT_EQ(as_set(glyph_mask(Glyph::Plus)), expected);
}

TEST(GlyphMask, CrossIsBothDiagonals) {
  const std::set<std::pair<int, int>> expected{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4},
                                               {0, 4}, {1, 3}, {3, 1}, {4, 0}};
  EXPECT_EQ(as_set(glyph_mask(Glyph::Cross)), expected);
}

TEST(GlyphMask, NineDistinctCellsAndKindsDiffer) {
  for (const Glyph g : {Glyph::Plus, Glyph::Cross}) EXPECT_EQ(as_set(glyph_mask(g)).size(), 9u);
  EXPECT_NE(as_set(glyph_mask(Glyph::Plus)), as_set(glyph_mask(Glyph::Cross)));
}

TEST(PlaceSymbols, InBoundsDisjointAndOrdered) {
  const std::array<Glyph, 3> glyphs{Glyph::Plus, Glyph::Cross, Glyph::Cross};
  for (std::uint64_t s = 0; s < 2000; ++s) {
    RngStream rng(77, s);
    const auto placed = place_symbols(glyphs, rng);
    ASSERT_EQ(placed.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(placed[i].glyph, glyphs[i]);
      EXPECT_GE(placed[i].anchor.row, 0);
      EXPECT_LE(placed[i].anchor.row, kMaxAnchor);
      EXPECT_GE(placed[i].anchor.col, 0);
      EXPECT_LE(placed[i].anchor.col, kMaxAnchor);
      for (std::size_t j = i + 1; j < 3; ++j) {
        EXPECT_FALSE(boxes_overlap(placed[i].anchor, placed[j].anchor));
      }
    }
  }
}

TEST(PlaceSymbols, ExhaustionIsReported) {
  // 37 boxes of 5x5 cannot fit in 30x30 without overlap.
  const std::vector<Glyph> glyphs(37, Glyph::Plus);
  RngStream rng(1, 1);
  EXPECT_THROW(place_symbols(glyphs, rng, 50), PlacementExhausted);
}

TEST(PlaceSymbols, SingleAnchorIsUniform) {
  constexpr int kDraws = 1'000'000;
  constexpr int kAnchors = (kMaxAnchor + 1) * (kMaxAnchor + 1);
  std::vector<int> counts(kAnchors, 0);
  const std::array<Glyph, 1> one{Glyph::Cross};
  RngStream rng(2024, 0);
  for (int i = 0; i < kDraws; ++i) {
    const auto p = place_symbols(one, rng);
    ++counts[static_cast<std::size_t>(p[0].anchor.row * (kMaxAnchor + 1) + p[0].anchor.col)];
  }
  const double prob = 1.0 / kAnchors;
  const double sd = std::sqrt(kDraws * prob * (1 - prob));
  for (const int c : counts) EXPECT_NEAR(c, kDraws * prob, 5 * sd);
}

TEST(PatternPmf, NormalizedPositiveAndShaped) {
  for (const auto d : {PatternDistribution::Uniform, PatternDistribution::Centered,
                       PatternDistribution::Cornered}) {
    const auto pmf = pattern_pmf(d);
    ASSERT_EQ(pmf.size(), static_cast<std::size_t>(kImageCells));
    EXPECT_NEAR(std::accumulate(pmf.begin(), pmf.end(), 0.0), 1.0, 1e-12);
    for (const double p : pmf) EXPECT_GT(p, 0.0);
  }
  const auto uniform = pattern_pmf(PatternDistribution::Uniform);
  for (const double p : uniform) EXPECT_DOUBLE_EQ(p, 1.0 / 900.0);

  const auto centered = pattern_pmf(PatternDistribution::Centered);
  EXPECT_GT(centered[cell_index(14, 14)], centered[cell_index(0, 0)]);
  // Symmetric about (14.5, 14.5).
  EXPECT_DOUBLE_EQ(centered[cell_index(14, 14)], centered[cell_index(15, 15)]);

  const auto cornered = pattern_pmf(PatternDistribution::Cornered);
  EXPECT_GT(cornered[cell_index(0, 0)], cornered[cell_index(29, 29)]);
  EXPECT_GT(cornered[cell_index(0, 0)], cornered[cell_index(0, 1)]);
}

TEST(SamplePattern, DistinctCellsOfRequestedCount) {
  for (const auto d : {PatternDistribution::Uniform, PatternDistribution::Centered,
                       PatternDistribution::Cornered}) {
    for (std::uint64_t s = 0; s < 200; ++s) {
      RngStream rng(3, s);
      const auto cells = sample_pattern(d, kPatternPixels, rng);
      ASSERT_EQ(cells.size(), 27u);
      std::set<int> idx;
      for (const Cell c : cells) {
        ASSERT_TRUE(c.in_bounds());
        idx.insert(c.index());
      }
      EXPECT_EQ(idx.size(), 27u);
    }
  }
}

TEST(SamplePattern, ExhaustionCoversEveryCell) {
  RngStream rng(4, 4);
  const auto cells = sample_pattern(PatternDistribution::Uniform, kImageCells, rng);
  std::set<int> idx;
  for (const Cell c : cells) idx.insert(c.index());
  EXPECT_EQ(idx.size(), 900u);
}

TEST(SamplePattern, RejectsBadCounts) {
  RngStream rng(4, 4);
  EXPECT_THROW(sample_pattern(PatternDistribution::Uniform, 0, rng), std::invalid_argument);
  EXPECT_THROW(sample_pattern(PatternDistribution::Uniform, 901, rng), std::invalid_argument);
}

double mean_chebyshev_to_center(PatternDistribution d, int samples) {
  const auto pmf = pattern_pmf(d);
  double total = 0.0;
  long count = 0;
  for (int s = 0; s < samples; ++s) {
    RngStream rng(99, static_cast<std::uint64_t>(s));
    for (const Cell c : sample_pattern(pmf, kPatternPixels, rng)) {
      total += std::max(std::abs(c.row - 14.5), std::abs(c.col - 14.5));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

TEST(SamplePattern, CenteredDrawsClusterNearTheCenter) {
  constexpr int kSamples = 100'000;
  EXPECT_LT(mean_chebyshev_to_center(PatternDistribution::Centered, kSamples),
            mean_chebyshev_to_center(PatternDistribution::Uniform, kSamples));
}

// Oracle: exact probability of each ordered triple under sequential
// renormalized draws, enumerated over a 4x4 grid.
TEST(SampleWithoutReplacement, MatchesExhaustiveEnumerationOn4x4Grid) {
  const auto cmp = testing::compare_with_enumeration(testing::reduced_grid_pmf(), 1'000'000, 31337);
  EXPECT_NEAR(cmp.total_mass, 1.0, 1e-12);
  EXPECT_EQ(cmp.outcomes, 16u * 15u * 14u);
  EXPECT_EQ(cmp.unexpected, 0u);
  EXPECT_LT(cmp.max_abs_z, 5.0);
}

TEST(Render, EmptyCompositionIsBlank) {
  EXPECT_EQ(render({}, {}).popcount(), 0);
}

TEST(Render, ThreeSymbolsGive27Pixels) {
  const std::array<Glyph, 3> glyphs{Glyph::Plus, Glyph::Plus, Glyph::Cross};
  for (std::uint64_t s = 0; s < 500; ++s) {
    RngStream rng(8, s);
    EXPECT_EQ(render(place_symbols(glyphs, rng), {}).popcount(), 27);
  }
}

TEST(Render, CombinedPopcountWithinInclusionExclusionBounds) {
  const std::array<Glyph, 3> glyphs{Glyph::Plus, Glyph::Cross, Glyph::Cross};
  for (std::uint64_t s = 0; s < 500; ++s) {
    RngStream rng(10, s);
    const auto placed = place_symbols(glyphs, rng);
    const auto pattern = sample_pattern(PatternDistribution::Centered, kPatternPixels, rng);
    const Bitmap b = render(placed, pattern);
    EXPECT_GE(b.popcount(), 27);
    EXPECT_LE(b.popcount(), 54);
    // OR composition: every pattern cell and every glyph cell is set.
    for (const Cell c : pattern) EXPECT_TRUE(b.test(c));
    EXPECT_EQ(render({}, pattern).popcount(), 27);
  }
}

TEST(Render, RejectsOutOfBoundsInput) {
  const std::array<SymbolPlacement, 1> bad{SymbolPlacement{Glyph::Plus, {26, 0}}};
  EXPECT_THROW(render(bad, {}), std::invalid_argument);
  const std::array<Cell, 1> cell{Cell{30, 0}};
  EXPECT_THROW(render({}, cell), std::invalid_argument);
}

TEST(Render, DeterministicGivenStream) {
  const std::array<Glyph, 3> glyphs{Glyph::Plus, Glyph::Plus, Glyph::Plus};
  auto draw = [&](std::uint64_t stream) {
    RngStream rng(123, stream);
    const auto placed = place_symbols(glyphs, rng);
    return render(placed, sample_pattern(PatternDistribution::Cornered, 27, rng));
  };
  EXPECT_EQ(draw(5), draw(5));
  EXPECT_NE(draw(5), draw(6));
}

TEST(Bitmap, PackUnpackRoundTrip) {
  RngStream rng(1, 0);
  for (int t = 0; t < 50; ++t) {
    Bitmap b;
    for (int k = 0; k < 100; ++k) b.set(static_cast<int>(rng.below(kImageCells)));
    const auto packed = b.pack();
    EXPECT_EQ(Bitmap::unpack(packed), b);
    EXPECT_EQ(packed.back() & 0x0f, 0);
  }
  Bitmap corner;
  corner.set(0);
  EXPECT_EQ(corner.pack()[0], 0x80);
  Bitmap::Packed dirty{};
  dirty.back() = 0x01;
  EXPECT_ANY_THROW(Bitmap::unpack(dirty));
}

}  // namespace
}  // namespace cuebias
