#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <utility>

#include "cuebias/bitmap.hpp"
#include "cuebias/cue_render.hpp"

namespace cuebias::testing {

// Counts 5x5 windows whose set cells are exactly a glyph mask. Only
// meaningful for symbol-only images with disjoint boxes.
inline std::pair<int, int> count_glyphs(const Bitmap& b) {
  int plus = 0;
  int cross = 0;
  for (int r = 0; r <= kMaxAnchor; ++r) {
    for (int c = 0; c <= kMaxAnchor; ++c) {
      int set = 0;
      for (int dr = 0; dr < kGlyphBox; ++dr) {
        for (int dc = 0; dc < kGlyphBox; ++dc) set += b.test(Cell{r + dr, c + dc});
      }
      if (set != kGlyphPixels) continue;
      for (const Glyph g : {Glyph::Plus, Glyph::Cross}) {
        bool all = true;
        for (const Cell o : glyph_mask(g)) all = all && b.test(Cell{r + o.row, c + o.col});
        if (all) ++(g == Glyph::Plus ? plus : cross);
      }
    }
  }
  return {plus, cross};
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cuebias_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace cuebias::testing
