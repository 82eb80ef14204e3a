#pragma once

#include <utility>
#include <vector>

#include "mhmm/errors.hpp"

namespace mhmm::mrf {

/// Square-grid graph with 4-neighborhood adjacency and no wraparound;
/// sites are numbered row-major, z = row * width + col.
class GridGraph {
 public:
  GridGraph(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw DomainError("grid dimensions must be >= 1");
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const int z = r * width + c;
        if (c + 1 < width) edges_.emplace_back(z, z + 1);
        if (r + 1 < height) edges_.emplace_back(z, z + width);
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int n_sites() const { return width_ * height_; }

  /// Undirected edges, each unordered pair once (z < w).
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  std::vector<int> neighbors(int z) const {
    std::vector<int> out;
    const int r = z / width_, c = z % width_;
    if (c > 0) out.push_back(z - 1);
    if (c + 1 < width_) out.push_back(z + 1);
    if (r > 0) out.push_back(z - width_);
    if (r + 1 < height_) out.push_back(z + width_);
    return out;
  }

 private:
  int width_, height_;
  std::vector<std::pair<int, int>> edges_;
};

}  // namespace mhmm::mrf
