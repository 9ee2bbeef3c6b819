#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l2g/graph_core.hpp"

namespace l2g {

/// One (distances, groundtruth graph) pair.
struct GraphSample {
  EdgeVector w;
  DistanceVector y;
  std::string family;
  std::uint64_t seed = 0;
  int n_signals = 0;
  double sigma = 0.0;
  /// Node -> block label for community-structured families, empty otherwise.
  std::vector<int> blocks;

  int num_nodes() const { return w.num_nodes(); }
};

}  // namespace l2g
