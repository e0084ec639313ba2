#pragma once

#include <vector>

#include "fjup/chunk_cdf.hpp"
#include "fjup/service_model.hpp"

namespace fjup {

using CdfVector = std::vector<ChunkCdf>;

// D_j = sum over all size-j subsets S of the integral of the product of the
// survival functions of the members of S.  Subsets of Erlang entries are
// summed in closed form; anything else goes through the shared grid.
double d_operator(const CdfVector& f, int j, const GridSpec& grid = {});

// Expected r-th smallest completion time (r = N is the full join):
//   mu_r = sum_{j=N-r+1}^{N} (-1)^{j-N+r+1} C(j-1, N-r) D_j
double mu_operator(const CdfVector& f, int r, const GridSpec& grid = {});

// Expected time until every non-empty chunk completes.  Zero-chunk paths
// (DegenerateZero entries) are dropped; an all-empty vector uploads in 0.
double mean_upload_latency(const CdfVector& f, const GridSpec& grid = {});

// Same, building the chunk CDFs from an allocation over per-path service
// models.  Paths with zero packets contribute nothing; K = 0 returns 0.
double mean_upload_latency(const std::vector<int>& alloc,
                           const std::vector<ServiceModel>& models, const GridSpec& grid = {});

}  // namespace fjup
