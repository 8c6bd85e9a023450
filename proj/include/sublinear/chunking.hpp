#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sublinear/encoder.hpp"

namespace sublinear {

struct ChunkParams {
  int chunks = 1;
  EncoderParams encoder;
  // Mask fraction for the chunk classifier; negative means encoder.rho.
  double rho_chunk = -1.0;
};

struct ChunkedModel {
  // boundaries[c] is the first global scene of chunk c (1-based);
  // boundaries[C] = N + 1.
  std::vector<SceneIndex> boundaries;
  FeatureMask classifier_mask;
  LinearModel chunk_classifier;
  std::vector<EncodedDatabase> chunks;
  int d = 0;
  double rho_chunk = 0.5;
  double gamma = 10.0;
  double reg_strength = 1.0;
  std::uint64_t seed = 42;
  int real_width = 8;
  std::optional<Normalization> normalization;

  int n_chunks() const { return static_cast<int>(chunks.size()); }
  int d_tilde() const { return classifier_mask.size(); }
  SceneIndex n_scenes() const { return boundaries.empty() ? 0 : boundaries.back() - 1; }
  SceneIndex offset(int chunk) const { return boundaries[static_cast<std::size_t>(chunk)] - 1; }

  bool operator==(const ChunkedModel&) const = default;
};

// C + 1 boundaries splitting 1..N into contiguous chunks of floor(N/C) or
// ceil(N/C) scenes, larger chunks first.
std::vector<SceneIndex> chunk_boundaries(SceneIndex n_scenes, int chunks);

// Default chunk count ceil(N / 10000).
int default_chunk_count(SceneIndex n_scenes);

// Chunk classifier over all rows (label = chunk index) with its own learned
// mask, plus one encoder stack per chunk trained concurrently. Throws
// ChunkTooSmall when a chunk cannot hold its cycle plan.
ChunkedModel train_chunked(const FeatureMatrix& features, const ChunkParams& params);

// 1-based chunk the classifier routes x to.
int route_chunk(const ChunkedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// offsets[c] + chunks[c].query(x) for the routed chunk c; nullopt on NoMatch.
std::optional<SceneIndex> query_chunked(const ChunkedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

std::vector<std::optional<SceneIndex>> query_chunked_batch(const ChunkedModel& model,
                                                           const Eigen::Ref<const RowMatrixXd>& rows);

// Chunk encoders plus width * C * (d~ + 1) + ceil(d / 8) for the classifier.
std::int64_t chunk_classifier_bytes(int chunks, int d, int d_tilde, int real_width = 8);
std::int64_t chunk_storage_bytes(const ChunkedModel& model);
std::int64_t measured_storage_bytes(const ChunkedModel& model);

}  // namespace sublinear
