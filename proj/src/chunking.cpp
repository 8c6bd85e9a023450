#include "sublinear/chunking.hpp"

#include <string>

#include "sublinear/parallel.hpp"
#include "sublinear/random.hpp"

namespace sublinear {

namespace {
constexpr std::uint64_t kChunkClassifierStream = 0xC0FFEE;
}

std::vector<SceneIndex> chunk_boundaries(SceneIndex n_scenes, int chunks) {
  if (chunks < 1) throw Error(Errc::InvalidArgument, "chunk count must be >= 1");
  if (n_scenes < chunks) {
    throw Error(Errc::ChunkTooSmall, "N=" + std::to_string(n_scenes) + " < C=" + std::to_string(chunks));
  }
  std::vector<SceneIndex> bounds(static_cast<std::size_t>(chunks) + 1);
  const SceneIndex base = n_scenes / chunks;
  const SceneIndex extra = n_scenes % chunks;
  bounds[0] = 1;
  for (int c = 0; c < chunks; ++c) {
    bounds[static_cast<std::size_t>(c) + 1] = bounds[static_cast<std::size_t>(c)] + base + (c < extra ? 1 : 0);
  }
  return bounds;
}

int default_chunk_count(SceneIndex n_scenes) {
  return static_cast<int>(std::max<SceneIndex>(1, (n_scenes + 9999) / 10000));
}

ChunkedModel train_chunked(const FeatureMatrix& features, const ChunkParams& params) {
  if (!features.normalization) {
    throw Error(Errc::NotNormalized, "feature matrix has no normalization metadata");
  }
  const auto n = static_cast<SceneIndex>(features.rows());
  const int d = static_cast<int>(features.cols());
  const int chunks = params.chunks;
  ChunkedModel model;
  model.boundaries = chunk_boundaries(n, chunks);
  model.d = d;
  model.rho_chunk = params.rho_chunk > 0.0 ? params.rho_chunk : params.encoder.rho;
  model.gamma = params.encoder.gamma;
  model.reg_strength = params.encoder.reg_strength;
  model.seed = params.encoder.seed;
  model.real_width = params.encoder.real_width;
  model.normalization = features.normalization;

  for (int c = 0; c < chunks; ++c) {
    const SceneIndex size = model.boundaries[static_cast<std::size_t>(c) + 1] - model.boundaries[static_cast<std::size_t>(c)];
    try {
      if (params.encoder.taus.empty()) {
        if (size > 1) plan_cycles(size, params.encoder.k);
      } else {
        CycleConfig(params.encoder.taus, size);
      }
    } catch (const Error& e) {
      throw Error(Errc::ChunkTooSmall, "chunk " + std::to_string(c + 1) + " (" + std::to_string(size) +
                                           " scenes): " + e.what());
    }
  }

  std::vector<int> chunk_labels(static_cast<std::size_t>(n));
  for (int c = 0; c < chunks; ++c) {
    for (SceneIndex i = model.boundaries[static_cast<std::size_t>(c)]; i < model.boundaries[static_cast<std::size_t>(c) + 1]; ++i) {
      chunk_labels[static_cast<std::size_t>(i - 1)] = c + 1;
    }
  }
  const PatternSelection routing = learn_pattern_mask(features.values, chunk_labels, chunks, params.encoder.gamma,
                                                      masked_width(d, model.rho_chunk));
  model.classifier_mask = routing.mask;
  TrainOptions options;
  options.reg_strength = params.encoder.reg_strength;
  options.seed = Rng::substream(params.encoder.seed, kChunkClassifierStream).next();
  options.tolerance = params.encoder.tolerance;
  options.max_epochs = params.encoder.max_epochs;
  options.jobs = params.encoder.jobs;
  model.chunk_classifier = train_classifier(routing.mask.apply_rows(features.values), chunk_labels, chunks, options);
  if (model.real_width == 4) quantize_to_float(model.chunk_classifier);

  model.chunks.resize(static_cast<std::size_t>(chunks));
  EncoderParams chunk_params = params.encoder;
  chunk_params.jobs = inner_jobs(params.encoder.jobs, static_cast<std::size_t>(chunks));
  parallel_for(static_cast<std::size_t>(chunks), params.encoder.jobs, [&](std::size_t c) {
    const SceneIndex first = model.boundaries[c];
    const SceneIndex size = model.boundaries[c + 1] - first;
    try {
      model.chunks[c] = train_database_rows(features.values.middleRows(first - 1, size), chunk_params);
    } catch (const Error& e) {
      throw Error(e.code(), "chunk " + std::to_string(c + 1) + ": " + e.what());
    }
  });
  return model;
}

int route_chunk(const ChunkedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.d) {
    throw Error(Errc::DimensionMismatch, "query has " + std::to_string(x.size()) +
                                             " values, model expects " + std::to_string(model.d));
  }
  return predict(model.chunk_classifier, model.classifier_mask.apply(x));
}

std::optional<SceneIndex> query_chunked(const ChunkedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const int chunk = route_chunk(model, x);
  const auto local = query(model.chunks[static_cast<std::size_t>(chunk - 1)], x);
  if (!local) return std::nullopt;
  return model.offset(chunk - 1) + *local;
}

std::vector<std::optional<SceneIndex>> query_chunked_batch(const ChunkedModel& model,
                                                           const Eigen::Ref<const RowMatrixXd>& rows) {
  if (rows.cols() != model.d) {
    throw Error(Errc::DimensionMismatch, "queries have " + std::to_string(rows.cols()) +
                                             " columns, model expects " + std::to_string(model.d));
  }
  const auto routes = predict_batch(model.chunk_classifier, model.classifier_mask.apply_rows(rows));
  std::vector<std::optional<SceneIndex>> out(routes.size());
  for (int c = 1; c <= model.n_chunks(); ++c) {
    std::vector<Eigen::Index> members;
    for (std::size_t r = 0; r < routes.size(); ++r) {
      if (routes[r] == c) members.push_back(static_cast<Eigen::Index>(r));
    }
    if (members.empty()) continue;
    const RowMatrixXd block = rows(members, Eigen::all);
    const auto local = query_batch(model.chunks[static_cast<std::size_t>(c - 1)], block);
    for (std::size_t t = 0; t < members.size(); ++t) {
      if (local[t]) out[static_cast<std::size_t>(members[t])] = model.offset(c - 1) + *local[t];
    }
  }
  return out;
}

std::int64_t chunk_classifier_bytes(int chunks, int d, int d_tilde, int real_width) {
  return static_cast<std::int64_t>(real_width) * chunks * (d_tilde + 1) +
         static_cast<std::int64_t>(FeatureMask::packed_size(d));
}

std::int64_t chunk_storage_bytes(const ChunkedModel& model) {
  std::int64_t bytes = chunk_classifier_bytes(model.n_chunks(), model.d, model.d_tilde(), model.real_width);
  for (const auto& chunk : model.chunks) bytes += storage_formula_bytes(chunk);
  return bytes;
}

std::int64_t measured_storage_bytes(const ChunkedModel& model) {
  std::int64_t bytes = static_cast<std::int64_t>(model.classifier_mask.packed_bits().size()) +
                       model.real_width * (model.chunk_classifier.hyperplanes.size() +
                                           model.chunk_classifier.biases.size());
  for (const auto& chunk : model.chunks) bytes += measured_storage_bytes(chunk);
  return bytes;
}

}  // namespace sublinear
