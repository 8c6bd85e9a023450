#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <set>

#include "doctest.h"
#include "sublinear/io.hpp"
#include "test_support.hpp"

using namespace sublinear;
using testing_support::planted;
using testing_support::random_matrix;
using testing_support::TempDir;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoError;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

// Little-endian u64 at byte offset `at`.
std::uint64_t u64_at(const std::vector<std::uint8_t>& bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
  return v;
}

EncodedDatabase small_database(std::uint64_t seed, int width = 8) {
  const CycleConfig config({3, 3}, 8);
  const auto data = planted(config, 20, 0.5, seed);
  EncoderParams p;
  p.taus = config.taus();
  p.real_width = width;
  p.seed = seed;
  return train_database(data.normalized, p);
}

}  // namespace

TEST_CASE("feature file layout") {
  FeatureMatrix m;
  m.values.resize(2, 3);
  m.values << 1, 2, 3, 4, 5, 6.5;
  const auto bytes = encode_features(m);
  REQUIRE(bytes.size() == 4 + 2 + 1 + 8 + 8 + 6 * 8);
  CHECK(std::memcmp(bytes.data(), "FMAT", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 8);
  CHECK(u64_at(bytes, 7) == 2);
  CHECK(u64_at(bytes, 15) == 3);
  CHECK(u64_at(bytes, 23) == std::bit_cast<std::uint64_t>(1.0));
  CHECK(u64_at(bytes, 23 + 5 * 8) == std::bit_cast<std::uint64_t>(6.5));
  CHECK(encode_features(m, 4).size() == 23 + 6 * 4);
}

TEST_CASE("binary feature round trip is bit exact") {
  Rng rng(1);
  TempDir dir;
  FeatureMatrix m;
  m.values = random_matrix(rng, 17, 9) * 1e3;
  m.values(0, 0) = std::numeric_limits<double>::denorm_min();
  m.values(1, 1) = -0.0;
  save_features(m, dir / "m.fmat");
  const auto back = load_features(dir / "m.fmat");
  CHECK(std::memcmp(back.values.data(), m.values.data(), sizeof(double) * 17 * 9) == 0);
  CHECK_FALSE(back.normalization);

  const auto normalized = normalize(m);
  save_features(normalized, dir / "n.fmat");
  const auto n = load_features(dir / "n.fmat");
  CHECK(n.values == normalized.values);
  CHECK(n.normalization == normalized.normalization);

  save_features(m, dir / "f.fmat", FeatureFormat::Binary, 4);
  const auto f = load_features(dir / "f.fmat");
  CHECK(f.values == m.values.cast<float>().cast<double>());
}

TEST_CASE("csv parsing") {
  const auto m = parse_csv("1,2\n3.5,-4e2\n\n0.125,6\n");
  REQUIRE(m.rows() == 3);
  REQUIRE(m.cols() == 2);
  CHECK(m(1, 0) == 3.5);
  CHECK(m(1, 1) == -400.0);
  CHECK(m(2, 0) == 0.125);
  CHECK(parse_csv("1,2\r\n3,4\r\n")(1, 1) == 4.0);

  CHECK(code_of([] { parse_csv("1,2\n3,nan\n"); }) == Errc::NonFinite);
  CHECK(message_of([] { parse_csv("1,2\n3,nan\n"); }).find("row 2, column 2") != std::string::npos);
  CHECK(code_of([] { parse_csv("1,inf\n"); }) == Errc::NonFinite);
  CHECK(code_of([] { parse_csv("1,2\n3\n"); }) == Errc::RaggedRows);
  CHECK(code_of([] { parse_csv("1,x\n"); }) == Errc::InvalidArgument);
}

TEST_CASE("csv round trip is value exact") {
  Rng rng(2);
  TempDir dir;
  FeatureMatrix m;
  m.values = random_matrix(rng, 11, 5) * 1e-3;
  m.values(3, 2) = 1e300;
  save_features(m, dir / "m.csv");
  CHECK(format_for_path(dir / "m.csv") == FeatureFormat::Csv);
  CHECK(format_for_path(dir / "m.fmat") == FeatureFormat::Binary);
  CHECK(load_features(dir / "m.csv").values == m.values);
  CHECK(parse_csv(format_csv(m.values)) == m.values);
}

TEST_CASE("feature file errors") {
  FeatureMatrix m;
  m.values = RowMatrixXd::Ones(3, 2);
  auto bytes = encode_features(m);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { decode_features(bad_magic); }) == Errc::BadMagic);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK(code_of([&] { decode_features(bad_version); }) == Errc::VersionMismatch);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK(code_of([&] { decode_features(truncated); }) == Errc::TruncatedFile);
  CHECK(code_of([&] { decode_features(std::span(bytes).first(10)); }) == Errc::TruncatedFile);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(code_of([&] { decode_features(trailing); }) == Errc::CorruptPayload);
  auto nan = bytes;
  const auto nan_bits = std::bit_cast<std::uint64_t>(std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < 8; ++i) nan[23 + 8 + i] = static_cast<std::uint8_t>(nan_bits >> (8 * i));
  CHECK(code_of([&] { decode_features(nan); }) == Errc::NonFinite);
  CHECK(code_of([] { load_features("/nonexistent/file.fmat"); }) == Errc::IoError);
}

TEST_CASE("normalization") {
  FeatureMatrix raw;
  raw.values.resize(4, 2);
  // Column 0: mean 5, sample variance ((-3)^2 + (-1)^2 + 1^2 + 3^2) / 3 = 20/3.
  raw.values << 2, 7, 4, 7, 6, 7, 8, 7;
  const auto n = normalize(raw);
  const double sd = std::sqrt(20.0 / 3.0);
  CHECK(n.normalization->mean(0) == 5.0);
  CHECK(n.normalization->scale(0) == doctest::Approx(sd));
  CHECK(n.values(0, 0) == doctest::Approx(-3.0 / sd));
  CHECK(n.values(3, 0) == doctest::Approx(3.0 / sd));
  // Constant column: mean recorded, scale 1.
  CHECK(n.normalization->mean(1) == 7.0);
  CHECK(n.normalization->scale(1) == 1.0);

  Rng rng(3);
  FeatureMatrix r;
  r.values = random_matrix(rng, 50, 8) * 7.0;
  r.values.col(2).setConstant(-1.5);
  const auto once = normalize(r);
  const auto twice = normalize(FeatureMatrix{once.values, std::nullopt});
  CHECK((twice.values - once.values).cwiseAbs().maxCoeff() <= 1e-12);

  r.values(4, 5) = std::numeric_limits<double>::infinity();
  CHECK(message_of([&] { normalize(r); }).find("row 5, column 6") != std::string::npos);
}

TEST_CASE("synthetic generator") {
  const CycleConfig config({3, 4}, 12);
  SyntheticSpec spec{config, 30, {}, 10.0, 0.0, 5, std::nullopt};
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.features.values == b.features.values);
  CHECK_FALSE(a.features.normalization);
  CHECK(a.labels == assign_labels(config));
  const auto blocks = default_blocks(30, 2);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].width() == 6);
  CHECK(blocks[1].begin == 6);
  CHECK(a.truth_masks[1].selected().front() == 6);

  // Noise-free scenes: equal labels give equal blocks, different labels
  // differ by at least the separation.
  for (int p = 0; p < 12; ++p) {
    for (int q = p + 1; q < 12; ++q) {
      for (int j = 0; j < 2; ++j) {
        const auto& blk = blocks[static_cast<std::size_t>(j)];
        const double dist = (a.features.values.row(p).segment(blk.begin, blk.width()) -
                             a.features.values.row(q).segment(blk.begin, blk.width()))
                                .norm();
        if (a.labels(p, j) == a.labels(q, j)) {
          REQUIRE(dist == 0.0);
        } else {
          REQUIRE(dist >= 10.0 - 1e-9);
        }
      }
    }
  }
  // Columns outside the blocks are zero without noise.
  CHECK(a.features.values.rightCols(18).isZero(0.0));

  SyntheticSpec noisy = spec;
  noisy.noise_sigma = 1.0;
  noisy.noise_seed = 77;
  const auto c = generate_synthetic(noisy);
  noisy.noise_seed = 78;
  const auto e = generate_synthetic(noisy);
  // A second noise draw observes the same templates.
  const double gap = (c.features.values - e.features.values).leftCols(12).cwiseAbs().mean();
  CHECK(gap < 2.0);
  CHECK(c.features.values != e.features.values);

  SyntheticSpec overlap = spec;
  overlap.blocks = {{0, 10}, {5, 15}};
  CHECK(code_of([&] { generate_synthetic(overlap); }) == Errc::BlockOverflow);
  overlap.blocks = {{0, 10}, {25, 31}};
  CHECK(code_of([&] { generate_synthetic(overlap); }) == Errc::BlockOverflow);
}

TEST_CASE("planted pattern lists") {
  const std::vector<SceneIndex> grid{100, 1000};
  const std::vector<int> ks{2, 3};
  const auto patterns = planted_grid_patterns(grid, ks, 4, 10);
  // One contiguous block per distinct (stride, tau).
  std::set<std::pair<SceneIndex, int>> keys;
  int next_column = 10;
  for (const auto& p : patterns) {
    CHECK(keys.insert({p.stride, p.tau}).second);
    CHECK(p.block.begin == next_column);
    CHECK(p.block.width() == 4);
    next_column = p.block.end;
  }
  for (SceneIndex n : grid) {
    for (int k : ks) {
      const auto config = plan_cycles(n, k);
      for (int j = 0; j < k; ++j) CHECK(keys.count({config.strides()[static_cast<std::size_t>(j)], config.tau(j)}) == 1);
    }
  }
  const std::vector<std::vector<int>> sets{{3, 4}, {4, 5, 7}};
  const auto seq = planted_sequential_patterns(sets, 2);
  CHECK(seq.size() == 4);
  for (const auto& p : seq) CHECK(p.stride == 1);
}

TEST_CASE("model round trip") {
  TempDir dir;
  for (int width : {8, 4}) {
    const auto db = small_database(9, width);
    const auto layout = save_model(db, dir / "m.slvp");
    CHECK(layout.payload_bytes == storage_formula_bytes(db));
    CHECK(layout.total_bytes() == static_cast<std::int64_t>(std::filesystem::file_size(dir / "m.slvp")));
    CHECK(layout.normalization_bytes == 16 * 20);
    const auto loaded = load_model(dir / "m.slvp");
    REQUIRE(std::holds_alternative<EncodedDatabase>(loaded.model));
    CHECK(std::get<EncodedDatabase>(loaded.model) == db);
    CHECK(loaded.layout.payload_bytes == layout.payload_bytes);
    CHECK(serialize_model(loaded.model) == read_file(dir / "m.slvp"));
  }
  CHECK_FALSE(std::filesystem::exists(dir / "m.slvp.tmp"));
}

TEST_CASE("chunked model round trip") {
  const CycleConfig config({3, 3}, 9);
  FeatureMatrix raw;
  raw.values.resize(27, 30);
  for (int c = 0; c < 3; ++c) {
    const auto part = generate_synthetic({config, 30, {}, 10.0, 0.3, static_cast<std::uint64_t>(c), std::nullopt});
    raw.values.middleRows(9 * c, 9) = part.features.values;
  }
  const auto features = normalize(raw);
  ChunkParams p;
  p.chunks = 3;
  p.encoder.k = 2;
  p.rho_chunk = 0.3;
  const auto model = train_chunked(features, p);
  ModelLayout layout;
  const auto bytes = serialize_model(model, &layout);
  CHECK(layout.payload_bytes == chunk_storage_bytes(model));
  const auto loaded = deserialize_model(bytes);
  REQUIRE(std::holds_alternative<ChunkedModel>(loaded.model));
  CHECK(std::get<ChunkedModel>(loaded.model) == model);
  CHECK(query_model_batch(loaded.model, raw.values) == query_model_batch(Model(model), raw.values));
}

TEST_CASE("raw queries use the stored statistics") {
  const CycleConfig config({3, 3}, 9);
  const auto data = planted(config, 20, 0.0, 4);
  EncoderParams p;
  p.taus = config.taus();
  const Model model = train_database(data.normalized, p);
  const auto answers = query_model_batch(model, data.raw.features.values);
  for (SceneIndex i = 1; i <= 9; ++i) {
    CHECK(answers[static_cast<std::size_t>(i - 1)] == i);
    CHECK(query_model(model, data.raw.features.values.row(i - 1).transpose()) == i);
  }
  CHECK(model_storage_bytes(model) == storage_formula_bytes(std::get<EncodedDatabase>(model)));
  CHECK(model_dimension(model) == 20);
  CHECK(code_of([&] { query_model_batch(model, RowMatrixXd::Zero(1, 3)); }) == Errc::DimensionMismatch);
  CHECK(code_of([&] { query_model(model, Eigen::VectorXd::Zero(3)); }) == Errc::DimensionMismatch);
}

TEST_CASE("model file errors") {
  const auto bytes = serialize_model(small_database(3));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 5);
  CHECK(code_of([&] { deserialize_model(truncated); }) == Errc::CorruptPayload);
  CHECK(code_of([&] { deserialize_model(std::span(bytes).first(20)); }) == Errc::CorruptPayload);
  auto extended = bytes;
  extended.push_back(0);
  CHECK(code_of([&] { deserialize_model(extended); }) == Errc::CorruptPayload);
  auto bad_magic = bytes;
  bad_magic[3] = 'Q';
  CHECK(code_of([&] { deserialize_model(bad_magic); }) == Errc::BadMagic);
  auto bad_version = bytes;
  bad_version[4] = 9;
  CHECK(code_of([&] { deserialize_model(bad_version); }) == Errc::VersionMismatch);
  auto bad_kind = bytes;
  bad_kind[6] = 7;
  CHECK(code_of([&] { deserialize_model(bad_kind); }) == Errc::CorruptPayload);
  CHECK(code_of([] { load_model("/nonexistent/m.slvp"); }) == Errc::IoError);
  CHECK(is_io_error(Errc::CorruptPayload));
  CHECK_FALSE(is_io_error(Errc::InvalidConfig));
}

TEST_CASE("serialized payload equals the formula for random models") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(3));
    const SceneIndex n = (k == 1 ? 2 : 4 * k) + static_cast<SceneIndex>(rng.below(40));
    const CycleConfig config = plan_cycles(n, k);
    const int d = 5 + static_cast<int>(rng.below(30));
    const auto data = planted(config, d, 0.5, rng.next());
    EncoderParams p;
    p.k = k;
    p.rho = rng.uniform(0.05, 1.0);
    p.real_width = rng.below(2) ? 4 : 8;
    p.max_epochs = 30;
    const auto db = train_database(data.normalized, p);
    ModelLayout layout;
    serialize_model(db, &layout);
    CHECK(layout.payload_bytes == storage_formula_bytes(db));
  }
}
