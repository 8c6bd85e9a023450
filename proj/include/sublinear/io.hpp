#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sublinear/chunking.hpp"
#include "sublinear/core.hpp"
#include "sublinear/encoder.hpp"

namespace sublinear {

// Feature files.
//
// Binary layout, little-endian:
//   "FMAT" | u16 version = 1 | u8 width (4 or 8) | u64 N | u64 d |
//   N*d row-major reals of `width` bytes |
//   optional: "NORM" | f64 mean[d] | f64 scale[d]
enum class FeatureFormat { Binary, Csv };

inline constexpr std::uint16_t kFeatureFormatVersion = 1;
inline constexpr std::uint16_t kModelFormatVersion = 1;

// Csv for a ".csv" extension, Binary otherwise.
FeatureFormat format_for_path(const std::filesystem::path& path);

FeatureMatrix load_features(const std::filesystem::path& path, std::optional<FeatureFormat> format = std::nullopt);
void save_features(const FeatureMatrix& matrix, const std::filesystem::path& path,
                   std::optional<FeatureFormat> format = std::nullopt, int width = 8);

std::vector<std::uint8_t> encode_features(const FeatureMatrix& matrix, int width = 8);
FeatureMatrix decode_features(std::span<const std::uint8_t> bytes);

// One scene per line, comma-separated, '.' decimal. Blank lines are skipped.
// Throws NonFinite or RaggedRows naming the 1-based row and column.
RowMatrixXd parse_csv(std::string_view text);
// Shortest round-trip decimal form of every value.
std::string format_csv(const Eigen::Ref<const RowMatrixXd>& values);

// Model files.
//
//   "SLVP" | u16 version | u8 kind (0 plain, 1 chunked) | u8 real width
//
// plain header:
//   u64 N | u64 d | u64 d' | u32 k | u32 tau[k] | f64 rho | f64 gamma |
//   f64 C | u64 seed | u8 has_norm
// chunked header:
//   u64 N | u64 d | u32 chunks | u64 boundary[chunks + 1] | u64 d~ |
//   f64 rho_chunk | f64 gamma | f64 C | u64 seed | u8 has_norm |
//   per chunk: u64 N_c | u64 d' | u32 k | u32 tau[k] | f64 rho
// then, if has_norm: f64 mean[d] | f64 scale[d]
//
// Payload (reals of `real width` bytes):
//   plain:   per pattern: mask bits[ceil(d/8)] | tau rows of (d' weights, bias)
//   chunked: classifier mask bits[ceil(d/8)] | chunks rows of (d~ weights, bias) |
//            each chunk's plain payload in order
//
// The payload length equals storage_formula_bytes / chunk_storage_bytes;
// normalization statistics and headers are not part of it.
using Model = std::variant<EncodedDatabase, ChunkedModel>;

struct ModelLayout {
  std::int64_t header_bytes = 0;
  std::int64_t normalization_bytes = 0;
  std::int64_t payload_bytes = 0;
  std::int64_t total_bytes() const { return header_bytes + normalization_bytes + payload_bytes; }
};

struct LoadedModel {
  Model model;
  ModelLayout layout;
};

// Throws CorruptPayload if the payload length disagrees with the storage formula.
std::vector<std::uint8_t> serialize_model(const Model& model, ModelLayout* layout = nullptr);
LoadedModel deserialize_model(std::span<const std::uint8_t> bytes);

ModelLayout save_model(const Model& model, const std::filesystem::path& path);
LoadedModel load_model(const std::filesystem::path& path);

// Formula payload bytes of either model kind.
std::int64_t model_storage_bytes(const Model& model);

// Decoded 1-based index for a raw (unnormalized) query, using the model's
// own statistics.
std::optional<SceneIndex> query_model(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& raw);
std::vector<std::optional<SceneIndex>> query_model_batch(const Model& model, const Eigen::Ref<const RowMatrixXd>& raw);
int model_dimension(const Model& model);

// Whole-file helpers. Writes go to a sibling temporary that is renamed into
// place. Throws IoError.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace sublinear
