#include "sublinear/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <system_error>

#include "sublinear/normalize.hpp"
#include "sublinear/random.hpp"

namespace sublinear {

namespace {

constexpr std::uint8_t kPlainKind = 0;
constexpr std::uint8_t kChunkedKind = 1;
constexpr std::uint64_t kChunkClassifierStream = 0xC0FFEE;

class Writer {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void tag(std::string_view t) { out_.insert(out_.end(), t.begin(), t.end()); }

  template <typename T>
  void uint(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void real(double v, int width) {
    if (width == 4) {
      uint(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      f64(v);
    }
  }

  std::size_t size() const { return out_.size(); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> data, Errc short_read) : data_(data), short_read_(short_read) {}

  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  bool tag(std::string_view t) {
    if (remaining() < t.size()) return false;
    if (std::memcmp(data_.data() + pos_, t.data(), t.size()) != 0) return false;
    pos_ += t.size();
    return true;
  }
  template <typename T>
  T uint() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return value;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  double real(int width) {
    if (width == 4) return static_cast<double>(std::bit_cast<float>(uint<std::uint32_t>()));
    return f64();
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw Error(short_read_, "file ends at byte " + std::to_string(data_.size()) + ", need " +
                                   std::to_string(pos_ + n));
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  Errc short_read_;
};

void write_normalization(Writer& w, const Normalization& stats) {
  for (Eigen::Index c = 0; c < stats.mean.size(); ++c) w.f64(stats.mean(c));
  for (Eigen::Index c = 0; c < stats.scale.size(); ++c) w.f64(stats.scale(c));
}

Normalization read_normalization(Reader& r, int d) {
  Normalization stats;
  stats.mean.resize(d);
  stats.scale.resize(d);
  for (int c = 0; c < d; ++c) stats.mean(c) = r.f64();
  for (int c = 0; c < d; ++c) stats.scale(c) = r.f64();
  return stats;
}

// ---- features ---------------------------------------------------------------

void check_width(int width) {
  if (width != 4 && width != 8) throw Error(Errc::InvalidArgument, "element width must be 4 or 8");
}

// ---- models -----------------------------------------------------------------

void write_plain_header(Writer& w, const EncodedDatabase& db) {
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(db.k()));
  for (int t : db.config.taus()) w.uint<std::uint32_t>(static_cast<std::uint32_t>(t));
}

void write_linear(Writer& w, const LinearModel& model, int width) {
  for (int c = 0; c < model.n_classes(); ++c) {
    for (int t = 0; t < model.dim(); ++t) w.real(model.hyperplanes(c, t), width);
    w.real(model.biases(c), width);
  }
}

LinearModel read_linear(Reader& r, int classes, int dim, int width) {
  LinearModel model;
  model.hyperplanes.resize(classes, dim);
  model.biases.resize(classes);
  for (int c = 0; c < classes; ++c) {
    for (int t = 0; t < dim; ++t) model.hyperplanes(c, t) = r.real(width);
    model.biases(c) = r.real(width);
  }
  if (!model.hyperplanes.allFinite() || !model.biases.allFinite()) {
    throw Error(Errc::CorruptPayload, "non-finite classifier parameter");
  }
  return model;
}

FeatureMask read_mask(Reader& r, int d, int expected_size) {
  FeatureMask mask = FeatureMask::from_bits(d, r.bytes(FeatureMask::packed_size(d)));
  if (mask.size() != expected_size) {
    throw Error(Errc::CorruptPayload, "mask selects " + std::to_string(mask.size()) + " columns, header says " +
                                          std::to_string(expected_size));
  }
  return mask;
}

void write_plain_payload(Writer& w, const EncodedDatabase& db) {
  for (const auto& pattern : db.patterns) {
    w.bytes(pattern.mask.packed_bits());
    write_linear(w, pattern.encoder, db.real_width);
  }
}

void read_plain_payload(Reader& r, EncodedDatabase& db) {
  db.patterns.clear();
  for (int j = 0; j < db.k(); ++j) {
    PatternModel pattern;
    pattern.tau = db.config.tau(j);
    pattern.mask = read_mask(r, db.d, db.d_prime);
    pattern.encoder = read_linear(r, pattern.tau, db.d_prime, db.real_width);
    pattern.encoder.reg_strength = db.reg_strength;
    pattern.encoder.seed = pattern_seed(db.seed, j);
    db.patterns.push_back(std::move(pattern));
  }
}

// Validated header fields shared by both kinds.
struct CycleHeader {
  SceneIndex n = 0;
  int d_prime = 0;
  std::vector<int> taus;
  double rho = 0.0;
};

int checked_int(std::uint64_t v, std::uint64_t limit, const char* what) {
  if (v > limit) throw Error(Errc::CorruptPayload, std::string(what) + " out of range");
  return static_cast<int>(v);
}

CycleHeader read_cycle_header(Reader& r, int d, bool with_n) {
  CycleHeader h;
  if (with_n) {
    const auto n = r.uint<std::uint64_t>();
    if (n < 1 || n > static_cast<std::uint64_t>(std::numeric_limits<SceneIndex>::max())) {
      throw Error(Errc::CorruptPayload, "scene count out of range");
    }
    h.n = static_cast<SceneIndex>(n);
  }
  h.d_prime = checked_int(r.uint<std::uint64_t>(), static_cast<std::uint64_t>(d), "d'");
  if (h.d_prime < 1) throw Error(Errc::CorruptPayload, "d' must be >= 1");
  const auto k = r.uint<std::uint32_t>();
  if (k < 1 || k > 64) throw Error(Errc::CorruptPayload, "pattern count out of range");
  for (std::uint32_t j = 0; j < k; ++j) {
    h.taus.push_back(checked_int(r.uint<std::uint32_t>(), 1u << 30, "cycle length"));
  }
  return h;
}

CycleConfig make_config(const std::vector<int>& taus, SceneIndex n) {
  try {
    return CycleConfig(taus, n);
  } catch (const Error& e) {
    throw Error(Errc::CorruptPayload, std::string("invalid cycle configuration: ") + e.what());
  }
}

int checked_real_width(std::uint8_t width) {
  if (width != 4 && width != 8) throw Error(Errc::CorruptPayload, "real width must be 4 or 8");
  return width;
}

int checked_d(std::uint64_t d) {
  const int out = checked_int(d, 1u << 30, "d");
  if (out < 1) throw Error(Errc::CorruptPayload, "d must be >= 1");
  return out;
}

void check_payload(std::int64_t written, std::int64_t formula) {
  if (written != formula) {
    throw Error(Errc::CorruptPayload, "payload has " + std::to_string(written) + " bytes, storage formula gives " +
                                          std::to_string(formula));
  }
}

void check_remaining(const Reader& r, std::int64_t formula) {
  if (static_cast<std::int64_t>(r.remaining()) != formula) {
    throw Error(Errc::CorruptPayload, "payload has " + std::to_string(r.remaining()) + " bytes, expected " +
                                          std::to_string(formula));
  }
}

std::vector<std::uint8_t> serialize_plain(const EncodedDatabase& db, ModelLayout& layout) {
  Writer w;
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(db.config.n_scenes()));
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(db.d));
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(db.d_prime));
  write_plain_header(w, db);
  w.f64(db.rho);
  w.f64(db.gamma);
  w.f64(db.reg_strength);
  w.uint<std::uint64_t>(db.seed);
  w.uint<std::uint8_t>(db.normalization ? 1 : 0);
  layout.header_bytes += static_cast<std::int64_t>(w.size());
  const std::size_t before_norm = w.size();
  if (db.normalization) write_normalization(w, *db.normalization);
  layout.normalization_bytes = static_cast<std::int64_t>(w.size() - before_norm);
  const std::size_t before_payload = w.size();
  write_plain_payload(w, db);
  layout.payload_bytes = static_cast<std::int64_t>(w.size() - before_payload);
  check_payload(layout.payload_bytes, storage_formula_bytes(db));
  return w.take();
}

EncodedDatabase deserialize_plain(Reader& r, int width, ModelLayout& layout) {
  const std::size_t start = r.position();
  EncodedDatabase db;
  const auto n = r.uint<std::uint64_t>();
  db.d = checked_d(r.uint<std::uint64_t>());
  if (n < 1 || n > static_cast<std::uint64_t>(std::numeric_limits<SceneIndex>::max())) {
    throw Error(Errc::CorruptPayload, "scene count out of range");
  }
  CycleHeader h = read_cycle_header(r, db.d, false);
  db.config = make_config(h.taus, static_cast<SceneIndex>(n));
  db.d_prime = h.d_prime;
  db.rho = r.f64();
  db.gamma = r.f64();
  db.reg_strength = r.f64();
  db.seed = r.uint<std::uint64_t>();
  db.real_width = width;
  const auto has_norm = r.uint<std::uint8_t>();
  if (has_norm > 1) throw Error(Errc::CorruptPayload, "bad normalization flag");
  layout.header_bytes += static_cast<std::int64_t>(r.position() - start);
  if (has_norm) {
    db.normalization = read_normalization(r, db.d);
    layout.normalization_bytes = 16LL * db.d;
  }
  const std::int64_t formula = storage_formula_bytes(db);
  check_remaining(r, formula);
  read_plain_payload(r, db);
  layout.payload_bytes = formula;
  return db;
}

std::vector<std::uint8_t> serialize_chunked(const ChunkedModel& model, ModelLayout& layout) {
  Writer w;
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(model.n_scenes()));
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(model.d));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.n_chunks()));
  for (SceneIndex b : model.boundaries) w.uint<std::uint64_t>(static_cast<std::uint64_t>(b));
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(model.d_tilde()));
  w.f64(model.rho_chunk);
  w.f64(model.gamma);
  w.f64(model.reg_strength);
  w.uint<std::uint64_t>(model.seed);
  w.uint<std::uint8_t>(model.normalization ? 1 : 0);
  for (const auto& chunk : model.chunks) {
    w.uint<std::uint64_t>(static_cast<std::uint64_t>(chunk.config.n_scenes()));
    w.uint<std::uint64_t>(static_cast<std::uint64_t>(chunk.d_prime));
    write_plain_header(w, chunk);
    w.f64(chunk.rho);
  }
  layout.header_bytes += static_cast<std::int64_t>(w.size());
  const std::size_t before_norm = w.size();
  if (model.normalization) write_normalization(w, *model.normalization);
  layout.normalization_bytes = static_cast<std::int64_t>(w.size() - before_norm);
  const std::size_t before_payload = w.size();
  w.bytes(model.classifier_mask.packed_bits());
  write_linear(w, model.chunk_classifier, model.real_width);
  for (const auto& chunk : model.chunks) write_plain_payload(w, chunk);
  layout.payload_bytes = static_cast<std::int64_t>(w.size() - before_payload);
  check_payload(layout.payload_bytes, chunk_storage_bytes(model));
  return w.take();
}

ChunkedModel deserialize_chunked(Reader& r, int width, ModelLayout& layout) {
  const std::size_t start = r.position();
  ChunkedModel model;
  const auto n = r.uint<std::uint64_t>();
  model.d = checked_d(r.uint<std::uint64_t>());
  const auto chunks = r.uint<std::uint32_t>();
  if (chunks < 1 || chunks > (1u << 24) || chunks > n) throw Error(Errc::CorruptPayload, "chunk count out of range");
  model.boundaries.resize(chunks + 1);
  for (auto& b : model.boundaries) b = static_cast<SceneIndex>(r.uint<std::uint64_t>());
  if (model.boundaries.front() != 1 || static_cast<std::uint64_t>(model.boundaries.back()) != n + 1) {
    throw Error(Errc::CorruptPayload, "chunk table does not cover 1..N");
  }
  for (std::size_t c = 0; c + 1 < model.boundaries.size(); ++c) {
    if (model.boundaries[c + 1] <= model.boundaries[c]) throw Error(Errc::CorruptPayload, "empty chunk");
  }
  const int d_tilde = checked_int(r.uint<std::uint64_t>(), static_cast<std::uint64_t>(model.d), "d~");
  if (d_tilde < 1) throw Error(Errc::CorruptPayload, "d~ must be >= 1");
  model.rho_chunk = r.f64();
  model.gamma = r.f64();
  model.reg_strength = r.f64();
  model.seed = r.uint<std::uint64_t>();
  model.real_width = width;
  const auto has_norm = r.uint<std::uint8_t>();
  if (has_norm > 1) throw Error(Errc::CorruptPayload, "bad normalization flag");
  model.chunks.resize(chunks);
  for (std::uint32_t c = 0; c < chunks; ++c) {
    EncodedDatabase& db = model.chunks[c];
    CycleHeader h = read_cycle_header(r, model.d, true);
    if (h.n != model.boundaries[c + 1] - model.boundaries[c]) {
      throw Error(Errc::CorruptPayload, "chunk " + std::to_string(c + 1) + " size disagrees with chunk table");
    }
    db.config = make_config(h.taus, h.n);
    db.d = model.d;
    db.d_prime = h.d_prime;
    db.rho = r.f64();
    db.gamma = model.gamma;
    db.reg_strength = model.reg_strength;
    db.seed = model.seed;
    db.real_width = width;
  }
  layout.header_bytes += static_cast<std::int64_t>(r.position() - start);
  if (has_norm) {
    model.normalization = read_normalization(r, model.d);
    layout.normalization_bytes = 16LL * model.d;
  }
  std::int64_t formula = chunk_classifier_bytes(static_cast<int>(chunks), model.d, d_tilde, width);
  for (const auto& db : model.chunks) formula += storage_formula_bytes(db);
  check_remaining(r, formula);
  model.classifier_mask = read_mask(r, model.d, d_tilde);
  model.chunk_classifier = read_linear(r, static_cast<int>(chunks), d_tilde, width);
  model.chunk_classifier.reg_strength = model.reg_strength;
  model.chunk_classifier.seed = Rng::substream(model.seed, kChunkClassifierStream).next();
  for (auto& db : model.chunks) read_plain_payload(r, db);
  layout.payload_bytes = formula;
  return model;
}

}  // namespace

FeatureFormat format_for_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".csv" ? FeatureFormat::Csv : FeatureFormat::Binary;
}

std::vector<std::uint8_t> encode_features(const FeatureMatrix& matrix, int width) {
  check_width(width);
  Writer w;
  w.tag("FMAT");
  w.uint<std::uint16_t>(kFeatureFormatVersion);
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(width));
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(matrix.rows()));
  w.uint<std::uint64_t>(static_cast<std::uint64_t>(matrix.cols()));
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) w.real(matrix.values(r, c), width);
  }
  if (matrix.normalization) {
    w.tag("NORM");
    write_normalization(w, *matrix.normalization);
  }
  return w.take();
}

FeatureMatrix decode_features(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, Errc::TruncatedFile);
  if (!r.tag("FMAT")) throw Error(Errc::BadMagic, "not a feature matrix file");
  const auto version = r.uint<std::uint16_t>();
  if (version != kFeatureFormatVersion) {
    throw Error(Errc::VersionMismatch, "feature file version " + std::to_string(version) + ", expected " +
                                           std::to_string(kFeatureFormatVersion));
  }
  const int width = r.uint<std::uint8_t>();
  if (width != 4 && width != 8) throw Error(Errc::CorruptPayload, "element width must be 4 or 8");
  const auto n = r.uint<std::uint64_t>();
  const auto d = r.uint<std::uint64_t>();
  if (d != 0 && n > r.remaining() / width / d) {
    throw Error(Errc::TruncatedFile, std::to_string(n) + "x" + std::to_string(d) + " values do not fit in the file");
  }
  FeatureMatrix out;
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    for (Eigen::Index c = 0; c < out.values.cols(); ++c) out.values(i, c) = r.real(width);
  }
  check_finite(out.values);
  if (r.remaining() > 0) {
    if (!r.tag("NORM")) throw Error(Errc::CorruptPayload, "unexpected trailing bytes");
    out.normalization = read_normalization(r, static_cast<int>(d));
    if (r.remaining() > 0) throw Error(Errc::CorruptPayload, "unexpected trailing bytes");
  }
  return out;
}

RowMatrixXd parse_csv(std::string_view text) {
  std::vector<double> values;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    ++rows;
    Eigen::Index count = 0;
    std::size_t field_start = 0;
    while (true) {
      std::size_t comma = line.find(',', field_start);
      std::string_view field = line.substr(field_start, comma == std::string_view::npos ? line.size() - field_start
                                                                                          : comma - field_start);
      ++count;
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      field = b == std::string_view::npos ? std::string_view{} : field.substr(b, e - b + 1);
      if (!field.empty() && field.front() == '+') field.remove_prefix(1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      const std::string where = "row " + std::to_string(rows) + ", column " + std::to_string(count);
      if (field.empty() || ec == std::errc::invalid_argument || ptr != field.data() + field.size()) {
        throw Error(Errc::InvalidArgument, where + ": not a number");
      }
      if (ec == std::errc::result_out_of_range || !std::isfinite(v)) throw Error(Errc::NonFinite, where);
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      field_start = comma + 1;
    }
    if (cols < 0) {
      cols = count;
    } else if (count != cols) {
      throw Error(Errc::RaggedRows, "row " + std::to_string(rows) + " has " + std::to_string(count) +
                                        " fields, row 1 has " + std::to_string(cols));
    }
  }
  if (rows == 0) return RowMatrixXd(0, 0);
  return Eigen::Map<const RowMatrixXd>(values.data(), rows, cols);
}

std::string format_csv(const Eigen::Ref<const RowMatrixXd>& values) {
  std::string out;
  char buf[64];
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c > 0) out.push_back(',');
      const auto res = std::to_chars(buf, buf + sizeof(buf), values(r, c));
      out.append(buf, res.ptr);
    }
    out.push_back('\n');
  }
  return out;
}

FeatureMatrix load_features(const std::filesystem::path& path, std::optional<FeatureFormat> format) {
  const auto bytes = read_file(path);
  if (format.value_or(format_for_path(path)) == FeatureFormat::Csv) {
    FeatureMatrix out;
    out.values = parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    return out;
  }
  return decode_features(bytes);
}

void save_features(const FeatureMatrix& matrix, const std::filesystem::path& path,
                   std::optional<FeatureFormat> format, int width) {
  if (format.value_or(format_for_path(path)) == FeatureFormat::Csv) {
    write_text_atomic(path, format_csv(matrix.values));
  } else {
    write_file_atomic(path, encode_features(matrix, width));
  }
}

std::vector<std::uint8_t> serialize_model(const Model& model, ModelLayout* layout) {
  Writer w;
  w.tag("SLVP");
  w.uint<std::uint16_t>(kModelFormatVersion);
  ModelLayout local;
  std::vector<std::uint8_t> body;
  if (const auto* db = std::get_if<EncodedDatabase>(&model)) {
    w.uint<std::uint8_t>(kPlainKind);
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(db->real_width));
    body = serialize_plain(*db, local);
  } else {
    const auto& chunked = std::get<ChunkedModel>(model);
    w.uint<std::uint8_t>(kChunkedKind);
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(chunked.real_width));
    body = serialize_chunked(chunked, local);
  }
  local.header_bytes += static_cast<std::int64_t>(w.size());
  w.bytes(body);
  if (layout) *layout = local;
  return w.take();
}

LoadedModel deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, Errc::CorruptPayload);
  if (!r.tag("SLVP")) throw Error(Errc::BadMagic, "not a model file");
  const auto version = r.uint<std::uint16_t>();
  if (version != kModelFormatVersion) {
    throw Error(Errc::VersionMismatch, "model file version " + std::to_string(version) + ", expected " +
                                           std::to_string(kModelFormatVersion));
  }
  const auto kind = r.uint<std::uint8_t>();
  const int width = checked_real_width(r.uint<std::uint8_t>());
  LoadedModel out;
  out.layout.header_bytes = static_cast<std::int64_t>(r.position());
  if (kind == kPlainKind) {
    out.model = deserialize_plain(r, width, out.layout);
  } else if (kind == kChunkedKind) {
    out.model = deserialize_chunked(r, width, out.layout);
  } else {
    throw Error(Errc::CorruptPayload, "unknown model kind " + std::to_string(kind));
  }
  return out;
}

ModelLayout save_model(const Model& model, const std::filesystem::path& path) {
  ModelLayout layout;
  const auto bytes = serialize_model(model, &layout);
  write_file_atomic(path, bytes);
  return layout;
}

LoadedModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

std::int64_t model_storage_bytes(const Model& model) {
  if (const auto* db = std::get_if<EncodedDatabase>(&model)) return storage_formula_bytes(*db);
  return chunk_storage_bytes(std::get<ChunkedModel>(model));
}

int model_dimension(const Model& model) {
  if (const auto* db = std::get_if<EncodedDatabase>(&model)) return db->d;
  return std::get<ChunkedModel>(model).d;
}

std::optional<SceneIndex> query_model(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& raw) {
  if (const auto* db = std::get_if<EncodedDatabase>(&model)) {
    return query(*db, normalize_query(db->normalization, raw));
  }
  const auto& chunked = std::get<ChunkedModel>(model);
  return query_chunked(chunked, normalize_query(chunked.normalization, raw));
}

std::vector<std::optional<SceneIndex>> query_model_batch(const Model& model, const Eigen::Ref<const RowMatrixXd>& raw) {
  if (raw.cols() != model_dimension(model)) {
    throw Error(Errc::DimensionMismatch, "queries have " + std::to_string(raw.cols()) + " columns, model expects " +
                                             std::to_string(model_dimension(model)));
  }
  if (const auto* db = std::get_if<EncodedDatabase>(&model)) {
    return query_batch(*db, normalize_rows(db->normalization, raw));
  }
  const auto& chunked = std::get<ChunkedModel>(model);
  return query_chunked_batch(chunked, normalize_rows(chunked.normalization, raw));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoError, "cannot read " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(Errc::IoError, "cannot rename into " + path.string());
  }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace sublinear
