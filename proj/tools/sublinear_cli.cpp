// Command-line front end: synth, train, query, eval, sweep, inspect, project.
//
// Exit codes: 0 success, 1 NoMatch-dominated query (--strict only),
// 2 usage or validation error, 3 file error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sublinear/chunking.hpp"
#include "sublinear/encoder.hpp"
#include "sublinear/evaluation.hpp"
#include "sublinear/io.hpp"
#include "sublinear/normalize.hpp"
#include "sublinear/parallel.hpp"
#include "sublinear/random.hpp"
#include "sublinear/synthetic.hpp"

namespace fs = std::filesystem;
using namespace sublinear;

namespace {

constexpr int kExitNoMatch = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

// Stream id for the query-noise seed derived from --seed.
constexpr std::uint64_t kQueryNoiseStream = 0x7175657279ULL;

struct Common {
  std::uint64_t seed = 42;
  unsigned jobs = default_jobs();
};

struct SynthArgs {
  SceneIndex n = 0;
  int k = 3;
  std::vector<int> taus;
  int d = 512;
  double noise = 0.0;
  double separation = 10.0;
  double block_fraction = 0.2;
  std::string blocks;
  std::vector<SceneIndex> grid;
  std::vector<int> grid_ks{2, 3, 4, 5};
  std::vector<int> coprime_ks;
  int block_width = 8;
  std::string out = "synth.fmat";
  std::string query_out;
  double query_noise = -1.0;
  int width = 8;
};

struct EncoderArgs {
  int k = 3;
  std::vector<int> taus;
  double rho = 0.5;
  double gamma = 10.0;
  double reg = 1.0;
  int real_width = 8;
  double solver_tolerance = 1e-4;
  int max_epochs = 1000;
};

struct TrainArgs {
  std::string data;
  std::string out = "model.slvp";
  EncoderArgs encoder;
  int chunks = 0;
  double rho_chunk = -1.0;
};

struct QueryArgs {
  std::string model;
  std::string data;
  std::string expect;
  SceneIndex tolerance = kDefaultTolerance;
  bool strict = false;
  std::string out;
};

struct EvalArgs {
  std::string model;
  std::string data;
  std::string truth;
  std::string train;
  SceneIndex max_tolerance = kMaxCurveTolerance;
  SceneIndex tolerance = kDefaultTolerance;
  std::vector<int> pattern_ks;
  bool timing = false;
  EncoderArgs encoder;
  std::string out = "report";
};

struct SweepArgs {
  std::string train;
  std::string test;
  std::string series;
  std::vector<SceneIndex> grid;
  std::vector<double> targets{0.9, 0.8};
  std::vector<int> ks{2, 3, 4, 5};
  std::vector<double> rhos{0.4, 0.5, 0.6};
  SceneIndex tolerance = kDefaultTolerance;
  bool baseline = false;
  EncoderArgs encoder;
  std::string out = "sweep";
};

struct InspectArgs {
  std::string model;
};

struct ProjectArgs {
  std::string data;
  std::string projection;
  std::string out = "projected.fmat";
};

void add_encoder_options(CLI::App* cmd, EncoderArgs& e) {
  cmd->add_option("--k", e.k, "Number of cyclic patterns")->check(CLI::PositiveNumber);
  cmd->add_option("--taus", e.taus, "Explicit cycle lengths (overrides --k)")->delimiter(',');
  cmd->add_option("--rho", e.rho, "Mask fraction d'/d");
  cmd->add_option("--gamma", e.gamma, "l1 budget of the feature weights");
  cmd->add_option("--reg", e.reg, "Hinge-loss penalty C");
  cmd->add_option("--real-width", e.real_width, "Bytes per stored real")->check(CLI::IsMember({4, 8}));
  cmd->add_option("--solver-tolerance", e.solver_tolerance, "Relative dual decrease stopping threshold");
  cmd->add_option("--max-epochs", e.max_epochs, "Solver epoch cap")->check(CLI::PositiveNumber);
}

EncoderParams to_params(const EncoderArgs& e, const Common& common) {
  EncoderParams p;
  p.k = e.k;
  p.taus = e.taus;
  p.rho = e.rho;
  p.gamma = e.gamma;
  p.reg_strength = e.reg;
  p.seed = common.seed;
  p.real_width = e.real_width;
  p.tolerance = e.solver_tolerance;
  p.max_epochs = e.max_epochs;
  p.jobs = common.jobs;
  return p;
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out += suffix;
  return out;
}

// Resolved options (defaults filled) of the global flags and the active
// command, in the config-file syntax accepted by --config.
void write_config_sidecar(const CLI::App& app, const fs::path& output) {
  std::string text;
  auto emit = [&](const CLI::App& scope, const std::string& prefix) {
    for (const CLI::Option* opt : scope.get_options()) {
      if (opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (name == "help" || name == "config") continue;
      std::string value;
      if (opt->count() > 0) {
        for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
      } else {
        value = opt->get_default_str();
        if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
      }
      if (value.empty() || value == "{}") {
        text += "# " + prefix + name + " unset\n";
      } else {
        text += prefix + name + "=" + value + "\n";
      }
    }
  };
  emit(app, "");
  for (const CLI::App* sub : app.get_subcommands()) {
    text += "[" + sub->get_name() + "]\n";
    emit(*sub, "");
  }
  write_text_atomic(sibling(output, ".cfg"), text);
}

// "b:e,b:e" half-open column ranges.
std::vector<ColumnBlock> parse_blocks(const std::string& text) {
  std::vector<ColumnBlock> blocks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "block '" + item + "' is not begin:end");
    try {
      blocks.push_back({std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
    } catch (const std::logic_error&) {
      throw Error(Errc::InvalidArgument, "block '" + item + "' is not begin:end");
    }
  }
  return blocks;
}

std::vector<SceneIndex> read_truth(const fs::path& path) {
  const auto bytes = read_file(path);
  const RowMatrixXd values = parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  if (values.rows() > 0 && values.cols() != 1) {
    throw Error(Errc::RaggedRows, "truth file must have one index per line");
  }
  std::vector<SceneIndex> truth;
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    const double v = values(r, 0);
    if (v < 0 || v != std::floor(v)) {
      throw Error(Errc::InvalidArgument, "truth row " + std::to_string(r + 1) + " is not a row offset");
    }
    truth.push_back(static_cast<SceneIndex>(v) + 1);
  }
  return truth;
}

std::string identity_truth_csv(SceneIndex n) {
  std::string out;
  for (SceneIndex i = 0; i < n; ++i) out += std::to_string(i) + "\n";
  return out;
}

// ---- synth ---------------------------------------------------------------------

int run_synth(const SynthArgs& a, const Common& common, const CLI::App& app) {
  if (a.n < 1) throw Error(Errc::InvalidArgument, "--n must be >= 1");
  PlantedSpec spec;
  spec.n_scenes = a.n;
  spec.d = a.d;
  spec.separation = a.separation;
  spec.noise_sigma = a.noise;
  spec.seed = common.seed;
  nlohmann::ordered_json truth;
  truth["n_scenes"] = a.n;
  truth["d"] = a.d;
  truth["seed"] = common.seed;
  truth["noise_sigma"] = a.noise;
  truth["separation"] = a.separation;

  if (a.grid.empty()) {
    const CycleConfig config = a.taus.empty() ? plan_cycles(a.n, a.k) : CycleConfig(a.taus, a.n);
    const auto blocks = a.blocks.empty() ? default_blocks(a.d, config.k(), a.block_fraction) : parse_blocks(a.blocks);
    if (static_cast<int>(blocks.size()) != config.k()) {
      throw Error(Errc::BlockOverflow, std::to_string(blocks.size()) + " blocks for " + std::to_string(config.k()) +
                                           " patterns");
    }
    for (int j = 0; j < config.k(); ++j) {
      spec.patterns.push_back({config.strides()[static_cast<std::size_t>(j)], config.tau(j), 0,
                               blocks[static_cast<std::size_t>(j)]});
    }
    truth["taus"] = config.taus();
  } else {
    spec.patterns = planted_grid_patterns(a.grid, a.grid_ks, a.block_width);
    std::vector<std::vector<int>> coprime_sets;
    for (SceneIndex n : a.grid) {
      for (int k : a.coprime_ks) coprime_sets.push_back(plan_coprime(n, k));
    }
    const int used = spec.patterns.empty() ? 0 : spec.patterns.back().block.end;
    for (auto& p : planted_sequential_patterns(coprime_sets, a.block_width, used)) spec.patterns.push_back(p);
  }
  nlohmann::ordered_json patterns = nlohmann::ordered_json::array();
  for (const auto& p : spec.patterns) {
    patterns.push_back({{"stride", p.stride}, {"tau", p.tau}, {"block", {p.block.begin, p.block.end}}});
  }
  truth["patterns"] = patterns;

  FeatureMatrix features;
  features.values = generate_planted(spec);
  const fs::path out = a.out;
  save_features(features, out, std::nullopt, a.width);
  write_text_atomic(sibling(out, ".truth.json"), truth.dump(2) + "\n");
  write_text_atomic(sibling(out, ".truth.csv"), identity_truth_csv(a.n));
  if (!a.query_out.empty()) {
    PlantedSpec second = spec;
    second.noise_sigma = a.query_noise >= 0.0 ? a.query_noise : a.noise;
    second.noise_seed = Rng::substream(common.seed, kQueryNoiseStream).next();
    FeatureMatrix queries;
    queries.values = generate_planted(second);
    save_features(queries, a.query_out, std::nullopt, a.width);
    write_text_atomic(sibling(a.query_out, ".truth.csv"), identity_truth_csv(a.n));
  }
  write_config_sidecar(app, out);
  std::cout << "wrote " << a.n << " x " << a.d << " scenes with " << spec.patterns.size() << " planted patterns to "
            << out.string() << "\n";
  return 0;
}

// ---- train / inspect -------------------------------------------------------------

void print_plain_table(const EncodedDatabase& db, const std::string& indent) {
  const std::size_t mask_bytes = FeatureMask::packed_size(db.d);
  std::printf("%spattern  tau  d'      mask_bytes  param_bytes\n", indent.c_str());
  for (int j = 0; j < db.k(); ++j) {
    const std::int64_t params = static_cast<std::int64_t>(db.real_width) * db.config.tau(j) * (db.d_prime + 1);
    std::printf("%s%-7d  %-3d  %-6d  %-10zu  %lld\n", indent.c_str(), j + 1, db.config.tau(j), db.d_prime, mask_bytes,
                static_cast<long long>(params));
  }
  std::printf("%stotal (formula) %lld bytes, measured %lld bytes\n", indent.c_str(),
              static_cast<long long>(storage_formula_bytes(db)), static_cast<long long>(measured_storage_bytes(db)));
}

void print_storage_table(const Model& model) {
  if (const auto* db = std::get_if<EncodedDatabase>(&model)) {
    print_plain_table(*db, "");
    return;
  }
  const auto& m = std::get<ChunkedModel>(model);
  std::printf("chunk classifier: C=%d d~=%d mask_bytes=%zu param_bytes=%lld\n", m.n_chunks(), m.d_tilde(),
              FeatureMask::packed_size(m.d),
              static_cast<long long>(static_cast<std::int64_t>(m.real_width) * m.n_chunks() * (m.d_tilde() + 1)));
  for (int c = 0; c < m.n_chunks(); ++c) {
    std::printf("chunk %d: scenes %lld..%lld\n", c + 1, static_cast<long long>(m.boundaries[static_cast<std::size_t>(c)]),
                static_cast<long long>(m.boundaries[static_cast<std::size_t>(c) + 1] - 1));
    print_plain_table(m.chunks[static_cast<std::size_t>(c)], "  ");
  }
  std::printf("total (formula) %lld bytes, measured %lld bytes\n", static_cast<long long>(chunk_storage_bytes(m)),
              static_cast<long long>(measured_storage_bytes(m)));
}

FeatureMatrix load_normalized(const fs::path& path) {
  FeatureMatrix raw = load_features(path);
  if (raw.normalization) return raw;
  return normalize(raw);
}

int run_train(const TrainArgs& a, const Common& common, const CLI::App& app) {
  const FeatureMatrix s = load_normalized(a.data);
  const EncoderParams params = to_params(a.encoder, common);
  Model model;
  if (a.chunks > 0) {
    ChunkParams cp;
    cp.chunks = a.chunks;
    cp.encoder = params;
    cp.rho_chunk = a.rho_chunk;
    model = train_chunked(s, cp);
  } else {
    std::vector<PatternSelection> selections;
    model = train_database(s, params, &selections);
    for (std::size_t j = 0; j < selections.size(); ++j) {
      if (!selections[j].weights.gamma_feasible) {
        std::cerr << "warning: " << to_string(Errc::GammaInfeasible) << ": pattern " << j + 1 << " gamma "
                  << params.gamma << " is below the tie count; weights rescaled to the l1 budget\n";
      }
    }
  }
  const fs::path out = a.out;
  const ModelLayout layout = save_model(model, out);
  print_storage_table(model);
  std::printf("file: header %lld + normalization %lld + payload %lld = %lld bytes\n",
              static_cast<long long>(layout.header_bytes), static_cast<long long>(layout.normalization_bytes),
              static_cast<long long>(layout.payload_bytes), static_cast<long long>(layout.total_bytes()));
  write_config_sidecar(app, out);
  return 0;
}

std::string join_taus(const std::vector<int>& taus) {
  std::string out;
  for (int t : taus) out += (out.empty() ? "" : ",") + std::to_string(t);
  return out;
}

int run_inspect(const InspectArgs& a) {
  const LoadedModel loaded = load_model(a.model);
  const auto& layout = loaded.layout;
  if (const auto* db = std::get_if<EncodedDatabase>(&loaded.model)) {
    std::printf("kind: plain\nversion: %u\nN: %lld\nd: %d\nd': %d\nk: %d\ntaus: %s\nrho: %g\ngamma: %g\nC: %g\n"
                "seed: %llu\nreal width: %d\nnormalization: %s\n",
                kModelFormatVersion, static_cast<long long>(db->config.n_scenes()), db->d, db->d_prime, db->k(),
                join_taus(db->config.taus()).c_str(), db->rho, db->gamma, db->reg_strength,
                static_cast<unsigned long long>(db->seed), db->real_width, db->normalization ? "yes" : "no");
  } else {
    const auto& m = std::get<ChunkedModel>(loaded.model);
    std::printf("kind: chunked\nversion: %u\nN: %lld\nd: %d\nchunks: %d\nd~: %d\nrho_chunk: %g\ngamma: %g\nC: %g\n"
                "seed: %llu\nreal width: %d\nnormalization: %s\n",
                kModelFormatVersion, static_cast<long long>(m.n_scenes()), m.d, m.n_chunks(), m.d_tilde(), m.rho_chunk,
                m.gamma, m.reg_strength, static_cast<unsigned long long>(m.seed), m.real_width,
                m.normalization ? "yes" : "no");
  }
  std::printf("file: header %lld + normalization %lld + payload %lld = %lld bytes\n",
              static_cast<long long>(layout.header_bytes), static_cast<long long>(layout.normalization_bytes),
              static_cast<long long>(layout.payload_bytes), static_cast<long long>(layout.total_bytes()));
  print_storage_table(loaded.model);
  return 0;
}

// ---- query / eval ----------------------------------------------------------------

int run_query(const QueryArgs& a) {
  const LoadedModel loaded = load_model(a.model);
  const FeatureMatrix queries = load_features(a.data);
  const auto predictions = query_model_batch(loaded.model, queries.values);
  std::string stream;
  for (const auto& p : predictions) stream += p ? std::to_string(*p - 1) + "\n" : "NOMATCH\n";
  if (a.out.empty()) {
    std::cout << stream << std::flush;
  } else {
    write_text_atomic(a.out, stream);
  }
  const auto no_match = std::count(predictions.begin(), predictions.end(), std::nullopt);
  if (!a.expect.empty()) {
    const auto truth = read_truth(a.expect);
    std::fprintf(stderr, "precision@%lld: %.6f (%zu queries, %lld NOMATCH)\n", static_cast<long long>(a.tolerance),
                 precision_at(predictions, truth, a.tolerance), predictions.size(), static_cast<long long>(no_match));
  }
  if (a.strict && 2 * static_cast<std::size_t>(no_match) > predictions.size()) return kExitNoMatch;
  return 0;
}

int run_eval(const EvalArgs& a, const Common& common, const CLI::App& app) {
  EvalReport report;
  if (!a.model.empty()) {
    if (a.data.empty() || a.truth.empty()) throw Error(Errc::InvalidArgument, "--model needs --data and --truth");
    const LoadedModel loaded = load_model(a.model);
    const FeatureMatrix queries = load_features(a.data);
    report = evaluate_model(loaded.model, queries.values, read_truth(a.truth), a.max_tolerance);
    report.config = {{"model", a.model}, {"data", a.data}, {"truth", a.truth}};
  }
  const EncoderParams params = to_params(a.encoder, common);
  if (!a.pattern_ks.empty() || a.timing) {
    if (a.train.empty() || a.data.empty()) throw Error(Errc::InvalidArgument, "pattern sweep and timing need --train and --data");
    const FeatureMatrix train = load_features(a.train);
    const FeatureMatrix queries = load_features(a.data);
    if (!a.pattern_ks.empty()) {
      report.k_sweep = sweep_pattern_count(train.values, queries.values, a.pattern_ks, params.rho, a.tolerance, params,
                                           common.jobs);
      report.config.emplace_back("pattern_tolerance", std::to_string(a.tolerance));
    }
    if (a.timing) {
      const FeatureMatrix s = normalize(train);
      const Timing t = time_train_query(s, normalize_rows(s.normalization, queries.values), params);
      report.train_seconds = t.train_seconds;
      report.query_seconds = t.query_seconds;
    }
  }
  if (a.model.empty() && report.k_sweep.empty() && !a.timing) {
    throw Error(Errc::InvalidArgument, "nothing to evaluate: give --model or --pattern-ks or --timing");
  }
  const fs::path out = a.out;
  write_text_atomic(sibling(out, ".csv"), report_csv(report));
  write_text_atomic(sibling(out, ".json"), report_json(report));
  if (const auto svg = precision_chart(report); !svg.empty()) write_text_atomic(sibling(out, ".precision.svg"), svg);
  if (const auto svg = k_chart(report); !svg.empty()) write_text_atomic(sibling(out, ".k.svg"), svg);
  if (report.train_seconds) write_text_atomic(sibling(out, ".timing.json"), timing_json(report));
  write_config_sidecar(app, out);
  if (!report.precision.empty()) {
    const auto t = static_cast<std::size_t>(std::min<SceneIndex>(a.tolerance, a.max_tolerance));
    std::printf("precision@%zu: %.6f (%lld queries, %lld NOMATCH)\n", t, report.precision[t],
                static_cast<long long>(report.queries), static_cast<long long>(report.no_match));
  }
  for (const auto& p : report.k_sweep) {
    std::printf("k=%d hierarchical %.4f (%lld B)  coprime %.4f (%lld B)\n", p.k, p.hierarchical_precision,
                static_cast<long long>(p.hierarchical_bytes), p.coprime_precision,
                static_cast<long long>(p.coprime_bytes));
  }
  if (report.train_seconds) {
    std::printf("train %.4fs, query sweep %.4fs (median of 3)\n", *report.train_seconds, *report.query_seconds);
  }
  return 0;
}

// ---- sweep -----------------------------------------------------------------------

int run_sweep(const SweepArgs& a, const Common& common, const CLI::App& app) {
  EvalReport report;
  const fs::path out = a.out;
  if (!a.series.empty()) {
    // Fit-only mode over a "size,bytes" table.
    const auto bytes = read_file(a.series);
    const RowMatrixXd table = parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    if (table.cols() != 2) throw Error(Errc::RaggedRows, "series file needs two columns: size,bytes");
    std::vector<double> sizes(table.rows()), storages(table.rows());
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
      sizes[static_cast<std::size_t>(r)] = table(r, 0);
      storages[static_cast<std::size_t>(r)] = table(r, 1);
    }
    SweepSeries s;
    s.method = "series";
    s.target = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      s.points.push_back({static_cast<SceneIndex>(sizes[i]), true, 0, 0.0, 0, {}, static_cast<std::int64_t>(storages[i]), 0.0});
    }
    s.fit = fit_sublinear_exponent(sizes, storages);
    report.sweeps.push_back(std::move(s));
    report.config = {{"series", a.series}};
  } else {
    if (a.grid.empty()) throw Error(Errc::InvalidArgument, "sweep grid is empty");
    if (a.train.empty()) throw Error(Errc::InvalidArgument, "--train is required");
    const FeatureMatrix train = load_features(a.train);
    const FeatureMatrix test = a.test.empty() ? train : load_features(a.test);
    SweepOptions options;
    options.n_grid = a.grid;
    options.targets = a.targets;
    options.ks = a.ks;
    options.rhos = a.rhos;
    options.tolerance = a.tolerance;
    options.params = to_params(a.encoder, common);
    options.baseline = a.baseline;
    options.jobs = common.jobs;
    report.sweeps = sweep_storage_vs_n(train.values, test.values, options);
    std::string ks, rhos;
    for (int k : a.ks) ks += (ks.empty() ? "" : ",") + std::to_string(k);
    for (double r : a.rhos) rhos += (rhos.empty() ? "" : ",") + std::to_string(r);
    report.config = {{"train", a.train}, {"test", a.test.empty() ? a.train : a.test}, {"search_k", ks},
                     {"search_rho", rhos}, {"tolerance", std::to_string(a.tolerance)}};
  }
  write_text_atomic(sibling(out, ".csv"), report_csv(report));
  write_text_atomic(sibling(out, ".json"), report_json(report));
  write_text_atomic(sibling(out, ".svg"), storage_chart(report));
  write_config_sidecar(app, out);
  for (const auto& s : report.sweeps) {
    const auto reached = std::count_if(s.points.begin(), s.points.end(), [](const SweepPoint& p) { return p.reached; });
    if (s.fit) {
      std::printf("%s target %.3f: a = %.4f (residual %.4f, through-origin a = %.4f), %lld/%zu points\n",
                  s.method.c_str(), s.target, s.fit->a, s.fit->residual, s.fit->a_through_origin,
                  static_cast<long long>(reached), s.points.size());
    } else {
      std::printf("%s target %.3f: too few reached points to fit (%lld/%zu)\n", s.method.c_str(), s.target,
                  static_cast<long long>(reached), s.points.size());
    }
  }
  return 0;
}

// ---- project -----------------------------------------------------------------------

int run_project(const ProjectArgs& a, const CLI::App& app) {
  const FeatureMatrix data = load_features(a.data);
  const FeatureMatrix projection = load_features(a.projection);
  if (projection.rows() != data.cols()) {
    throw Error(Errc::DimensionMismatch, "projection has " + std::to_string(projection.rows()) + " rows, data has " +
                                             std::to_string(data.cols()) + " columns");
  }
  FeatureMatrix out;
  out.values = data.values * projection.values;
  save_features(out, a.out);
  write_config_sidecar(app, a.out);
  std::cout << "projected " << data.rows() << " x " << data.cols() << " to " << out.rows() << " x " << out.cols() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-linear scene index: cyclic-pattern encoders for place recognition"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "Read options from a config file; flags override it");
  Common common;
  app.add_option("--seed", common.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate planted periodic-pattern data");
  synth_cmd->add_option("--n", synth.n, "Number of scenes")->required();
  synth_cmd->add_option("--k", synth.k, "Number of patterns")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--taus", synth.taus, "Explicit cycle lengths")->delimiter(',');
  synth_cmd->add_option("--d", synth.d, "Feature dimension")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", synth.noise, "Noise standard deviation");
  synth_cmd->add_option("--separation", synth.separation, "Minimum distance between templates");
  synth_cmd->add_option("--block-fraction", synth.block_fraction, "Default block width as a fraction of d");
  synth_cmd->add_option("--blocks", synth.blocks, "Explicit blocks begin:end,...");
  synth_cmd->add_option("--grid", synth.grid, "Plant every plan for these sizes (multi-cycle mode)")->delimiter(',');
  synth_cmd->add_option("--grid-ks", synth.grid_ks, "Pattern counts planted in multi-cycle mode")->delimiter(',');
  synth_cmd->add_option("--coprime-ks", synth.coprime_ks, "Also plant sequential co-prime plans for these k")
      ->delimiter(',');
  synth_cmd->add_option("--block-width", synth.block_width, "Block width in multi-cycle mode")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth.out, "Feature file (.fmat or .csv)");
  synth_cmd->add_option("--query-out", synth.query_out, "Also write a second noisy observation of every scene");
  synth_cmd->add_option("--query-noise", synth.query_noise, "Noise for --query-out (default --noise)");
  synth_cmd->add_option("--width", synth.width, "Bytes per stored value")->check(CLI::IsMember({4, 8}));

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train an encoder stack");
  train_cmd->add_option("--data", train.data, "Feature file")->required();
  train_cmd->add_option("--out", train.out, "Model file");
  add_encoder_options(train_cmd, train.encoder);
  train_cmd->add_option("--chunks", train.chunks, "Train a chunked model with C chunks");
  train_cmd->add_option("--rho-chunk", train.rho_chunk, "Mask fraction of the chunk classifier");

  QueryArgs q;
  auto* query_cmd = app.add_subcommand("query", "Print one row offset (or NOMATCH) per query row");
  query_cmd->add_option("--model", q.model, "Model file")->required();
  query_cmd->add_option("--data", q.data, "Query feature file")->required();
  query_cmd->add_option("--expect", q.expect, "Ground-truth row offsets, one per line");
  query_cmd->add_option("--tolerance", q.tolerance, "Frame tolerance for --expect")->check(CLI::NonNegativeNumber);
  query_cmd->add_flag("--strict", q.strict, "Exit 1 when most queries are NOMATCH");
  query_cmd->add_option("--out", q.out, "Write the stream to a file instead of stdout");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Precision curve, pattern-count comparison and timing");
  eval_cmd->add_option("--model", ev.model, "Model file");
  eval_cmd->add_option("--data", ev.data, "Query feature file");
  eval_cmd->add_option("--truth", ev.truth, "Ground-truth row offsets");
  eval_cmd->add_option("--train", ev.train, "Training features for --pattern-ks and --timing");
  eval_cmd->add_option("--max-tolerance", ev.max_tolerance, "Curve length in frames")->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--tolerance", ev.tolerance, "Reported tolerance")->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--pattern-ks", ev.pattern_ks, "Compare with the co-prime baseline for these k")
      ->delimiter(',');
  eval_cmd->add_flag("--timing", ev.timing, "Record median-of-3 train and query times");
  add_encoder_options(eval_cmd, ev.encoder);
  eval_cmd->add_option("--out", ev.out, "Output prefix");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Smallest storage reaching target precision, per database size");
  sweep_cmd->add_option("--train", sw.train, "Training features");
  sweep_cmd->add_option("--test", sw.test, "Query features aligned with --train rows");
  sweep_cmd->add_option("--series", sw.series, "Fit only: CSV of size,bytes");
  sweep_cmd->add_option("--grid", sw.grid, "Database sizes")->delimiter(',');
  sweep_cmd->add_option("--targets", sw.targets, "Target precisions")->delimiter(',');
  sweep_cmd->add_option("--ks", sw.ks, "Pattern counts searched")->delimiter(',');
  sweep_cmd->add_option("--rhos", sw.rhos, "Mask fractions searched")->delimiter(',');
  sweep_cmd->add_option("--tolerance", sw.tolerance, "Frame tolerance")->check(CLI::NonNegativeNumber);
  sweep_cmd->add_flag("--baseline", sw.baseline, "Also sweep the co-prime baseline");
  add_encoder_options(sweep_cmd, sw.encoder);
  sweep_cmd->add_option("--out", sw.out, "Output prefix");

  InspectArgs in;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print a model header and storage table");
  inspect_cmd->add_option("--model", in.model, "Model file")->required();

  ProjectArgs pr;
  auto* project_cmd = app.add_subcommand("project", "Apply an externally computed projection (d x d_out)");
  project_cmd->add_option("--data", pr.data, "Feature file")->required();
  project_cmd->add_option("--projection", pr.projection, "Projection matrix file")->required();
  project_cmd->add_option("--out", pr.out, "Output feature file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth, common, app);
    if (train_cmd->parsed()) return run_train(train, common, app);
    if (query_cmd->parsed()) return run_query(q);
    if (eval_cmd->parsed()) return run_eval(ev, common, app);
    if (sweep_cmd->parsed()) return run_sweep(sw, common, app);
    if (inspect_cmd->parsed()) return run_inspect(in);
    if (project_cmd->parsed()) return run_project(pr, app);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_io_error(e.code()) ? kExitIo : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
