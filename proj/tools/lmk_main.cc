// Command-line front end for the landmark retrieval/recognition engine.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "lmk/cleaning.h"
#include "lmk/dataset.h"
#include "lmk/geometry.h"
#include "lmk/io.h"
#include "lmk/knn.h"
#include "lmk/mathcheck.h"
#include "lmk/metrics.h"
#include "lmk/pipeline.h"
#include "lmk/recognition.h"
#include "lmk/rerank.h"
#include "lmk/synthetic.h"
#include "lmk/util.h"
#include "lmk/vector_ops.h"

namespace {

using namespace lmk;

// Exit status per subcommand, shared with the pipeline's stage codes.
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitClean = 4;
constexpr int kExitAugment = 6;
constexpr int kExitSearch = 7;
constexpr int kExitRecognize = 8;
constexpr int kExitRerank = 9;
constexpr int kExitEvaluate = 10;
constexpr int kExitMathcheck = 12;
constexpr int kExitVerify = 13;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& part : split(s, ',')) {
    if (!part.empty()) out.push_back(std::move(part));
  }
  return out;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string csv;
  std::string out;
  bool normalize = false;
  std::string check;
};

// One descriptor per line: id,v1,...,vD (no header).
DescriptorMatrix read_descriptor_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::string> ids;
  std::vector<float> data;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  for (const auto& line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() < 2) {
      throw Error(ErrorCode::kMalformedRow,
                  path + ": line " + std::to_string(line_no) +
                      " needs an id and at least one value");
    }
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      throw Error(ErrorCode::kDimMismatch,
                  path + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size() - 1) + " values, expected " +
                      std::to_string(dim));
    }
    ids.push_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        std::size_t used = 0;
        data.push_back(std::stof(fields[i], &used));
        if (used != fields[i].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorCode::kMalformedRow,
                    path + ": line " + std::to_string(line_no) +
                        ": bad number \"" + fields[i] + "\"");
      }
    }
  }
  if (dim == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                path + ": no rows, cannot infer dimension");
  }
  return DescriptorMatrix(std::move(ids), dim, std::move(data));
}

int run_ingest(const IngestArgs& a) {
  if (!a.check.empty()) {
    const std::string head = read_file(a.check).substr(0, 4);
    if (head == "GLDV") {
      const auto m = load_descriptors(a.check);
      std::size_t unit = 0;
      for (std::size_t i = 0; i < m.rows(); ++i) {
        if (std::abs(row_norm(m.row(i)) - 1.0) <= kNormTolerance) ++unit;
      }
      std::cout << "descriptors: " << m.rows() << " x " << m.dim() << ", "
                << unit << " unit-norm rows\n";
    } else if (head == "LFEA") {
      const auto f = load_local_features(a.check);
      std::size_t total = 0;
      for (const auto& img : f.images()) total += img.size();
      std::cout << "local features: " << f.size() << " images, " << total
                << " keypoints, d_local " << f.d_local() << "\n";
    } else {
      const auto labels = load_labels(a.check);
      std::cout << "labels: " << labels.size() << " images, "
                << labels.histogram().size() << " landmarks\n";
    }
    return 0;
  }
  if (a.csv.empty() || a.out.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "ingest needs --check, or --csv with --out");
  }
  DescriptorMatrix m = read_descriptor_csv(a.csv);
  if (a.normalize) {
    auto res = l2_normalize(m);
    for (const auto& id : res.zero_rows) warn("zero descriptor row: " + id);
    m = std::move(res.matrix);
  }
  save_descriptors(m, a.out);
  std::cout << "wrote " << m.rows() << " x " << m.dim() << " to " << a.out
            << "\n";
  return 0;
}

// --------------------------------------------------------- gen-synthetic

int run_gen_synthetic(const SyntheticConfig& cfg, const std::string& dir) {
  const SyntheticData data = generate_synthetic(cfg);
  std::filesystem::create_directories(dir);
  auto path = [&](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };
  save_descriptors(data.train, path("train.gldv"));
  save_descriptors(data.index, path("index.gldv"));
  save_descriptors(data.test, path("test.gldv"));
  save_local_features(data.features, path("features.lfea"));
  save_labels(data.train_labels, path("train_labels.csv"));
  save_labels(data.index_labels, path("index_labels.csv"));
  save_relevance_csv(data.relevance, path("retrieval_truth.csv"));
  save_recognition_truth_csv(data.test_truth, path("recognition_truth.csv"));
  std::cout << "train " << data.train.rows() << ", index " << data.index.rows()
            << ", test " << data.test.rows() << ", dim " << data.train.dim()
            << " -> " << dir << "\n";
  return 0;
}

// ----------------------------------------------------------------- search

struct SearchArgs {
  std::string query, index, out, metric = "l2";
  std::size_t k = 100;
  bool exclude_self = false;
  int threads = 0;
};

int run_search(const SearchArgs& a) {
  if (a.metric != "l2") {
    throw Error(ErrorCode::kInvalidArgument,
                "unsupported metric \"" + a.metric + "\" (only l2)");
  }
  const auto query = l2_normalize(load_descriptors(a.query)).matrix;
  const auto index = l2_normalize(load_descriptors(a.index)).matrix;
  SearchOptions opts;
  opts.exclude_self = a.exclude_self;
  opts.threads = a.threads;
  std::vector<RankedList> lists;
  for (const auto& n : knn_search(query, index, a.k, opts)) {
    lists.push_back(to_ranked_list(n));
  }
  save_ranked_csv(lists, a.out);
  std::cout << "searched " << query.rows() << " queries against "
            << index.rows() << " index rows -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- augment

struct AugmentArgs {
  std::string index, query, out_index, out_query;
  std::size_t dba_k = 10, qe_k = 10;
  double qe_alpha = 3.0;
  bool no_dba = false, no_qe = false;
  std::string multiscale, ensemble, out;
  std::string scales = "0.75,1.0,1.25";
  int threads = 0;
};

int run_augment(const AugmentArgs& a) {
  if (!a.multiscale.empty() || !a.ensemble.empty()) {
    if (a.out.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "--out is required");
    }
    const bool multiscale = !a.multiscale.empty();
    std::vector<DescriptorMatrix> inputs;
    for (const auto& p : split_list(multiscale ? a.multiscale : a.ensemble)) {
      inputs.push_back(l2_normalize(load_descriptors(p)).matrix);
    }
    DescriptorMatrix result;
    if (multiscale) {
      const auto scales = split_list(a.scales);
      if (scales.size() != inputs.size()) {
        throw Error(ErrorCode::kCountMismatch,
                    "--scales lists " + std::to_string(scales.size()) +
                        " factors for " + std::to_string(inputs.size()) +
                        " inputs");
      }
      for (const auto& s : scales) {
        if (!(std::stod(s) > 0.0)) {
          throw Error(ErrorCode::kInvalidArgument, "scales must be positive");
        }
      }
      result = multiscale_average(inputs);
    } else {
      result = concat_ensemble(inputs);
    }
    save_descriptors(result, a.out);
    std::cout << "wrote " << result.rows() << " x " << result.dim() << " to "
              << a.out << "\n";
    return 0;
  }
  if (a.index.empty() || a.out_index.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "augment needs --index/--out-index (DBA, QE), --multiscale, or "
                "--ensemble");
  }
  auto index = l2_normalize(load_descriptors(a.index)).matrix;
  if (!a.no_dba) index = dba(index, a.dba_k, a.threads);
  save_descriptors(index, a.out_index);
  if (!a.query.empty()) {
    if (a.out_query.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "--out-query is required");
    }
    auto query = l2_normalize(load_descriptors(a.query)).matrix;
    if (!a.no_qe) query = alpha_qe(query, index, a.qe_k, a.qe_alpha, a.threads);
    save_descriptors(query, a.out_query);
  }
  return 0;
}

// ----------------------------------------------------------------- verify

struct VerifyArgs {
  std::string features, pairs, out;
  RansacConfig ransac;
  bool no_mutual = false;
  int threads = 0;
};

int run_verify(VerifyArgs a) {
  a.ransac.mutual_check = !a.no_mutual;
  a.ransac.validate();
  const auto features = load_local_features(a.features);
  const auto pairs = load_pairs_csv(a.pairs);
  std::vector<VerificationResult> results(pairs.size());
  parallel_for(pairs.size(), resolve_threads(a.threads), [&](std::size_t i) {
    results[i] = verify_pair(pairs[i].first, pairs[i].second, features, a.ransac);
  });
  std::string text = "src,dst,inliers,verified\n";
  std::size_t verified = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    text += pairs[i].first + "," + pairs[i].second + "," +
            std::to_string(results[i].inlier_count) + "," +
            (results[i].verified ? "1" : "0") + "\n";
    verified += results[i].verified;
  }
  write_file(a.out, text);
  std::cout << verified << " of " << pairs.size() << " pairs verified\n";
  return 0;
}

// ------------------------------------------------------------------ clean

struct CleanArgs {
  std::string train, labels, features, out, report;
  CleaningConfig cfg;
};

int run_clean(const CleanArgs& a) {
  const auto train = l2_normalize(load_descriptors(a.train)).matrix;
  const auto labels = load_labels(a.labels);
  const auto features = load_local_features(a.features);
  const auto report = clean_train_set(train, labels, features, a.cfg);
  std::string kept;
  for (const auto& id : report.kept_ids()) kept += id + "\n";
  write_file(a.out, kept);
  if (!a.report.empty()) {
    std::string text = "id,label,same_label_neighbors,checked,verified,kept\n";
    for (const auto& r : report.records) {
      text += r.id + "," + r.label + "," +
              std::to_string(r.same_label_neighbors) + "," +
              std::to_string(r.checked) + "," + std::to_string(r.verified) +
              "," + (r.kept ? "1" : "0") + "\n";
    }
    write_file(a.report, text);
  }
  std::cout << "kept " << report.kept_ids().size() << " of " << train.rows()
            << " train images\n";
  return 0;
}

// -------------------------------------------------------------- recognize

struct RecognizeArgs {
  std::string query, train, labels, features, out;
  RecognitionConfig cfg;
  std::size_t distractor_threshold = 30;
  bool no_spatial = false;
  bool outside_sum = false;
  bool no_suppress = false;
};

int run_recognize(RecognizeArgs a) {
  a.cfg.use_spatial = !a.no_spatial;
  a.cfg.binding =
      a.outside_sum ? SpatialBinding::kOutsideSum : SpatialBinding::kInsideSum;
  const auto query = l2_normalize(load_descriptors(a.query)).matrix;
  const auto train = l2_normalize(load_descriptors(a.train)).matrix;
  const auto labels = load_labels(a.labels);
  LocalFeatureSet features;
  if (a.cfg.use_spatial) {
    if (a.features.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "--features is required unless --no-spatial is given");
    }
    features = load_local_features(a.features);
  }
  auto preds = recognize_batch(query, train, labels, features, a.cfg);
  if (!a.no_suppress) {
    DistractorConfig d;
    d.frequency_threshold = a.distractor_threshold;
    preds = suppress_distractors(std::move(preds), d);
  }
  save_predictions_csv(preds, a.out);
  std::cout << "predicted " << preds.size() << " queries -> " << a.out << "\n";
  return 0;
}

// ----------------------------------------------------------------- rerank

struct RerankArgs {
  std::string ranked, test_preds, index_preds, out;
  std::size_t cap = 100;
  double min_confidence = 0.0;
  bool use_min_confidence = false;
  int threads = 0;
};

int run_rerank(const RerankArgs& a) {
  const auto ranked = load_ranked_csv(a.ranked);
  const auto test = index_predictions(load_predictions_csv(a.test_preds));
  const auto index = index_predictions(load_predictions_csv(a.index_preds));
  RerankOptions opts;
  opts.cap = a.cap;
  if (a.use_min_confidence) opts.min_confidence = a.min_confidence;
  const auto out = rerank_batch(ranked, test, index, opts, a.threads);
  save_ranked_csv(out, a.out);
  std::cout << "re-ranked " << out.size() << " queries -> " << a.out << "\n";
  return 0;
}

// --------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string metric = "map@100", pred, truth, breakdown;
};

int run_evaluate(const EvaluateArgs& a) {
  MetricReport report;
  if (a.metric == "gap") {
    report = gap(load_predictions_csv(a.pred),
                 load_recognition_truth_csv(a.truth));
  } else if (a.metric == "map") {
    report = mean_ap(load_ranked_csv(a.pred), load_relevance_csv(a.truth));
  } else if (a.metric.rfind("map@", 0) == 0) {
    const std::size_t k = std::stoul(a.metric.substr(4));
    report = map_at_k(load_ranked_csv(a.pred), load_relevance_csv(a.truth), k);
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown metric \"" + a.metric + "\" (map@K, map, gap)");
  }
  std::cout << a.metric << " " << fixed6(report.value) << "\n";
  if (!a.breakdown.empty()) {
    std::string text = "id,value\n";
    for (const auto& [id, v] : report.breakdown) {
      text += id + "," + format_double(v) + "\n";
    }
    write_file(a.breakdown, text);
  }
  return 0;
}

// -------------------------------------------------------------- mathcheck

int run_mathcheck(std::uint64_t seed, int instances) {
  const auto checks = run_math_checks(seed, instances);
  bool all = true;
  std::printf("%-50s %-6s %-12s %s\n", "check", "result", "worst", "tolerance");
  for (const auto& c : checks) {
    std::printf("%-50s %-6s %-12.3e %.1e\n", c.name.c_str(),
                c.passed ? "PASS" : "FAIL", c.worst, c.tolerance);
    all = all && c.passed;
  }
  return all ? 0 : kExitMathcheck;
}

// --------------------------------------------------------------- pipeline

int run_pipeline_cmd(const std::string& config_path,
                     const std::map<std::string, std::string>& flags,
                     const std::vector<std::string>& sets) {
  PipelineConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::kInvalidConfig, "--set expects key=value");
      }
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : flags) cfg.set(key, value);
  } catch (const Error& e) {
    std::cerr << "config: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const auto result = run_pipeline(cfg, std::cout);
    std::cout << "wrote " << result.written.size() << " files to "
              << cfg.out_dir << "\n";
  } catch (const StageError& e) {
    std::cerr << "pipeline failed in stage " << e.what() << "\n";
    return e.exit_code();
  }
  return 0;
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Landmark retrieval and recognition engine"};
  app.require_subcommand(1);
  int exit_code = 0;

  auto guarded = [&](int failure_code, auto&& fn) {
    return [&exit_code, failure_code, fn] {
      try {
        exit_code = fn();
      } catch (const Error& e) {
        std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what()
                  << "\n";
        exit_code = failure_code;
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        exit_code = failure_code;
      }
    };
  };

  IngestArgs ingest;
  auto* ingest_cmd =
      app.add_subcommand("ingest", "Convert CSV descriptors or validate files");
  ingest_cmd->add_option("--csv", ingest.csv, "id,v1,...,vD text file");
  ingest_cmd->add_option("--out", ingest.out, "Output descriptor file");
  ingest_cmd->add_flag("--normalize", ingest.normalize, "L2-normalize rows");
  ingest_cmd->add_option("--check", ingest.check,
                         "Validate a descriptor, feature, or label file");
  ingest_cmd->callback(guarded(kExitInput, [&] { return run_ingest(ingest); }));

  SyntheticConfig synth;
  std::string synth_dir = "synthetic";
  auto* synth_cmd =
      app.add_subcommand("gen-synthetic", "Write a seeded synthetic dataset");
  synth_cmd->add_option("--out-dir", synth_dir);
  synth_cmd->add_option("--labels", synth.num_labels);
  synth_cmd->add_option("--train-per-label", synth.train_per_label);
  synth_cmd->add_option("--inconsistent-per-label", synth.inconsistent_per_label);
  synth_cmd->add_option("--index-per-label", synth.index_per_label);
  synth_cmd->add_option("--test-per-label", synth.test_per_label);
  synth_cmd->add_option("--dim", synth.dim);
  synth_cmd->add_option("--spread", synth.spread);
  synth_cmd->add_option("--distractor-fraction", synth.distractor_fraction);
  synth_cmd->add_option("--distractor-train", synth.distractor_train);
  synth_cmd->add_flag("--distractor-shared-geometry",
                      synth.distractor_shared_geometry);
  synth_cmd->add_option("--keypoints", synth.keypoints_per_image);
  synth_cmd->add_option("--outliers", synth.outliers_per_image);
  synth_cmd->add_option("--d-local", synth.d_local);
  synth_cmd->add_option("--keypoint-noise", synth.keypoint_noise_px);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->callback(guarded(kExitInput, [&] {
    return run_gen_synthetic(synth, synth_dir);
  }));

  SearchArgs search;
  auto* search_cmd = app.add_subcommand("search", "Exact k-NN retrieval");
  search_cmd->add_option("--query", search.query)->required();
  search_cmd->add_option("--index", search.index)->required();
  search_cmd->add_option("--k", search.k);
  search_cmd->add_option("--metric", search.metric);
  search_cmd->add_option("--out", search.out)->required();
  search_cmd->add_flag("--exclude-self", search.exclude_self);
  search_cmd->add_option("--threads", search.threads);
  search_cmd->callback(guarded(kExitSearch, [&] { return run_search(search); }));

  AugmentArgs augment;
  auto* augment_cmd = app.add_subcommand(
      "augment", "DBA / alpha-QE, multi-scale averaging, ensemble concat");
  augment_cmd->add_option("--index", augment.index);
  augment_cmd->add_option("--query", augment.query);
  augment_cmd->add_option("--out-index", augment.out_index);
  augment_cmd->add_option("--out-query", augment.out_query);
  augment_cmd->add_option("--dba-k", augment.dba_k);
  augment_cmd->add_option("--qe-k", augment.qe_k);
  augment_cmd->add_option("--qe-alpha", augment.qe_alpha);
  augment_cmd->add_flag("--no-dba", augment.no_dba);
  augment_cmd->add_flag("--no-qe", augment.no_qe);
  augment_cmd->add_option("--multiscale", augment.multiscale,
                          "Comma-separated per-scale descriptor files");
  augment_cmd->add_option("--scales", augment.scales);
  augment_cmd->add_option("--ensemble", augment.ensemble,
                          "Comma-separated per-model descriptor files");
  augment_cmd->add_option("--out", augment.out);
  augment_cmd->add_option("--threads", augment.threads);
  augment_cmd->callback(
      guarded(kExitAugment, [&] { return run_augment(augment); }));

  VerifyArgs verify;
  auto* verify_cmd =
      app.add_subcommand("verify", "RANSAC affine verification of image pairs");
  verify_cmd->add_option("--features", verify.features)->required();
  verify_cmd->add_option("--pairs", verify.pairs)->required();
  verify_cmd->add_option("--out", verify.out)->required();
  verify_cmd->add_option("--inlier-threshold", verify.ransac.inlier_threshold);
  verify_cmd->add_option("--seed", verify.ransac.seed);
  verify_cmd->add_option("--iterations", verify.ransac.iterations);
  verify_cmd->add_option("--tolerance", verify.ransac.reprojection_tolerance);
  verify_cmd->add_option("--match-distance-max", verify.ransac.match_distance_max);
  verify_cmd->add_flag("--no-mutual", verify.no_mutual);
  verify_cmd->add_option("--threads", verify.threads);
  verify_cmd->callback(guarded(kExitVerify, [&] { return run_verify(verify); }));

  CleanArgs clean;
  auto* clean_cmd = app.add_subcommand("clean", "Automated train-set cleaning");
  clean_cmd->add_option("--train", clean.train)->required();
  clean_cmd->add_option("--labels", clean.labels)->required();
  clean_cmd->add_option("--features", clean.features)->required();
  clean_cmd->add_option("--k", clean.cfg.k);
  clean_cmd->add_option("--verify-cap", clean.cfg.verify_cap);
  clean_cmd->add_option("--t-frequency", clean.cfg.t_frequency);
  clean_cmd->add_option("--inlier-threshold", clean.cfg.ransac.inlier_threshold);
  clean_cmd->add_option("--seed", clean.cfg.ransac.seed);
  clean_cmd->add_option("--out", clean.out)->required();
  clean_cmd->add_option("--report", clean.report);
  clean_cmd->add_option("--threads", clean.cfg.threads);
  clean_cmd->callback(guarded(kExitClean, [&] { return run_clean(clean); }));

  RecognizeArgs recognize;
  auto* recognize_cmd =
      app.add_subcommand("recognize", "Spatially verified soft-voting");
  recognize_cmd->add_option("--query", recognize.query)->required();
  recognize_cmd->add_option("--train", recognize.train)->required();
  recognize_cmd->add_option("--labels", recognize.labels)->required();
  recognize_cmd->add_option("--features", recognize.features);
  recognize_cmd->add_option("--t", recognize.cfg.t);
  recognize_cmd->add_option("--knn", recognize.cfg.knn);
  recognize_cmd->add_option("--distractor-threshold",
                            recognize.distractor_threshold);
  recognize_cmd->add_option("--inlier-threshold",
                            recognize.cfg.ransac.inlier_threshold);
  recognize_cmd->add_option("--seed", recognize.cfg.ransac.seed);
  recognize_cmd->add_flag("--no-spatial", recognize.no_spatial);
  recognize_cmd->add_flag("--spatial-outside-sum", recognize.outside_sum);
  recognize_cmd->add_flag("--no-suppress", recognize.no_suppress);
  recognize_cmd->add_option("--out", recognize.out)->required();
  recognize_cmd->add_option("--threads", recognize.cfg.threads);
  recognize_cmd->callback(
      guarded(kExitRecognize, [&] { return run_recognize(recognize); }));

  RerankArgs rerank;
  auto* rerank_cmd =
      app.add_subcommand("rerank", "Discriminative re-ranking by predicted label");
  rerank_cmd->add_option("--ranked", rerank.ranked)->required();
  rerank_cmd->add_option("--test-preds", rerank.test_preds)->required();
  rerank_cmd->add_option("--index-preds", rerank.index_preds)->required();
  rerank_cmd->add_option("--cap", rerank.cap);
  auto* min_conf = rerank_cmd->add_option("--min-confidence", rerank.min_confidence);
  rerank_cmd->add_option("--out", rerank.out)->required();
  rerank_cmd->add_option("--threads", rerank.threads);
  rerank_cmd->callback(guarded(kExitRerank, [&] {
    rerank.use_min_confidence = min_conf->count() > 0;
    return run_rerank(rerank);
  }));

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "mAP@k, mAP, or GAP");
  evaluate_cmd->add_option("--metric", evaluate.metric);
  evaluate_cmd->add_option("--pred", evaluate.pred)->required();
  evaluate_cmd->add_option("--truth", evaluate.truth)->required();
  evaluate_cmd->add_option("--breakdown", evaluate.breakdown,
                           "Write per-query values to this CSV");
  evaluate_cmd->callback(
      guarded(kExitEvaluate, [&] { return run_evaluate(evaluate); }));

  std::uint64_t math_seed = 0;
  int math_instances = 100;
  auto* math_cmd =
      app.add_subcommand("mathcheck", "Gradient and property checks");
  math_cmd->add_option("--seed", math_seed);
  math_cmd->add_option("--instances", math_instances);
  math_cmd->callback(guarded(kExitMathcheck, [&] {
    return run_mathcheck(math_seed, math_instances);
  }));

  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  auto* pipeline_cmd =
      app.add_subcommand("pipeline", "Run retrieval and recognition end to end");
  pipeline_cmd->add_option("--config", config_path, "key=value config file");
  pipeline_cmd->add_option("--set", sets, "Override key=value (repeatable)");
  for (const auto& key : PipelineConfig::keys()) {
    flag_options[key] = pipeline_cmd->add_option(flag_name(key), flag_values[key]);
  }
  pipeline_cmd->callback([&] {
    std::map<std::string, std::string> given;
    for (const auto& [key, opt] : flag_options) {
      if (opt->count() > 0) given[key] = flag_values[key];
    }
    exit_code = run_pipeline_cmd(config_path, given, sets);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  return exit_code;
}
