#include "lmk/pipeline.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <variant>

#include "lmk/io.h"
#include "lmk/knn.h"
#include "lmk/metrics.h"
#include "lmk/util.h"

namespace lmk {
namespace {

// Counts and the seed share one alternative.
static_assert(std::is_same_v<std::size_t, std::uint64_t>);

using Field =
    std::variant<std::string PipelineConfig::*, std::uint64_t PipelineConfig::*,
                 int PipelineConfig::*, double PipelineConfig::*,
                 bool PipelineConfig::*, std::vector<double> PipelineConfig::*>;

const std::vector<std::pair<std::string, Field>>& field_table() {
  using C = PipelineConfig;
  static const std::vector<std::pair<std::string, Field>> table = {
      {"train", &C::train},
      {"train_labels", &C::train_labels},
      {"index", &C::index},
      {"query", &C::query},
      {"features", &C::features},
      {"ensemble_index", &C::ensemble_index},
      {"ensemble_query", &C::ensemble_query},
      {"retrieval_truth", &C::retrieval_truth},
      {"recognition_truth", &C::recognition_truth},
      {"out_dir", &C::out_dir},
      {"seed", &C::seed},
      {"threads", &C::threads},
      {"clean_train", &C::clean_train},
      {"clean_k", &C::clean_k},
      {"verify_cap", &C::verify_cap},
      {"t_frequency", &C::t_frequency},
      {"inlier_threshold", &C::inlier_threshold},
      {"ransac_iterations", &C::ransac_iterations},
      {"reprojection_tolerance", &C::reprojection_tolerance},
      {"match_distance_max", &C::match_distance_max},
      {"mutual_check", &C::mutual_check},
      {"knn", &C::knn},
      {"t", &C::t},
      {"use_spatial", &C::use_spatial},
      {"spatial_outside_sum", &C::spatial_outside_sum},
      {"suppress", &C::suppress},
      {"distractor_threshold", &C::distractor_threshold},
      {"cap", &C::cap},
      {"dba", &C::dba},
      {"qe", &C::qe},
      {"dba_k", &C::dba_k},
      {"qe_k", &C::qe_k},
      {"qe_alpha", &C::qe_alpha},
      {"rerank", &C::rerank},
      {"rerank_min_confidence", &C::rerank_min_confidence},
      {"gem_p", &C::gem_p},
      {"margin", &C::margin},
      {"margin_scale", &C::margin_scale},
      {"scales", &C::scales},
  };
  return table;
}

const Field& lookup(const std::string& key) {
  for (const auto& [name, field] : field_table()) {
    if (name == key) return field;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown config key \"" + key + "\"");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw Error(ErrorCode::kInvalidConfig,
                "config key " + key + ": cannot parse \"" + value + "\"");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw Error(ErrorCode::kInvalidConfig,
              "config key " + key + ": expected true/false, got \"" + value +
                  "\"");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const Field& field = lookup(key);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(this->*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          this->*member = value;
        } else if constexpr (std::is_same_v<T, bool>) {
          this->*member = parse_bool(key, value);
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          std::vector<double> values;
          for (const auto& part : split(value, ',')) {
            values.push_back(parse_number<double>(key, trim(part)));
          }
          this->*member = std::move(values);
        } else {
          this->*member = parse_number<T>(key, value);
        }
      },
      field);
}

std::string PipelineConfig::get(const std::string& key) const {
  const Field& field = lookup(key);
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cv_t<std::remove_reference_t<decltype(this->*member)>>;
        const auto& v = this->*member;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          std::string out;
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ',';
            out += format_double(v[i]);
          }
          return out;
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(v);
        } else {
          return std::to_string(v);
        }
      },
      field);
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, field] : field_table()) out.push_back(name);
    return out;
  }();
  return names;
}

std::string PipelineConfig::serialize() const {
  std::string out;
  for (const auto& key : keys()) out += key + "=" + get(key) + "\n";
  return out;
}

std::uint64_t PipelineConfig::hash() const {
  std::string canonical;
  for (const auto& key : keys()) {
    if (key == "threads" || key == "out_dir") continue;
    canonical += key + "=" + get(key) + "\n";
  }
  return fnv1a64(canonical);
}

RansacConfig PipelineConfig::ransac() const {
  RansacConfig r;
  r.iterations = ransac_iterations;
  r.reprojection_tolerance = reprojection_tolerance;
  r.inlier_threshold = inlier_threshold;
  r.match_distance_max = match_distance_max;
  r.mutual_check = mutual_check;
  r.seed = seed;
  return r;
}

RecognitionConfig PipelineConfig::recognition() const {
  RecognitionConfig r;
  r.knn = knn;
  r.t = t;
  r.use_spatial = use_spatial;
  r.binding = spatial_outside_sum ? SpatialBinding::kOutsideSum
                                  : SpatialBinding::kInsideSum;
  r.ransac = ransac();
  r.threads = threads;
  return r;
}

CleaningConfig PipelineConfig::cleaning() const {
  CleaningConfig c;
  c.k = clean_k;
  c.verify_cap = verify_cap;
  c.t_frequency = t_frequency;
  c.ransac = ransac();
  c.threads = threads;
  return c;
}

RerankOptions PipelineConfig::rerank_options() const {
  RerankOptions o;
  o.cap = cap;
  if (rerank_min_confidence >= 0.0) o.min_confidence = rerank_min_confidence;
  return o;
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidConfig, what);
  };
  if (cap < 1) fail("cap must be >= 1");
  if (scales.empty()) fail("scales must be non-empty");
  for (double s : scales) {
    if (!(s > 0.0)) fail("scales must be positive");
  }
  if (!(qe_alpha >= 0.0)) fail("qe_alpha must be >= 0");
  if (distractor_threshold < 1) fail("distractor_threshold must be >= 1");
  if (!(gem_p >= 1.0)) fail("gem_p must be >= 1");
  if (!(margin >= 0.0) || !(margin_scale > 0.0)) fail("bad margin settings");
  recognition().validate();
  cleaning().validate();
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig,
                  "config line " + std::to_string(line_no) +
                      ": expected key=value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  return parse_config(read_file(path));
}

std::uint64_t file_checksum(const std::string& path) {
  return fnv1a64(read_file(path));
}

namespace {

enum Stage : int {
  kConfigStage = 2,
  kInputStage = 3,
  kCleaningStage = 4,
  kEnsembleStage = 5,
  kAugmentStage = 6,
  kSearchStage = 7,
  kRecognitionStage = 8,
  kRerankStage = 9,
  kEvaluateStage = 10,
  kOutputStage = 11,
};

template <typename F>
auto stage(const char* name, int code, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, code, e.what());
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

DescriptorMatrix load_normalized(const std::string& path) {
  return l2_normalize(load_descriptors(path)).matrix;
}

class Runner {
 public:
  Runner(const PipelineConfig& cfg, std::ostream& log) : cfg_(cfg), log_(log) {
    stage("config", kConfigStage, [&] {
      cfg_.validate();
      std::filesystem::create_directories(cfg_.out_dir);
      return 0;
    });
  }

  PipelineResult result;

  void run_retrieval() {
    load_retrieval_inputs();
    const bool augment = cfg_.dba || cfg_.qe;
    DescriptorMatrix index = index_;
    DescriptorMatrix query = query_;
    if (augment) {
      stage("augment", kAugmentStage, [&] {
        if (cfg_.dba) {
          log_ << "[augment] DBA k=" << cfg_.dba_k << "\n";
          index = dba(index, cfg_.dba_k, cfg_.threads);
          save_descriptors(index, out_descriptors("index_augmented.gldv"));
        }
        if (cfg_.qe) {
          log_ << "[augment] alpha-QE k=" << cfg_.qe_k
               << " alpha=" << format_double(cfg_.qe_alpha) << "\n";
          query = alpha_qe(query, index, cfg_.qe_k, cfg_.qe_alpha, cfg_.threads);
          save_descriptors(query, out_descriptors("query_augmented.gldv"));
        }
        return 0;
      });
    }
    const auto ranked = stage("search", kSearchStage, [&] {
      log_ << "[search] " << query.rows() << " queries x " << index.rows()
           << " index, k=" << cfg_.cap << "\n";
      auto lists = search(query, index);
      save_ranked_csv(lists, out("search.csv"));
      return lists;
    });

    std::optional<RelevanceTable> truth;
    if (!cfg_.retrieval_truth.empty()) {
      truth = stage("input", kInputStage,
                    [&] { return load_relevance_csv(cfg_.retrieval_truth); });
      const auto base = augment ? search(query_, index_) : ranked;
      record_map("search", base, *truth);
      if (augment) record_map("+dba/qe", ranked, *truth);
    }

    std::vector<RankedList> final_lists = ranked;
    if (cfg_.rerank) {
      const auto& test_preds = test_predictions();
      const auto index_preds = stage("recognition", kRecognitionStage, [&] {
        log_ << "[recognition] predicting " << index_.rows()
             << " index images\n";
        auto preds = recognize(index_, cfg_.recognition());
        save_predictions_csv(preds, out("index_predictions.csv"));
        return preds;
      });
      final_lists = stage("rerank", kRerankStage, [&] {
        log_ << "[rerank] cap=" << cfg_.cap << "\n";
        return rerank_batch(ranked, index_predictions(test_preds),
                            index_predictions(index_preds),
                            cfg_.rerank_options(), cfg_.threads);
      });
      if (truth) record_map("+rerank", final_lists, *truth);
    }
    stage("output", kOutputStage, [&] {
      save_ranked_csv(final_lists, out("retrieval.csv"));
      if (truth) write_metrics("retrieval_metrics.csv", "retrieval");
      return 0;
    });
  }

  void run_recognition() {
    const auto& raw = test_predictions();
    std::vector<Prediction> final_preds = raw;
    if (cfg_.suppress) {
      final_preds = stage("recognition", kRecognitionStage, [&] {
        DistractorConfig d;
        d.frequency_threshold = cfg_.distractor_threshold;
        return suppress_distractors(raw, d);
      });
    }
    stage("output", kOutputStage, [&] {
      save_predictions_csv(final_preds, out("recognition.csv"));
      return 0;
    });
    if (!cfg_.recognition_truth.empty()) {
      const auto truth = stage("input", kInputStage, [&] {
        return load_recognition_truth_csv(cfg_.recognition_truth);
      });
      stage("evaluate", kEvaluateStage, [&] {
        if (cfg_.use_spatial) {
          RecognitionConfig plain = cfg_.recognition();
          plain.use_spatial = false;
          record("recognition", "soft-voting", "gap",
                 gap(recognize(query_, plain), truth).value);
          record("recognition", "+spatial", "gap", gap(raw, truth).value);
        } else {
          record("recognition", "soft-voting", "gap", gap(raw, truth).value);
        }
        if (cfg_.suppress) {
          record("recognition", "+post-processing", "gap",
                 gap(final_preds, truth).value);
        }
        return 0;
      });
      stage("output", kOutputStage, [&] {
        write_metrics("recognition_metrics.csv", "recognition");
        return 0;
      });
    }
  }

  void write_manifest() {
    stage("output", kOutputStage, [&] {
      const std::vector<std::string> outputs = result.written;
      const std::string path = out("manifest.txt");
      write_file(path, build_manifest(cfg_, outputs));
      return 0;
    });
  }

 private:
  std::string out_descriptors(const std::string& name) {
    const std::string path = out(name);
    out(name + ".ids");
    return path;
  }

  std::string out(const std::string& name) {
    const std::string path = (std::filesystem::path(cfg_.out_dir) / name).string();
    if (std::find(result.written.begin(), result.written.end(), path) ==
        result.written.end()) {
      result.written.push_back(path);
    }
    return path;
  }

  void load_retrieval_inputs() {
    if (loaded_retrieval_) return;
    loaded_retrieval_ = true;
    const bool ensemble =
        !cfg_.ensemble_index.empty() || !cfg_.ensemble_query.empty();
    if (!ensemble) {
      stage("input", kInputStage, [&] {
        if (cfg_.index.empty() || cfg_.query.empty()) {
          throw Error(ErrorCode::kInvalidConfig,
                      "index and query descriptor files are required");
        }
        index_ = load_normalized(cfg_.index);
        query_ = load_normalized(cfg_.query);
        return 0;
      });
      return;
    }
    stage("ensemble", kEnsembleStage, [&] {
      auto load_all = [](const std::string& list) {
        std::vector<DescriptorMatrix> models;
        for (const auto& path : split(list, ',')) {
          models.push_back(load_normalized(path));
        }
        return models;
      };
      const auto index_models = load_all(cfg_.ensemble_index);
      const auto query_models = load_all(cfg_.ensemble_query);
      if (index_models.size() != query_models.size()) {
        throw Error(ErrorCode::kCountMismatch,
                    "ensemble_index and ensemble_query list different model "
                    "counts");
      }
      log_ << "[ensemble] concatenating " << index_models.size()
           << " models\n";
      index_ = concat_ensemble(index_models);
      query_ = concat_ensemble(query_models);
      save_descriptors(index_, out_descriptors("index_ensemble.gldv"));
      save_descriptors(query_, out_descriptors("query_ensemble.gldv"));
      return 0;
    });
  }

  void load_recognition_inputs() {
    if (loaded_recognition_) return;
    loaded_recognition_ = true;
    load_retrieval_inputs_for_query();
    stage("input", kInputStage, [&] {
      if (cfg_.train.empty() || cfg_.train_labels.empty()) {
        throw Error(ErrorCode::kInvalidConfig,
                    "train descriptors and train labels are required");
      }
      train_ = load_normalized(cfg_.train);
      labels_ = load_labels(cfg_.train_labels);
      if (cfg_.use_spatial || cfg_.clean_train) {
        if (cfg_.features.empty()) {
          throw Error(ErrorCode::kInvalidConfig,
                      "local features are required for spatial verification");
        }
        features_ = load_local_features(cfg_.features);
      }
      return 0;
    });
    if (cfg_.clean_train) {
      stage("clean", kCleaningStage, [&] {
        log_ << "[clean] k=" << cfg_.clean_k << " cap=" << cfg_.verify_cap
             << " t_frequency=" << cfg_.t_frequency << "\n";
        const auto report =
            clean_train_set(train_, labels_, features_, cfg_.cleaning());
        auto [train, labels] = apply_cleaning(report, train_, labels_);
        log_ << "[clean] kept " << train.rows() << " of " << train_.rows()
             << "\n";
        std::string kept;
        for (const auto& id : report.kept_ids()) kept += id + "\n";
        write_file(out("kept_ids.txt"), kept);
        train_ = std::move(train);
        labels_ = std::move(labels);
        return 0;
      });
    }
  }

  // Recognition needs test (and index) descriptors even when only the
  // recognition pipeline runs.
  void load_retrieval_inputs_for_query() {
    if (!cfg_.query.empty() || !cfg_.ensemble_query.empty()) {
      if (!cfg_.index.empty() || !cfg_.ensemble_index.empty()) {
        load_retrieval_inputs();
        return;
      }
      stage("input", kInputStage, [&] {
        query_ = load_normalized(cfg_.query);
        return 0;
      });
      return;
    }
    throw StageError("input", kInputStage, "query descriptors are required");
  }

  const std::vector<Prediction>& test_predictions() {
    if (!test_preds_) {
      load_recognition_inputs();
      test_preds_ = stage("recognition", kRecognitionStage, [&] {
        log_ << "[recognition] predicting " << query_.rows()
             << " test images (knn=" << cfg_.knn
             << ", t=" << format_double(cfg_.t)
             << ", spatial=" << (cfg_.use_spatial ? "on" : "off") << ")\n";
        auto preds = recognize(query_, cfg_.recognition());
        save_predictions_csv(preds, out("test_predictions.csv"));
        return preds;
      });
    }
    return *test_preds_;
  }

  std::vector<Prediction> recognize(const DescriptorMatrix& queries,
                                    const RecognitionConfig& rc) {
    return recognize_batch(queries, train_, labels_, features_, rc);
  }

  std::vector<RankedList> search(const DescriptorMatrix& query,
                                 const DescriptorMatrix& index) {
    SearchOptions opts;
    opts.threads = cfg_.threads;
    std::vector<RankedList> lists;
    for (const auto& n : knn_search(query, index, cfg_.cap, opts)) {
      lists.push_back(to_ranked_list(n));
    }
    return lists;
  }

  void record_map(const std::string& name, const std::vector<RankedList>& lists,
                  const RelevanceTable& truth) {
    const double v = stage("evaluate", kEvaluateStage, [&] {
      return map_at_k(lists, truth, cfg_.cap).value;
    });
    record("retrieval", name, "map@" + std::to_string(cfg_.cap), v);
  }

  void record(const std::string& group, const std::string& name,
              const std::string& metric, double value) {
    result.metrics.push_back({group + "/" + name, metric, value});
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    log_ << "[metric] " << group << " " << name << " " << metric << " = " << buf
         << "\n";
  }

  void write_metrics(const std::string& file, const std::string& group) {
    std::string text = "stage,metric,value,delta\n";
    double previous = 0.0;
    bool first = true;
    for (const auto& m : result.metrics) {
      if (m.stage.rfind(group + "/", 0) != 0) continue;
      text += m.stage.substr(group.size() + 1) + "," + m.metric + "," +
              format_double(m.value) + "," +
              (first ? std::string() : format_double(m.value - previous)) + "\n";
      previous = m.value;
      first = false;
    }
    write_file(out(file), text);
  }

  PipelineConfig cfg_;
  std::ostream& log_;
  bool loaded_retrieval_ = false;
  bool loaded_recognition_ = false;
  DescriptorMatrix index_, query_, train_;
  LabelTable labels_;
  LocalFeatureSet features_;
  std::optional<std::vector<Prediction>> test_preds_;
};

}  // namespace

PipelineResult run_retrieval_pipeline(const PipelineConfig& cfg,
                                      std::ostream& log) {
  Runner runner(cfg, log);
  runner.run_retrieval();
  return runner.result;
}

PipelineResult run_recognition_pipeline(const PipelineConfig& cfg,
                                        std::ostream& log) {
  Runner runner(cfg, log);
  runner.run_recognition();
  return runner.result;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
  Runner runner(cfg, log);
  runner.run_retrieval();
  if (!cfg.train.empty()) runner.run_recognition();
  runner.write_manifest();
  return runner.result;
}

std::string build_manifest(const PipelineConfig& cfg,
                           const std::vector<std::string>& outputs) {
  std::string text;
  text += "config_hash: " + hex64(cfg.hash()) + "\n";
  text += "seed: " + std::to_string(cfg.seed) + "\n";
  auto add_input = [&](const std::string& key, const std::string& path) {
    if (path.empty()) return;
    text += "input " + key + " " + path + " " + hex64(file_checksum(path)) + "\n";
  };
  auto add_descriptor_input = [&](const std::string& key,
                                  const std::string& paths) {
    if (paths.empty()) return;
    for (const auto& p : split(paths, ',')) {
      add_input(key, p);
      add_input(key + ".ids", p + ".ids");
    }
  };
  add_descriptor_input("train", cfg.train);
  add_input("train_labels", cfg.train_labels);
  add_descriptor_input("index", cfg.index);
  add_descriptor_input("query", cfg.query);
  add_descriptor_input("ensemble_index", cfg.ensemble_index);
  add_descriptor_input("ensemble_query", cfg.ensemble_query);
  add_input("features", cfg.features);
  add_input("retrieval_truth", cfg.retrieval_truth);
  add_input("recognition_truth", cfg.recognition_truth);
  for (const auto& path : outputs) {
    text += "output " + std::filesystem::path(path).filename().string() + " " +
            hex64(file_checksum(path)) + "\n";
  }
  text += "config:\n";
  for (const auto& key : PipelineConfig::keys()) {
    if (key == "threads" || key == "out_dir") continue;
    text += "  " + key + "=" + cfg.get(key) + "\n";
  }
  return text;
}

}  // namespace lmk
