#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmk/cleaning.h"
#include "lmk/dataset.h"
#include "lmk/recognition.h"
#include "lmk/rerank.h"
#include "lmk/vector_ops.h"

namespace lmk {

// Every tunable of the engine in one flat record.
struct PipelineConfig {
  // Inputs. `query` holds test descriptors, `index` the database.
  std::string train;
  std::string train_labels;
  std::string index;
  std::string query;
  std::string features;
  // Comma-separated per-model descriptor files; when set they replace
  // index/query and are concatenated in the given order.
  std::string ensemble_index;
  std::string ensemble_query;
  std::string retrieval_truth;
  std::string recognition_truth;
  std::string out_dir = "pipeline_out";

  std::uint64_t seed = 0;
  int threads = 0;  // 0: LP_THREADS or hardware concurrency

  // Cleaning.
  bool clean_train = false;
  std::size_t clean_k = 1000;
  std::size_t verify_cap = 100;
  std::size_t t_frequency = 2;

  // Spatial verification.
  int inlier_threshold = 30;
  int ransac_iterations = 1000;
  double reprojection_tolerance = 3.0;
  double match_distance_max = 0.8;
  bool mutual_check = true;

  // Recognition.
  std::size_t knn = 3;
  double t = 70.0;
  bool use_spatial = true;
  bool spatial_outside_sum = false;
  bool suppress = true;
  std::size_t distractor_threshold = 30;

  // Retrieval.
  std::size_t cap = 100;
  bool dba = true;
  bool qe = true;
  std::size_t dba_k = 10;
  std::size_t qe_k = 10;
  double qe_alpha = 3.0;
  bool rerank = true;
  double rerank_min_confidence = -1.0;  // < 0: off

  // Descriptor numerics (mathcheck and documentation).
  double gem_p = 3.0;
  double margin = 0.3;
  double margin_scale = 30.0;
  std::vector<double> scales{0.75, 1.0, 1.25};

  // key=value access. Unknown keys and unparsable values throw
  // Error(kInvalidConfig).
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Canonical "key=value\n" text of every key.
  std::string serialize() const;
  // Hash of the canonical text without run-local keys (threads, out_dir).
  std::uint64_t hash() const;

  RansacConfig ransac() const;
  RecognitionConfig recognition() const;
  CleaningConfig cleaning() const;
  RerankOptions rerank_options() const;

  void validate() const;
};

// Flat key=value text; '#' starts a comment line.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::string& path);

// Pipeline failure tagged with the stage that raised it. exit_code() is the
// stage's process exit status.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, int exit_code, const std::string& cause)
      : std::runtime_error(stage + ": " + cause),
        stage_(std::move(stage)),
        exit_code_(exit_code) {}
  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

struct StageMetric {
  std::string stage;
  std::string metric;
  double value = 0.0;
};

struct PipelineResult {
  std::vector<std::string> written;  // output files, in write order
  std::vector<StageMetric> metrics;
};

// Ensemble -> DBA/QE -> search -> recognition of test and index -> rerank.
// Each stage's output lands in cfg.out_dir.
PipelineResult run_retrieval_pipeline(const PipelineConfig& cfg,
                                      std::ostream& log);

// Soft-voting -> distractor suppression -> GAP.
PipelineResult run_recognition_pipeline(const PipelineConfig& cfg,
                                        std::ostream& log);

// Both pipelines sharing one test-recognition pass, plus manifest.txt.
PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream& log);

// "key: value" manifest text: config hash, seed, and checksums of each
// input and output file.
std::string build_manifest(const PipelineConfig& cfg,
                           const std::vector<std::string>& outputs);

std::uint64_t file_checksum(const std::string& path);

}  // namespace lmk
