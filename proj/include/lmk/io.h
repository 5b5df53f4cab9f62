#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lmk/dataset.h"
#include "lmk/metrics.h"

namespace lmk {

// Retrieval submission: header "id,images", index ids space-separated.
// Scores are not stored; loaded entries carry score 0.
void save_ranked_csv(const std::vector<RankedList>& lists,
                     const std::string& path);
std::vector<RankedList> load_ranked_csv(const std::string& path);

// Recognition submission: header "id,landmarks", value "<label> <confidence>"
// (empty when there is no prediction). Confidences use shortest round-trip
// formatting, so a save/load cycle is exact.
void save_predictions_csv(const std::vector<Prediction>& preds,
                          const std::string& path);
std::vector<Prediction> load_predictions_csv(const std::string& path);

// Retrieval truth: header "id,images" or "id,images,ignore".
void save_relevance_csv(const RelevanceTable& truth, const std::string& path);
RelevanceTable load_relevance_csv(const std::string& path);

// Recognition truth: header "id,landmark_id"; an empty label marks a
// non-landmark query.
void save_recognition_truth_csv(const RecognitionTruth& truth,
                                const std::string& path);
RecognitionTruth load_recognition_truth_csv(const std::string& path);

// Verification pairs: header "src,dst".
std::vector<std::pair<std::string, std::string>> load_pairs_csv(
    const std::string& path);

// Splits CSV text into rows of fields (no quoting). The first row must equal
// one of the accepted headers; returns the index of the matched header.
struct CsvTable {
  std::size_t header_index = 0;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};
CsvTable read_csv(const std::string& path,
                  const std::vector<std::string>& accepted_headers);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace lmk
