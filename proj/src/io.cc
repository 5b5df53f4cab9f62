#include "lmk/io.h"

#include <algorithm>
#include <charconv>

#include "lmk/util.h"

namespace lmk {
namespace {

void check_token(const std::string& token, const char* what) {
  if (token.find_first_of(", \n\r") != std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " \"" + token +
                    "\" contains a separator character");
  }
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += ids[i];
  }
  return out;
}

std::vector<std::string> split_ids(std::string_view s) {
  std::vector<std::string> out;
  for (auto& part : split(s, ' ')) {
    if (!part.empty()) out.push_back(std::move(part));
  }
  return out;
}

Error row_error(const std::string& path, std::size_t line,
                const std::string& what) {
  return Error(ErrorCode::kMalformedRow,
               path + ": line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

CsvTable read_csv(const std::string& path,
                  const std::vector<std::string>& accepted_headers) {
  const std::string text = read_file(path);
  CsvTable table;
  std::size_t start = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      auto it = std::find(accepted_headers.begin(), accepted_headers.end(), line);
      if (it == accepted_headers.end()) {
        throw Error(ErrorCode::kMissingHeader,
                    path + ": expected header \"" + accepted_headers.front() +
                        "\"");
      }
      table.header_index =
          static_cast<std::size_t>(it - accepted_headers.begin());
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    table.rows.push_back(split(line, ','));
    table.line_numbers.push_back(line_no);
  }
  if (!header_seen) {
    throw Error(ErrorCode::kMissingHeader, path + ": empty file, no header");
  }
  return table;
}

void save_ranked_csv(const std::vector<RankedList>& lists,
                     const std::string& path) {
  std::string out = "id,images\n";
  for (const auto& list : lists) {
    check_token(list.query_id, "query id");
    out += list.query_id;
    out += ',';
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
      check_token(list.entries[i].id, "index id");
      if (i) out += ' ';
      out += list.entries[i].id;
    }
    out += '\n';
  }
  write_file(path, out);
}

std::vector<RankedList> load_ranked_csv(const std::string& path) {
  const CsvTable table = read_csv(path, {"id,images"});
  std::vector<RankedList> lists;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 2 || row[0].empty()) {
      throw row_error(path, table.line_numbers[r], "expected id,images");
    }
    RankedList list;
    list.query_id = row[0];
    for (auto& id : split_ids(row[1])) list.entries.push_back({std::move(id), 0.0});
    lists.push_back(std::move(list));
  }
  return lists;
}

void save_predictions_csv(const std::vector<Prediction>& preds,
                          const std::string& path) {
  std::string out = "id,landmarks\n";
  for (const auto& p : preds) {
    check_token(p.query_id, "query id");
    out += p.query_id;
    out += ',';
    if (!p.label.empty()) {
      check_token(p.label, "label");
      out += p.label;
      out += ' ';
      out += format_double(p.confidence);
    }
    out += '\n';
  }
  write_file(path, out);
}

std::vector<Prediction> load_predictions_csv(const std::string& path) {
  const CsvTable table = read_csv(path, {"id,landmarks"});
  std::vector<Prediction> preds;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    if (row.size() != 2 || row[0].empty()) {
      throw row_error(path, line, "expected id,landmarks");
    }
    Prediction p;
    p.query_id = row[0];
    const auto parts = split_ids(row[1]);
    if (parts.size() == 2) {
      p.label = parts[0];
      const std::string& conf = parts[1];
      auto [ptr, ec] =
          std::from_chars(conf.data(), conf.data() + conf.size(), p.confidence);
      if (ec != std::errc() || ptr != conf.data() + conf.size()) {
        throw row_error(path, line, "bad confidence \"" + conf + "\"");
      }
      p.label_scores.emplace_back(p.label, p.confidence);
    } else if (!parts.empty()) {
      throw row_error(path, line, "expected \"<label> <confidence>\"");
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

void save_relevance_csv(const RelevanceTable& truth, const std::string& path) {
  bool any_ignore = false;
  for (const auto& q : truth.query_ids()) {
    if (!truth.find(q)->ignore.empty()) any_ignore = true;
  }
  std::string out = any_ignore ? "id,images,ignore\n" : "id,images\n";
  for (const auto& q : truth.query_ids()) {
    const QueryRelevance& rel = *truth.find(q);
    std::vector<std::string> relevant(rel.relevant.begin(), rel.relevant.end());
    std::vector<std::string> ignore(rel.ignore.begin(), rel.ignore.end());
    std::sort(relevant.begin(), relevant.end());
    std::sort(ignore.begin(), ignore.end());
    out += q + ',' + join_ids(relevant);
    if (any_ignore) out += ',' + join_ids(ignore);
    out += '\n';
  }
  write_file(path, out);
}

RelevanceTable load_relevance_csv(const std::string& path) {
  const CsvTable table = read_csv(path, {"id,images", "id,images,ignore"});
  const std::size_t fields = table.header_index == 0 ? 2 : 3;
  RelevanceTable truth;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != fields) {
      throw row_error(path, table.line_numbers[r],
                      "expected " + std::to_string(fields) + " fields");
    }
    truth.add(row[0], split_ids(row[1]),
              fields == 3 ? split_ids(row[2]) : std::vector<std::string>{});
  }
  return truth;
}

void save_recognition_truth_csv(const RecognitionTruth& truth,
                                const std::string& path) {
  std::string out = "id,landmark_id\n";
  for (const auto& id : truth.test_ids()) {
    const auto& label = *truth.find(id);
    out += id + ',' + (label ? *label : std::string()) + '\n';
  }
  write_file(path, out);
}

RecognitionTruth load_recognition_truth_csv(const std::string& path) {
  const CsvTable table = read_csv(path, {"id,landmark_id"});
  RecognitionTruth truth;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 2) {
      throw row_error(path, table.line_numbers[r], "expected id,landmark_id");
    }
    truth.add(row[0], row[1].empty() ? std::nullopt
                                     : std::optional<std::string>(row[1]));
  }
  return truth;
}

std::vector<std::pair<std::string, std::string>> load_pairs_csv(
    const std::string& path) {
  const CsvTable table = read_csv(path, {"src,dst"});
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 2 || row[0].empty() || row[1].empty()) {
      throw row_error(path, table.line_numbers[r], "expected src,dst");
    }
    pairs.emplace_back(row[0], row[1]);
  }
  return pairs;
}

}  // namespace lmk
