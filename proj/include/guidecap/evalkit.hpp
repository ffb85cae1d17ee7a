#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "guidecap/corpus.hpp"

namespace guidecap {

// The captions produced for one image, e.g. one per selected guiding object.
// Duplicates are allowed; uniqueness is measured separately.
struct DescriptionSet {
  int scene_id = -1;
  std::vector<std::vector<std::string>> captions;
};

// Category surfaces appearing as a token in any of the captions. Matching is
// exact and single-token: the synthetic object names are single words.
std::set<std::string> mentioned_surfaces(const std::vector<std::vector<std::string>>& captions,
                                         const std::vector<std::string>& category_surfaces);

// Mean over images of the number of distinct object categories mentioned in
// the image's description set. The registry in `vocab` defines the category
// universe, novel candidates included.
double avg_num(const std::vector<DescriptionSet>& sets, const Vocab& vocab);

struct RecallReport {
  std::map<std::string, double> per_category;
  double macro = 0.0;
};

// recall(c) = among images whose detection labels contain c, the fraction
// whose description set mentions c. A category present in no image has no
// defined recall and is left out of both the map and the macro average.
RecallReport category_recall(const std::vector<DescriptionSet>& sets,
                             const std::map<int, std::vector<std::string>>& detection_labels);

struct F1Report {
  std::map<std::string, double> per_category;
  double macro = 0.0;
};

// Per category: TP = prediction and labels both mention it, FP = prediction
// only, FN = labels only; F1 = 2PR/(P+R), defined as 0 when P+R = 0. macro
// averages the requested categories unweighted. predictions holds the single
// caption produced for each image; labels must cover exactly the same images.
F1Report novel_f1(const std::map<int, std::vector<std::string>>& predictions,
                  const std::map<int, std::set<std::string>>& labels,
                  const std::vector<std::string>& novel_categories);

// Distinct full surfaces among the captions generated for one fixed guiding
// object; callers average the counts over (image, object) pairs.
int uniqueness(const std::vector<std::vector<std::string>>& captions);

struct MetricReport {
  double avg_num = 0.0;
  double avg_recall = 0.0;
  std::map<std::string, double> per_category_recall;
  double macro_f1 = 0.0;
  std::map<std::string, double> per_category_f1;
  double uniqueness = 0.0;
};

// Rates must sit in [0, 1]; the two count averages must be non-negative.
void validate_report(const MetricReport& r);

// JSON document and a flat category,metric,value table. Both writers are
// deterministic: equal reports serialize to identical bytes.
void save_report(const std::string& path, const MetricReport& r);
MetricReport load_report(const std::string& path);
void save_report_csv(const std::string& path, const MetricReport& r);

}  // namespace guidecap
