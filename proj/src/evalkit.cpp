#include "guidecap/evalkit.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "guidecap/errors.hpp"

namespace guidecap {

using ordered_json = nlohmann::ordered_json;

std::set<std::string> mentioned_surfaces(const std::vector<std::vector<std::string>>& captions,
                                         const std::vector<std::string>& category_surfaces) {
  std::set<std::string> universe(category_surfaces.begin(), category_surfaces.end());
  std::set<std::string> found;
  for (const auto& caption : captions) {
    for (const auto& tok : caption) {
      if (universe.count(tok)) found.insert(tok);
    }
  }
  return found;
}

double avg_num(const std::vector<DescriptionSet>& sets, const Vocab& vocab) {
  if (sets.empty()) throw DataError("avg_num needs at least one description set");
  std::vector<std::string> universe;
  for (const auto& cat : vocab.categories()) universe.push_back(cat.surface);
  double total = 0.0;
  for (const auto& set : sets) {
    total += static_cast<double>(mentioned_surfaces(set.captions, universe).size());
  }
  return total / static_cast<double>(sets.size());
}

RecallReport category_recall(const std::vector<DescriptionSet>& sets,
                             const std::map<int, std::vector<std::string>>& detection_labels) {
  if (sets.empty()) throw DataError("category_recall needs at least one description set");
  std::map<std::string, int> present;
  std::map<std::string, int> hit;
  for (const auto& set : sets) {
    auto it = detection_labels.find(set.scene_id);
    if (it == detection_labels.end()) {
      throw DataError("scene " + std::to_string(set.scene_id) + " has no detection labels");
    }
    const auto mentioned = mentioned_surfaces(set.captions, it->second);
    std::set<std::string> labels(it->second.begin(), it->second.end());
    for (const auto& c : labels) {
      present[c] += 1;
      if (mentioned.count(c)) hit[c] += 1;
    }
  }
  RecallReport report;
  double sum = 0.0;
  for (const auto& [c, n] : present) {
    const double r = static_cast<double>(hit[c]) / static_cast<double>(n);
    report.per_category[c] = r;
    sum += r;
  }
  report.macro = present.empty() ? 0.0 : sum / static_cast<double>(present.size());
  return report;
}

F1Report novel_f1(const std::map<int, std::vector<std::string>>& predictions,
                  const std::map<int, std::set<std::string>>& labels,
                  const std::vector<std::string>& novel_categories) {
  if (novel_categories.empty()) throw DataError("novel category list is empty");
  if (predictions.size() != labels.size()) {
    throw DataError("predictions and labels cover different image sets");
  }
  for (const auto& [id, caption] : predictions) {
    if (!labels.count(id)) {
      throw DataError("prediction for scene " + std::to_string(id) + " has no labels");
    }
  }

  F1Report report;
  for (const auto& c : novel_categories) {
    int tp = 0, fp = 0, fn = 0;
    for (const auto& [id, caption] : predictions) {
      bool predicted = false;
      for (const auto& tok : caption) {
        if (tok == c) {
          predicted = true;
          break;
        }
      }
      const bool labeled = labels.at(id).count(c) > 0;
      if (predicted && labeled) tp += 1;
      if (predicted && !labeled) fp += 1;
      if (!predicted && labeled) fn += 1;
    }
    const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    report.per_category[c] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  double sum = 0.0;
  for (const auto& [c, f1] : report.per_category) sum += f1;
  report.macro = sum / static_cast<double>(report.per_category.size());
  return report;
}

int uniqueness(const std::vector<std::vector<std::string>>& captions) {
  if (captions.empty()) throw DataError("uniqueness needs at least one caption");
  std::set<std::vector<std::string>> distinct(captions.begin(), captions.end());
  return static_cast<int>(distinct.size());
}

namespace {

void require_rate(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ContractError(std::string(what) + " must lie in [0, 1]");
  }
}

}  // namespace

void validate_report(const MetricReport& r) {
  if (!(r.avg_num >= 0.0)) throw ContractError("avg_num must be non-negative");
  if (!(r.uniqueness >= 0.0)) throw ContractError("uniqueness must be non-negative");
  require_rate(r.avg_recall, "avg_recall");
  require_rate(r.macro_f1, "macro_f1");
  for (const auto& [c, v] : r.per_category_recall) require_rate(v, "per-category recall");
  for (const auto& [c, v] : r.per_category_f1) require_rate(v, "per-category f1");
}

void save_report(const std::string& path, const MetricReport& r) {
  validate_report(r);
  ordered_json doc;
  doc["format"] = "guidecap-metrics";
  doc["version"] = 1;
  doc["avg_num"] = r.avg_num;
  doc["avg_recall"] = r.avg_recall;
  doc["per_category_recall"] = ordered_json::object();
  for (const auto& [c, v] : r.per_category_recall) doc["per_category_recall"][c] = v;
  doc["macro_f1"] = r.macro_f1;
  doc["per_category_f1"] = ordered_json::object();
  for (const auto& [c, v] : r.per_category_f1) doc["per_category_f1"][c] = v;
  doc["uniqueness"] = r.uniqueness;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

MetricReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
    if (doc.at("format") != "guidecap-metrics" || doc.at("version") != 1) {
      throw DataError("not a guidecap-metrics file");
    }
    MetricReport r;
    r.avg_num = doc.at("avg_num").get<double>();
    r.avg_recall = doc.at("avg_recall").get<double>();
    for (const auto& [c, v] : doc.at("per_category_recall").items()) {
      r.per_category_recall[c] = v.get<double>();
    }
    r.macro_f1 = doc.at("macro_f1").get<double>();
    for (const auto& [c, v] : doc.at("per_category_f1").items()) {
      r.per_category_f1[c] = v.get<double>();
    }
    r.uniqueness = doc.at("uniqueness").get<double>();
    validate_report(r);
    return r;
  } catch (const ordered_json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_report_csv(const std::string& path, const MetricReport& r) {
  validate_report(r);
  const auto fmt = [](double v) { return ordered_json(v).dump(); };
  std::ostringstream out;
  out << "category,metric,value\n";
  out << "-,avg_num," << fmt(r.avg_num) << "\n";
  out << "-,avg_recall," << fmt(r.avg_recall) << "\n";
  for (const auto& [c, v] : r.per_category_recall) out << c << ",recall," << fmt(v) << "\n";
  out << "-,macro_f1," << fmt(r.macro_f1) << "\n";
  for (const auto& [c, v] : r.per_category_f1) out << c << ",f1," << fmt(v) << "\n";
  out << "-,uniqueness," << fmt(r.uniqueness) << "\n";
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open " + path + " for writing");
  file << out.str();
  if (!file) throw DataError("failed writing " + path);
}

}  // namespace guidecap
