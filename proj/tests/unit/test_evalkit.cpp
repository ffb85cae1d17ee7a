#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "guidecap/errors.hpp"
#include "guidecap/evalkit.hpp"
#include "support/tmpdir.hpp"

using namespace guidecap;

namespace {

// Registry with one in-vocabulary pair and one novel candidate ("zeb").
Vocab eval_vocab() {
  Scene s;
  s.id = 0;
  s.objects = {"cat", "dog"};
  s.features = {0.0};
  s.captions = {{"a", "cat", "sits"}, {"a", "dog", "sits"}};
  return build_vocab({s}, 1, {"cat", "dog", "zeb"}, {{"zeb", "dog"}, {"cat", "dog"}});
}

MetricReport sample_report() {
  MetricReport r;
  r.avg_num = 2.0;
  r.avg_recall = 0.75;
  r.per_category_recall = {{"cup", 0.5}, {"dog", 1.0}};
  r.macro_f1 = 2.0 / 3.0;
  r.per_category_f1 = {{"zeb", 2.0 / 3.0}};
  r.uniqueness = 1.5;
  return r;
}

}  // namespace

TEST_CASE("avg_num counts distinct mentioned categories per image") {
  Vocab vocab = eval_vocab();

  DescriptionSet one;
  one.scene_id = 0;
  one.captions = {{"a", "dog", "sits"}, {"the", "dog", "and", "the", "cat"}};
  CHECK(avg_num({one}, vocab) == 2.0);

  DescriptionSet none;
  none.scene_id = 1;
  none.captions = {{"nothing", "here"}};
  CHECK(avg_num({none}, vocab) == 0.0);
  CHECK(avg_num({one, none}, vocab) == 1.0);

  // Novel candidates belong to the registry even though they are out of
  // vocabulary, so guided novel captions count.
  DescriptionSet novel;
  novel.scene_id = 2;
  novel.captions = {{"a", "zeb", "grazes"}};
  CHECK(avg_num({novel}, vocab) == 1.0);

  // Repeating a caption or reordering the set changes nothing.
  DescriptionSet doubled = one;
  doubled.captions.push_back(one.captions[0]);
  std::reverse(doubled.captions.begin(), doubled.captions.end());
  CHECK(avg_num({doubled}, vocab) == 2.0);

  CHECK_THROWS_AS(avg_num({}, vocab), DataError);
}

TEST_CASE("category recall averages per-category hit rates over supporting images") {
  // cup present in two images but mentioned in one, dog present and mentioned
  // in one: recall(cup) = 0.5, recall(dog) = 1.0, macro = 0.75.
  DescriptionSet a;
  a.scene_id = 10;
  a.captions = {{"a", "cup", "on", "a", "table"}};
  DescriptionSet b;
  b.scene_id = 11;
  b.captions = {{"a", "dog", "runs"}};
  std::map<int, std::vector<std::string>> labels = {{10, {"cup"}}, {11, {"cup", "dog"}}};

  RecallReport r = category_recall({a, b}, labels);
  REQUIRE(r.per_category.size() == 2);
  CHECK(r.per_category.at("cup") == 0.5);
  CHECK(r.per_category.at("dog") == 1.0);
  CHECK(r.macro == 0.75);

  // A category in no image's labels has no defined recall at all.
  CHECK(r.per_category.count("zeb") == 0);

  DescriptionSet empty;
  empty.scene_id = 10;
  empty.captions = {};
  RecallReport zero = category_recall({empty}, labels);
  CHECK(zero.per_category.at("cup") == 0.0);
  CHECK(zero.macro == 0.0);

  DescriptionSet orphan;
  orphan.scene_id = 99;
  CHECK_THROWS_AS(category_recall({orphan}, labels), DataError);
  CHECK_THROWS_AS(category_recall({}, labels), DataError);
}

TEST_CASE("novel F1 follows the confusion-count definition") {
  // zeb: images 1,2 true positives, image 3 false positive, image 4 false
  // negative -> P = R = 2/3, F1 = 2/3.
  std::map<int, std::vector<std::string>> pred = {
      {1, {"a", "zeb", "grazes"}},
      {2, {"the", "zeb", "stands"}},
      {3, {"a", "zeb", "here"}},
      {4, {"a", "dog", "runs"}},
  };
  std::map<int, std::set<std::string>> labels = {
      {1, {"zeb"}}, {2, {"zeb", "dog"}}, {3, {}}, {4, {"zeb"}}};

  F1Report r = novel_f1(pred, labels, {"zeb"});
  CHECK(r.per_category.at("zeb") == 2.0 / 3.0);
  CHECK(r.macro == 2.0 / 3.0);

  // Self-comparison is perfect; a category with no mentions anywhere scores 0.
  std::map<int, std::vector<std::string>> echo;
  for (const auto& [id, s] : labels) echo[id] = std::vector<std::string>(s.begin(), s.end());
  F1Report self = novel_f1(echo, labels, {"zeb", "cup"});
  CHECK(self.per_category.at("zeb") == 1.0);
  CHECK(self.per_category.at("cup") == 0.0);  // P + R = 0
  CHECK(self.macro == 0.5);

  CHECK_THROWS_AS(novel_f1(pred, labels, {}), DataError);
  std::map<int, std::set<std::string>> short_labels = {{1, {"zeb"}}};
  CHECK_THROWS_AS(novel_f1(pred, short_labels, {"zeb"}), DataError);
  std::map<int, std::set<std::string>> wrong_keys = {
      {1, {"zeb"}}, {2, {}}, {3, {}}, {5, {}}};
  CHECK_THROWS_AS(novel_f1(pred, wrong_keys, {"zeb"}), DataError);
}

TEST_CASE("uniqueness is the number of distinct full surfaces") {
  CHECK(uniqueness({{"a", "dog", "runs"}, {"a", "dog", "runs"}}) == 1);
  CHECK(uniqueness({{"a", "dog", "runs"}, {"the", "dog", "sits"}}) == 2);
  // A strict prefix is a different surface.
  CHECK(uniqueness({{"a", "dog"}, {"a", "dog", "runs"}}) == 2);
  CHECK(uniqueness({{}}) == 1);
  CHECK_THROWS_AS(uniqueness({}), DataError);
}

TEST_CASE("metric reports round-trip and serialize deterministically") {
  testing_support::TmpDir tmp("evalkit");
  MetricReport r = sample_report();

  const std::string path = tmp.str("report.json");
  save_report(path, r);
  MetricReport back = load_report(path);
  CHECK(back.avg_num == r.avg_num);
  CHECK(back.avg_recall == r.avg_recall);
  CHECK(back.per_category_recall == r.per_category_recall);
  CHECK(back.macro_f1 == r.macro_f1);
  CHECK(back.per_category_f1 == r.per_category_f1);
  CHECK(back.uniqueness == r.uniqueness);

  const std::string again = tmp.str("report2.json");
  save_report(again, back);
  std::ifstream f1(path), f2(again);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());

  const std::string csv = tmp.str("report.csv");
  save_report_csv(csv, r);
  std::ifstream fc(csv);
  std::stringstream sc;
  sc << fc.rdbuf();
  CHECK(sc.str() ==
        "category,metric,value\n"
        "-,avg_num,2.0\n"
        "-,avg_recall,0.75\n"
        "cup,recall,0.5\n"
        "dog,recall,1.0\n"
        "-,macro_f1,0.6666666666666666\n"
        "zeb,f1,0.6666666666666666\n"
        "-,uniqueness,1.5\n");

  MetricReport bad = r;
  bad.avg_recall = 1.5;
  CHECK_THROWS_AS(save_report(tmp.str("bad.json"), bad), ContractError);
  bad = r;
  bad.avg_num = -1.0;
  CHECK_THROWS_AS(validate_report(bad), ContractError);
  bad = r;
  bad.per_category_f1["zeb"] = -0.1;
  CHECK_THROWS_AS(validate_report(bad), ContractError);

  CHECK_THROWS_AS(load_report(tmp.str("missing.json")), DataError);
  {
    std::ofstream junk(tmp.str("junk.json"));
    junk << "{ not json";
  }
  CHECK_THROWS_AS(load_report(tmp.str("junk.json")), ParseError);
}
