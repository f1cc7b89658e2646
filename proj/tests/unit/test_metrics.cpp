#include "dentseg/metrics.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using namespace dentseg;
using dentseg::testing::random_label_grid;
using dentseg::testing::TempDir;

TEST_CASE("dice fundamentals") {
  LabelGrid a({4, 4, 4}, {1, 1, 1});
  LabelGrid b = a;

  SUBCASE("both empty flags 1.0") {
    const DiceScore d = dice(a, b, 3);
    CHECK(d.value == 1.0);
    CHECK(d.both_empty);
  }
  SUBCASE("one empty scores 0") {
    a.at(0, 0, 0) = 3;
    const DiceScore d = dice(a, b, 3);
    CHECK(d.value == 0.0);
    CHECK_FALSE(d.both_empty);
  }
  SUBCASE("identical non-empty masks score 1") {
    a.at(1, 1, 1) = 3;
    b.at(1, 1, 1) = 3;
    CHECK(dice(a, b, 3).value == 1.0);
  }
  SUBCASE("disjoint non-empty masks score 0") {
    a.at(0, 0, 0) = 3;
    b.at(1, 0, 0) = 3;
    CHECK(dice(a, b, 3).value == 0.0);
  }
}

TEST_CASE("two 2x2x2 cubes overlapping in half score 0.5") {
  LabelGrid a({4, 4, 4}, {1, 1, 1});
  LabelGrid b({4, 4, 4}, {1, 1, 1});
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        a.at(x, y, z) = 1;
        b.at(x, y + 1, z) = 1; // shift by one: |A|=8, |B|=8, overlap 4
      }
  CHECK(dice(a, b, 1).value == doctest::Approx(0.5));
}

TEST_CASE("dice is symmetric and monotone in the overlap") {
  const LabelGrid a = random_label_grid({6, 6, 6}, 3, 5);
  const LabelGrid b = random_label_grid({6, 6, 6}, 3, 6);
  CHECK(dice(a, b, 1).value == dice(b, a, 1).value);
  CHECK(dice(a, a, 1).value == 1.0);

  // erode a mask progressively; dice against the original must fall
  LabelGrid full({8, 8, 8}, {1, 1, 1});
  for (int z = 1; z < 7; ++z)
    for (int y = 1; y < 7; ++y)
      for (int x = 1; x < 7; ++x)
        full.at(x, y, z) = 1;
  double prev = 1.0;
  LabelGrid shrunk = full;
  for (int step = 0; step < 2; ++step) {
    LabelGrid next({8, 8, 8}, {1, 1, 1});
    for (int z = 1 + step + 1; z < 7 - step - 1; ++z)
      for (int y = 1 + step + 1; y < 7 - step - 1; ++y)
        for (int x = 1 + step + 1; x < 7 - step - 1; ++x)
          next.at(x, y, z) = 1;
    const double d = dice(full, next, 1).value;
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("dice rejects mismatched geometry") {
  const LabelGrid a({4, 4, 4}, {1, 1, 1});
  const LabelGrid b({4, 4, 5}, {1, 1, 1});
  CHECK_THROWS_AS(dice(a, b, 1), std::invalid_argument);
}

TEST_CASE("class volume uses the voxel volume") {
  LabelGrid g({10, 10, 10}, {0.3, 0.3, 0.3});
  for (std::size_t i = 0; i < 1000; ++i)
    g[i] = 2;
  CHECK(class_volume_mm3(g, 2) == doctest::Approx(27.0));
  CHECK(class_volume_mm3(g, 5) == 0.0);

  LabelGrid one({1, 1, 1}, {0.6, 0.6, 0.6}, 1);
  CHECK(class_volume_mm3(one, 1) == doctest::Approx(0.216));
}

TEST_CASE("evaluate_case scores every ranked class") {
  const LabelTable table = LabelTable::builtin();
  LabelGrid ref({8, 8, 8}, {0.5, 0.5, 0.5});
  for (int i = 0; i < 20; ++i)
    ref[std::size_t(i)] = 1;
  for (int i = 20; i < 30; ++i)
    ref[std::size_t(i)] = 7;

  SUBCASE("perfect prediction scores 1 on present classes") {
    const auto scores = evaluate_case(ref, ref, table);
    CHECK(scores.size() == 43);
    for (const auto& s : scores) {
      if (s.present_in_reference)
        CHECK(s.dice == 1.0);
      else
        CHECK(s.both_empty);
    }
  }
  SUBCASE("background-only prediction scores 0 on present classes") {
    const LabelGrid empty({8, 8, 8}, {0.5, 0.5, 0.5});
    for (const auto& s : evaluate_case(empty, ref, table))
      if (s.present_in_reference)
        CHECK(s.dice == 0.0);
  }
  SUBCASE("volumes are reported per class") {
    const auto scores = evaluate_case(ref, ref, table);
    for (const auto& s : scores)
      if (s.class_id == 1) {
        CHECK(s.ref_volume_mm3 == doctest::Approx(20 * 0.125));
        CHECK(s.present_in_reference);
      }
  }
}

TEST_CASE("evaluate_case agrees with a set-intersection oracle") {
  const LabelTable table = LabelTable::builtin();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // random grids over a few consolidated ids
    const int pool[] = {0, 1, 7, 11, 50, 51};
    LabelGrid pred({10, 10, 10}, {1, 1, 1}), ref({10, 10, 10}, {1, 1, 1});
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = Label(pool[splitmix64_at(seed, 2 * i) % 6]);
      ref[i] = Label(pool[splitmix64_at(seed, 2 * i + 1) % 6]);
    }
    const auto scores = evaluate_case(pred, ref, table);
    for (const auto& s : scores) {
      std::set<std::size_t> in_pred, in_ref;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == s.class_id)
          in_pred.insert(i);
        if (ref[i] == s.class_id)
          in_ref.insert(i);
      }
      std::size_t inter = 0;
      for (const std::size_t i : in_pred)
        inter += in_ref.count(i);
      const double expect = in_pred.empty() && in_ref.empty()
                                ? 1.0
                                : 2.0 * double(inter) / double(in_pred.size() + in_ref.size());
      CHECK(s.dice == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

namespace {

CaseReport fake_case(const std::string& name, int fold, double dice_everywhere) {
  CaseReport r;
  r.case_name = name;
  r.fold = fold;
  for (const int id : {1, 7, 50}) {
    ClassScore s;
    s.class_id = id;
    s.name = "c" + std::to_string(id);
    s.dice = dice_everywhere;
    s.present_in_reference = true;
    s.present_in_prediction = true;
    s.ref_volume_mm3 = 100.0;
    r.scores.push_back(s);
  }
  return r;
}

} // namespace

TEST_CASE("aggregation follows the published table layout") {
  SUBCASE("single case aggregates to itself") {
    const EvaluationReport rep = aggregate({fake_case("a", 1, 0.75)});
    CHECK(rep.num_folds == 1);
    for (const auto& row : rep.rows)
      CHECK(row.mean == doctest::Approx(0.75));
    CHECK(rep.overall_mean == doctest::Approx(0.75));
  }
  SUBCASE("fold means average to the grand mean") {
    const EvaluationReport rep = aggregate({fake_case("a", 1, 0.8), fake_case("b", 2, 0.9)});
    CHECK(rep.num_folds == 2);
    for (const auto& row : rep.rows) {
      CHECK(row.fold_mean[0] == doctest::Approx(0.8));
      CHECK(row.fold_mean[1] == doctest::Approx(0.9));
      CHECK(row.mean == doctest::Approx(0.85));
      CHECK(row.n_present == 2);
    }
    CHECK(rep.overall_mean == doctest::Approx(0.85));
    // grand mean bounded by the fold means
    CHECK(rep.overall_mean >= *std::min_element(rep.fold_overall_mean.begin(),
                                                rep.fold_overall_mean.end()) - 1e-12);
    CHECK(rep.overall_mean <= *std::max_element(rep.fold_overall_mean.begin(),
                                                rep.fold_overall_mean.end()) + 1e-12);
  }
  SUBCASE("empty input is an error") {
    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
  }
  SUBCASE("absent classes join the averages only on request") {
    CaseReport with = fake_case("a", 1, 0.8);
    CaseReport without = fake_case("b", 1, 0.4);
    // class 7 absent from case b's reference; its both-empty dice is 1
    without.scores[1].present_in_reference = false;
    without.scores[1].dice = 1.0;
    without.scores[1].both_empty = true;

    const EvaluationReport presence_only = aggregate({with, without});
    CHECK(presence_only.rows[1].n_present == 1);
    CHECK(presence_only.rows[1].mean == doctest::Approx(0.8));

    const EvaluationReport all = aggregate({with, without}, true);
    CHECK(all.rows[1].n_present == 1); // presence count unchanged
    CHECK(all.rows[1].mean == doctest::Approx(0.9));
  }
}

TEST_CASE("csv and json reports carry the exact column set") {
  const TempDir tmp("metrics");
  const EvaluationReport rep = aggregate({fake_case("a", 1, 0.8), fake_case("b", 2, 0.9)});

  const std::string csv = report_csv(rep);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "class_id,structure,n_present,avg_ref_volume_mm3,fold_1,fold_2,mean");

  std::string first_row;
  std::getline(lines, first_row);
  CHECK(first_row == "1,c1,2,100,0.8,0.9,0.85");

  write_report_csv(rep, tmp.file("r.csv"));
  write_report_json(rep, tmp.file("r.json"));

  std::ifstream jf(tmp.file("r.json"));
  const auto j = nlohmann::json::parse(jf);
  CHECK(j["num_folds"] == 2);
  CHECK(j["classes"].size() == 3);
  CHECK(j["classes"][0]["class_id"] == 1);
  CHECK(j["classes"][0]["structure"] == "c1");
  CHECK(j["classes"][0]["n_present"] == 2);
  CHECK(j["classes"][0]["fold_mean"][0] == doctest::Approx(0.8));
  CHECK(j["classes"][0]["mean"] == doctest::Approx(0.85));
  CHECK(j["overall_mean"] == doctest::Approx(rep.overall_mean));
}
