#include "dentseg/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dentseg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_geometry(const LabelGrid& a, const LabelGrid& b) {
  if (!a.same_geometry(b))
    throw std::invalid_argument("label grids have mismatched geometry");
}

std::string format_double(double v) {
  if (std::isnan(v))
    return "";
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

} // namespace

DiceScore dice(const LabelGrid& pred, const LabelGrid& ref, Label class_id) {
  require_same_geometry(pred, ref);
  std::uint64_t a = 0, b = 0, inter = 0;
  const auto& pd = pred.data();
  const auto& rd = ref.data();
  for (std::size_t i = 0; i < pd.size(); ++i) {
    const bool in_a = pd[i] == class_id;
    const bool in_b = rd[i] == class_id;
    a += in_a;
    b += in_b;
    inter += in_a && in_b;
  }
  if (a == 0 && b == 0)
    return {1.0, true};
  return {2.0 * double(inter) / double(a + b), false};
}

double class_volume_mm3(const LabelGrid& lbl, Label class_id) {
  std::uint64_t n = 0;
  for (const Label v : lbl.data())
    n += v == class_id;
  return double(n) * lbl.spacing().voxel_volume_mm3();
}

std::vector<ClassScore> evaluate_case(const LabelGrid& pred, const LabelGrid& ref,
                                      const LabelTable& table) {
  require_same_geometry(pred, ref);

  // single sweep: per-class sizes and the diagonal of the pred x ref
  // co-occurrence restricted to equal ids
  std::vector<std::uint64_t> pred_count, ref_count, inter_count;
  auto grow = [](std::vector<std::uint64_t>& v, std::size_t n) {
    if (v.size() <= n)
      v.resize(n + 1, 0);
  };
  const auto& pd = pred.data();
  const auto& rd = ref.data();
  for (std::size_t i = 0; i < pd.size(); ++i) {
    grow(pred_count, pd[i]);
    grow(ref_count, rd[i]);
    ++pred_count[pd[i]];
    ++ref_count[rd[i]];
    if (pd[i] == rd[i]) {
      grow(inter_count, pd[i]);
      ++inter_count[pd[i]];
    }
  }
  auto count_of = [](const std::vector<std::uint64_t>& v, std::size_t id) {
    return id < v.size() ? v[id] : std::uint64_t(0);
  };

  const double vox = pred.spacing().voxel_volume_mm3();
  std::vector<ClassScore> out;
  for (const int cid : table.ranked_consolidated_ids()) {
    const auto id = std::size_t(cid);
    ClassScore s;
    s.class_id = cid;
    s.name = table.name_of_dense(table.dense_from_challenge(cid));
    const std::uint64_t a = count_of(pred_count, id);
    const std::uint64_t b = count_of(ref_count, id);
    const std::uint64_t inter = count_of(inter_count, id);
    s.present_in_prediction = a > 0;
    s.present_in_reference = b > 0;
    s.pred_volume_mm3 = double(a) * vox;
    s.ref_volume_mm3 = double(b) * vox;
    if (a == 0 && b == 0) {
      s.dice = 1.0;
      s.both_empty = true;
    } else {
      s.dice = 2.0 * double(inter) / double(a + b);
    }
    out.push_back(std::move(s));
  }
  return out;
}

double CaseReport::mean_dice_present() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : scores)
    if (s.present_in_reference) {
      sum += s.dice;
      ++n;
    }
  return n == 0 ? kNaN : sum / double(n);
}

EvaluationReport aggregate(const std::vector<CaseReport>& cases, bool include_absent) {
  if (cases.empty())
    throw std::invalid_argument("aggregate requires at least one case report");

  int num_folds = 0;
  for (const auto& c : cases) {
    if (c.fold < 1)
      throw std::invalid_argument("fold indices are 1-based");
    num_folds = std::max(num_folds, c.fold);
  }

  // class set from the first report; all reports must agree
  const auto& first = cases.front().scores;
  for (const auto& c : cases)
    if (c.scores.size() != first.size())
      throw std::invalid_argument("case reports score different class sets");

  EvaluationReport rep;
  rep.num_folds = num_folds;
  rep.num_cases = cases.size();

  struct Acc {
    double dice_sum = 0;
    std::uint64_t n = 0;
  };

  for (std::size_t k = 0; k < first.size(); ++k) {
    AggregateRow row;
    row.class_id = first[k].class_id;
    row.structure = first[k].name;
    std::vector<Acc> fold_acc(static_cast<std::size_t>(num_folds));
    Acc pooled;
    double vol_sum = 0;
    for (const auto& c : cases) {
      const ClassScore& s = c.scores[k];
      if (s.class_id != row.class_id)
        throw std::invalid_argument("case reports score different class sets");
      if (s.present_in_reference) {
        ++row.n_present;
        vol_sum += s.ref_volume_mm3;
      } else if (!include_absent) {
        continue;
      }
      fold_acc[std::size_t(c.fold - 1)].dice_sum += s.dice;
      ++fold_acc[std::size_t(c.fold - 1)].n;
      pooled.dice_sum += s.dice;
      ++pooled.n;
    }
    row.avg_ref_volume_mm3 = row.n_present ? vol_sum / row.n_present : kNaN;
    for (const auto& f : fold_acc)
      row.fold_mean.push_back(f.n ? f.dice_sum / double(f.n) : kNaN);
    row.mean = pooled.n ? pooled.dice_sum / double(pooled.n) : kNaN;
    rep.rows.push_back(std::move(row));
  }

  // overall = mean of per-class means over classes with any presence;
  // fold overall likewise per fold
  for (int f = 0; f < num_folds; ++f) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& row : rep.rows)
      if (!std::isnan(row.fold_mean[std::size_t(f)])) {
        sum += row.fold_mean[std::size_t(f)];
        ++n;
      }
    rep.fold_overall_mean.push_back(n ? sum / double(n) : kNaN);
  }
  {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& row : rep.rows)
      if (!std::isnan(row.mean)) {
        sum += row.mean;
        ++n;
      }
    rep.overall_mean = n ? sum / double(n) : kNaN;
  }
  return rep;
}

std::string report_csv(const EvaluationReport& report) {
  std::ostringstream os;
  os << "class_id,structure,n_present,avg_ref_volume_mm3";
  for (int f = 1; f <= report.num_folds; ++f)
    os << ",fold_" << f;
  os << ",mean\n";
  for (const auto& row : report.rows) {
    os << row.class_id << ',' << row.structure << ',' << row.n_present << ','
       << format_double(row.avg_ref_volume_mm3);
    for (const double v : row.fold_mean)
      os << ',' << format_double(v);
    os << ',' << format_double(row.mean) << '\n';
  }
  os << ",Overall Mean," << report.num_cases << ',';
  for (const double v : report.fold_overall_mean)
    os << ',' << format_double(v);
  os << ',' << format_double(report.overall_mean) << '\n';
  return os.str();
}

void write_report_csv(const EvaluationReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error(path + ": cannot open for writing");
  out << report_csv(report);
  if (!out)
    throw std::runtime_error(path + ": write failed");
}

std::string report_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["num_folds"] = report.num_folds;
  j["num_cases"] = report.num_cases;
  auto encode = [](double v) {
    return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
  };
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json r;
    r["class_id"] = row.class_id;
    r["structure"] = row.structure;
    r["n_present"] = row.n_present;
    r["avg_ref_volume_mm3"] = encode(row.avg_ref_volume_mm3);
    r["fold_mean"] = nlohmann::ordered_json::array();
    for (const double v : row.fold_mean)
      r["fold_mean"].push_back(encode(v));
    r["mean"] = encode(row.mean);
    j["classes"].push_back(std::move(r));
  }
  j["fold_overall_mean"] = nlohmann::ordered_json::array();
  for (const double v : report.fold_overall_mean)
    j["fold_overall_mean"].push_back(encode(v));
  j["overall_mean"] = encode(report.overall_mean);
  return j.dump(2) + "\n";
}

void write_report_json(const EvaluationReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error(path + ": cannot open for writing");
  out << report_json(report);
  if (!out)
    throw std::runtime_error(path + ": write failed");
}

} // namespace dentseg
