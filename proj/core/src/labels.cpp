#include "dentseg/labels.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dentseg {

namespace {

const char* kToothNames[8] = {
    "Central Incisor", "Lateral Incisor",  "Canine",       "First Premolar",
    "Second Premolar", "First Molar",      "Second Molar", "Third Molar (Wisdom Tooth)",
};

struct Consolidated {
  int id;
  std::string name;
  bool ranked;
};

std::vector<Consolidated> consolidated_classes() {
  std::vector<Consolidated> v = {
      {0, "Background", false},
      {1, "Lower Jawbone", true},
      {2, "Upper Jawbone", true},
      {3, "Left Inferior Alveolar Canal", true},
      {4, "Right Inferior Alveolar Canal", true},
      {5, "Left Maxillary Sinus", true},
      {6, "Right Maxillary Sinus", true},
      {7, "Pharynx", true},
      {8, "Bridge", false},
      {9, "Crown", false},
      {10, "Implant", false},
  };
  const struct { int base; const char* quadrant; } quadrants[4] = {
      {11, "Upper Right"}, {21, "Upper Left"}, {31, "Lower Left"}, {41, "Lower Right"}};
  for (const auto& q : quadrants)
    for (int t = 0; t < 8; ++t)
      v.push_back({q.base + t, std::string(q.quadrant) + " " + kToothNames[t], true});
  v.push_back({50, "Tooth Pulp", true});
  v.push_back({51, "Left Incisive Nerve", true});
  v.push_back({52, "Right Incisive Nerve", true});
  v.push_back({53, "Lingual Nerve", true});
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return v;
}

} // namespace

LabelTable LabelTable::builtin(std::array<int, 3> canal_sources) {
  const auto classes = consolidated_classes();
  std::vector<LabelEntry> entries;
  // dense ids follow ascending consolidated id
  std::map<int, int> dense_of;
  int next = 0;
  for (const auto& c : classes)
    dense_of[c.id] = next++;

  for (const auto& c : classes)
    entries.push_back({c.id, dense_of.at(c.id), c.name, c.ranked});
  // pulp collapse: every per-tooth pulp/periapical source id
  for (int src = 111; src <= 148; ++src)
    entries.push_back({src, dense_of.at(50), "Tooth Pulp", true});
  // canal re-index; source order is configurable, the challenge docs
  // do not pin which of 103-105 is left/right/lingual
  const int nerve_targets[3] = {51, 52, 53};
  for (int k = 0; k < 3; ++k) {
    const int tgt = nerve_targets[k];
    entries.push_back({canal_sources[std::size_t(k)], dense_of.at(tgt),
                       classes[std::size_t(dense_of.at(tgt))].name, true});
  }
  return LabelTable(std::move(entries));
}

LabelTable::LabelTable(std::vector<LabelEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty())
    throw std::invalid_argument("label table must not be empty");

  std::set<int> dense_ids;
  for (const auto& e : entries_) {
    if (e.challenge_id < 0 || e.dense_id < 0)
      throw std::invalid_argument("label table ids must be non-negative");
    if (!challenge_to_dense_.emplace(e.challenge_id, e.dense_id).second)
      throw std::invalid_argument("duplicate challenge id " + std::to_string(e.challenge_id));
    dense_ids.insert(e.dense_id);
  }

  const int n = int(dense_ids.size());
  int expect = 0;
  for (int d : dense_ids)
    if (d != expect++)
      throw std::invalid_argument("dense ids must be contiguous 0..N-1, missing " +
                                  std::to_string(expect - 1));
  if (challenge_to_dense_.count(0) == 0 || challenge_to_dense_.at(0) != 0)
    throw std::invalid_argument("background must map challenge 0 <-> dense 0");

  dense_to_challenge_.assign(std::size_t(n), -1);
  dense_names_.assign(std::size_t(n), {});
  dense_ranked_.assign(std::size_t(n), false);
  // canonical inverse entry = smallest challenge id per dense id
  for (const auto& e : entries_) {
    auto& canon = dense_to_challenge_[std::size_t(e.dense_id)];
    if (canon < 0 || e.challenge_id < canon) {
      canon = e.challenge_id;
      dense_names_[std::size_t(e.dense_id)] = e.name;
      dense_ranked_[std::size_t(e.dense_id)] = e.ranked;
    }
  }
}

int LabelTable::dense_from_challenge(int challenge_id) const {
  auto it = challenge_to_dense_.find(challenge_id);
  if (it == challenge_to_dense_.end())
    throw std::out_of_range("unknown challenge label id " + std::to_string(challenge_id));
  return it->second;
}

int LabelTable::challenge_from_dense(int dense_id) const {
  if (!has_dense(dense_id))
    throw std::out_of_range("unknown dense label id " + std::to_string(dense_id));
  return dense_to_challenge_[std::size_t(dense_id)];
}

const std::string& LabelTable::name_of_dense(int dense_id) const {
  if (!has_dense(dense_id))
    throw std::out_of_range("unknown dense label id " + std::to_string(dense_id));
  return dense_names_[std::size_t(dense_id)];
}

bool LabelTable::ranked_dense(int dense_id) const {
  if (!has_dense(dense_id))
    throw std::out_of_range("unknown dense label id " + std::to_string(dense_id));
  return dense_ranked_[std::size_t(dense_id)];
}

std::vector<int> LabelTable::ranked_consolidated_ids() const {
  std::vector<int> out;
  for (int d = 0; d < num_dense(); ++d)
    if (dense_ranked_[std::size_t(d)])
      out.push_back(dense_to_challenge_[std::size_t(d)]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> LabelTable::consolidated_ids() const {
  std::vector<int> out(dense_to_challenge_.begin(), dense_to_challenge_.end());
  std::sort(out.begin(), out.end());
  return out;
}

LabelTable LabelTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error(path + ": cannot open label table");
  std::vector<LabelEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream ls(line);
    LabelEntry e;
    std::string challenge, dense, ranked;
    if (!std::getline(ls, challenge, ',') || !std::getline(ls, dense, ',') ||
        !std::getline(ls, e.name, ',') || !std::getline(ls, ranked))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected challenge_id,dense_id,name,ranked");
    e.challenge_id = std::stoi(challenge);
    e.dense_id = std::stoi(dense);
    if (ranked == "1" || ranked == "true")
      e.ranked = true;
    else if (ranked == "0" || ranked == "false")
      e.ranked = false;
    else
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad ranked flag '" +
                               ranked + "'");
    entries.push_back(std::move(e));
  }
  return LabelTable(std::move(entries));
}

void LabelTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error(path + ": cannot open for writing");
  out << "# challenge_id,dense_id,name,ranked\n";
  for (const auto& e : entries_)
    out << e.challenge_id << ',' << e.dense_id << ',' << e.name << ',' << (e.ranked ? 1 : 0)
        << '\n';
  if (!out)
    throw std::runtime_error(path + ": write failed");
}

LabelGrid apply_remap(const LabelGrid& lbl, const LabelTable& table, RemapDirection dir,
                      UnknownLabelPolicy policy, std::map<int, std::uint64_t>* unknown_out) {
  // per-value lookup table over the observed range; labels are u16
  int max_label = 0;
  for (const Label v : lbl.data())
    max_label = std::max(max_label, int(v));

  constexpr int kUnknown = -1;
  std::vector<int> lut(std::size_t(max_label) + 1, kUnknown);
  for (int v = 0; v <= max_label; ++v) {
    if (dir == RemapDirection::ToDense) {
      if (table.has_challenge(v))
        lut[std::size_t(v)] = table.dense_from_challenge(v);
    } else {
      if (table.has_dense(v))
        lut[std::size_t(v)] = table.challenge_from_dense(v);
    }
  }

  std::map<int, std::uint64_t> unknown;
  LabelGrid out = lbl;
  for (auto& v : out.data()) {
    const int m = lut[v];
    if (m == kUnknown) {
      ++unknown[int(v)];
      v = 0;
    } else {
      v = Label(m);
    }
  }

  if (!unknown.empty()) {
    if (policy == UnknownLabelPolicy::Error) {
      std::ostringstream os;
      os << "remap: unknown label id(s):";
      for (const auto& [id, count] : unknown)
        os << " " << id << " (" << count << " voxels)";
      throw std::runtime_error(os.str());
    }
    if (unknown_out)
      *unknown_out = std::move(unknown);
  } else if (unknown_out) {
    unknown_out->clear();
  }
  return out;
}

} // namespace dentseg
