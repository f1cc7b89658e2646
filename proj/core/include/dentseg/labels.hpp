#pragma once

#include "dentseg/grid.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dentseg {

struct LabelEntry {
  int challenge_id = 0; // id as found in distributed label maps
  int dense_id = 0;     // contiguous 0..N-1 training id
  std::string name;
  bool ranked = false;  // counted in challenge ranking metrics
};

enum class RemapDirection { ToDense, ToChallenge };
enum class UnknownLabelPolicy { Error, ToBackground };

/// Invertible mapping between challenge label ids and the dense
/// contiguous training space. Challenge->dense is many-to-one only for
/// the pulp collapse (sources 111-148) and the canal re-index
/// (103-105); dense->challenge returns the canonical consolidated id
/// (the smallest challenge id mapping to that dense id).
class LabelTable {
public:
  /// The canonical consolidated table: ids {0-7, 8-10 restorations,
  /// 11-18, 21-28, 31-38, 41-48, 50-53}, pulp sources 111-148 -> 50,
  /// canals 103/104/105 -> 51/52/53. `canal_sources` overrides which
  /// source id feeds 51, 52 and 53 respectively.
  static LabelTable builtin(std::array<int, 3> canal_sources = {103, 104, 105});

  /// Load from a text manifest: one `challenge_id,dense_id,name,ranked`
  /// line per entry, '#' comments and blank lines ignored.
  static LabelTable load(const std::string& path);
  void save(const std::string& path) const;

  explicit LabelTable(std::vector<LabelEntry> entries);

  int num_dense() const { return int(dense_to_challenge_.size()); }
  int dense_from_challenge(int challenge_id) const;
  int challenge_from_dense(int dense_id) const;
  bool has_challenge(int challenge_id) const { return challenge_to_dense_.count(challenge_id) > 0; }
  bool has_dense(int dense_id) const { return dense_id >= 0 && dense_id < num_dense(); }

  const std::string& name_of_dense(int dense_id) const;
  bool ranked_dense(int dense_id) const;

  /// Consolidated ids of ranked classes, ascending (43 for builtin).
  std::vector<int> ranked_consolidated_ids() const;
  /// Consolidated (canonical challenge) ids of every class, ascending.
  std::vector<int> consolidated_ids() const;

  const std::vector<LabelEntry>& entries() const { return entries_; }

private:
  std::vector<LabelEntry> entries_;
  std::map<int, int> challenge_to_dense_;
  std::vector<int> dense_to_challenge_; // canonical
  std::vector<std::string> dense_names_;
  std::vector<bool> dense_ranked_;
};

/// Voxelwise label substitution. Unknown labels either raise (naming
/// the ids and voxel counts) or map to background; when `unknown_out`
/// is given the per-id unknown counts are reported there under the
/// ToBackground policy.
LabelGrid apply_remap(const LabelGrid& lbl, const LabelTable& table, RemapDirection dir,
                      UnknownLabelPolicy policy = UnknownLabelPolicy::Error,
                      std::map<int, std::uint64_t>* unknown_out = nullptr);

} // namespace dentseg
