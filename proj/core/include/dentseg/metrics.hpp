#pragma once

#include "dentseg/grid.hpp"
#include "dentseg/labels.hpp"

#include <string>
#include <vector>

namespace dentseg {

struct DiceScore {
  double value = 0.0;
  bool both_empty = false; // scored 1.0 by convention
};

/// 2|A∩B| / (|A|+|B|) over the voxels equal to `class_id`. Both masks
/// empty scores 1.0 (flagged); exactly one empty scores 0.0.
DiceScore dice(const LabelGrid& pred, const LabelGrid& ref, Label class_id);

/// Voxel count of a class times the voxel volume.
double class_volume_mm3(const LabelGrid& lbl, Label class_id);

struct ClassScore {
  int class_id = 0; // consolidated id
  std::string name;
  double dice = 0.0;
  double pred_volume_mm3 = 0.0;
  double ref_volume_mm3 = 0.0;
  bool present_in_reference = false;
  bool present_in_prediction = false;
  bool both_empty = false;
};

/// Score every ranked class of the table. Inputs are consolidated-space
/// label maps of identical geometry.
std::vector<ClassScore> evaluate_case(const LabelGrid& pred, const LabelGrid& ref,
                                      const LabelTable& table);

struct CaseReport {
  std::string case_name;
  int fold = 1;
  std::vector<ClassScore> scores;

  /// Mean Dice over classes present in the reference (the per-case
  /// score the challenge averages).
  double mean_dice_present() const;
};

struct AggregateRow {
  int class_id = 0;
  std::string structure;
  int n_present = 0;              // cases with the class in the reference
  double avg_ref_volume_mm3 = 0;  // over present cases
  std::vector<double> fold_mean;  // NaN where a fold has no present case
  double mean = 0;                // pooled over all present cases
};

struct EvaluationReport {
  int num_folds = 0;
  std::size_t num_cases = 0;
  std::vector<AggregateRow> rows;      // one per ranked class, ascending id
  std::vector<double> fold_overall_mean;
  double overall_mean = 0.0;           // pooled per-class means
};

/// Fold-wise aggregation in the Table-1 layout: per class, presence
/// count, average reference volume, per-fold mean Dice and a pooled
/// mean over present cases. Per-class means are presence-conditional
/// unless `include_absent` pulls every case into the averages.
EvaluationReport aggregate(const std::vector<CaseReport>& cases, bool include_absent = false);

/// CSV columns: class_id,structure,n_present,avg_ref_volume_mm3,
/// fold_1..fold_k,mean. A final Overall Mean row carries the pooled
/// class-mean average.
void write_report_csv(const EvaluationReport& report, const std::string& path);
std::string report_csv(const EvaluationReport& report);

/// Same content as the CSV as a structured JSON document.
void write_report_json(const EvaluationReport& report, const std::string& path);
std::string report_json(const EvaluationReport& report);

} // namespace dentseg
