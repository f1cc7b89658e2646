#pragma once

#include "dentseg/components.hpp"
#include "dentseg/grid.hpp"
#include "dentseg/metrics.hpp"
#include "dentseg/roi.hpp"
#include "dentseg/staple.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dentseg {

struct CaseSpec {
  std::string name;
  std::string image;                 // native-geometry intensity volume
  std::vector<std::string> phase1;   // K fold predictions, full volume
  std::vector<std::string> phase2;   // K fold predictions, crop or full volume
  std::string reference;             // optional ground truth
  int fold = 1;
};

/// Options the manifest expresses in consolidated label ids; the
/// runner translates them to dense ids through the label table.
struct MergeOptions {
  std::vector<int> nerve_consolidated_ids{51, 52, 53};
  bool clear_phase1_nerves = true;
  bool override_all_in_box = true;
};

struct PipelineManifest {
  int manifest_version = 1;
  std::string output_dir;
  std::string label_table;           // empty = builtin
  FusionConfig fusion;
  PostprocessConfig postprocess;     // pharynx/mandible ids as consolidated
  RoiExpansion roi;
  MergeOptions merge;
  Orientation orientation;
  bool pharynx_cleanup_first = true; // relabel before the mandible filter
  bool keep_intermediates = false;
  bool compress_outputs = true;
  std::vector<CaseSpec> cases;

  static PipelineManifest from_json_file(const std::string& path);
  /// Structural checks plus existence of every referenced input file;
  /// runs before any processing.
  void validate() const;
};

struct StageTiming {
  std::string stage;
  double milliseconds = 0.0;
};

struct CaseOutcome {
  std::string name;
  bool ok = false;
  std::string error;
  std::string final_labels_path;
  VoxelBox phase2_box;
  bool phase2_ran = false;
  std::vector<StageTiming> timings;
  std::vector<ClassScore> scores;    // empty without a reference
};

struct PipelineResult {
  std::vector<CaseOutcome> cases;
  std::optional<EvaluationReport> report;
  bool all_ok() const;
};

/// Execute the two-phase flow per case: fuse phase-1 folds, resample
/// the consensus to the native image geometry when needed, pharynx and
/// mandible cleanup, mandible-anchored phase-2 crop, fuse phase-2
/// folds, merge nerves back, write the final map, and evaluate against
/// references when given. Failures abort the affected case only.
/// Writes report.csv/report.json and run_log.json under output_dir.
PipelineResult run_pipeline(const PipelineManifest& manifest, std::ostream* log = nullptr);

/// Default-constructed configuration as JSON, for `--dump-defaults`.
std::string default_manifest_json();

} // namespace dentseg
