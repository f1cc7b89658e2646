// dentseg: CBCT dental-segmentation pipeline toolkit around externally
// produced fold predictions: fusion, cleanup, mandible-anchored
// phase-2 cropping, merge-back, and per-class Dice reporting.

#include "dentseg/components.hpp"
#include "dentseg/grid.hpp"
#include "dentseg/labels.hpp"
#include "dentseg/metrics.hpp"
#include "dentseg/nifti.hpp"
#include "dentseg/phantom.hpp"
#include "dentseg/pipeline.hpp"
#include "dentseg/preprocess.hpp"
#include "dentseg/roi.hpp"
#include "dentseg/staple.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace dentseg;

namespace {

constexpr const char* kVersion = "0.1.0";

int env_threads() {
  const char* v = std::getenv("DENTSEG_THREADS");
  if (!v)
    return 0;
  try {
    return std::max(0, std::stoi(v));
  } catch (...) {
    return 0;
  }
}

Spacing parse_spacing(const std::vector<double>& v) {
  if (v.size() == 1)
    return {v[0], v[0], v[0]};
  if (v.size() == 3)
    return {v[0], v[1], v[2]};
  throw CLI::ValidationError("--spacing takes one value or three");
}

LabelTable load_table(const std::string& path, const std::vector<int>& canal_order) {
  if (!path.empty())
    return LabelTable::load(path);
  if (canal_order.empty())
    return LabelTable::builtin();
  if (canal_order.size() != 3)
    throw CLI::ValidationError("--canal-order takes exactly three source ids");
  return LabelTable::builtin({canal_order[0], canal_order[1], canal_order[2]});
}

struct PreprocessArgs {
  std::string in, out;
  double clip_lo = -1000, clip_hi = 3800;
  std::vector<double> spacing{0.6};
};

int cmd_preprocess(const PreprocessArgs& a) {
  PreprocessConfig cfg;
  cfg.clip_lo = float(a.clip_lo);
  cfg.clip_hi = float(a.clip_hi);
  cfg.target_spacing = parse_spacing(a.spacing);
  write_image(preprocess_image(read_image(a.in), cfg), a.out);
  return 0;
}

struct RemapArgs {
  std::string in, out, table, direction = "to-dense", on_unknown = "error";
  std::vector<int> canal_order;
  std::string save_table;
};

int cmd_remap(const RemapArgs& a) {
  const LabelTable table = load_table(a.table, a.canal_order);
  if (!a.save_table.empty())
    table.save(a.save_table);
  if (a.in.empty())
    return 0; // table export only
  if (a.out.empty())
    throw std::runtime_error("remap: --out is required when --in is given");
  const RemapDirection dir =
      a.direction == "to-dense" ? RemapDirection::ToDense : RemapDirection::ToChallenge;
  const UnknownLabelPolicy policy =
      a.on_unknown == "error" ? UnknownLabelPolicy::Error : UnknownLabelPolicy::ToBackground;
  std::map<int, std::uint64_t> unknown;
  const LabelGrid out = apply_remap(read_labels(a.in), table, dir, policy, &unknown);
  for (const auto& [id, count] : unknown)
    std::cerr << "warning: unknown label " << id << " on " << count
              << " voxels mapped to background\n";
  write_labels(out, a.out);
  return 0;
}

struct FuseArgs {
  std::string method = "staple";
  std::vector<std::string> inputs;
  std::string out, posteriors;
  FusionConfig cfg;
  std::string prior = "vote-frequency";
};

int cmd_fuse(FuseArgs& a) {
  if (a.cfg.threads == 0)
    a.cfg.threads = env_threads();
  std::vector<LabelGrid> raters;
  raters.reserve(a.inputs.size());
  for (const auto& p : a.inputs)
    raters.push_back(read_labels(p));

  if (a.method == "vote") {
    write_labels(majority_vote(raters), a.out);
    return 0;
  }
  a.cfg.prior = a.prior == "uniform" ? FusionConfig::Prior::Uniform
                                     : FusionConfig::Prior::VoteFrequency;
  a.cfg.keep_posteriors = !a.posteriors.empty();
  const FusionResult res = staple_fuse(raters, a.cfg);
  write_labels(res.consensus, a.out);
  std::cerr << "staple: " << res.iterations << " iterations, final max |dtheta| "
            << res.final_delta << "\n";
  if (!a.posteriors.empty()) {
    // winning-label posterior as a float volume
    const int L = res.raters.front().num_labels;
    ImageGrid conf(res.consensus.dims(), res.consensus.spacing());
    for (std::size_t i = 0; i < conf.size(); ++i)
      conf[i] = res.posteriors[i * std::size_t(L) + res.consensus[i]];
    write_image(conf, a.posteriors, std::nullopt, ImageDataType::Float32);
  }
  return 0;
}

struct PostprocessArgs {
  std::string in, out;
  int connectivity = 26;
  int pharynx_id = 7, mandible_id = 1;
  std::uint64_t min_voxels = 200000;
  double min_mm3 = -1.0;
  std::string policy = "non-largest-touching";
  std::string order = "pharynx-first";
};

int cmd_postprocess(const PostprocessArgs& a) {
  LabelGrid lbl = read_labels(a.in);
  PostprocessConfig cfg;
  cfg.connectivity = connectivity_from_int(a.connectivity);
  cfg.pharynx_id = Label(a.pharynx_id);
  cfg.mandible_id = Label(a.mandible_id);
  cfg.policy = a.policy == "any-touching" ? AberrancyPolicy::AnyTouching
                                          : AberrancyPolicy::NonLargestTouching;
  cfg.min_mandible_voxels = a.min_voxels;
  if (a.min_mm3 >= 0.0)
    cfg.min_mandible_voxels =
        std::uint64_t(std::ceil(a.min_mm3 / lbl.spacing().voxel_volume_mm3()));

  if (a.order == "pharynx-first") {
    lbl = relabel_touching_pharynx(lbl, cfg);
    lbl = filter_small_mandible(lbl, cfg);
  } else {
    lbl = filter_small_mandible(lbl, cfg);
    lbl = relabel_touching_pharynx(lbl, cfg);
  }
  write_labels(lbl, a.out);
  return 0;
}

struct RoiArgs {
  std::string in, out_box;
  int mandible_id = 1;
  RoiExpansion exp;
  bool y_anterior_high = false, z_superior_low = false;
  bool print_box = false;
};

int cmd_roi(const RoiArgs& a) {
  LabelGrid lbl = read_labels(a.in);
  lbl.orientation().y_increases_posteriorly = !a.y_anterior_high;
  lbl.orientation().z_increases_superiorly = !a.z_superior_low;
  const VoxelBox box = compute_phase2_box(lbl, Label(a.mandible_id), a.exp);
  if (a.print_box || a.out_box.empty())
    std::cout << box.to_string() << "\n";
  std::cerr << "crop " << box.widths().x << "x" << box.widths().y << "x" << box.widths().z
            << " reduces the volume by " << double(lbl.dims().total()) / double(box.widths().total())
            << "x\n";
  if (!a.out_box.empty()) {
    std::ofstream out(a.out_box, std::ios::trunc);
    out << box.to_string() << "\n";
    if (!out)
      throw std::runtime_error(a.out_box + ": write failed");
  }
  return 0;
}

struct MergeArgs {
  std::string phase1, phase2, box, out;
  std::vector<int> nerve_ids{51, 52, 53};
  bool no_clear = false, no_override = false;
};

int cmd_merge(const MergeArgs& a) {
  MergePolicy policy;
  policy.nerve_ids.clear();
  for (const int id : a.nerve_ids)
    policy.nerve_ids.insert(Label(id));
  policy.clear_phase1_nerves = !a.no_clear;
  policy.override_all_in_box = !a.no_override;
  const LabelGrid merged =
      merge_phase2(read_labels(a.phase1), read_labels(a.phase2), VoxelBox::parse(a.box), policy);
  write_labels(merged, a.out);
  return 0;
}

struct EvaluateArgs {
  std::string pred_dir, ref_dir, table, out = "report", folds;
  bool include_absent = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const LabelTable table = load_table(a.table, {});

  std::map<std::string, int> fold_of;
  if (!a.folds.empty()) {
    std::ifstream in(a.folds);
    if (!in)
      throw std::runtime_error(a.folds + ": cannot open fold map");
    for (const auto& [name, fold] : nlohmann::json::parse(in).items())
      fold_of[name] = fold.get<int>();
  }

  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a.pred_dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 4 && (name.ends_with(".nii") || name.ends_with(".nii.gz")))
      names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  if (names.empty())
    throw std::runtime_error(a.pred_dir + ": no .nii/.nii.gz volumes found");

  std::vector<CaseReport> reports;
  for (const auto& name : names) {
    const fs::path ref = fs::path(a.ref_dir) / name;
    if (!fs::exists(ref))
      throw std::runtime_error("reference missing for " + name);
    CaseReport r;
    r.case_name = name;
    const auto it = fold_of.find(name);
    r.fold = it == fold_of.end() ? 1 : it->second;
    r.scores = evaluate_case(read_labels((fs::path(a.pred_dir) / name).string()),
                             read_labels(ref.string()), table);
    reports.push_back(std::move(r));
  }

  const EvaluationReport rep = aggregate(reports, a.include_absent);
  std::string base = a.out;
  if (base.ends_with(".csv") || base.ends_with(".json"))
    base = base.substr(0, base.rfind('.'));
  write_report_csv(rep, base + ".csv");
  write_report_json(rep, base + ".json");
  std::cout << "evaluated " << reports.size() << " case(s), overall mean Dice "
            << rep.overall_mean << "\n";
  return 0;
}

struct PhantomArgs {
  std::vector<int> dims{96, 96, 80};
  std::vector<double> spacing{0.3};
  std::uint64_t seed = 1;
  int num_teeth = 6;
  std::string out_prefix = "phantom";
  int raters = 0;
  std::vector<double> flip_rates;
  int boundary_steps = 0;
};

int cmd_phantom(const PhantomArgs& a) {
  if (a.dims.size() != 3)
    throw CLI::ValidationError("--dims takes three values");
  PhantomSpec spec;
  spec.dims = {a.dims[0], a.dims[1], a.dims[2]};
  spec.spacing = parse_spacing(a.spacing);
  spec.seed = a.seed;
  spec.num_teeth = a.num_teeth;
  const Phantom ph = generate_phantom(spec);
  write_image(ph.image, a.out_prefix + "_image.nii.gz");
  write_labels(ph.labels, a.out_prefix + "_labels.nii.gz");

  nlohmann::ordered_json meta;
  meta["generator"] = "splitmix64";
  meta["dims"] = a.dims;
  meta["spacing_mm"] = {spec.spacing.x, spec.spacing.y, spec.spacing.z};
  meta["seed"] = spec.seed;
  meta["num_teeth"] = spec.num_teeth;
  meta["intensities_hu"] = {{"air", -1000},    {"soft_tissue", 40}, {"bone", 1500},
                            {"pulp", 300},     {"pharynx", -1000}};
  meta["structure_ids"] = {{"mandible", 1},
                           {"pharynx", 7},
                           {"teeth_first", 11},
                           {"pulp", 50},
                           {"nerves", {51, 52, 53}}};
  meta["raters"] = nlohmann::ordered_json::array();

  for (int k = 0; k < a.raters; ++k) {
    RaterNoise noise;
    noise.flip_rate = a.flip_rates.empty()
                          ? 0.05
                          : a.flip_rates[std::size_t(k) % a.flip_rates.size()];
    noise.boundary_steps = a.boundary_steps;
    noise.seed = spec.seed * 1000 + std::uint64_t(k) + 1;
    const std::string path = a.out_prefix + "_rater_" + std::to_string(k + 1) + ".nii.gz";
    write_labels(simulate_rater(ph.labels, noise), path);
    meta["raters"].push_back({{"path", path},
                              {"flip_rate", noise.flip_rate},
                              {"boundary_steps", noise.boundary_steps},
                              {"seed", noise.seed}});
  }

  std::ofstream mf(a.out_prefix + "_spec.json", std::ios::trunc);
  mf << meta.dump(2) << "\n";
  if (!mf)
    throw std::runtime_error(a.out_prefix + "_spec.json: write failed");
  return 0;
}

struct RunArgs {
  std::string manifest;
  bool keep_intermediates = false;
  int threads = 0;
};

int cmd_run(const RunArgs& a) {
  PipelineManifest m = PipelineManifest::from_json_file(a.manifest);
  if (a.keep_intermediates)
    m.keep_intermediates = true;
  if (a.threads > 0)
    m.fusion.threads = a.threads;
  else if (m.fusion.threads == 0)
    m.fusion.threads = env_threads();
  const PipelineResult result = run_pipeline(m, &std::cerr);
  if (result.report)
    std::cout << "overall mean Dice " << result.report->overall_mean << "\n";
  return result.all_ok() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"CBCT dental segmentation pipeline toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(0, 1);

  bool dump_defaults = false;
  app.add_flag("--dump-defaults", dump_defaults, "Print the default configuration as JSON");

  PreprocessArgs pre;
  auto* sp = app.add_subcommand("preprocess", "Clip HU intensities and resample an image");
  sp->add_option("--in", pre.in, "Input image (.nii/.nii.gz)")->required();
  sp->add_option("--out", pre.out, "Output image")->required();
  sp->add_option("--clip-lo", pre.clip_lo, "Lower HU clip bound");
  sp->add_option("--clip-hi", pre.clip_hi, "Upper HU clip bound");
  sp->add_option("--spacing", pre.spacing, "Target spacing in mm (one or three values)");

  RemapArgs rem;
  auto* sr = app.add_subcommand("remap", "Remap label ids between challenge and dense spaces");
  sr->add_option("--in", rem.in, "Input label map");
  sr->add_option("--out", rem.out, "Output label map");
  sr->add_option("--direction", rem.direction, "to-dense or to-challenge")
      ->check(CLI::IsMember({"to-dense", "to-challenge"}));
  sr->add_option("--table", rem.table, "Label table manifest (default: builtin)");
  sr->add_option("--on-unknown", rem.on_unknown, "error or background")
      ->check(CLI::IsMember({"error", "background"}));
  sr->add_option("--canal-order", rem.canal_order,
                 "Source ids feeding 51,52,53 (default 103,104,105)");
  sr->add_option("--save-table", rem.save_table, "Write the table in manifest format");

  FuseArgs fuse;
  auto* sf = app.add_subcommand("fuse", "Fuse fold predictions into a consensus");
  sf->add_option("--method", fuse.method, "staple or vote")
      ->check(CLI::IsMember({"staple", "vote"}));
  sf->add_option("--inputs", fuse.inputs, "Fold label maps")->required()->expected(-1);
  sf->add_option("--out", fuse.out, "Consensus output")->required();
  sf->add_option("--posteriors", fuse.posteriors, "Winning-label posterior volume (float32)");
  sf->add_option("--max-iters", fuse.cfg.max_iterations, "EM iteration cap");
  sf->add_option("--tol", fuse.cfg.tolerance, "Convergence tolerance on max |dtheta|");
  sf->add_option("--init-diag", fuse.cfg.init_diagonal, "Initial confusion diagonal");
  sf->add_option("--num-labels", fuse.cfg.num_labels, "Label count (default: max observed + 1)");
  sf->add_option("--prior", fuse.prior, "vote-frequency or uniform")
      ->check(CLI::IsMember({"vote-frequency", "uniform"}));
  sf->add_flag("--skip-unanimous", fuse.cfg.skip_unanimous,
               "Skip all-agree voxels during estimation");
  sf->add_option("--threads", fuse.cfg.threads, "Worker threads (default: DENTSEG_THREADS)");

  PostprocessArgs post;
  auto* so = app.add_subcommand("postprocess", "Pharynx relabel and mandible component filter");
  so->add_option("--in", post.in, "Input label map")->required();
  so->add_option("--out", post.out, "Output label map")->required();
  so->add_option("--connectivity", post.connectivity, "6, 18 or 26")
      ->check(CLI::IsMember({6, 18, 26}));
  so->add_option("--pharynx-id", post.pharynx_id, "Pharynx label id");
  so->add_option("--mandible-id", post.mandible_id, "Mandible label id");
  so->add_option("--min-mandible-voxels", post.min_voxels, "Mandible component threshold");
  so->add_option("--min-mandible-mm3", post.min_mm3,
                 "Mandible threshold in mm^3 (converted via spacing)");
  so->add_option("--pharynx-policy", post.policy, "non-largest-touching or any-touching")
      ->check(CLI::IsMember({"non-largest-touching", "any-touching"}));
  so->add_option("--order", post.order, "pharynx-first or mandible-first")
      ->check(CLI::IsMember({"pharynx-first", "mandible-first"}));

  RoiArgs roi;
  auto* si = app.add_subcommand("roi", "Compute the mandible-anchored phase-2 crop box");
  si->add_option("--in", roi.in, "Label map")->required();
  si->add_flag("--print-box", roi.print_box, "Print the box as x0,y0,z0:x1,y1,z1");
  si->add_option("--out-box", roi.out_box, "Write the box to a file");
  si->add_option("--mandible-id", roi.mandible_id, "Mandible label id");
  si->add_option("--lateral-minus", roi.exp.lateral_minus, "Lateral -x expansion (voxels)");
  si->add_option("--lateral-plus", roi.exp.lateral_plus, "Lateral +x expansion (voxels)");
  si->add_option("--posterior", roi.exp.posterior, "Posterior expansion (voxels)");
  si->add_option("--superior", roi.exp.superior, "Superior expansion (voxels)");
  si->add_flag("--y-anterior-high", roi.y_anterior_high,
               "Dataset stores anterior at high y (flips the y sense)");
  si->add_flag("--z-superior-low", roi.z_superior_low,
               "Dataset stores superior at low z (flips the z sense)");

  MergeArgs merge;
  auto* sm = app.add_subcommand("merge", "Merge phase-2 nerve predictions into a phase-1 map");
  sm->add_option("--phase1", merge.phase1, "Phase-1 label map")->required();
  sm->add_option("--phase2", merge.phase2, "Phase-2 crop label map")->required();
  sm->add_option("--box", merge.box, "Crop box x0,y0,z0:x1,y1,z1")->required();
  sm->add_option("--out", merge.out, "Merged output")->required();
  sm->add_option("--nerve-ids", merge.nerve_ids, "Nerve label ids (default 51 52 53)");
  sm->add_flag("--no-clear", merge.no_clear, "Keep phase-1 nerve voxels outside the box");
  sm->add_flag("--no-override", merge.no_override,
               "Nerves only replace background or nerve voxels");

  EvaluateArgs eval;
  auto* se = app.add_subcommand("evaluate", "Per-class Dice report over a prediction directory");
  se->add_option("--pred-dir", eval.pred_dir, "Directory of predicted label maps")->required();
  se->add_option("--ref-dir", eval.ref_dir, "Directory of reference label maps")->required();
  se->add_option("--table", eval.table, "Label table manifest (default: builtin)");
  se->add_option("--out", eval.out, "Report basename (writes .csv and .json)");
  se->add_option("--folds", eval.folds, "JSON file mapping case filename to fold index");
  se->add_flag("--include-absent", eval.include_absent,
               "Average over all classes, not only those present in the reference");

  PhantomArgs ph;
  auto* sph = app.add_subcommand("phantom", "Generate a synthetic jaw phantom and noisy raters");
  sph->add_option("--dims", ph.dims, "Grid dims (three values)");
  sph->add_option("--spacing", ph.spacing, "Voxel spacing mm (one or three values)");
  sph->add_option("--seed", ph.seed, "Placement/noise seed");
  sph->add_option("--teeth", ph.num_teeth, "Number of tooth spheres");
  sph->add_option("--out-prefix", ph.out_prefix, "Output path prefix");
  sph->add_option("--raters", ph.raters, "Also emit this many simulated rater maps");
  sph->add_option("--flip-rates", ph.flip_rates, "Per-rater flip rates (cycled)");
  sph->add_option("--boundary-steps", ph.boundary_steps, "Rater boundary perturbation steps");

  RunArgs run;
  auto* sru = app.add_subcommand("run", "Run the full two-phase pipeline from a manifest");
  sru->add_option("--manifest", run.manifest, "Pipeline manifest (JSON)")->required();
  sru->add_flag("--keep-intermediates", run.keep_intermediates,
                "Persist per-stage label maps for audit");
  sru->add_option("--threads", run.threads, "Worker threads (default: DENTSEG_THREADS)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (dump_defaults) {
    std::cout << default_manifest_json();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    if (sp->parsed())
      return cmd_preprocess(pre);
    if (sr->parsed())
      return cmd_remap(rem);
    if (sf->parsed())
      return cmd_fuse(fuse);
    if (so->parsed())
      return cmd_postprocess(post);
    if (si->parsed())
      return cmd_roi(roi);
    if (sm->parsed())
      return cmd_merge(merge);
    if (se->parsed())
      return cmd_evaluate(eval);
    if (sph->parsed())
      return cmd_phantom(ph);
    if (sru->parsed())
      return cmd_run(run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
