#include "dentseg/pipeline.hpp"

#include "dentseg/labels.hpp"
#include "dentseg/nifti.hpp"
#include "dentseg/preprocess.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace dentseg {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

class StageClock {
public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(stage, t0);
    } else {
      auto out = fn();
      record(stage, t0);
      return out;
    }
  }

private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point t0) {
    const auto dt = std::chrono::steady_clock::now() - t0;
    sink_.push_back({stage, std::chrono::duration<double, std::milli>(dt).count()});
  }
  std::vector<StageTiming>& sink_;
};

FusionConfig fusion_from_json(const ordered_json& j) {
  FusionConfig c;
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.init_diagonal = j.value("init_diagonal", c.init_diagonal);
  c.skip_unanimous = j.value("skip_unanimous", c.skip_unanimous);
  c.threads = j.value("threads", c.threads);
  const std::string prior = j.value("prior", std::string("vote-frequency"));
  if (prior == "vote-frequency")
    c.prior = FusionConfig::Prior::VoteFrequency;
  else if (prior == "uniform")
    c.prior = FusionConfig::Prior::Uniform;
  else
    throw std::runtime_error("manifest: unknown fusion prior '" + prior + "'");
  return c;
}

PostprocessConfig postprocess_from_json(const ordered_json& j) {
  PostprocessConfig c;
  c.connectivity = connectivity_from_int(j.value("connectivity", 26));
  c.pharynx_id = Label(j.value("pharynx_id", 7));
  c.mandible_id = Label(j.value("mandible_id", 1));
  c.min_mandible_voxels = j.value("min_mandible_voxels", c.min_mandible_voxels);
  const std::string policy = j.value("pharynx_policy", std::string("non-largest-touching"));
  if (policy == "non-largest-touching")
    c.policy = AberrancyPolicy::NonLargestTouching;
  else if (policy == "any-touching")
    c.policy = AberrancyPolicy::AnyTouching;
  else
    throw std::runtime_error("manifest: unknown pharynx policy '" + policy + "'");
  return c;
}

std::string resolve_relative(const fs::path& base, const std::string& p) {
  if (p.empty())
    return p;
  const fs::path fp(p);
  return fp.is_absolute() ? fp.string() : (base / fp).string();
}

ordered_json timings_json(const std::vector<StageTiming>& timings) {
  ordered_json arr = ordered_json::array();
  for (const auto& t : timings)
    arr.push_back({{"stage", t.stage}, {"ms", t.milliseconds}});
  return arr;
}

ordered_json manifest_parameters_json(const PipelineManifest& m) {
  ordered_json j;
  j["manifest_version"] = m.manifest_version;
  j["output_dir"] = m.output_dir;
  j["label_table"] = m.label_table;
  j["fusion"] = {{"max_iterations", m.fusion.max_iterations},
                 {"tolerance", m.fusion.tolerance},
                 {"init_diagonal", m.fusion.init_diagonal},
                 {"prior", m.fusion.prior == FusionConfig::Prior::Uniform ? "uniform"
                                                                          : "vote-frequency"},
                 {"skip_unanimous", m.fusion.skip_unanimous},
                 {"threads", m.fusion.threads}};
  j["postprocess"] = {
      {"connectivity", int(m.postprocess.connectivity)},
      {"pharynx_id", m.postprocess.pharynx_id},
      {"mandible_id", m.postprocess.mandible_id},
      {"min_mandible_voxels", m.postprocess.min_mandible_voxels},
      {"pharynx_policy", m.postprocess.policy == AberrancyPolicy::AnyTouching
                             ? "any-touching"
                             : "non-largest-touching"}};
  j["roi"] = {{"lateral_minus", m.roi.lateral_minus},
              {"lateral_plus", m.roi.lateral_plus},
              {"posterior", m.roi.posterior},
              {"superior", m.roi.superior}};
  j["merge"] = {{"nerve_ids", m.merge.nerve_consolidated_ids},
                {"clear_phase1_nerves", m.merge.clear_phase1_nerves},
                {"override_all_in_box", m.merge.override_all_in_box}};
  j["orientation"] = {{"y_increases_posteriorly", m.orientation.y_increases_posteriorly},
                      {"z_increases_superiorly", m.orientation.z_increases_superiorly}};
  j["pharynx_cleanup_first"] = m.pharynx_cleanup_first;
  j["keep_intermediates"] = m.keep_intermediates;
  j["compress_outputs"] = m.compress_outputs;
  return j;
}

} // namespace

PipelineManifest PipelineManifest::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error(path + ": cannot open manifest");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": manifest is not valid JSON: " + e.what());
  }

  PipelineManifest m;
  m.manifest_version = j.value("manifest_version", 1);
  if (m.manifest_version != 1)
    throw std::runtime_error(path + ": unsupported manifest_version " +
                             std::to_string(m.manifest_version));

  const fs::path base = fs::path(path).parent_path();
  m.output_dir = resolve_relative(base, j.value("output_dir", std::string("out")));
  m.label_table = resolve_relative(base, j.value("label_table", std::string()));
  if (j.contains("fusion"))
    m.fusion = fusion_from_json(j.at("fusion"));
  if (j.contains("postprocess"))
    m.postprocess = postprocess_from_json(j.at("postprocess"));
  if (j.contains("roi")) {
    const auto& r = j.at("roi");
    m.roi.lateral_minus = r.value("lateral_minus", m.roi.lateral_minus);
    m.roi.lateral_plus = r.value("lateral_plus", m.roi.lateral_plus);
    m.roi.posterior = r.value("posterior", m.roi.posterior);
    m.roi.superior = r.value("superior", m.roi.superior);
  }
  if (j.contains("merge")) {
    const auto& g = j.at("merge");
    if (g.contains("nerve_ids"))
      m.merge.nerve_consolidated_ids = g.at("nerve_ids").get<std::vector<int>>();
    m.merge.clear_phase1_nerves = g.value("clear_phase1_nerves", m.merge.clear_phase1_nerves);
    m.merge.override_all_in_box = g.value("override_all_in_box", m.merge.override_all_in_box);
  }
  if (j.contains("orientation")) {
    const auto& o = j.at("orientation");
    m.orientation.y_increases_posteriorly =
        o.value("y_increases_posteriorly", m.orientation.y_increases_posteriorly);
    m.orientation.z_increases_superiorly =
        o.value("z_increases_superiorly", m.orientation.z_increases_superiorly);
  }
  m.pharynx_cleanup_first = j.value("pharynx_cleanup_first", m.pharynx_cleanup_first);
  m.keep_intermediates = j.value("keep_intermediates", m.keep_intermediates);
  m.compress_outputs = j.value("compress_outputs", m.compress_outputs);

  if (!j.contains("cases") || !j.at("cases").is_array() || j.at("cases").empty())
    throw std::runtime_error(path + ": manifest needs a non-empty 'cases' array");
  for (const auto& c : j.at("cases")) {
    CaseSpec cs;
    cs.name = c.value("name", std::string());
    cs.image = resolve_relative(base, c.value("image", std::string()));
    for (const auto& p : c.value("phase1", std::vector<std::string>()))
      cs.phase1.push_back(resolve_relative(base, p));
    for (const auto& p : c.value("phase2", std::vector<std::string>()))
      cs.phase2.push_back(resolve_relative(base, p));
    cs.reference = resolve_relative(base, c.value("reference", std::string()));
    cs.fold = c.value("fold", 1);
    if (cs.name.empty())
      throw std::runtime_error(path + ": every case needs a name");
    m.cases.push_back(std::move(cs));
  }
  return m;
}

void PipelineManifest::validate() const {
  if (cases.empty())
    throw std::runtime_error("manifest has no cases");
  for (const auto& c : cases) {
    if (c.image.empty())
      throw std::runtime_error("case '" + c.name + "': image path missing");
    if (c.phase1.empty())
      throw std::runtime_error("case '" + c.name + "': needs at least one phase-1 prediction");
    if (!c.phase2.empty() && c.phase2.size() != c.phase1.size())
      throw std::runtime_error("case '" + c.name +
                               "': phase-2 predictions must match the phase-1 fold count");
    auto must_exist = [&](const std::string& p) {
      if (!p.empty() && !fs::exists(p))
        throw std::runtime_error("case '" + c.name + "': missing input file " + p);
    };
    must_exist(c.image);
    for (const auto& p : c.phase1)
      must_exist(p);
    for (const auto& p : c.phase2)
      must_exist(p);
    must_exist(c.reference);
  }
  if (!label_table.empty() && !fs::exists(label_table))
    throw std::runtime_error("missing label table " + label_table);
}

bool PipelineResult::all_ok() const {
  for (const auto& c : cases)
    if (!c.ok)
      return false;
  return true;
}

namespace {

struct CaseContext {
  const PipelineManifest& manifest;
  const LabelTable& table;
  Label pharynx_dense, mandible_dense;
  std::unordered_set<Label> nerve_dense;
};

CaseOutcome run_case(const CaseSpec& spec, const CaseContext& ctx, std::ostream* log) {
  const PipelineManifest& m = ctx.manifest;
  CaseOutcome outcome;
  outcome.name = spec.name;
  StageClock clock(outcome.timings);

  const std::string ext = m.compress_outputs ? ".nii.gz" : ".nii";
  const fs::path case_dir = fs::path(m.output_dir) / spec.name;
  fs::create_directories(case_dir);
  auto intermediate = [&](const std::string& tag, const LabelGrid& lbl) {
    if (m.keep_intermediates)
      write_labels(lbl, (case_dir / (tag + ext)).string());
  };

  const VolumeHeader native = clock.run("read_image_header", [&] {
    return read_volume_header(spec.image);
  });

  auto load_folds = [&](const std::vector<std::string>& paths) {
    std::vector<LabelGrid> folds;
    folds.reserve(paths.size());
    for (const auto& p : paths) {
      LabelGrid g = read_labels(p);
      g.orientation() = m.orientation;
      folds.push_back(apply_remap(g, ctx.table, RemapDirection::ToDense));
    }
    return folds;
  };

  FusionConfig fusion = m.fusion;
  fusion.num_labels = ctx.table.num_dense();

  // (a) fuse phase-1 folds
  const std::vector<LabelGrid> phase1_folds =
      clock.run("load_phase1", [&] { return load_folds(spec.phase1); });
  LabelGrid consensus =
      clock.run("fuse_phase1", [&] { return staple_fuse(phase1_folds, fusion).consensus; });
  intermediate("phase1_consensus", consensus);

  // (b) back to the native grid when the folds were predicted at a
  // different resolution
  if (!(consensus.dims() == native.dims) || !(consensus.spacing() == native.spacing)) {
    consensus = clock.run("resample_to_native", [&] {
      LabelGrid g = resample_labels_to_reference(consensus, native.dims, native.spacing);
      g.header_affine() = native.affine;
      return g;
    });
    intermediate("phase1_native", consensus);
  }
  consensus.orientation() = m.orientation;

  // (c)/(d) cleanup, order configurable
  PostprocessConfig post = m.postprocess;
  post.pharynx_id = ctx.pharynx_dense;
  post.mandible_id = ctx.mandible_dense;
  auto pharynx_pass = [&] {
    consensus = clock.run("relabel_touching_pharynx",
                          [&] { return relabel_touching_pharynx(consensus, post); });
  };
  auto mandible_pass = [&] {
    consensus =
        clock.run("filter_small_mandible", [&] { return filter_small_mandible(consensus, post); });
  };
  if (m.pharynx_cleanup_first) {
    pharynx_pass();
    mandible_pass();
  } else {
    mandible_pass();
    pharynx_pass();
  }
  intermediate("phase1_clean", consensus);

  // (e)-(g) phase 2 around the cleaned mandible
  if (!spec.phase2.empty()) {
    const VoxelBox box = clock.run("compute_phase2_box", [&] {
      return compute_phase2_box(consensus, ctx.mandible_dense, m.roi);
    });
    outcome.phase2_box = box;
    outcome.phase2_ran = true;
    if (log)
      *log << "[" << spec.name << "] phase-2 box " << box.to_string() << " ("
           << double(consensus.dims().total()) / double(box.widths().total())
           << "x volume reduction)\n";

    std::vector<LabelGrid> phase2_folds =
        clock.run("load_phase2", [&] { return load_folds(spec.phase2); });
    for (auto& g : phase2_folds) {
      if (g.dims() == box.widths())
        continue;
      if (g.dims() == consensus.dims()) {
        g = crop(g, box); // full-volume phase-2 prediction: crop it here
        continue;
      }
      throw std::runtime_error("phase-2 prediction dims match neither the crop box " +
                               box.to_string() + " nor the native volume");
    }
    const LabelGrid phase2_consensus =
        clock.run("fuse_phase2", [&] { return staple_fuse(phase2_folds, fusion).consensus; });
    intermediate("phase2_consensus", phase2_consensus);

    MergePolicy policy;
    policy.nerve_ids = ctx.nerve_dense;
    policy.clear_phase1_nerves = m.merge.clear_phase1_nerves;
    policy.override_all_in_box = m.merge.override_all_in_box;
    consensus = clock.run("merge_phase2",
                          [&] { return merge_phase2(consensus, phase2_consensus, box, policy); });
  }

  // (h) final map in challenge label space
  const LabelGrid final_labels = clock.run("remap_to_challenge", [&] {
    return apply_remap(consensus, ctx.table, RemapDirection::ToChallenge);
  });
  outcome.final_labels_path = (case_dir / ("segmentation" + ext)).string();
  clock.run("write_final", [&] { write_labels(final_labels, outcome.final_labels_path); });

  if (!spec.reference.empty()) {
    const LabelGrid reference = clock.run("read_reference", [&] { return read_labels(spec.reference); });
    outcome.scores =
        clock.run("evaluate", [&] { return evaluate_case(final_labels, reference, ctx.table); });
  }
  outcome.ok = true;
  return outcome;
}

} // namespace

PipelineResult run_pipeline(const PipelineManifest& manifest, std::ostream* log) {
  manifest.validate();
  fs::create_directories(manifest.output_dir);

  const LabelTable table = manifest.label_table.empty() ? LabelTable::builtin()
                                                        : LabelTable::load(manifest.label_table);
  CaseContext ctx{manifest, table,
                  Label(table.dense_from_challenge(manifest.postprocess.pharynx_id)),
                  Label(table.dense_from_challenge(manifest.postprocess.mandible_id)),
                  {}};
  for (const int id : manifest.merge.nerve_consolidated_ids)
    ctx.nerve_dense.insert(Label(table.dense_from_challenge(id)));
  if (ctx.nerve_dense.empty())
    throw std::runtime_error("manifest: merge.nerve_ids must not be empty");

  PipelineResult result;
  std::vector<CaseReport> reports;
  for (const auto& spec : manifest.cases) {
    if (log)
      *log << "[" << spec.name << "] starting (" << spec.phase1.size() << " phase-1 folds, "
           << spec.phase2.size() << " phase-2 folds)\n";
    CaseOutcome outcome;
    try {
      outcome = run_case(spec, ctx, log);
    } catch (const std::exception& e) {
      outcome.name = spec.name;
      outcome.ok = false;
      outcome.error = e.what();
    }
    if (log) {
      if (outcome.ok)
        *log << "[" << spec.name << "] done -> " << outcome.final_labels_path << "\n";
      else
        *log << "[" << spec.name << "] FAILED: " << outcome.error << "\n";
    }
    if (outcome.ok && !outcome.scores.empty())
      reports.push_back({spec.name, spec.fold, outcome.scores});
    result.cases.push_back(std::move(outcome));
  }

  if (!reports.empty()) {
    result.report = aggregate(reports);
    write_report_csv(*result.report, (fs::path(manifest.output_dir) / "report.csv").string());
    write_report_json(*result.report, (fs::path(manifest.output_dir) / "report.json").string());
  }

  // run log: parameters and stage timings per case
  ordered_json runlog;
  runlog["parameters"] = manifest_parameters_json(manifest);
  runlog["cases"] = ordered_json::array();
  for (const auto& c : result.cases) {
    ordered_json jc;
    jc["name"] = c.name;
    jc["ok"] = c.ok;
    if (!c.ok)
      jc["error"] = c.error;
    if (c.phase2_ran)
      jc["phase2_box"] = c.phase2_box.to_string();
    jc["timings"] = timings_json(c.timings);
    runlog["cases"].push_back(std::move(jc));
  }
  std::ofstream rl(fs::path(manifest.output_dir) / "run_log.json", std::ios::trunc);
  rl << runlog.dump(2) << "\n";

  return result;
}

std::string default_manifest_json() {
  PipelineManifest m;
  m.output_dir = "out";
  ordered_json j = manifest_parameters_json(m);
  j["cases"] = ordered_json::array();
  return j.dump(2) + "\n";
}

} // namespace dentseg
