#pragma once

#include "dentseg/grid.hpp"

#include <vector>

namespace dentseg {

/// Per-rater performance model: row-stochastic L x L confusion matrix.
/// theta[s*L + s'] is the probability the rater emits label s' when the
/// underlying truth is s.
struct RaterModel {
  int num_labels = 0;
  std::vector<double> theta;

  double at(int truth, int emitted) const {
    return theta[std::size_t(truth) * std::size_t(num_labels) + std::size_t(emitted)];
  }
};

struct FusionConfig {
  int max_iterations = 100;
  double tolerance = 1e-7;     // on max |delta theta|; 0 runs max_iterations exactly
  double init_diagonal = 0.9;  // off-diagonal mass spread uniformly
  // Uniform spreads the prior over the labels any rater emitted;
  // unobserved labels always carry zero prior so the consensus stays
  // inside the rater label union.
  enum class Prior { VoteFrequency, Uniform } prior = Prior::VoteFrequency;
  int num_labels = 0;          // 0 = infer as max observed label + 1
  bool keep_posteriors = false;
  // Emit the agreed label directly at all-agree voxels instead of
  // evaluating their posterior argmax. Estimation itself always covers
  // every voxel (grouping makes unanimous voxels cheap), so the
  // consensus is identical as long as confusion rows stay diagonally
  // dominant, which the agreement-dominance tests assert.
  bool skip_unanimous = false;
  int threads = 0;             // 0 = hardware concurrency
};

struct FusionResult {
  LabelGrid consensus;
  std::vector<RaterModel> raters;
  std::vector<double> prior;            // length L
  std::vector<float> posteriors;        // voxel-major, L per voxel; empty unless requested
  int iterations = 0;
  double final_delta = 0.0;
  std::vector<double> log_likelihood;   // one entry per E-step
};

/// Multi-label STAPLE: expectation-maximization over per-rater
/// confusion matrices and a fixed class prior, yielding a consensus by
/// per-voxel posterior argmax (ties to the lowest label).
///
/// E-step:  W_i(s) ∝ π(s) · Π_j θ_j[s, d_ij]
/// M-step:  θ_j[s,s'] = Σ_{i: d_ij=s'} W_i(s) / Σ_i W_i(s)
///
/// The prior π is computed once from majority-vote label frequencies
/// (or uniform) and held fixed. Voxels are grouped by their K-tuple of
/// rater labels, which leaves the mathematics unchanged while doing
/// the per-voxel work once per distinct tuple; products run in log
/// space with the addends summed in value order, so results are
/// bit-identical under any rater permutation and thread count.
FusionResult staple_fuse(const std::vector<LabelGrid>& raters, const FusionConfig& cfg = {});

/// Per-voxel modal label, ties to the lowest label.
LabelGrid majority_vote(const std::vector<LabelGrid>& raters);

} // namespace dentseg
