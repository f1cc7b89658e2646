#include "dentseg/staple.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>

namespace dentseg {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kChunk = 2048; // patterns per work unit, fixed for determinism

int resolve_threads(int requested, std::size_t work_items) {
  int n = requested > 0 ? requested : int(std::thread::hardware_concurrency());
  n = std::max(1, n);
  const std::size_t chunks = (work_items + kChunk - 1) / kChunk;
  return int(std::min<std::size_t>(std::size_t(n), std::max<std::size_t>(chunks, 1)));
}

// Run fn(chunk_begin, chunk_end) over fixed-size chunks. Chunk
// boundaries do not depend on the thread count, and every write a
// chunk makes is confined to its own range or per-chunk slots, so the
// result is identical however the chunks are scheduled.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t num_chunks = (n + kChunk - 1) / kChunk;
  if (threads <= 1 || num_chunks <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c)
      fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= num_chunks)
        return;
      fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool)
    t.join();
}

struct PatternSet {
  int num_raters = 0;
  std::size_t count = 0;               // distinct patterns
  std::vector<Label> labels;           // count * K, pattern-major
  std::vector<std::uint64_t> weight;   // voxels per pattern
  std::vector<std::uint32_t> of_voxel; // pattern id per voxel

  const Label* pattern(std::size_t p) const { return labels.data() + p * std::size_t(num_raters); }
};

// Group voxels by their K-tuple of rater labels, pattern ids in first-
// occurrence (scan) order.
PatternSet build_patterns(const std::vector<LabelGrid>& raters, int num_labels) {
  const int K = int(raters.size());
  const std::size_t n = raters.front().size();
  PatternSet ps;
  ps.num_raters = K;
  ps.of_voxel.resize(n);

  const int bits = std::max(1, int(std::bit_width(unsigned(num_labels - 1))));
  const bool packable = std::size_t(bits) * std::size_t(K) <= 64;

  std::vector<const Label*> src(static_cast<std::size_t>(K));
  for (int j = 0; j < K; ++j)
    src[std::size_t(j)] = raters[std::size_t(j)].data().data();

  if (packable) {
    std::unordered_map<std::uint64_t, std::uint32_t> seen;
    seen.reserve(1 << 16);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t key = 0;
      for (int j = 0; j < K; ++j)
        key = (key << bits) | std::uint64_t(src[std::size_t(j)][i]);
      auto [it, inserted] = seen.emplace(key, std::uint32_t(ps.count));
      if (inserted) {
        ++ps.count;
        for (int j = 0; j < K; ++j)
          ps.labels.push_back(src[std::size_t(j)][i]);
        ps.weight.push_back(0);
      }
      ps.of_voxel[i] = it->second;
      ++ps.weight[it->second];
    }
  } else {
    std::unordered_map<std::string, std::uint32_t> seen;
    std::string key(std::size_t(K) * sizeof(Label), '\0');
    for (std::size_t i = 0; i < n; ++i) {
      for (int j = 0; j < K; ++j)
        std::memcpy(key.data() + std::size_t(j) * sizeof(Label), &src[std::size_t(j)][i],
                    sizeof(Label));
      auto [it, inserted] = seen.emplace(key, std::uint32_t(ps.count));
      if (inserted) {
        ++ps.count;
        for (int j = 0; j < K; ++j)
          ps.labels.push_back(src[std::size_t(j)][i]);
        ps.weight.push_back(0);
      }
      ps.of_voxel[i] = it->second;
      ++ps.weight[it->second];
    }
  }
  return ps;
}

// Modal label of one pattern, ties to the lowest label. K is small, so
// count occurrences pairwise.
Label pattern_mode(const Label* p, int K) {
  Label best = 0;
  int best_count = 0;
  for (int j = 0; j < K; ++j) {
    const Label v = p[j];
    int c = 0;
    for (int k = 0; k < K; ++k)
      c += p[k] == v;
    if (c > best_count || (c == best_count && v < best)) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

bool pattern_unanimous(const Label* p, int K) {
  for (int j = 1; j < K; ++j)
    if (p[j] != p[0])
      return false;
  return true;
}

// Insertion sort; addend lists are tiny (one entry per rater).
void sort_small(double* v, int n) {
  for (int i = 1; i < n; ++i) {
    const double x = v[i];
    int j = i - 1;
    while (j >= 0 && v[j] > x) {
      v[j + 1] = v[j];
      --j;
    }
    v[j + 1] = x;
  }
}

struct EStepScratch {
  std::vector<double> w;       // L posterior weights
  std::vector<double> t;       // L log scores
  std::vector<double> addends; // K log-theta terms
};

// Posterior of one pattern. Returns the log-evidence (logsumexp of the
// unnormalized scores); w receives the normalized posterior.
double pattern_posterior(const Label* pat, int K, int L, const std::vector<double>& log_prior,
                         const std::vector<std::vector<double>>& log_theta, EStepScratch& s) {
  double t_max = kNegInf;
  for (int lab = 0; lab < L; ++lab) {
    if (log_prior[std::size_t(lab)] == kNegInf) {
      s.t[std::size_t(lab)] = kNegInf;
      continue;
    }
    for (int j = 0; j < K; ++j)
      s.addends[std::size_t(j)] =
          log_theta[std::size_t(j)][std::size_t(lab) * std::size_t(L) + std::size_t(pat[j])];
    // value-ordered summation: invariant under rater permutation
    sort_small(s.addends.data(), K);
    double acc = log_prior[std::size_t(lab)];
    for (int j = 0; j < K; ++j)
      acc += s.addends[std::size_t(j)];
    s.t[std::size_t(lab)] = acc;
    t_max = std::max(t_max, acc);
  }
  double z = 0.0;
  for (int lab = 0; lab < L; ++lab)
    z += s.w[std::size_t(lab)] =
        s.t[std::size_t(lab)] == kNegInf ? 0.0 : std::exp(s.t[std::size_t(lab)] - t_max);
  for (int lab = 0; lab < L; ++lab)
    s.w[std::size_t(lab)] /= z;
  return t_max + std::log(z);
}

Label posterior_argmax(const std::vector<double>& w, int L) {
  int best = 0;
  for (int lab = 1; lab < L; ++lab)
    if (w[std::size_t(lab)] > w[std::size_t(best)])
      best = lab;
  return Label(best);
}

void validate_inputs(const std::vector<LabelGrid>& raters, int& num_labels) {
  if (raters.empty())
    throw std::invalid_argument("fusion requires at least one rater");
  for (std::size_t j = 1; j < raters.size(); ++j)
    if (!raters[j].same_geometry(raters[0]))
      throw std::invalid_argument("rater " + std::to_string(j) + " has mismatched geometry");
  int max_label = 0;
  for (const auto& r : raters)
    for (const Label v : r.data())
      max_label = std::max(max_label, int(v));
  if (num_labels == 0)
    num_labels = max_label + 1;
  else if (max_label >= num_labels)
    throw std::invalid_argument("rater label " + std::to_string(max_label) +
                                " outside the configured range of " + std::to_string(num_labels) +
                                " labels");
}

} // namespace

LabelGrid majority_vote(const std::vector<LabelGrid>& raters) {
  int L = 0;
  validate_inputs(raters, L);
  const int K = int(raters.size());
  LabelGrid out = raters.front();
  std::vector<const Label*> src(static_cast<std::size_t>(K));
  for (int j = 0; j < K; ++j)
    src[std::size_t(j)] = raters[std::size_t(j)].data().data();
  std::vector<Label> tuple(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int j = 0; j < K; ++j)
      tuple[std::size_t(j)] = src[std::size_t(j)][i];
    out[i] = pattern_mode(tuple.data(), K);
  }
  return out;
}

FusionResult staple_fuse(const std::vector<LabelGrid>& raters, const FusionConfig& cfg) {
  int L = cfg.num_labels;
  validate_inputs(raters, L);
  if (!(cfg.init_diagonal > 0.5 && cfg.init_diagonal < 1.0) && L > 1)
    throw std::invalid_argument("init diagonal must lie in (0.5, 1)");
  if (cfg.tolerance < 0.0)
    throw std::invalid_argument("tolerance must be non-negative");

  const int K = int(raters.size());
  const std::size_t n = raters.front().size();

  FusionResult res;
  res.prior.assign(std::size_t(L), 0.0);

  // One rater carries no disagreement to resolve; pass it through with
  // a perfect-rater model.
  if (K == 1) {
    res.consensus = raters.front();
    RaterModel m;
    m.num_labels = L;
    m.theta.assign(std::size_t(L) * std::size_t(L), 0.0);
    for (int s = 0; s < L; ++s)
      m.theta[std::size_t(s) * std::size_t(L) + std::size_t(s)] = 1.0;
    res.raters.push_back(std::move(m));
    for (const Label v : res.consensus.data())
      res.prior[v] += 1.0;
    for (auto& p : res.prior)
      p /= double(n);
    if (cfg.keep_posteriors) {
      res.posteriors.assign(n * std::size_t(L), 0.0f);
      for (std::size_t i = 0; i < n; ++i)
        res.posteriors[i * std::size_t(L) + res.consensus[i]] = 1.0f;
    }
    return res;
  }

  const PatternSet ps = build_patterns(raters, L);
  const std::size_t P = ps.count;
  const int threads = resolve_threads(cfg.threads, P);

  // prior fixed across EM: majority-vote frequencies, or uniform over
  // the labels any rater emitted. Labels outside the observed set keep
  // zero prior either way, which pins the consensus to the rater label
  // union.
  std::vector<Label> mv(P);
  for (std::size_t p = 0; p < P; ++p)
    mv[p] = pattern_mode(ps.pattern(p), K);
  if (cfg.prior == FusionConfig::Prior::Uniform) {
    std::vector<char> observed(std::size_t(L), 0);
    for (std::size_t p = 0; p < P; ++p)
      for (int j = 0; j < K; ++j)
        observed[ps.pattern(p)[j]] = 1;
    const double count = double(std::count(observed.begin(), observed.end(), char(1)));
    for (int s = 0; s < L; ++s)
      res.prior[std::size_t(s)] = observed[std::size_t(s)] ? 1.0 / count : 0.0;
  } else {
    for (std::size_t p = 0; p < P; ++p)
      res.prior[mv[p]] += double(ps.weight[p]);
    for (auto& v : res.prior)
      v /= double(n);
  }
  std::vector<double> log_prior(static_cast<std::size_t>(L));
  for (int s = 0; s < L; ++s)
    log_prior[std::size_t(s)] = res.prior[std::size_t(s)] > 0.0
                                    ? std::log(res.prior[std::size_t(s)])
                                    : kNegInf;

  // theta init: symmetric, diagonally dominant
  const double off = L > 1 ? (1.0 - cfg.init_diagonal) / double(L - 1) : 0.0;
  std::vector<std::vector<double>> theta(
      std::size_t(K), std::vector<double>(std::size_t(L) * std::size_t(L), off));
  for (auto& th : theta)
    for (int s = 0; s < L; ++s)
      th[std::size_t(s) * std::size_t(L) + std::size_t(s)] = L > 1 ? cfg.init_diagonal : 1.0;

  std::vector<std::vector<double>> log_theta = theta;
  auto refresh_log_theta = [&] {
    for (int j = 0; j < K; ++j)
      for (std::size_t e = 0; e < theta[std::size_t(j)].size(); ++e)
        log_theta[std::size_t(j)][e] =
            theta[std::size_t(j)][e] > 0.0 ? std::log(theta[std::size_t(j)][e]) : kNegInf;
  };
  refresh_log_theta();

  // Per-chunk M-step partials, merged in chunk order after each sweep.
  const std::size_t num_chunks = (P + kChunk - 1) / kChunk;
  const std::size_t theta_sz = std::size_t(K) * std::size_t(L) * std::size_t(L);
  std::vector<std::vector<double>> chunk_num(num_chunks);
  std::vector<double> chunk_ll(num_chunks);

  res.iterations = 0;
  res.final_delta = 0.0;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    parallel_chunks(P, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
      EStepScratch scratch{std::vector<double>(static_cast<std::size_t>(L)), std::vector<double>(static_cast<std::size_t>(L)),
                           std::vector<double>(static_cast<std::size_t>(K))};
      auto& num = chunk_num[c];
      num.assign(theta_sz, 0.0);
      double ll = 0.0;
      for (std::size_t p = b; p < e; ++p) {
        const Label* pat = ps.pattern(p);
        const double wgt = double(ps.weight[p]);
        ll += wgt * pattern_posterior(pat, K, L, log_prior, log_theta, scratch);
        for (int s = 0; s < L; ++s) {
          const double w = wgt * scratch.w[std::size_t(s)];
          if (w == 0.0)
            continue;
          for (int j = 0; j < K; ++j)
            num[std::size_t(j) * std::size_t(L) * std::size_t(L) +
                std::size_t(s) * std::size_t(L) + std::size_t(pat[j])] += w;
        }
      }
      chunk_ll[c] = ll;
    });

    // fixed-order merge keeps the reduction bit-reproducible
    std::vector<double> num(theta_sz, 0.0);
    double ll = 0.0;
    for (std::size_t c = 0; c < num_chunks; ++c) {
      for (std::size_t e = 0; e < theta_sz; ++e)
        num[e] += chunk_num[c][e];
      ll += chunk_ll[c];
    }
    res.log_likelihood.push_back(ll);
    ++res.iterations;

    // M-step: row e-sums equal the shared denominator Σ_i W_i(s), so
    // dividing by the row sum both applies it and renormalizes exactly.
    double delta = 0.0;
    for (int j = 0; j < K; ++j) {
      for (int s = 0; s < L; ++s) {
        const std::size_t row = std::size_t(s) * std::size_t(L);
        const std::size_t jrow = std::size_t(j) * std::size_t(L) * std::size_t(L) + row;
        double row_sum = 0.0;
        for (int e = 0; e < L; ++e)
          row_sum += num[jrow + std::size_t(e)];
        if (row_sum <= 0.0)
          continue; // no posterior mass anywhere: row keeps its previous value
        for (int e = 0; e < L; ++e) {
          const double v = num[jrow + std::size_t(e)] / row_sum;
          delta = std::max(delta, std::abs(v - theta[std::size_t(j)][row + std::size_t(e)]));
          theta[std::size_t(j)][row + std::size_t(e)] = v;
        }
      }
    }
    refresh_log_theta();
    res.final_delta = delta;
    if (cfg.tolerance > 0.0 && delta < cfg.tolerance)
      break;
  }

  // consensus extraction at the converged theta
  std::vector<Label> consensus_of(P);
  if (cfg.keep_posteriors)
    res.posteriors.assign(n * std::size_t(L), 0.0f);
  std::vector<float> pattern_w(cfg.keep_posteriors ? P * std::size_t(L) : 0);

  parallel_chunks(P, threads, [&](std::size_t, std::size_t b, std::size_t e) {
    EStepScratch scratch{std::vector<double>(static_cast<std::size_t>(L)), std::vector<double>(static_cast<std::size_t>(L)),
                         std::vector<double>(static_cast<std::size_t>(K))};
    for (std::size_t p = b; p < e; ++p) {
      const Label* pat = ps.pattern(p);
      if (cfg.skip_unanimous && pattern_unanimous(pat, K)) {
        consensus_of[p] = pat[0];
        if (cfg.keep_posteriors)
          pattern_w[p * std::size_t(L) + pat[0]] = 1.0f;
        continue;
      }
      pattern_posterior(pat, K, L, log_prior, log_theta, scratch);
      consensus_of[p] = posterior_argmax(scratch.w, L);
      if (cfg.keep_posteriors)
        for (int s = 0; s < L; ++s)
          pattern_w[p * std::size_t(L) + std::size_t(s)] = float(scratch.w[std::size_t(s)]);
    }
  });

  res.consensus = raters.front();
  for (std::size_t i = 0; i < n; ++i)
    res.consensus[i] = consensus_of[ps.of_voxel[i]];
  if (cfg.keep_posteriors)
    for (std::size_t i = 0; i < n; ++i)
      std::memcpy(res.posteriors.data() + i * std::size_t(L),
                  pattern_w.data() + std::size_t(ps.of_voxel[i]) * std::size_t(L),
                  std::size_t(L) * sizeof(float));

  res.raters.reserve(std::size_t(K));
  for (int j = 0; j < K; ++j) {
    RaterModel m;
    m.num_labels = L;
    m.theta = std::move(theta[std::size_t(j)]);
    res.raters.push_back(std::move(m));
  }
  return res;
}

} // namespace dentseg
