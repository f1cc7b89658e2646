#include "staple_reference.hpp"

#include <cassert>
#include <cstddef>

namespace dentseg::testing {

namespace {

Label vote_at(const std::vector<std::vector<Label>>& raters, std::size_t i) {
  Label best = 0;
  int best_count = 0;
  for (const auto& r : raters) {
    const Label v = r[i];
    int count = 0;
    for (const auto& r2 : raters)
      count += r2[i] == v;
    if (count > best_count || (count == best_count && v < best)) {
      best = v;
      best_count = count;
    }
  }
  return best;
}

} // namespace

ReferenceStapleResult reference_staple(const std::vector<std::vector<Label>>& raters,
                                       int num_labels, int iterations, double init_diagonal,
                                       bool uniform_prior) {
  const int K = int(raters.size());
  const int L = num_labels;
  assert(K >= 1);
  const std::size_t n = raters.front().size();

  ReferenceStapleResult res;

  res.prior.assign(std::size_t(L), 0.0);
  if (uniform_prior) {
    // uniform over observed labels, matching the production semantics
    std::vector<bool> observed(std::size_t(L), false);
    for (const auto& r : raters)
      for (const Label v : r)
        observed[v] = true;
    double count = 0.0;
    for (const bool seen : observed)
      count += seen;
    for (int s = 0; s < L; ++s)
      res.prior[std::size_t(s)] = observed[std::size_t(s)] ? 1.0 / count : 0.0;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      res.prior[vote_at(raters, i)] += 1.0;
    for (auto& p : res.prior)
      p /= double(n);
  }

  const double off = L > 1 ? (1.0 - init_diagonal) / double(L - 1) : 0.0;
  res.theta.assign(std::size_t(K), std::vector<double>(std::size_t(L) * std::size_t(L), off));
  for (auto& th : res.theta)
    for (int s = 0; s < L; ++s)
      th[std::size_t(s) * std::size_t(L) + std::size_t(s)] = L > 1 ? init_diagonal : 1.0;

  res.posteriors.assign(n * std::size_t(L), 0.0);

  for (int iter = 0; iter < iterations; ++iter) {
    // E-step
    for (std::size_t i = 0; i < n; ++i) {
      double total = 0.0;
      for (int s = 0; s < L; ++s) {
        double w = res.prior[std::size_t(s)];
        for (int j = 0; j < K; ++j)
          w *= res.theta[std::size_t(j)][std::size_t(s) * std::size_t(L) +
                                         std::size_t(raters[std::size_t(j)][i])];
        res.posteriors[i * std::size_t(L) + std::size_t(s)] = w;
        total += w;
      }
      for (int s = 0; s < L; ++s)
        res.posteriors[i * std::size_t(L) + std::size_t(s)] /= total;
    }
    // M-step
    for (int j = 0; j < K; ++j) {
      std::vector<double> numer(std::size_t(L) * std::size_t(L), 0.0);
      std::vector<double> denom(std::size_t(L), 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (int s = 0; s < L; ++s) {
          const double w = res.posteriors[i * std::size_t(L) + std::size_t(s)];
          numer[std::size_t(s) * std::size_t(L) + std::size_t(raters[std::size_t(j)][i])] += w;
          denom[std::size_t(s)] += w;
        }
      for (int s = 0; s < L; ++s) {
        if (denom[std::size_t(s)] <= 0.0)
          continue;
        for (int e = 0; e < L; ++e)
          res.theta[std::size_t(j)][std::size_t(s) * std::size_t(L) + std::size_t(e)] =
              numer[std::size_t(s) * std::size_t(L) + std::size_t(e)] / denom[std::size_t(s)];
      }
    }
  }

  // final posteriors at the converged parameters, then argmax
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (int s = 0; s < L; ++s) {
      double w = res.prior[std::size_t(s)];
      for (int j = 0; j < K; ++j)
        w *= res.theta[std::size_t(j)][std::size_t(s) * std::size_t(L) +
                                       std::size_t(raters[std::size_t(j)][i])];
      res.posteriors[i * std::size_t(L) + std::size_t(s)] = w;
      total += w;
    }
    for (int s = 0; s < L; ++s)
      res.posteriors[i * std::size_t(L) + std::size_t(s)] /= total;
  }
  res.consensus.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int s = 1; s < L; ++s)
      if (res.posteriors[i * std::size_t(L) + std::size_t(s)] >
          res.posteriors[i * std::size_t(L) + std::size_t(best)])
        best = s;
    res.consensus[i] = Label(best);
  }
  return res;
}

} // namespace dentseg::testing
