#pragma once

// Brute-force recomputation of the estimators from raw group sums, kept
// independent of the library code paths.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace rdid::oracle {

struct RawData {
  std::vector<double> y, d, post, info;
};

struct Result {
  std::vector<double> levels, sb;
  std::vector<std::size_t> counts;
  std::size_t n_pre = 0;
  double estimand = 0, lower = 0, upper = 0;
  double l1 = 0, l2 = 0, linf = 0;
  double slope = 0, intercept = 0;
};

inline double contrast(const RawData& r, bool post, double level, bool by_level, std::size_t* count) {
  double s1 = 0, s0 = 0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < r.y.size(); ++i) {
    if ((r.post[i] == 1.0) != post) continue;
    if (by_level && r.info[i] != level) continue;
    if (r.d[i] == 1.0) {
      s1 += r.y[i];
      ++n1;
    } else {
      s0 += r.y[i];
      ++n0;
    }
  }
  if (count) *count = n1 + n0;
  return s1 / n1 - s0 / n0;
}

inline Result compute(const RawData& r) {
  Result o;
  for (std::size_t i = 0; i < r.y.size(); ++i)
    if (r.post[i] == 0.0 && std::find(o.levels.begin(), o.levels.end(), r.info[i]) == o.levels.end())
      o.levels.push_back(r.info[i]);
  std::sort(o.levels.begin(), o.levels.end());
  for (double l : o.levels) {
    std::size_t c = 0;
    o.sb.push_back(contrast(r, false, l, true, &c));
    o.counts.push_back(c);
    o.n_pre += c;
  }
  o.estimand = contrast(r, true, 0, false, nullptr);
  const double mx = *std::max_element(o.sb.begin(), o.sb.end());
  const double mn = *std::min_element(o.sb.begin(), o.sb.end());
  o.lower = o.estimand - mx;
  o.upper = o.estimand - mn;

  // L1: smallest sb value v with count{sb <= v} covering half of the pre rows.
  std::vector<double> candidates = o.sb;
  std::sort(candidates.begin(), candidates.end());
  for (double v : candidates) {
    std::size_t below = 0;
    for (std::size_t k = 0; k < o.sb.size(); ++k)
      if (o.sb[k] <= v) below += o.counts[k];
    if (2 * below >= o.n_pre) {
      o.l1 = o.estimand - v;
      break;
    }
  }
  double wsum = 0;
  for (std::size_t k = 0; k < o.sb.size(); ++k) wsum += static_cast<double>(o.counts[k]) * o.sb[k];
  o.l2 = o.estimand - wsum / static_cast<double>(o.n_pre);
  o.linf = o.estimand - 0.5 * (mn + mx);

  if (o.levels.size() >= 2) {
    const double n = static_cast<double>(o.levels.size());
    double mxl = 0, myl = 0;
    for (std::size_t k = 0; k < o.levels.size(); ++k) {
      mxl += o.levels[k] / n;
      myl += o.sb[k] / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < o.levels.size(); ++k) {
      sxy += (o.levels[k] - mxl) * (o.sb[k] - myl);
      sxx += (o.levels[k] - mxl) * (o.levels[k] - mxl);
    }
    o.slope = sxy / sxx;
    o.intercept = myl - o.slope * mxl;
  }
  return o;
}

// Random dataset of at most 20 rows in which every pre-period level and the
// post period contain both groups.
inline RawData random_small(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> n_levels(1, 4);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  std::uniform_int_distribution<int> coin(0, 1);
  RawData r;
  const int L = n_levels(gen);
  std::vector<double> levels;
  for (int k = 0; k < L; ++k) levels.push_back(-static_cast<double>(k) * 1.5 + (k % 2 ? 0.25 : 0.0));
  auto add = [&](double post, double info, double d) {
    r.y.push_back(val(gen));
    r.d.push_back(d);
    r.post.push_back(post);
    r.info.push_back(info);
  };
  for (double l : levels) {
    add(0, l, 1);
    add(0, l, 0);
  }
  add(1, 1, 1);
  add(1, 1, 0);
  std::uniform_int_distribution<int> extra(0, 20 - static_cast<int>(r.y.size()));
  std::uniform_int_distribution<int> pick(0, L);
  for (int e = extra(gen); e > 0; --e) {
    const int k = pick(gen);
    if (k == L) add(1, 1, coin(gen));
    else add(0, levels[k], coin(gen));
  }
  return r;
}

}  // namespace rdid::oracle
