#ifndef STREAMSUM_TEST_ORACLES_HPP
#define STREAMSUM_TEST_ORACLES_HPP

// Independent reference computations. Written from the definitions with
// plain loops and none of the library's helpers.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracles {

/// 1 - 2|A & B| / (|A| + |B|) over selected index sets.
inline double dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::set<std::size_t> sa, sb, both;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i]) sa.insert(i);
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b[i]) sb.insert(i);
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(both, both.begin()));
  if (sa.empty() && sb.empty()) return 0.0;
  return 1.0 - 2.0 * static_cast<double>(both.size()) / static_cast<double>(sa.size() + sb.size());
}

struct Scores {
  double gain = 0, latency_gain = 0, eg = 0, comp = 0, f1 = 0, leg = 0, lcomp = 0, lf1 = 0;
};

struct ToyUpdate {
  std::vector<std::string> nuggets;  // nuggets matched by the update's sentence
  long long time = 0;
};

/// Scores a run given, per update, the nuggets it matches and its time, and
/// per nugget its earliest-report time.
inline Scores score(const std::vector<ToyUpdate>& updates, const std::map<std::string, long long>& nugget_times,
                    double window) {
  Scores s;
  for (const auto& [id, nt] : nugget_times) {
    bool found = false;
    long long best = 0;
    for (const auto& u : updates)
      for (const auto& n : u.nuggets)
        if (n == id && (!found || u.time < best)) {
          found = true;
          best = u.time;
        }
    if (!found) continue;
    s.gain += 1;
    const double delay = static_cast<double>(best - nt);
    s.latency_gain += delay <= 0 ? 1.0 : std::max(0.0, 1.0 - delay / window);
  }
  const double n = static_cast<double>(updates.size());
  const double m = static_cast<double>(nugget_times.size());
  auto hm = [](double a, double b) { return a + b == 0 ? 0.0 : 2 * a * b / (a + b); };
  s.eg = n == 0 ? 0 : s.gain / n;
  s.comp = s.gain / m;
  s.f1 = hm(s.eg, s.comp);
  s.leg = n == 0 ? 0 : s.latency_gain / n;
  s.lcomp = s.latency_gain / m;
  s.lf1 = hm(s.leg, s.lcomp);
  return s;
}

/// F1 of selecting index set `chosen` where matches[i] lists the nuggets of i.
inline double selection_f1(const std::vector<std::vector<int>>& matches, const std::vector<std::size_t>& chosen,
                           int num_nuggets) {
  std::set<int> got;
  for (auto i : chosen) got.insert(matches[i].begin(), matches[i].end());
  if (chosen.empty() || got.empty()) return 0.0;
  const double eg = static_cast<double>(got.size()) / static_cast<double>(chosen.size());
  const double comp = static_cast<double>(got.size()) / num_nuggets;
  return 2 * eg * comp / (eg + comp);
}

/// Stationary distribution of the damped LexRank chain from the dense
/// eigenproblem.
inline std::vector<double> lexrank(const Eigen::MatrixXd& sim, double d) {
  const auto n = sim.rows();
  if (n == 1) return {1.0};
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && sim(i, j) > 0) row += sim(i, j);
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = row > 0 ? (i != j && sim(i, j) > 0 ? sim(i, j) / row : 0.0) : 1.0 / static_cast<double>(n);
  }
  Eigen::MatrixXd p = d * m.transpose() + Eigen::MatrixXd::Constant(n, n, (1 - d) / static_cast<double>(n));
  Eigen::EigenSolver<Eigen::MatrixXd> es(p);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (std::abs(es.eigenvalues()(i) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = i;
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  v /= v.sum();
  return {v.data(), v.data() + n};
}

/// Exemplar set maximizing net similarity: preferences of the exemplars plus
/// each other point's best similarity to an exemplar. Exhaustive.
inline std::vector<std::size_t> ap_exemplars(const Eigen::MatrixXd& s, const Eigen::VectorXd& p,
                                             double* best_value = nullptr) {
  const int n = static_cast<int>(s.rows());
  double best = -std::numeric_limits<double>::infinity();
  unsigned best_mask = 1;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    double v = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        v += p(i);
        continue;
      }
      double m = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < n; ++k)
        if (mask & (1u << k)) m = std::max(m, s(i, k));
      v += m;
    }
    if (v > best) {
      best = v;
      best_mask = mask;
    }
  }
  if (best_value) *best_value = best;
  std::vector<std::size_t> out;
  for (int i = 0; i < n; ++i)
    if (best_mask & (1u << i)) out.push_back(static_cast<std::size_t>(i));
  return out;
}

/// Net similarity of a given exemplar set under the same objective.
inline double ap_value(const Eigen::MatrixXd& s, const Eigen::VectorXd& p, const std::vector<std::size_t>& ex) {
  double v = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (std::find(ex.begin(), ex.end(), static_cast<std::size_t>(i)) != ex.end()) {
      v += p(i);
      continue;
    }
    double m = -std::numeric_limits<double>::infinity();
    for (auto k : ex) m = std::max(m, s(i, static_cast<Eigen::Index>(k)));
    v += m;
  }
  return v;
}

/// Least squares with intercept: returns [w; b].
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd xa(x.rows(), x.cols() + 1);
  xa << x, Eigen::VectorXd::Ones(x.rows());
  return xa.colPivHouseholderQr().solve(y);
}

}  // namespace oracles

#endif
