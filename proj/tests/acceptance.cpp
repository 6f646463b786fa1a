// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lmmg/lmmg.hpp"

using namespace lmmg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------
// random instances

struct Instance {
  Dataset data;
  ModelState state;
};

Instance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t k, std::size_t l) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  in.data = Dataset(n, l);
  const double density = 0.1 + 0.4 * u(rng);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && u(rng) < density) in.data.add_edge(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < l; ++f)
      in.data.set_feature(i, f, u(rng) < 0.15 ? Cell::missing : (u(rng) < 0.5 ? Cell::one : Cell::zero));
  auto& s = in.state;
  s.phi().resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < s.phi().rows(); ++i)
    for (Eigen::Index g = 0; g < s.phi().cols(); ++g) s.phi()(i, g) = 0.05 + 0.9 * u(rng);
  s.w().resize(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k) + 1);
  for (Eigen::Index r = 0; r < s.w().rows(); ++r)
    for (Eigen::Index c = 0; c < s.w().cols(); ++c) s.w()(r, c) = 4.0 * u(rng) - 2.0;
  s.theta().resize(k);
  for (auto& t : s.theta())
    for (auto& row : t)
      for (double& v : row) v = 0.05 + 0.9 * u(rng);
  s.hyper.alpha.clear();
  for (std::size_t g = 0; g < k; ++g) s.hyper.alpha.push_back({0.5 + 2.0 * u(rng), 0.5 + 2.0 * u(rng)});
  s.hyper.lambda = 0.0;  // finite differences of the smooth part
  s.hyper.feature_gradient = FeatureGradient::exact;
  return in;
}

// Five-point central difference.
double derivative(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> nn(2, 20), kk(1, 3), ll(1, 10);
  std::size_t checked = 0, bad = 0;
  double worst = 0.0;
  const auto compare = [&](double analytic, double numeric) {
    ++checked;
    const double diff = std::abs(analytic - numeric);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const bool near_zero = scale < 1e-3;
    const double err = near_zero ? diff : diff / scale;
    if (!near_zero) worst = std::max(worst, err);
    if (near_zero ? diff >= 1e-7 : err >= 1e-4) ++bad;
  };
  for (int r = 0; r < 50; ++r) {
    auto in = random_instance(rng, nn(rng), kk(rng), ll(rng));
    const auto& d = in.data;
    auto s = in.state;
    const auto f = [&]() { return objective(s, d).total; };
    const double h = 1e-4;
    for (std::size_t i = 0; i < d.n_nodes(); ++i)
      for (std::size_t k = 0; k < s.groups(); ++k) {
        auto& x = s.phi()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        const double x0 = x;
        const double num = derivative([&](double v) { x = v; return f(); }, x0, std::min(h, 0.2 * std::min(x0, 1 - x0)));
        x = x0;
        compare(grad_phi(s, d, i, k).total, num);
      }
    for (std::size_t l = 0; l < d.n_features(); ++l)
      for (std::size_t k = 0; k <= s.groups(); ++k) {
        auto& x = s.w()(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k));
        const double x0 = x;
        const double num = derivative([&](double v) { x = v; return f(); }, x0, h);
        x = x0;
        compare(grad_w(s, d, l, k), num);
      }
    for (std::size_t k = 0; k < s.groups(); ++k) {
      const auto g = grad_theta(s, d, k);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          auto& x = s.theta()[k][a][b];
          const double x0 = x;
          const double num = derivative([&](double v) { x = v; return f(); }, x0, std::min(h, 0.2 * x0));
          x = x0;
          compare(g[a][b], num);
        }
    }
  }
  return {bad == 0, std::to_string(checked) + " coordinates, " + std::to_string(bad) + " mismatches, worst rel err " +
                        fmt("%.2e", worst)};
}

Outcome jensen_taylor() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t violations = 0;
  double min_gap = 1e300;
  for (int r = 0; r < 100; ++r) {
    const std::size_t k = 1 + rng() % 3;
    const std::size_t n = 2 + rng() % (16 / k - 1);
    auto in = random_instance(rng, n, k, 1);
    const double exact = oracle_exact_loglik(in.state, in.data);
    const double bound = exact_jensen_bound(in.state, in.data);
    min_gap = std::min(min_gap, exact - bound);
    if (!(bound <= exact + 1e-12)) ++violations;
  }
  // Single non-edges with E[p] <= 0.2. Gated regime: affinity entries <= 0.3,
  // so p <= 0.3; the remainder is convex in p, hence at most
  // (2/3) * (-log(0.7) - 0.3 - 0.045) < 0.008.
  // The unrestricted worst case is reported alongside.
  const auto taylor_worst = [&](double hi) {
    double worst = 0.0;
    for (std::size_t taken = 0; taken < 500;) {
      const std::size_t k = 1 + rng() % 3;
      auto in = random_instance(rng, 2, k, 1);
      for (auto& t : in.state.theta())
        for (auto& row : t)
          for (double& v : row) v = 0.01 + (hi - 0.01) * u(rng);
      const double ep = expected_edge_prob(in.state, 0, 1);
      if (ep > 0.2) continue;
      const double surrogate = -ep - 0.5 * expected_edge_prob(in.state, 0, 1, 2);
      worst = std::max(worst, std::abs(surrogate - exact_nonedge_expectation(in.state, 0, 1)));
      ++taken;
    }
    return worst;
  };
  const double gated = taylor_worst(0.3);
  const double free_range = taylor_worst(0.95);
  return {violations == 0 && gated < 0.01, "100 instances, " + std::to_string(violations) + " bound violations (min gap " +
                                               fmt("%.3g", min_gap) + "); non-edges with E[p] <= 0.2: max expansion error " +
                                               fmt("%.4f", gated) + " for affinities <= 0.3 (" + fmt("%.4f", free_range) +
                                               " unrestricted, not gated)"};
}

Outcome monotone_ascent() {
  std::size_t bad = 0;
  double worst = 0.0;
  std::size_t steps = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = synth_generate(synth_preset(seed % 2 ? "homophily" : "core-periphery", 200, 12, 2), seed).data;
    Hyperparams h;
    h.seed = seed;
    const auto [s, rep] = fit(data, 2, h);
    double prev = rep.initial.total;
    for (const auto& o : rep.objective_trace) {
      ++steps;
      if (o.total < prev - 1e-9) ++bad;
      worst = std::max(worst, prev - o.total);
      prev = o.total;
    }
  }
  return {bad == 0, std::to_string(steps) + " outer steps over 10 fits, " + std::to_string(bad) +
                        " decreases, largest drop " + fmt("%.2e", worst)};
}

// Locked regression values for the recovery experiment (seed 2024).
constexpr double kLockedLinkAuc = 0.744557;
constexpr double kLockedAvgAuc = 0.509331;
constexpr double kLockedFeatureLl = -15.5839;
constexpr double kLockedAvgFeatureLl = -20.5334;
constexpr double kRegressionTol = 0.02;

Outcome synthetic_recovery() {
  const std::uint64_t seed = 2024;
  const auto syn = synth_generate(synth_preset("homophily", 200, 16, 2), seed);
  Dataset d = syn.data;
  std::vector<std::size_t> order(d.n_nodes());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::vector<std::size_t> link_nodes(order.begin(), order.begin() + 10);
  const std::vector<std::size_t> feat_nodes(order.begin() + 10, order.begin() + 20);
  const std::size_t n_mask = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(d.n_features())));

  for (auto u : link_nodes) d.hide_links(u);
  std::vector<std::vector<Cell>> truth(d.n_nodes(), std::vector<Cell>(d.n_features(), Cell::missing));
  for (auto v : feat_nodes) {
    std::vector<std::size_t> cols(d.n_features());
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    std::shuffle(cols.begin(), cols.end(), rng);
    for (std::size_t t = 0; t < n_mask; ++t) {
      truth[v][cols[t]] = d.feature(v, cols[t]);
      d.set_feature(v, cols[t], Cell::missing);
    }
  }

  Hyperparams h;
  h.seed = seed;
  const auto [model, rep] = fit(d, 2, h);

  std::vector<std::pair<double, bool>> ours, avg;
  const std::set<std::size_t> hidden(link_nodes.begin(), link_nodes.end());
  for (auto u : link_nodes) {
    const auto r = predict_links(model, d, u);
    for (std::size_t t = 0; t < r.scores.size(); ++t) {
      const auto j = r.scores[t].first;
      ours.emplace_back(r.scores[t].second, d.edge(u, j));
      avg.emplace_back(baseline_avg(d, LinkTarget{u, j}), d.edge(u, j));
      if (hidden.contains(j)) continue;  // the reverse pair is scored as j's outgoing link
      ours.emplace_back(r.incoming[t].second, d.edge(j, u));
      avg.emplace_back(baseline_avg_incoming(d, LinkTarget{j, u}), d.edge(j, u));
    }
  }
  const double auc = *evaluate(ours).auc;
  const double auc_avg = *evaluate(avg).auc;

  double ll = 0.0, ll_avg = 0.0;
  for (auto v : feat_nodes) {
    ll += *predict_missing_features(model, d, v, truth[v]).loglik;
    for (std::size_t l = 0; l < d.n_features(); ++l) {
      if (truth[v][l] == Cell::missing) continue;
      const double p = std::clamp(baseline_avg(d, FeatureTarget{v, l}), 1e-12, 1 - 1e-12);
      ll_avg += truth[v][l] == Cell::one ? std::log(p) : std::log1p(-p);
    }
  }

  const bool targets = auc >= 0.70 && auc >= auc_avg + 0.05 && ll >= ll_avg;
  const bool locked = (std::abs(auc - kLockedLinkAuc) < kRegressionTol && std::abs(auc_avg - kLockedAvgAuc) < kRegressionTol &&
                       std::abs(ll - kLockedFeatureLl) < kRegressionTol * std::abs(kLockedFeatureLl) &&
                       std::abs(ll_avg - kLockedAvgFeatureLl) < kRegressionTol * std::abs(kLockedAvgFeatureLl));
  std::ostringstream os;
  os.precision(6);
  os << "link AUC " << auc << " vs AVG " << auc_avg << "; masked-feature loglik " << ll << " vs AVG " << ll_avg
     << (locked ? "" : " (drifted from locked values)");
  return {targets && locked, os.str()};
}

Outcome lasso_sweep() {
  const auto data = synth_generate(synth_preset("homophily", 200, 16, 2), 2024).data;
  std::vector<std::size_t> counts;
  for (double lambda : {0.001, 0.01, 0.1, 1.0}) {
    Hyperparams h;
    h.lambda = lambda;
    h.max_outer_iters = 200;
    counts.push_back(fit(data, 2, h).first.weights.nonzero());
  }
  bool monotone = true;
  for (std::size_t t = 1; t < counts.size(); ++t) monotone = monotone && counts[t] <= counts[t - 1];
  std::string c;
  for (auto v : counts) c += (c.empty() ? "" : ", ") + std::to_string(v);
  return {monotone && counts.back() == 0, "nonzero weights for lambda {0.001, 0.01, 0.1, 1}: " + c};
}

Outcome permutation_invariance() {
  const auto data = synth_generate(synth_preset("core-periphery", 80, 10, 3), 9).data;
  Hyperparams h;
  h.max_outer_iters = 60;
  h.alpha = {{0.8, 1.2}, {1.5, 0.7}, {1.1, 1.1}};
  const auto [s, rep] = fit(data, 3, h);
  const double base = objective(s, data).total;
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int r = 0; r < 10; ++r) {
    std::vector<std::size_t> perm{0, 1, 2};
    std::shuffle(perm.begin(), perm.end(), rng);
    ModelState p = s;
    for (std::size_t g = 0; g < 3; ++g) {
      const auto src = static_cast<Eigen::Index>(perm[g]);
      const auto dst = static_cast<Eigen::Index>(g);
      p.phi().col(dst) = s.phi().col(src);
      p.w().col(dst) = s.w().col(src);
      p.theta()[g] = s.theta()[perm[g]];
      p.hyper.alpha[g] = s.hyper.alpha[perm[g]];
    }
    worst = std::max(worst, std::abs(objective(p, data).total - base) / std::abs(base));
  }
  return {worst < 1e-10, "10 permutations, max relative change " + fmt("%.2e", worst)};
}

Outcome select_k_recovery() {
  std::size_t hits = 0;
  std::string chosen;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = synth_generate(synth_preset("homophily", 300, 18, 3), 1000 + seed).data;
    Hyperparams h;
    h.seed = seed;
    h.max_outer_iters = 40;
    h.rel_tol = 1e-4;
    const auto rep = select_k(data, h, {1, 2, 3, 4, 5}, 10, CvTask::features);
    hits += rep.chosen_k >= 2 && rep.chosen_k <= 4 ? 1 : 0;
    chosen += (chosen.empty() ? "" : ",") + std::to_string(rep.chosen_k);
  }
  return {hits >= 8, std::to_string(hits) + "/10 seeds chose K in {2,3,4} (chosen: " + chosen + ")"};
}

// ---------------------------------------------------------------------------
// baseline fixtures

Dataset fixture(const std::string& name) {
  const std::string base = std::string(LMMG_TEST_DATA) + "/" + name;
  return load_dataset(base + ".edges.tsv", base + ".features.tsv", false).data;
}

Outcome baseline_fixtures() {
  std::vector<std::string> failures;
  const auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  const auto d5 = fixture("ccn5");
  const auto e = d5.index_of("e");
  {
    // own f1, neighbor-majority f1 and f2 per training node; query (1,1,1)
    const double p1 = 0.5 * (2.0 / 4) * (3.0 / 4) * (1.0 / 4);
    const double p0 = 0.5 * (2.0 / 4) * (3.0 / 4) * (3.0 / 4);
    check(std::abs(baseline_ccn(d5, FeatureTarget{e, 1}) - p1 / (p1 + p0)) < 1e-12, "CC-N feature");
    const double q1 = (2.0 / 5) * (2.0 / 3);
    const double q0 = (3.0 / 5) * (1.0 / 4);
    check(std::abs(baseline_ccn(d5, LinkTarget{e, d5.index_of("b")}) - q1 / (q1 + q0)) < 1e-12, "CC-N link");
    check(baseline_avg(d5, FeatureTarget{e, 1}) == 2.0 / 4.0, "AVG feature");
    check(baseline_avg(d5, LinkTarget{e, d5.index_of("a")}) == 1.0 / 3.0, "AVG link");
  }

  const auto d6 = fixture("ccl6");
  {
    // Newton solution on rows (own f1, mean f1, mean f2):
    // (0,0,0)->0 (0,1/3,1/2)->1 (1,1,1)->0 (0,0,1/2)->0 (1,1/2,1/2)->1; query (0,0,1/3)
    Eigen::MatrixXd a(5, 4);
    a << 1, 0, 0, 0, 1, 0, 1.0 / 3, 0.5, 1, 1, 1, 1, 1, 0, 0, 0.5, 1, 1, 0.5, 0.5;
    Eigen::VectorXd y(5);
    y << 0, 1, 0, 0, 1;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(4);
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd p = ((-(a * b)).array().exp() + 1.0).inverse().matrix();
      const Eigen::MatrixXd hess = a.transpose() * (p.array() * (1 - p.array())).matrix().asDiagonal() * a;
      b += hess.ldlt().solve(a.transpose() * (y - p));
    }
    const double expected = sigmoid(b(0) + b(3) / 3.0);
    check(std::abs(baseline_ccl(d6, FeatureTarget{d6.index_of("f"), 1}) - expected) < 1e-6, "CC-L feature");
    check(baseline_avg(d6, FeatureTarget{d6.index_of("f"), 1}) == 2.0 / 5.0, "AVG feature (6-node)");
  }
  std::string detail = failures.empty() ? "CC-N (2 targets), CC-L, AVG (3 targets) match hand values" : "failed:";
  for (const auto& f : failures) detail += " " + f;
  return {failures.empty(), detail};
}

Outcome determinism() {
  const auto data = synth_generate(synth_preset("homophily", 120, 10, 2), 5).data;
  Hyperparams h;
  h.seed = 7;
  h.threads = 1;
  h.max_outer_iters = 80;
  const auto payload = [&]() {
    const auto [s, rep] = fit(data, 2, h);
    ModelFile m{s, data.node_ids, data.feature_names, {"fit --seed 7 --threads 1", 7, ""}};
    std::ostringstream os;
    save_model(m, os);
    return os.str();
  };
  const auto a = payload();
  const auto b = payload();
  return {a == b, std::to_string(a.size()) + "-byte model payloads " + (a == b ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient correctness", gradient_correctness},
      {2, "Jensen bound and second-order expansion", jensen_taylor},
      {3, "monotone ascent", monotone_ascent},
      {4, "synthetic recovery", synthetic_recovery},
      {5, "LASSO sparsity path", lasso_sweep},
      {6, "group permutation invariance", permutation_invariance},
      {7, "K selection", select_k_recovery},
      {8, "baseline fixtures", baseline_fixtures},
      {9, "determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

  ScopedWarningSink quiet(nullptr);
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
