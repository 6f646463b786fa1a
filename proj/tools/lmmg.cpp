// lmmg command-line tool.
//
// Machine-readable JSON goes to stdout (or --out); a human summary goes to
// stderr. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmmg/lmmg.hpp"

namespace {

using nlohmann::json;
using namespace lmmg;

struct DataArgs {
  std::string edges;
  std::string features;
  bool undirected = false;
};

struct HyperArgs {
  Hyperparams h;
  std::string alpha;
  std::string sweep = "gauss_seidel";
  bool no_backtrack = false;

  Hyperparams resolve() const {
    Hyperparams out = h;
    out.backtrack = !no_backtrack;
    if (sweep == "frozen") out.sweep = PhiSweep::frozen;
    else if (sweep != "gauss_seidel") throw UsageError("--sweep must be gauss_seidel or frozen");
    if (!alpha.empty()) {
      out.alpha.clear();
      std::stringstream ss(alpha);
      std::string pair;
      while (std::getline(ss, pair, ';')) {
        const auto comma = pair.find(',');
        if (comma == std::string::npos) throw UsageError("--alpha expects a,b[;a,b...]");
        try {
          out.alpha.push_back({std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1))});
        } catch (const std::exception&) {
          throw UsageError("--alpha expects numbers");
        }
      }
    }
    out.validate();
    return out;
  }
};

void add_data_options(CLI::App* app, DataArgs& a, bool required = true) {
  auto* e = app->add_option("--edges", a.edges, "edge list TSV (src<TAB>dst)");
  if (required) e->required();
  app->add_option("--features", a.features, "feature TSV with header node<TAB>f1...fL");
  app->add_flag("--undirected", a.undirected, "treat every edge as undirected");
}

void add_hyper_options(CLI::App* app, HyperArgs& a) {
  auto& h = a.h;
  app->add_option("--lambda", h.lambda, "L1 shrinkage per weight step");
  app->add_option("--gamma-phi", h.gamma_phi, "membership learning rate");
  app->add_option("--gamma-f", h.gamma_f, "feature-weight learning rate");
  app->add_option("--gamma-a", h.gamma_a, "affinity learning rate");
  app->add_option("--alpha", a.alpha, "Beta prior a,b (one pair, or one per group separated by ';')");
  app->add_option("--eps", h.clamp_eps, "probability clamp");
  app->add_option("--max-iters", h.max_outer_iters, "maximum outer iterations");
  app->add_option("--tol", h.rel_tol, "relative objective change for convergence");
  app->add_option("--seed", h.seed, "random seed");
  app->add_option("--threads", h.threads, "worker threads");
  app->add_flag("--no-backtrack", a.no_backtrack, "plain fixed-rate updates");
  app->add_option("--inner-passes", h.inner_passes, "passes per block per outer iteration");
  app->add_option("--foldin-iters", h.foldin_iters, "maximum fold-in iterations");
  app->add_option("--sweep", a.sweep, "membership sweep: gauss_seidel or frozen");
}

LoadedDataset load(const DataArgs& a) { return load_dataset(a.edges, a.features, a.undirected); }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream os(out);
  if (!os) throw DataError("cannot write '" + out + "'");
  os << j.dump(2) << '\n';
}

json metrics_json(const Metrics& m) {
  json j{{"loglik", m.loglik}, {"accuracy", m.accuracy}, {"count", m.count}};
  j["auc"] = m.auc ? json(*m.auc) : json(nullptr);
  return j;
}

void write_scores(const std::string& path, const std::vector<std::pair<double, bool>>& scores) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw DataError("cannot write '" + path + "'");
  os << "# probability\ttruth\n";
  for (const auto& [p, y] : scores) os << format_real(p) << '\t' << (y ? 1 : 0) << '\n';
}

std::size_t feature_index(const Dataset& d, const std::string& key) {
  for (std::size_t l = 0; l < d.feature_names.size(); ++l)
    if (d.feature_names[l] == key) return l;
  try {
    std::size_t pos = 0;
    const auto v = std::stoul(key, &pos);
    if (pos == key.size() && v < d.n_features()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("unknown feature '" + key + "'");
}

std::vector<std::size_t> parse_mask(const Dataset& d, const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty() || text == "all") {
    out.resize(d.n_features());
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(feature_index(d, item));
  return out;
}

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw UsageError("bad list entry '" + item + "'");
    }
  }
  return out;
}

std::string join_argv(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Latent multi-group membership graph model: fit, predict, select K, baselines"};
  app.require_subcommand(1);

  DataArgs data;
  HyperArgs hyper;
  std::string out;
  std::size_t k = 2;

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit the model and write a model file");
  add_data_options(fit_cmd, data);
  add_hyper_options(fit_cmd, hyper);
  fit_cmd->add_option("--k", k, "number of groups")->required();
  fit_cmd->add_option("--out", out, "model file (default stdout)");
  std::string report_path;
  fit_cmd->add_option("--report", report_path, "write the objective trace as JSON");

  // predict-features
  auto* pf_cmd = app.add_subcommand("predict-features", "score masked features of one node");
  std::string model_path, node_id, mask, scores_out;
  pf_cmd->add_option("--model", model_path, "model file")->required();
  pf_cmd->add_option("--node", node_id, "node id")->required();
  pf_cmd->add_option("--mask", mask, "comma-separated feature names/indices, or 'all'");
  add_data_options(pf_cmd, data, false);
  pf_cmd->add_option("--out", out, "output JSON (default stdout)");
  pf_cmd->add_option("--scores-out", scores_out, "write probability<TAB>truth lines");

  // predict-links
  auto* pl_cmd = app.add_subcommand("predict-links", "hold out a node's links, fit, and score them");
  add_data_options(pl_cmd, data);
  add_hyper_options(pl_cmd, hyper);
  std::string holdout;
  pl_cmd->add_option("--holdout", holdout, "node id whose links are hidden")->required();
  pl_cmd->add_option("--k", k, "number of groups")->required();
  pl_cmd->add_option("--out", out, "output JSON (default stdout)");
  pl_cmd->add_option("--scores-out", scores_out, "write probability<TAB>truth lines");

  // classify
  auto* cl_cmd = app.add_subcommand("classify", "predict a label column on a random test split");
  add_data_options(cl_cmd, data);
  add_hyper_options(cl_cmd, hyper);
  std::string label_col;
  double train_frac = 0.8;
  cl_cmd->add_option("--label-col", label_col, "label feature name or index")->required();
  cl_cmd->add_option("--train-frac", train_frac, "fraction of labelled nodes used for training")
      ->check(CLI::Range(0.0, 1.0));
  cl_cmd->add_option("--k", k, "number of groups")->required();
  cl_cmd->add_option("--out", out, "output JSON (default stdout)");
  cl_cmd->add_option("--scores-out", scores_out, "write probability<TAB>truth lines");

  // select-k
  auto* sk_cmd = app.add_subcommand("select-k", "choose K by held-out log-likelihood");
  add_data_options(sk_cmd, data);
  add_hyper_options(sk_cmd, hyper);
  std::string candidates, cv_task = "features";
  std::size_t reps = 20;
  sk_cmd->add_option("--candidates", candidates, "comma-separated K values");
  sk_cmd->add_option("--reps", reps, "validation repetitions");
  sk_cmd->add_option("--cv-task", cv_task, "features or link");
  sk_cmd->add_option("--out", out, "output JSON (default stdout)");

  // synth
  auto* sy_cmd = app.add_subcommand("synth", "sample a dataset from a planted model");
  std::string preset = "homophily", prefix;
  std::size_t n = 200, l = 16;
  std::uint64_t seed = 1;
  bool use_z = false;
  sy_cmd->add_option("--preset", preset, "homophily or core-periphery");
  sy_cmd->add_option("--n", n, "nodes");
  sy_cmd->add_option("--l", l, "features");
  sy_cmd->add_option("--k", k, "groups");
  sy_cmd->add_option("--seed", seed, "random seed");
  sy_cmd->add_option("--out-prefix", prefix, "writes PREFIX.edges.tsv, PREFIX.features.tsv, PREFIX.truth.tsv")
      ->required();
  sy_cmd->add_flag("--synth-use-z", use_z, "features from sampled indicators instead of memberships");

  // eval
  auto* ev_cmd = app.add_subcommand("eval", "AUC, log-likelihood and accuracy of a score file");
  std::string scores_path;
  ev_cmd->add_option("--scores", scores_path, "TSV of probability<TAB>truth")->required();
  ev_cmd->add_option("--out", out, "output JSON (default stdout)");

  // baseline
  auto* bl_cmd = app.add_subcommand("baseline", "AVG / CC-N / CC-L predictions for one node");
  add_data_options(bl_cmd, data);
  std::string method = "avg", task = "features";
  bl_cmd->add_option("--method", method, "avg, ccn or ccl")->required();
  bl_cmd->add_option("--task", task, "features or links");
  bl_cmd->add_option("--node", node_id, "target node id")->required();
  bl_cmd->add_option("--mask", mask, "features task: feature names/indices to hide, or 'all'");
  bl_cmd->add_option("--out", out, "output JSON (default stdout)");
  bl_cmd->add_option("--scores-out", scores_out, "write probability<TAB>truth lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (fit_cmd->parsed()) {
    const auto h = hyper.resolve();
    const auto loaded = load(data);
    const auto [state, report] = fit(loaded.data, k, h);
    ModelFile mf{state, loaded.data.node_ids, loaded.data.feature_names, {join_argv(argc, argv), h.seed, utc_timestamp()}};
    emit(model_to_json(mf), out);
    if (!report_path.empty()) {
      json trace = json::array();
      for (const auto& o : report.objective_trace)
        trace.push_back({{"l_phi", o.l_phi}, {"l_f", o.l_f}, {"l_a", o.l_a_surrogate}, {"l1", o.l1_penalty}, {"total", o.total}});
      emit({{"initial", report.initial.total},
            {"trace", trace},
            {"nonzero_weights", report.nonzero_weights},
            {"outer_iters", report.outer_iters_run},
            {"converged", report.converged}},
           report_path);
    }
    std::cerr << "fit: " << report.outer_iters_run << " iterations, converged=" << report.converged
              << ", objective " << report.initial.total << " -> "
              << (report.objective_trace.empty() ? report.initial.total : report.objective_trace.back().total)
              << ", nonzero weights " << state.weights.nonzero() << '\n';
    return 0;
  }

  if (pf_cmd->parsed()) {
    const auto mf = load_model(model_path);
    const auto& s = mf.state;
    Dataset d;
    std::vector<Cell> truth;
    std::size_t u = 0;
    json result;
    std::vector<std::pair<double, bool>> pairs;
    if (!data.edges.empty()) {
      d = load(data).data;
      if (d.node_ids != mf.node_ids) throw DataError("dataset node order does not match the model file");
      if (d.feature_names.size() != mf.feature_names.size()) throw DataError("dataset features do not match the model file");
      u = d.index_of(node_id);
      truth.assign(d.n_features(), Cell::missing);
      for (auto f : parse_mask(d, mask)) {
        truth[f] = d.feature(u, f);
        d.set_feature(u, f, Cell::missing);
      }
      const auto r = predict_missing_features(s, d, u, truth);
      json scores = json::array();
      for (const auto& [f, p] : r.scores) {
        scores.push_back({{"feature", d.feature_names[f]}, {"index", f}, {"probability", p}});
        if (truth[f] != Cell::missing) pairs.emplace_back(p, truth[f] == Cell::one);
      }
      result = {{"node", node_id}, {"scores", scores}, {"folded_in", true}};
      result["loglik"] = r.loglik ? json(*r.loglik) : json(nullptr);
    } else {
      d = Dataset(mf.node_ids.size(), mf.feature_names.size());
      d.node_ids = mf.node_ids;
      d.feature_names = mf.feature_names;
      u = d.index_of(node_id);
      json scores = json::array();
      for (auto f : parse_mask(d, mask))
        scores.push_back({{"feature", d.feature_names[f]}, {"index", f}, {"probability", feature_prob(s, u, f)}});
      result = {{"node", node_id}, {"scores", scores}, {"folded_in", false}, {"loglik", nullptr}};
    }
    write_scores(scores_out, pairs);
    emit(result, out);
    std::cerr << "predict-features: " << result["scores"].size() << " feature(s) scored for " << node_id << '\n';
    return 0;
  }

  if (pl_cmd->parsed()) {
    const auto h = hyper.resolve();
    auto d = load(data).data;
    const auto u = d.index_of(holdout);
    d.hide_links(u);
    const auto [state, report] = fit(d, k, h);
    const auto r = predict_links(state, d, u);
    json scores = json::array();
    std::vector<std::pair<double, bool>> pairs, avg_pairs;
    for (std::size_t t = 0; t < r.scores.size(); ++t) {
      const auto j = r.scores[t].first;
      const double o = r.scores[t].second;
      const double in = r.incoming[t].second;
      json row{{"node", d.node_ids[j]}, {"out", o}, {"in", in}};
      if (data.undirected) {
        const double pair = undirected_score(o, in);
        row["pair"] = pair;
        pairs.emplace_back(pair, d.edge(u, j));
        avg_pairs.emplace_back(baseline_avg(d, LinkTarget{u, j}), d.edge(u, j));
      } else {
        pairs.emplace_back(o, d.edge(u, j));
        pairs.emplace_back(in, d.edge(j, u));
        avg_pairs.emplace_back(baseline_avg(d, LinkTarget{u, j}), d.edge(u, j));
        avg_pairs.emplace_back(baseline_avg_incoming(d, LinkTarget{j, u}), d.edge(j, u));
      }
      scores.push_back(row);
    }
    const auto m = evaluate(pairs);
    const auto mb = evaluate(avg_pairs);
    write_scores(scores_out, pairs);
    emit({{"node", holdout}, {"scores", scores}, {"metrics", metrics_json(m)}, {"avg_baseline", metrics_json(mb)}}, out);
    std::cerr << "predict-links: AUC " << (m.auc ? std::to_string(*m.auc) : "n/a") << " (AVG "
              << (mb.auc ? std::to_string(*mb.auc) : "n/a") << ")\n";
    return 0;
  }

  if (cl_cmd->parsed()) {
    const auto h = hyper.resolve();
    const auto d = load(data).data;
    const auto label = feature_index(d, label_col);
    std::vector<std::size_t> labelled;
    for (std::size_t i = 0; i < d.n_nodes(); ++i)
      if (d.observed(i, label)) labelled.push_back(i);
    if (labelled.empty()) throw DataError("label column has no observed value");
    std::mt19937_64 rng(h.seed);
    std::shuffle(labelled.begin(), labelled.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(labelled.size())));
    std::vector<bool> train(d.n_nodes(), false);
    for (std::size_t t = 0; t < n_train; ++t) train[labelled[t]] = true;
    // unlabelled nodes stay in training: their label cell is missing anyway
    for (std::size_t i = 0; i < d.n_nodes(); ++i)
      if (!d.observed(i, label)) train[i] = true;
    const auto results = classify_nodes(d, label, train, k, h);
    json rows = json::array();
    std::vector<std::pair<double, bool>> pairs;
    for (const auto& r : results) {
      const double p = r.scores.front().second;
      rows.push_back({{"node", d.node_ids[r.node]}, {"probability", p}});
      pairs.emplace_back(p, d.feature(r.node, label) == Cell::one);
    }
    json result{{"label", d.feature_names[label]}, {"predictions", rows}};
    if (!pairs.empty()) result["metrics"] = metrics_json(evaluate(pairs));
    write_scores(scores_out, pairs);
    emit(result, out);
    std::cerr << "classify: " << results.size() << " test node(s)\n";
    return 0;
  }

  if (sk_cmd->parsed()) {
    const auto h = hyper.resolve();
    const auto d = load(data).data;
    CvTask t;
    if (cv_task == "features") t = CvTask::features;
    else if (cv_task == "link" || cv_task == "links") t = CvTask::links;
    else throw UsageError("--cv-task must be features or link");
    const auto rep = select_k(d, h, parse_list(candidates), reps, t);
    json rows = json::array();
    for (std::size_t c = 0; c < rep.candidates.size(); ++c)
      rows.push_back({{"k", rep.candidates[c]}, {"mean_loglik", rep.mean_loglik[c]}, {"std_loglik", rep.std_loglik[c]}});
    emit({{"chosen_k", rep.chosen_k}, {"reps", rep.reps}, {"candidates", rows}}, out);
    std::cerr << "select-k: chose K=" << rep.chosen_k << '\n';
    return 0;
  }

  if (sy_cmd->parsed()) {
    auto params = synth_preset(preset, n, l, k);
    params.features_from_z = use_z;
    const auto res = synth_generate(params, seed);
    save_dataset(res.data, prefix + ".edges.tsv", prefix + ".features.tsv");
    std::ofstream truth(prefix + ".truth.tsv");
    if (!truth) throw DataError("cannot write truth file");
    truth << "node";
    for (std::size_t g = 0; g < params.k; ++g) truth << "\tz" << g + 1;
    truth << '\n';
    for (std::size_t i = 0; i < params.n; ++i) {
      truth << res.data.node_ids[i];
      for (std::size_t g = 0; g < params.k; ++g) truth << '\t' << (res.indicator(i, g) ? 1 : 0);
      truth << '\n';
    }
    emit({{"nodes", params.n}, {"features", params.l}, {"groups", params.k}, {"edges", res.data.n_edges()},
          {"edges_file", prefix + ".edges.tsv"}, {"features_file", prefix + ".features.tsv"},
          {"truth_file", prefix + ".truth.tsv"}},
         "");
    std::cerr << "synth: " << params.n << " nodes, " << res.data.n_edges() << " edges\n";
    return 0;
  }

  if (ev_cmd->parsed()) {
    std::ifstream is(scores_path);
    if (!is) throw DataError("cannot open '" + scores_path + "'");
    std::vector<std::pair<double, bool>> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::stringstream ss(line);
      double p = 0.0;
      int y = 0;
      if (!(ss >> p >> y) || (y != 0 && y != 1) || p < 0.0 || p > 1.0)
        throw DataError("scores line " + std::to_string(lineno) + ": expected probability<TAB>0|1");
      pairs.emplace_back(p, y == 1);
    }
    const auto m = evaluate(pairs);
    emit(metrics_json(m), out);
    std::cerr << "eval: " << m.count << " scores\n";
    return 0;
  }

  if (bl_cmd->parsed()) {
    auto d = load(data).data;
    const auto u = d.index_of(node_id);
    if (method != "avg" && method != "ccn" && method != "ccl") throw UsageError("--method must be avg, ccn or ccl");
    json scores = json::array();
    std::vector<std::pair<double, bool>> pairs;
    if (task == "features") {
      const auto masked = parse_mask(d, mask);
      std::vector<Cell> truth(d.n_features(), Cell::missing);
      for (auto f : masked) {
        truth[f] = d.feature(u, f);
        d.set_feature(u, f, Cell::missing);
      }
      for (auto f : masked) {
        const FeatureTarget t{u, f};
        const double p = method == "avg" ? baseline_avg(d, t) : method == "ccn" ? baseline_ccn(d, t) : baseline_ccl(d, t);
        scores.push_back({{"feature", d.feature_names[f]}, {"probability", p}});
        if (truth[f] != Cell::missing) pairs.emplace_back(p, truth[f] == Cell::one);
      }
    } else if (task == "links") {
      d.hide_links(u);
      for (std::size_t j = 0; j < d.n_nodes(); ++j) {
        if (j == u) continue;
        const LinkTarget t{u, j};
        const double p = method == "avg" ? baseline_avg(d, t) : method == "ccn" ? baseline_ccn(d, t) : baseline_ccl(d, t);
        scores.push_back({{"node", d.node_ids[j]}, {"probability", p}});
        pairs.emplace_back(p, d.edge(u, j));
      }
    } else {
      throw UsageError("--task must be features or links");
    }
    json result{{"method", method}, {"task", task}, {"node", node_id}, {"scores", scores}};
    if (!pairs.empty()) result["metrics"] = metrics_json(evaluate(pairs));
    write_scores(scores_out, pairs);
    emit(result, out);
    std::cerr << "baseline: " << scores.size() << " prediction(s)\n";
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const lmmg::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const lmmg::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const lmmg::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
