// One PASS/FAIL line per acceptance criterion; nonzero exit if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../oracles.hpp"
#include "../stub_llm.hpp"
#include "pgdag/csv.hpp"
#include "pgdag/metrics.hpp"
#include "pgdag/pipeline.hpp"
#include "pgdag/prior_llm.hpp"
#include "pgdag/synth.hpp"

namespace fs = std::filesystem;
using namespace pgdag;

namespace {

const fs::path kFixtures = PGDAG_FIXTURES;
const std::string kCli = PGDAG_CLI;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= budget_seconds;
    const bool ok = o.pass && in_time;
    failures += ok ? 0 : 1;
    std::ostringstream line;
    line.precision(4);
    line << (ok ? "PASS" : "FAIL") << "  " << name << "  [" << o.detail << "; " << secs << " s";
    if (!in_time) line << " > budget " << budget_seconds << " s";
    line << "]";
    std::cout << line.str() << std::endl;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// DFS colouring, kept separate from the library's Kahn check.
bool acyclic_by_dfs(const AdjacencyMatrix& a) {
    const std::size_t d = a.size();
    std::vector<int> colour(d, 0);
    std::function<bool(std::size_t)> visit = [&](std::size_t u) {
        colour[u] = 1;
        for (std::size_t v = 0; v < d; ++v) {
            if (!a(u, v)) continue;
            if (colour[v] == 1) return false;
            if (colour[v] == 0 && !visit(v)) return false;
        }
        colour[u] = 2;
        return true;
    };
    for (std::size_t u = 0; u < d; ++u)
        if (colour[u] == 0 && !visit(u)) return false;
    return true;
}

AdjacencyMatrix random_digraph(std::size_t d, double density, Rng& rng) {
    AdjacencyMatrix a(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (i != j && uniform01(rng) < density) a.set(i, j, true);
    return a;
}

// One-sided exact sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p(int wins, int losses) {
    const int n = wins + losses;
    if (n == 0) return 1.0;
    double p = 0.0;
    for (int k = wins; k <= n; ++k) p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                                               n * std::log(2.0));
    return p;
}

SemSpec chain_spec(std::size_t d, double weight, std::size_t m, std::uint64_t seed) {
    SemSpec s;
    s.graph = AdjacencyMatrix(d);
    s.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i + 1 < d; ++i) {
        s.graph.set(i, i + 1, true);
        s.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = weight;
    }
    s.noise_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d));
    s.samples = m;
    s.prior_fraction = 1.0;
    s.seed = seed;
    return s;
}

int run_cli(const std::string& args) {
    const int raw = std::system(("'" + kCli + "' " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

struct ScratchDir {
    fs::path path;
    explicit ScratchDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("pgdag_accept_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~ScratchDir() { fs::remove_all(path); }
};

}  // namespace

int main() {
    criterion("acyclicity oracle: h <= 1e-9 iff DAG (64 patterns d=3, 500 random d in [4,8])", 5.0, [] {
        int mismatches = 0, checked = 0;
        const std::vector<Edge> slots{{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
        for (unsigned mask = 0; mask < 64; ++mask) {
            AdjacencyMatrix a(3);
            for (std::size_t k = 0; k < slots.size(); ++k)
                if (mask & (1u << k)) a.set(slots[k].first, slots[k].second, true);
            mismatches += ((acyclicity_h(a) <= 1e-9) != acyclic_by_dfs(a));
            ++checked;
        }
        Rng rng(20240);
        for (int t = 0; t < 500; ++t) {
            const std::size_t d = 4 + static_cast<std::size_t>(uniform01(rng) * 5);
            AdjacencyMatrix a = t % 2 == 0 ? random_dag(d, uniform01(rng) * d * (d - 1) / 2.0, rng)
                                           : random_digraph(d, 0.05 + 0.4 * uniform01(rng), rng);
            mismatches += ((acyclicity_h(a) <= 1e-9) != acyclic_by_dfs(a));
            ++checked;
        }
        return Outcome{mismatches == 0, std::to_string(checked) + " graphs, " + std::to_string(mismatches) +
                                            " mismatches"};
    });

    criterion("BIC oracle: 100 random pairs within 1e-8 relative (d <= 8, m <= 500)", 30.0, [] {
        Rng rng(31337);
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            const std::size_t d = 2 + static_cast<std::size_t>(uniform01(rng) * 7);
            const std::size_t m = 20 + static_cast<std::size_t>(uniform01(rng) * 481);
            const double pairs = static_cast<double>(d * (d - 1)) / 2.0;
            const auto sim = simulate(make_sem_spec(d, uniform01(rng) * pairs, m, 1000 + t));
            const auto g = random_dag(d, uniform01(rng) * d * (d - 1) / 2.0, rng);
            const bool pooled = t % 2 == 0;
            const double got = bic_penalty(sim.data, g, pooled ? ScoreVariant::pooled_variance
                                                               : ScoreVariant::per_node_variance);
            const double want = oracle::bic(sim.data.values, g, pooled);
            worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1.0));
        }
        std::ostringstream s;
        s << "worst relative error " << worst;
        return Outcome{worst <= 1e-8, s.str()};
    });

    criterion("gradient check: every tensor within 1e-4 relative (d=4, central differences)", 60.0, [] {
        const std::size_t d = 4;
        Rng rng(2718);
        PolicyModel model = PolicyModel::create(d, rng);
        model.params.for_each([&](const char*, Eigen::MatrixXd& m) {
            if (m.cols() == 1)
                for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, 0) = 0.2 * uniform01(rng) - 0.1;
        });
        const auto sim = simulate(make_sem_spec(d, 4, 200, 77));
        const auto f = compute_features(sim.data);
        Eigen::MatrixXd prior = Eigen::MatrixXd::Zero(4, 4);
        prior(0, 1) = prior(2, 3) = prior(1, 3) = 1.0;
        Rng drop_rng(4);
        const Eigen::MatrixXd mask =
            make_dropout_mask(static_cast<Eigen::Index>(d), PolicyShape::data_hidden, 0.2, drop_rng);
        const auto cache = forward_cached(model, f, prior, mask);
        std::vector<AdjacencyMatrix> samples;
        std::vector<double> adv;
        for (int b = 0; b < 8; ++b) {
            samples.push_back(sample_graph(ProbabilityMatrix(cache.probs), rng));
            adv.push_back(4.0 * uniform01(rng) - 2.0);
        }
        const PolicyParams analytic = backward(model, cache, surrogate_logit_gradient(cache.probs, samples, adv));
        auto loss = [&] {
            const auto c = forward_cached(model, f, prior, mask);
            return surrogate_loss(ProbabilityMatrix(c.probs), samples, adv);
        };
        std::vector<std::pair<std::string, Eigen::MatrixXd*>> tensors;
        model.params.for_each([&](const char* name, Eigen::MatrixXd& m) { tensors.emplace_back(name, &m); });
        std::vector<const Eigen::MatrixXd*> grads;
        analytic.for_each([&](const char*, const Eigen::MatrixXd& m) { grads.push_back(&m); });
        const double h = 1e-5;
        double worst = 0.0;
        std::string worst_name;
        Rng pick(99);
        for (std::size_t k = 0; k < tensors.size(); ++k) {
            Eigen::MatrixXd& m = *tensors[k].second;
            const Eigen::Index n = m.size();
            const Eigen::Index checks = std::min<Eigen::Index>(n, 96);
            Eigen::VectorXd fd(checks), an(checks);
            for (Eigen::Index c = 0; c < checks; ++c) {
                const Eigen::Index idx =
                    checks == n ? c : static_cast<Eigen::Index>(uniform01(pick) * static_cast<double>(n));
                double& v = m.data()[idx];
                const double saved = v;
                v = saved + h;
                const double up = loss();
                v = saved - h;
                const double down = loss();
                v = saved;
                fd(c) = (up - down) / (2 * h);
                an(c) = grads[k]->data()[idx];
            }
            const double rel = (fd - an).norm() / std::max({fd.norm(), an.norm(), 1e-300});
            if (rel > worst) {
                worst = rel;
                worst_name = tensors[k].first;
            }
        }
        std::ostringstream s;
        s << tensors.size() << " tensors, worst " << worst << " (" << worst_name << ")";
        return Outcome{worst <= 1e-4, s.str()};
    });

    criterion("DAG guarantee: 50-run sweep d in [3,15] all a_final.csv acyclic; remove_cycles on 1000 digraphs",
              120.0, [] {
                  ScratchDir dir("sweep");
                  Rng rng(4242);
                  int cyclic = 0;
                  for (int t = 0; t < 50; ++t) {
                      const std::size_t d = 3 + static_cast<std::size_t>(uniform01(rng) * 13);
                      const double pairs = static_cast<double>(d * (d - 1)) / 2.0;
                      const double edges = std::min(pairs, uniform01(rng) * 1.5 * static_cast<double>(d));
                      const auto sim = simulate(make_sem_spec(d, edges, 300 + t * 10, 500 + t, uniform01(rng)));
                      RunConfig cfg;
                      cfg.train.seed = static_cast<std::uint64_t>(t);
                      cfg.train.num_epochs = 1 + static_cast<std::size_t>(uniform01(rng) * 3);
                      cfg.train.max_steps = 10 + static_cast<std::size_t>(uniform01(rng) * 20);
                      cfg.train.batch_size = 8 + static_cast<std::size_t>(uniform01(rng) * 24);
                      cfg.train.tau = 0.05 + 0.9 * uniform01(rng);
                      const auto r = discover(sim.data, sim.prior, std::nullopt, cfg);
                      const auto path = dir.path / ("a_final_" + std::to_string(t) + ".csv");
                      csv::write_adjacency(path, r.final_graph);
                      cyclic += !acyclic_by_dfs(csv::read_adjacency(path));
                  }
                  int bad = 0;
                  Rng gen(77);
                  for (int t = 0; t < 1000; ++t) {
                      const std::size_t d = 2 + static_cast<std::size_t>(uniform01(gen) * 11);
                      const double density = 0.1 + 0.8 * uniform01(gen);
                      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
                      for (std::size_t i = 0; i < d; ++i)
                          for (std::size_t j = 0; j < d; ++j)
                              if (i != j && uniform01(gen) < density) w(i, j) = 0.05 + uniform01(gen);
                      Rng tie(static_cast<std::uint64_t>(t));
                      const auto out = remove_cycles(WeightedDigraph(w), tie);
                      bool ok = acyclic_by_dfs(out);
                      for (const auto& [i, j] : out.edges()) ok = ok && w(i, j) > 0.0;
                      if (is_dag_dense(w)) ok = ok && out.edge_count() == static_cast<std::size_t>((w.array() > 0).count());
                      bad += !ok;
                  }
                  return Outcome{cyclic == 0 && bad == 0, std::to_string(cyclic) + " cyclic outputs of 50, " +
                                                              std::to_string(bad) + " remove_cycles violations of 1000"};
              });

    criterion("end-to-end: 3-node chain SHD <= 1; 10-node SEM TP/NNZ >= 0.5 and SHD < empty-graph SHD", 300.0, [] {
        const auto c = kFixtures / "chain3";
        const auto data = csv::read_dataset(c / "data.csv");
        const auto truth3 = csv::read_adjacency(c / "truth.csv");
        RunConfig cfg;
        cfg.train.seed = 42;
        const auto r3 = discover(data, csv::read_prior(c / "prior.csv"), std::nullopt, cfg);
        const auto shd3 = shd(r3.final_graph, truth3);

        const std::uint64_t seed = 0;
        const auto sim = simulate(make_sem_spec(10, 10, 2000, seed, 0.25));
        RunConfig cfg10;
        cfg10.train.seed = seed;
        const auto r10 = discover(sim.data, sim.prior, std::nullopt, cfg10);
        const auto rep = report(r10.final_graph, sim.truth);
        const auto empty_shd = shd(AdjacencyMatrix(10), sim.truth);
        std::ostringstream s;
        s << "chain SHD " << shd3 << "; 10-node seed " << seed << " TP/NNZ " << rep.tp_nnz << ", SHD " << rep.shd
          << " vs empty " << empty_shd;
        return Outcome{shd3 <= 1 && rep.tp_nnz >= 0.5 && rep.shd < empty_shd, s.str()};
    });

    criterion("ablation: mean TPR(prior) > mean TPR(no prior, beta=0) over 20 seeds, sign test p < 0.05", 1200.0,
              [] {
                  int wins = 0, losses = 0;
                  double with_sum = 0.0, without_sum = 0.0;
                  for (std::uint64_t seed = 0; seed < 20; ++seed) {
                      const auto sim = simulate(make_sem_spec(10, 10, 2000, seed, 0.25));
                      RunConfig cfg;
                      cfg.train.seed = seed;
                      const double with = report(discover(sim.data, sim.prior, std::nullopt, cfg).final_graph, sim.truth).tpr;
                      RunConfig none = cfg;
                      none.reward.beta = 0.0;
                      const double without =
                          report(discover(sim.data, std::nullopt, std::nullopt, none).final_graph, sim.truth).tpr;
                      with_sum += with;
                      without_sum += without;
                      wins += with > without;
                      losses += with < without;
                  }
                  const double diff = (with_sum - without_sum) / 20.0;
                  const double p = sign_test_p(wins, losses);
                  std::ostringstream s;
                  s << "mean TPR " << with_sum / 20.0 << " vs " << without_sum / 20.0 << " (diff " << diff
                    << "), wins " << wins << " losses " << losses << ", p = " << p;
                  return Outcome{diff > 0 && p < 0.05, s.str()};
              });

    criterion("calibration: reversed-chain prior drives beta to 0 within one window; truthful prior keeps beta0",
              300.0, [] {
                  const std::size_t d = 5;
                  const auto sim = simulate(chain_spec(d, 1.0, 2000, 17));
                  PriorMatrix reversed(d), truthful(d);
                  for (std::size_t i = 0; i + 1 < d; ++i) {
                      reversed.set(i + 1, i, 1);
                      truthful.set(i, i + 1, 1);
                  }
                  RunConfig cfg;
                  cfg.train.seed = 17;
                  cfg.train.num_epochs = 5;
                  cfg.train.max_steps = cfg.reward.calibration_window;
                  const auto adv = train(sim.data, reversed, reversed, cfg.train, cfg.reward);
                  const auto good = train(sim.data, truthful, truthful, cfg.train, cfg.reward);
                  const auto& bt_adv = adv.state.beta_trace;
                  const auto& bt_good = good.state.beta_trace;
                  const bool dropped = bt_adv.size() > 1 && bt_adv[0] == cfg.reward.beta && bt_adv[1] == 0.0;
                  bool kept = true;
                  for (double b : bt_good) kept = kept && b == cfg.reward.beta;
                  std::ostringstream s;
                  s << "adversarial beta trace";
                  for (double b : bt_adv) s << " " << b;
                  s << "; truthful beta trace";
                  for (double b : bt_good) s << " " << b;
                  return Outcome{dropped && kept, s.str()};
              });

    criterion("metrics oracle: 200 random pairs match counting oracle; tp_nnz = 1 - fdr when nnz > 0", 10.0, [] {
        Rng rng(808);
        int bad = 0;
        for (int t = 0; t < 200; ++t) {
            const std::size_t d = 2 + t % 11;
            const auto pred = random_digraph(d, uniform01(rng), rng);
            const auto truth = random_digraph(d, uniform01(rng), rng);
            const auto c = oracle::count(pred, truth);
            const std::vector<double> cohort{0.1 + 0.9 * uniform01(rng), 0.5 * uniform01(rng)};
            const auto r = report(pred, truth, std::span<const double>(cohort));
            auto ratio = [](long a, long b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
            const double best = std::max(cohort[0], cohort[1]);
            bool ok = r.tpr == ratio(c.tp, c.tp + c.fn) && r.fdr == ratio(c.fp, c.tp + c.fp) &&
                      r.fpr == ratio(c.fp, c.fp + c.tn) && r.tp_nnz == ratio(c.tp, c.nnz) &&
                      static_cast<long>(r.nnz) == c.nnz && static_cast<long>(r.shd) == oracle::shd_edit_count(pred, truth) &&
                      r.rp.has_value() && std::abs(*r.rp - (best - r.tp_nnz) / best) < 1e-15;
            if (c.nnz > 0) ok = ok && std::abs(r.tp_nnz - (1.0 - r.fdr)) < 1e-15;
            bad += !ok;
        }
        return Outcome{bad == 0, std::to_string(bad) + " of 200 pairs disagree"};
    });

    criterion("confounder sensitivity: spurious X0-X1 edge in >= 50% of 20 runs", 600.0, [] {
        int spurious = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            SemSpec spec = chain_spec(4, 0.0, 2000, seed);
            spec.graph = AdjacencyMatrix(4);
            spec.weights.setZero();
            spec.graph.set(2, 3, true);
            spec.weights(2, 3) = 1.0;
            spec.confounders = {{0, 1, 1.0}};
            spec.prior_fraction = 0.0;
            const auto sim = simulate(spec);
            RunConfig cfg;
            cfg.train.seed = seed;
            const auto r = discover(sim.data, std::nullopt, std::nullopt, cfg);
            spurious += r.final_graph(0, 1) || r.final_graph(1, 0);
        }
        return Outcome{spurious >= 10, std::to_string(spurious) + " of 20 runs contain X0-X1"};
    });

    criterion("determinism: two discover invocations give identical a_final.csv and manifest", 120.0, [] {
        ScratchDir dir("determinism");
        if (run_cli("generate --nodes 6 --edges 6 --samples 500 --seed 3 --out " + q(dir.path / "data")) != 0)
            return Outcome{false, "generate failed"};
        const std::string args = "discover --data " + q(dir.path / "data" / "data.csv") + " --prior " +
                                 q(dir.path / "data" / "prior.csv") + " --seed 9 --epochs 3 --out ";
        if (run_cli(args + q(dir.path / "a")) != 0 || run_cli(args + q(dir.path / "b")) != 0)
            return Outcome{false, "discover failed"};
        const bool same_graph = slurp(dir.path / "a" / "a_final.csv") == slurp(dir.path / "b" / "a_final.csv");
        auto ma = nlohmann::json::parse(slurp(dir.path / "a" / "run-manifest.json"));
        auto mb = nlohmann::json::parse(slurp(dir.path / "b" / "run-manifest.json"));
        const bool had_clock = ma.contains("wall_clock_seconds") && mb.contains("wall_clock_seconds");
        ma.erase("wall_clock_seconds");
        mb.erase("wall_clock_seconds");
        const bool same_manifest = ma.dump() == mb.dump();
        return Outcome{same_graph && same_manifest && had_clock,
                       std::string("a_final ") + (same_graph ? "identical" : "differs") + ", manifest " +
                           (same_manifest ? "identical" : "differs") + " modulo wall clock"};
    });

    criterion("prior-llm offline: d=4 pairwise issues 12 requests cold, 0 warm; fixture round-trips", 60.0, [] {
        stub::LlmServer server({"Rain->Harvest", "Harvest->Price"}, "");
        ScratchDir cache("llm_cache");
        const auto set = llm::load_descriptors(kFixtures / "llm" / "descriptors_d4.json");
        llm::ElicitationConfig cfg;
        cfg.endpoint = server.endpoint();
        cfg.cache_dir = cache.path;
        const auto cold = llm::elicit_graph(set, cfg, llm::ElicitationMode::pairwise);
        const std::size_t cold_server = server.requests();
        const auto warm = llm::elicit_graph(set, cfg, llm::ElicitationMode::pairwise);
        const std::size_t warm_server = server.requests() - cold_server;
        const auto parsed = llm::parse_edges(slurp(kFixtures / "llm" / "whole_graph_response.txt"), set.names());
        const bool round_trip =
            parsed.matrix.to_dense() == csv::read_prior(kFixtures / "llm" / "whole_graph_prior.csv").to_dense();
        std::ostringstream s;
        s << "cold " << cold.requests_sent << " (server saw " << cold_server << "), warm " << warm.requests_sent
          << " (server saw " << warm_server << "), fixture " << (round_trip ? "matches" : "differs");
        return Outcome{cold.requests_sent == 12 && cold_server == 12 && warm.requests_sent == 0 && warm_server == 0 &&
                           round_trip,
                       s.str()};
    });

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
