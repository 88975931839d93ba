// pgdag: generate | discover | prune | evaluate | prior | report
//
// Exit status: 0 success, 1 runtime failure, 2 usage or I/O error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgdag/checkpoint.hpp"
#include "pgdag/csv.hpp"
#include "pgdag/metrics.hpp"
#include "pgdag/pipeline.hpp"
#include "pgdag/prior_llm.hpp"
#include "pgdag/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pgdag;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw LoadError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw LoadError(what + " not found: " + p.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw LoadError("cannot create output directory " + dir.string());
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw LoadError("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

json maybe(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json report_json(const MetricReport& r, std::uint64_t seed) {
    return {{"tpr", r.tpr}, {"fdr", r.fdr}, {"fpr", r.fpr},   {"shd", r.shd}, {"tp_nnz", r.tp_nnz},
            {"rp", maybe(r.rp)}, {"nnz", r.nnz}, {"d", r.d}, {"seed", seed}};
}

std::string shape(const std::size_t d) { return std::to_string(d) + "x" + std::to_string(d); }

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::size_t nodes = 10;
    double edges = 10;
    std::size_t samples = 1000;
    std::uint64_t seed = 0;
    double prior_fraction = 0.25;
    std::vector<std::string> confounders;  // "i:j[:strength]"
    fs::path out = ".";
};

std::vector<Confounder> parse_confounders(const std::vector<std::string>& specs) {
    std::vector<Confounder> out;
    for (const auto& s : specs) {
        Confounder c;
        char sep1 = 0, sep2 = 0;
        std::istringstream in(s);
        if (!(in >> c.first >> sep1 >> c.second) || sep1 != ':')
            throw ConfigError("confounder must look like i:j or i:j:strength, got '" + s + "'");
        if (in >> sep2) {
            if (sep2 != ':' || !(in >> c.strength)) throw ConfigError("bad confounder strength in '" + s + "'");
        }
        out.push_back(c);
    }
    return out;
}

int cmd_generate(const GenerateArgs& a) {
    SemSpec spec = make_sem_spec(a.nodes, a.edges, a.samples, a.seed, a.prior_fraction,
                                 parse_confounders(a.confounders));
    const Simulation sim = simulate(spec);
    ensure_dir(a.out);
    csv::write_dataset(a.out / "data.csv", sim.data);
    csv::write_adjacency(a.out / "truth.csv", sim.truth);
    csv::write_prior(a.out / "prior.csv", sim.prior, sim.data.column_names);

    json conf = json::array();
    for (const auto& c : spec.confounders)
        conf.push_back({{"first", c.first}, {"second", c.second}, {"strength", c.strength}});
    json weights = json::array();
    for (const auto& [i, j] : spec.graph.edges())
        weights.push_back({{"from", i}, {"to", j},
                           {"weight", spec.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))}});
    std::vector<double> noise(spec.noise_scale.data(), spec.noise_scale.data() + spec.noise_scale.size());
    write_json(a.out / "spec.json", {{"nodes", a.nodes},
                                     {"expected_edges", a.edges},
                                     {"samples", a.samples},
                                     {"seed", a.seed},
                                     {"prior_fraction", a.prior_fraction},
                                     {"confounders", conf},
                                     {"edges", weights},
                                     {"noise_scale", noise}});
    return 0;
}

// ---------------------------------------------------------------- discover

struct DiscoverArgs {
    fs::path data, prior, prior_init, truth, config, out = "run";
    bool no_prior = false;
    bool no_calibration = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, max_steps, batch_size, threads;
    std::optional<double> lr, tau, beta, lambda1, lambda2;
    std::optional<std::string> score_type;
};

PriorMatrix load_prior_for(const fs::path& p, const Dataset& x, const std::string& what) {
    require_file(p, what);
    PriorMatrix m = csv::read_prior(p);
    if (m.size() != x.variables())
        throw LoadError(what + " " + p.string() + " is " + shape(m.size()) + " but data " + shape(x.variables()) +
                        " has " + std::to_string(x.variables()) + " columns");
    return m;
}

RunConfig resolve_config(const DiscoverArgs& a) {
    RunConfig cfg;
    if (!a.config.empty()) {
        require_file(a.config, "config file");
        json j;
        try {
            j = json::parse(slurp(a.config));
        } catch (const json::parse_error& e) {
            throw LoadError(a.config.string() + ": " + e.what());
        }
        cfg.merge_json(j);
    }
    json flags = json::object();
    if (a.seed) flags["seed"] = *a.seed;
    if (a.epochs) flags["num_epochs"] = *a.epochs;
    if (a.max_steps) flags["max_steps"] = *a.max_steps;
    if (a.batch_size) flags["batch_size"] = *a.batch_size;
    if (a.threads) flags["threads"] = *a.threads;
    if (a.lr) flags["actor_lr"] = *a.lr;
    if (a.tau) flags["tau"] = *a.tau;
    if (a.beta) flags["lambda3"] = *a.beta;
    if (a.lambda1) flags["lambda1"] = *a.lambda1;
    if (a.lambda2) flags["lambda2"] = *a.lambda2;
    if (a.score_type) flags["score_type"] = *a.score_type;
    if (a.no_calibration) flags["calibration"] = false;
    cfg.merge_json(flags);
    return cfg;
}

int cmd_discover(const DiscoverArgs& a) {
    const auto started = std::chrono::steady_clock::now();
    require_file(a.data, "data file");
    const RunConfig cfg = resolve_config(a);
    const Dataset x = csv::read_dataset(a.data);

    std::optional<PriorMatrix> known, initial;
    json inputs = {{"data", {{"path", a.data.string()}, {"sha256", llm::sha256_hex(slurp(a.data))}}}};
    if (!a.no_prior) {
        if (!a.prior.empty()) {
            known = load_prior_for(a.prior, x, "prior file");
            inputs["prior"] = {{"path", a.prior.string()}, {"sha256", llm::sha256_hex(slurp(a.prior))}};
        }
        if (!a.prior_init.empty()) {
            initial = load_prior_for(a.prior_init, x, "initial prior file");
            inputs["prior_init"] = {{"path", a.prior_init.string()},
                                    {"sha256", llm::sha256_hex(slurp(a.prior_init))}};
        }
    }
    std::optional<AdjacencyMatrix> truth;
    if (!a.truth.empty()) {
        require_file(a.truth, "truth file");
        truth = csv::read_adjacency(a.truth);
        inputs["truth"] = {{"path", a.truth.string()}, {"sha256", llm::sha256_hex(slurp(a.truth))}};
    }

    ensure_dir(a.out);
    const DiscoveryResult r = discover(x, known, initial, cfg);
    csv::write_adjacency(a.out / "a_final.csv", r.final_graph);
    csv::write_adjacency(a.out / "candidate.csv", r.candidate);
    csv::write_weights(a.out / "weights.csv", r.weights);
    save_checkpoint(a.out / "checkpoint.txt", r.training.model, cfg.train.seed, cfg.to_json());

    const auto& st = r.training.state;
    json manifest = {
        {"config", cfg.to_json()},
        {"seed", cfg.train.seed},
        {"no_prior", a.no_prior},
        {"inputs", inputs},
        {"best_total", st.best_total},
        {"best_total_trace", st.best_trace},
        {"beta_trace", st.beta_trace},
        {"steps", st.step_count},
        {"nonfinite_steps", st.nonfinite_steps},
        {"learning_rate_halved", st.learning_rate_halved},
        {"final_edges", r.final_graph.edge_count()},
    };
    if (truth) {
        const auto rep = report(r.final_graph, *truth);
        manifest["report"] = report_json(rep, cfg.train.seed);
        write_json(a.out / "report.json", report_json(rep, cfg.train.seed));
    }
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_json(a.out / "run-manifest.json", manifest);
    std::cout << "wrote " << (a.out / "a_final.csv").string() << " (" << r.final_graph.edge_count()
              << " edges)\n";
    return 0;
}

// ---------------------------------------------------------------- prune

struct PruneArgs {
    fs::path data, candidate, out = "a_final.csv", weights_out;
    std::uint64_t seed = 0;
};

int cmd_prune(const PruneArgs& a) {
    require_file(a.data, "data file");
    require_file(a.candidate, "candidate file");
    const Dataset x = csv::read_dataset(a.data);
    const AdjacencyMatrix cand = csv::read_adjacency(a.candidate);
    if (cand.size() != x.variables())
        throw LoadError("candidate " + a.candidate.string() + " is " + shape(cand.size()) + " but data has " +
                        std::to_string(x.variables()) + " columns");
    const AdjacencyMatrix aligned = align_to(cand, AdjacencyMatrix(x.variables(), x.column_names));
    const WeightMatrix w = regression_weights(x, aligned);
    Rng rng = make_rng(a.seed, "prune");
    csv::write_adjacency(a.out, prune(w, rng));
    if (!a.weights_out.empty()) csv::write_weights(a.weights_out, w);
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    fs::path pred, truth, out, cohort;
    std::string run;
    std::uint64_t seed = 0;
};

const std::vector<std::string> kCohortColumns{"run", "tpr", "fdr", "fpr", "shd", "tp_nnz", "nnz", "d", "seed"};

std::vector<double> cohort_tp_nnz(const fs::path& p) {
    std::vector<double> out;
    if (!fs::exists(p)) return out;
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::size_t col = kCohortColumns.size();
    {
        std::istringstream hs(line);
        std::string cell;
        for (std::size_t k = 0; std::getline(hs, cell, ','); ++k)
            if (cell == "tp_nnz") col = k;
    }
    if (col == kCohortColumns.size()) throw LoadError("cohort file " + p.string() + " has no tp_nnz column");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        for (std::size_t k = 0; std::getline(ls, cell, ','); ++k)
            if (k == col) {
                try {
                    out.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    throw LoadError("cohort file " + p.string() + ": bad tp_nnz '" + cell + "'");
                }
            }
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << json(v).dump();
    return s.str();
}

int cmd_evaluate(const EvaluateArgs& a) {
    require_file(a.pred, "prediction file");
    require_file(a.truth, "truth file");
    const AdjacencyMatrix pred = csv::read_adjacency(a.pred);
    const AdjacencyMatrix truth = csv::read_adjacency(a.truth);
    MetricReport rep = report(pred, truth);
    if (!a.cohort.empty()) {
        auto values = cohort_tp_nnz(a.cohort);
        const bool fresh = !fs::exists(a.cohort);
        values.push_back(rep.tp_nnz);
        rep.rp = rp(rep.tp_nnz, values);
        std::ofstream out(a.cohort, std::ios::app);
        if (!out) throw LoadError("cannot append to cohort file " + a.cohort.string());
        if (fresh) {
            for (std::size_t k = 0; k < kCohortColumns.size(); ++k) out << (k ? "," : "") << kCohortColumns[k];
            out << '\n';
        }
        const std::string run = a.run.empty() ? a.pred.stem().string() : a.run;
        out << run << ',' << fmt(rep.tpr) << ',' << fmt(rep.fdr) << ',' << fmt(rep.fpr) << ',' << rep.shd << ','
            << fmt(rep.tp_nnz) << ',' << rep.nnz << ',' << rep.d << ',' << a.seed << '\n';
    }
    const json j = report_json(rep, a.seed);
    if (a.out.empty())
        std::cout << j.dump(2) << '\n';
    else
        write_json(a.out, j);
    return 0;
}

// ---------------------------------------------------------------- prior

struct PriorFetchArgs {
    fs::path descriptors, out = "prior.csv";
    std::string mode = "pairwise";
    llm::ElicitationConfig cfg;
};

int cmd_prior_fetch(const PriorFetchArgs& a) {
    require_file(a.descriptors, "descriptor file");
    const auto set = llm::load_descriptors(a.descriptors);
    const auto mode = a.mode == "pairwise" ? llm::ElicitationMode::pairwise : llm::ElicitationMode::whole_graph;
    const auto r = llm::elicit_graph(set, a.cfg, mode);
    csv::write_prior(a.out, r.matrix, set.names());
    std::cerr << "requests " << r.requests_sent << ", cache hits " << r.cache_hits << ", warnings " << r.warnings
              << (r.parse_failure ? ", no parseable edges" : "") << '\n';
    return 0;
}

struct PriorParseArgs {
    fs::path response, descriptors, out = "prior.csv";
};

int cmd_prior_parse(const PriorParseArgs& a) {
    require_file(a.response, "response file");
    require_file(a.descriptors, "descriptor file");
    const auto set = llm::load_descriptors(a.descriptors);
    const auto r = llm::parse_edges(slurp(a.response), set.names());
    csv::write_prior(a.out, r.matrix, set.names());
    std::cerr << r.edges << " edges, " << r.warnings << " warnings" << (r.parse_failure ? ", parse failure" : "")
              << '\n';
    return 0;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
    std::vector<fs::path> inputs;
    fs::path out;
};

int cmd_report(const ReportArgs& a) {
    std::vector<json> runs;
    std::vector<double> cohort;
    for (const auto& p : a.inputs) {
        require_file(p, "report file");
        json j;
        try {
            j = json::parse(slurp(p));
        } catch (const json::parse_error& e) {
            throw LoadError(p.string() + ": " + e.what());
        }
        for (const auto& key : {"tpr", "fdr", "fpr", "shd", "tp_nnz", "nnz", "d", "seed"})
            if (!j.contains(key)) throw LoadError(p.string() + " lacks key '" + std::string(key) + "'");
        cohort.push_back(j["tp_nnz"].get<double>());
        runs.push_back(std::move(j));
    }
    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out, std::ios::binary);
        if (!file) throw LoadError("cannot write " + a.out.string());
    }
    std::ostream& out = a.out.empty() ? std::cout : file;
    out << "run,tpr,fdr,fpr,shd,tp_nnz,rp,nnz,d,seed\n";
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const auto& j = runs[k];
        const auto r = rp(j["tp_nnz"].get<double>(), cohort);
        out << a.inputs[k].stem().string() << ',' << j["tpr"].dump() << ',' << j["fdr"].dump() << ','
            << j["fpr"].dump() << ',' << j["shd"].dump() << ',' << j["tp_nnz"].dump() << ','
            << (r ? fmt(*r) : "") << ',' << j["nnz"].dump() << ',' << j["d"].dump() << ',' << j["seed"].dump()
            << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal DAG discovery with optional priors"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Simulate a linear-Gaussian SEM");
    g->add_option("--nodes", gen.nodes, "Number of variables")->check(CLI::PositiveNumber);
    g->add_option("--edges", gen.edges, "Expected number of edges")->check(CLI::NonNegativeNumber);
    g->add_option("--samples", gen.samples, "Number of rows")->check(CLI::Range(2, 100000000));
    g->add_option("--seed", gen.seed);
    g->add_option("--prior-fraction", gen.prior_fraction, "Share of true edges revealed in prior.csv")
        ->check(CLI::Range(0.0, 1.0));
    g->add_option("--confounders", gen.confounders, "Hidden causes as i:j[:strength]");
    g->add_option("--out", gen.out, "Output directory");

    DiscoverArgs disc;
    auto* d = app.add_subcommand("discover", "Learn a DAG from data and optional priors");
    d->add_option("--data", disc.data, "CSV with a header row")->required();
    d->add_option("--prior", disc.prior, "Known-edge prior (-1/0/1)");
    d->add_option("--prior-init", disc.prior_init, "Initial prior fed to the policy");
    d->add_flag("--no-prior", disc.no_prior, "Ignore prior files");
    d->add_option("--truth", disc.truth, "Ground truth; also writes report.json");
    d->add_option("--config", disc.config, "JSON config with flat hyperparameter keys");
    d->add_option("--out", disc.out, "Output directory");
    d->add_option("--seed", disc.seed);
    d->add_option("--epochs", disc.epochs);
    d->add_option("--max-steps", disc.max_steps);
    d->add_option("--batch-size", disc.batch_size);
    d->add_option("--threads", disc.threads);
    d->add_option("--lr", disc.lr);
    d->add_option("--tau", disc.tau);
    d->add_option("--beta", disc.beta, "Prior penalty weight");
    d->add_option("--lambda1", disc.lambda1);
    d->add_option("--lambda2", disc.lambda2);
    d->add_option("--score-type", disc.score_type)->check(CLI::IsMember({"BIC", "BIC_different_var"}));
    d->add_flag("--no-calibration", disc.no_calibration);

    PruneArgs pr;
    auto* p = app.add_subcommand("prune", "Regression-weight pruning of a candidate graph");
    p->add_option("--data", pr.data)->required();
    p->add_option("--candidate", pr.candidate)->required();
    p->add_option("--out", pr.out);
    p->add_option("--weights-out", pr.weights_out);
    p->add_option("--seed", pr.seed);

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "Compare a predicted graph with the truth");
    e->add_option("--pred", ev.pred)->required();
    e->add_option("--truth", ev.truth)->required();
    e->add_option("--out", ev.out, "Report JSON (stdout when omitted)");
    e->add_option("--cohort", ev.cohort, "Cohort CSV; this run is appended and RP computed over it");
    e->add_option("--run", ev.run, "Row label in the cohort file");
    e->add_option("--seed", ev.seed);

    auto* pri = app.add_subcommand("prior", "Elicit or parse LLM priors");
    pri->require_subcommand(1);
    PriorFetchArgs pf;
    auto* pfc = pri->add_subcommand("fetch", "Query a chat-completion endpoint");
    pfc->add_option("--descriptors", pf.descriptors)->required();
    pfc->add_option("--mode", pf.mode)->check(CLI::IsMember({"pairwise", "whole"}));
    pfc->add_option("--out", pf.out);
    pfc->add_option("--endpoint", pf.cfg.endpoint);
    pfc->add_option("--model", pf.cfg.model);
    pfc->add_option("--api-key-env", pf.cfg.api_key_env);
    pfc->add_option("--temperature", pf.cfg.temperature);
    pfc->add_option("--retries", pf.cfg.max_retries);
    pfc->add_option("--timeout", pf.cfg.timeout_seconds);
    pfc->add_option("--cache-dir", pf.cfg.cache_dir);
    pfc->add_option("--max-in-flight", pf.cfg.max_in_flight);
    pfc->add_option("--seed", pf.cfg.seed);
    PriorParseArgs pp;
    auto* ppc = pri->add_subcommand("parse", "Parse a saved whole-graph response");
    ppc->add_option("--response", pp.response)->required();
    ppc->add_option("--descriptors", pp.descriptors)->required();
    ppc->add_option("--out", pp.out);

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "Tabulate report JSON files as CSV");
    r->add_option("inputs", rep.inputs)->required();
    r->add_option("--out", rep.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : kUsageError;
    }

    try {
        if (*g) return cmd_generate(gen);
        if (*d) return cmd_discover(disc);
        if (*p) return cmd_prune(pr);
        if (*e) return cmd_evaluate(ev);
        if (*pfc) return cmd_prior_fetch(pf);
        if (*ppc) return cmd_prior_parse(pp);
        if (*r) return cmd_report(rep);
    } catch (const LoadError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kUsageError;
    } catch (const ConfigError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kUsageError;
    } catch (const AlignmentError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kUsageError;
    } catch (const nlohmann::json::exception& err) {
        std::cerr << "error: bad config value: " << err.what() << '\n';
        return kUsageError;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kRuntimeFailure;
    }
    return kUsageError;
}
