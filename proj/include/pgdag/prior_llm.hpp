#pragma once

// Elicits a {0,1} candidate graph from a chat-completion HTTP endpoint.
// Every response is cached on disk keyed by (model, prompt), so a populated
// cache reproduces the matrix without any network access.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "pgdag/error.hpp"
#include "pgdag/graph.hpp"
#include "pgdag/rng.hpp"
#include "pgdag/scoring.hpp"

namespace pgdag::llm {

struct NodeDescriptor {
    std::string name;
    std::string description;
};

/// {"domain": "...", "nodes": [{"name": ..., "description": ...}, ...]}
/// or a bare array of node objects.
struct DescriptorSet {
    std::string domain;
    std::vector<NodeDescriptor> nodes;

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& n : nodes) out.push_back(n.name);
        return out;
    }
};

inline DescriptorSet parse_descriptors(const nlohmann::json& j) {
    DescriptorSet set;
    const nlohmann::json* arr = &j;
    if (j.is_object()) {
        set.domain = j.value("domain", "");
        if (!j.contains("nodes")) throw LoadError("descriptor file has no 'nodes' array");
        arr = &j.at("nodes");
    }
    if (!arr->is_array()) throw LoadError("descriptor 'nodes' must be an array");
    for (const auto& n : *arr)
        set.nodes.push_back({n.at("name").get<std::string>(), n.value("description", "")});
    return set;
}

inline DescriptorSet load_descriptors(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    try {
        return parse_descriptors(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

namespace detail {

inline std::string preamble(const std::string& domain) {
    std::ostringstream o;
    o << "You are an *intelligent causal discovery agent* tasked with mapping how the variables"
      << (domain.empty() ? std::string() : " of " + domain)
      << " influence one another, in order to build a causal graph over them.\n\n"
      << "### **Important Rules:**\n"
      << "- A variable may have several incoming edges when more than one upstream variable "
         "affects it.\n"
      << "- A variable may act as an intermediary and carry both incoming and outgoing edges.\n"
      << "- Never propose a self-loop, and never propose an edge that closes a directed cycle: "
         "the final graph must be a DAG.\n"
      << "- Only assert edges that established domain knowledge supports.\n\n";
    return o.str();
}

inline std::string feature_list(const std::vector<NodeDescriptor>& nodes) {
    std::ostringstream o;
    o << "### **Features:**\n";
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        o << k + 1 << ". **" << nodes[k].name << "**";
        if (!nodes[k].description.empty()) o << ": " << nodes[k].description;
        o << '\n';
    }
    return o.str();
}

}  // namespace detail

/// Whole-graph prompt: preamble, rules, numbered features, two-step scaffold,
/// and the "N. (A, B) : explanation" output format.
inline std::string build_prompt(const std::vector<NodeDescriptor>& nodes,
                                const std::string& domain = "") {
    if (nodes.size() < 2) throw ConfigError("a prompt needs at least two node descriptors");
    std::ostringstream o;
    o << detail::preamble(domain) << detail::feature_list(nodes) << "\n---\n\n"
      << "### **Step 1: Finding the Edges**\n"
      << "List every directed edge you can identify, each with a one-sentence justification.\n\n"
      << "### **Step 2: Checking the Graph**\n"
      << "Drop any edge that would create a cycle or that repeats a pair in the opposite "
         "direction.\n\n---\n\n"
      << "**Output format:**\n"
      << "Provide a list of edges in the format below. For example:\n"
      << "1. (A, B) : Explanation of why A causes B.\n"
      << "2. (C, D) : Explanation of why C causes D.\n";
    return o.str();
}

/// Binary-judgement prompt for the ordered pair (cause, effect).
inline std::string build_pair_prompt(const std::vector<NodeDescriptor>& nodes, std::size_t cause,
                                     std::size_t effect, const std::string& domain = "") {
    if (cause >= nodes.size() || effect >= nodes.size() || cause == effect)
        throw ConfigError("pair prompt needs two distinct node indices");
    std::ostringstream o;
    o << detail::preamble(domain) << detail::feature_list(nodes) << "\n---\n\n"
      << "### **Question:**\n"
      << "Does **" << nodes[cause].name << "** directly cause **" << nodes[effect].name
      << "** (an edge " << nodes[cause].name << " -> " << nodes[effect].name << ")?\n"
      << "Give a short justification, then end with a final line that is exactly "
         "`ANSWER: YES` or `ANSWER: NO`.\n";
    return o.str();
}

struct ParsedEdges {
    PriorMatrix matrix;
    std::size_t edges = 0;
    std::size_t warnings = 0;  // self-loops, unknown names, duplicate pairs
    bool parse_failure = false;
};

namespace detail {

inline std::string strip_markup(std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '*' || c == '`'; }), s.end());
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads numbered "(X, Y)" lines. Unknown names and self-loops are skipped
/// with a warning; for a pair listed in both directions the first wins.
/// Every entry not set to 1 is 0.
inline ParsedEdges parse_edges(const std::string& response, const std::vector<std::string>& names) {
    const std::size_t d = names.size();
    ParsedEdges out{PriorMatrix(d), 0, 0, false};
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out.matrix.set(i, j, 0);

    static const std::regex line_re(R"(^\s*\d+\s*[.)]\s*[^(\n]*\(([^,()]+),([^()]+)\))");
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_search(line, m, line_re)) continue;
        const std::string a = detail::strip_markup(m[1].str());
        const std::string b = detail::strip_markup(m[2].str());
        const auto ia = std::find(names.begin(), names.end(), a);
        const auto ib = std::find(names.begin(), names.end(), b);
        if (ia == names.end() || ib == names.end() || ia == ib) {
            ++out.warnings;
            continue;
        }
        const auto i = static_cast<std::size_t>(ia - names.begin());
        const auto j = static_cast<std::size_t>(ib - names.begin());
        if (out.matrix(j, i) == 1 || out.matrix(i, j) == 1) {
            ++out.warnings;
            continue;
        }
        out.matrix.set(i, j, 1);
        ++out.edges;
    }
    out.parse_failure = out.edges == 0;
    return out;
}

/// YES/NO from the last line that carries one; nullopt if none does.
inline std::optional<bool> parse_judgement(const std::string& response) {
    static const std::regex yes_no(R"(\b(YES|NO)\b)", std::regex::icase);
    std::istringstream in(response);
    std::string line;
    std::optional<bool> verdict;
    while (std::getline(in, line)) {
        std::string last;
        for (auto it = std::sregex_iterator(line.begin(), line.end(), yes_no);
             it != std::sregex_iterator(); ++it)
            last = (*it)[1].str();
        if (!last.empty()) verdict = (last[0] == 'Y' || last[0] == 'y');
    }
    return verdict;
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out.push_back(hex[md[k] >> 4]);
        out.push_back(hex[md[k] & 0xF]);
    }
    return out;
}

/// One JSON file per request: <cache_dir>/<sha256(model \n prompt)>.json.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    static std::string key(const std::string& model, const std::string& prompt) {
        return sha256_hex(model + "\n" + prompt);
    }

    std::filesystem::path path_for(const std::string& model, const std::string& prompt) const {
        return dir_ / (key(model, prompt) + ".json");
    }

    std::optional<std::string> get(const std::string& model, const std::string& prompt) const {
        if (dir_.empty()) return std::nullopt;
        std::ifstream in(path_for(model, prompt));
        if (!in) return std::nullopt;
        try {
            const auto j = nlohmann::json::parse(in);
            if (j.value("model", "") != model || j.value("prompt", "") != prompt) return std::nullopt;
            return j.at("response").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;
        }
    }

    void put(const std::string& model, const std::string& prompt, const std::string& response) {
        if (dir_.empty()) return;
        std::lock_guard lock(mu_);
        std::filesystem::create_directories(dir_);
        const auto final_path = path_for(model, prompt);
        auto tmp = final_path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw LoadError("cannot write cache file " + tmp.string());
            out << nlohmann::json{{"model", model}, {"prompt", prompt}, {"response", response}}.dump(2)
                << '\n';
        }
        std::filesystem::rename(tmp, final_path);
    }

private:
    std::filesystem::path dir_;
    std::mutex mu_;
};

struct ElicitationConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.0;
    std::size_t max_retries = 3;
    double timeout_seconds = 60.0;
    double backoff_seconds = 1.0;
    std::filesystem::path cache_dir = "llm-cache";
    std::size_t max_in_flight = 4;
    std::uint64_t seed = 0;  // tie-breaks in cycle removal of the pairwise graph

    void validate() const {
        if (temperature < 0) throw ConfigError("temperature must be nonnegative");
        if (max_in_flight == 0) throw ConfigError("max_in_flight must be positive");
    }
};

/// prompt -> completion text. Throws on transport failure.
using Transport = std::function<std::string(const std::string& prompt)>;

/// OpenAI-style chat-completion request body.
inline nlohmann::json chat_request(const ElicitationConfig& cfg, const std::string& prompt) {
    return {{"model", cfg.model},
            {"temperature", cfg.temperature},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
}

/// HTTP transport with retries and exponential backoff on transport errors,
/// 429 and 5xx responses.
inline Transport http_transport(const ElicitationConfig& cfg) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(cfg.endpoint, m, url_re))
        throw ConfigError("endpoint must be an http(s) URL: " + cfg.endpoint);
    const std::string origin = m[1].str();
    const std::string path = m[2].matched ? m[2].str() : "/";
    std::string api_key;
    if (const char* k = std::getenv(cfg.api_key_env.c_str())) api_key = k;

    return [cfg, origin, path, api_key](const std::string& prompt) -> std::string {
        httplib::Client client(origin);
        const auto secs = static_cast<time_t>(cfg.timeout_seconds);
        client.set_connection_timeout(secs, 0);
        client.set_read_timeout(secs, 0);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        const std::string body = chat_request(cfg, prompt).dump();

        std::string last_error;
        for (std::size_t attempt = 0; attempt <= cfg.max_retries; ++attempt) {
            if (attempt > 0) {
                const double wait = cfg.backoff_seconds * static_cast<double>(1u << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::duration<double>(wait));
            }
            auto res = client.Post(path, headers, body, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) throw std::runtime_error("HTTP " + std::to_string(res->status));
            try {
                const auto j = nlohmann::json::parse(res->body);
                return j.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const nlohmann::json::exception& e) {
                throw std::runtime_error(std::string("malformed completion: ") + e.what());
            }
        }
        throw std::runtime_error(last_error);
    };
}

enum class ElicitationMode { whole_graph, pairwise };

struct ElicitationResult {
    PriorMatrix matrix;             // {0,1}
    std::size_t requests_sent = 0;  // cache misses
    std::size_t cache_hits = 0;
    std::size_t warnings = 0;
    bool parse_failure = false;
};

/// Whole-graph mode sends one prompt and parses its edge list. Pairwise mode
/// asks one YES/NO question per ordered pair (i-major order), keeps the first
/// direction of any pair answered YES both ways, then breaks cycles.
inline ElicitationResult elicit_graph(const DescriptorSet& descriptors, const ElicitationConfig& cfg,
                                      ElicitationMode mode, Transport transport = {}) {
    cfg.validate();
    const auto& nodes = descriptors.nodes;
    const std::size_t d = nodes.size();
    if (d < 2) throw ConfigError("elicitation needs at least two nodes");
    if (!transport) transport = http_transport(cfg);
    ResponseCache cache(cfg.cache_dir);
    ElicitationResult out;
    std::atomic<std::size_t> sent{0}, hits{0};

    auto ask = [&](const std::string& prompt, const std::string& label) {
        if (auto cached = cache.get(cfg.model, prompt)) {
            ++hits;
            return *cached;
        }
        ++sent;
        std::string response;
        try {
            response = transport(prompt);
        } catch (const std::exception& e) {
            throw ElicitationError("elicitation failed for " + label + ": " + e.what(), label);
        }
        cache.put(cfg.model, prompt, response);
        return response;
    };

    if (mode == ElicitationMode::whole_graph) {
        const auto parsed = parse_edges(ask(build_prompt(nodes, descriptors.domain), "whole-graph"),
                                        descriptors.names());
        out.matrix = parsed.matrix;
        out.warnings = parsed.warnings;
        out.parse_failure = parsed.parse_failure;
    } else {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (i != j) pairs.emplace_back(i, j);
        std::vector<std::optional<bool>> verdict(pairs.size());
        std::atomic<std::size_t> next{0};
        std::mutex err_mu;
        std::optional<ElicitationError> failure;
        auto worker = [&] {
            for (std::size_t k; (k = next++) < pairs.size();) {
                const auto [i, j] = pairs[k];
                try {
                    verdict[k] = parse_judgement(ask(build_pair_prompt(nodes, i, j, descriptors.domain),
                                                     "(" + nodes[i].name + ", " + nodes[j].name + ")"));
                } catch (const ElicitationError& e) {
                    std::lock_guard lock(err_mu);
                    if (!failure) failure = e;
                    return;
                }
            }
        };
        {
            std::vector<std::jthread> pool;
            for (std::size_t t = 0; t < std::min(cfg.max_in_flight, pairs.size()); ++t)
                pool.emplace_back(worker);
        }
        if (failure) throw *failure;

        AdjacencyMatrix a(d, descriptors.names());
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const auto [i, j] = pairs[k];
            if (!verdict[k]) {
                ++out.warnings;
                continue;
            }
            if (*verdict[k] && !a(j, i)) a.set(i, j, true);
            else if (*verdict[k]) ++out.warnings;
        }
        Rng rng = make_rng(cfg.seed, "llm-pairwise-cycles");
        out.matrix = PriorMatrix::from_adjacency(remove_cycles(WeightedDigraph::from_adjacency(a), rng));
        out.parse_failure = a.edge_count() == 0;
    }
    out.requests_sent = sent;
    out.cache_hits = hits;
    return out;
}

}  // namespace pgdag::llm
