#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "pgdag/error.hpp"
#include "pgdag/policy.hpp"

namespace pgdag {

inline constexpr std::string_view kCheckpointMagic = "PGDAG-CKPT-v1";

/// Text checkpoint:
///
///   PGDAG-CKPT-v1
///   nodes <d>
///   seed <seed>
///   dropout <rate>
///   config <one-line JSON>
///   tensor <name> <rows> <cols>
///   <rows*cols values, row-major, shortest round-trip form>
///   ...
///   end
inline void save_checkpoint(const std::filesystem::path& path, const PolicyModel& model,
                            std::uint64_t seed, const nlohmann::json& config = nlohmann::json::object()) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write checkpoint " + path.string());
    out << kCheckpointMagic << '\n'
        << "nodes " << model.shape.nodes << '\n'
        << "seed " << seed << '\n';
    char buf[32];
    auto number = [&](double v) {
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
    };
    out << "dropout " << number(model.dropout) << '\n';
    out << "config " << config.dump() << '\n';
    model.params.for_each([&](const char* name, const Eigen::MatrixXd& m) {
        out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << number(m(i, j));
            out << '\n';
        }
    });
    out << "end\n";
}

struct LoadedCheckpoint {
    PolicyModel model;
    std::uint64_t seed = 0;
    nlohmann::json config;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open checkpoint " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kCheckpointMagic)
        throw LoadError(path.string() + " is not a checkpoint (bad magic '" + line + "')");

    auto expect = [&](const std::string& key) {
        std::string k;
        if (!(in >> k) || k != key) throw LoadError(path.string() + ": expected '" + key + "'");
    };
    LoadedCheckpoint ck;
    std::size_t d = 0;
    expect("nodes");
    in >> d;
    expect("seed");
    in >> ck.seed;
    expect("dropout");
    double dropout = 0.0;
    in >> dropout;
    expect("config");
    std::getline(in, line);
    ck.config = nlohmann::json::parse(line);

    Rng unused(0);
    ck.model = PolicyModel::create(d, unused, dropout);
    ck.model.params.for_each([&](const char* name, Eigen::MatrixXd& m) {
        std::string tag, got;
        Eigen::Index rows = 0, cols = 0;
        if (!(in >> tag >> got >> rows >> cols) || tag != "tensor" || got != name)
            throw LoadError(path.string() + ": expected tensor '" + std::string(name) + "'");
        if (rows != m.rows() || cols != m.cols())
            throw LoadError(path.string() + ": tensor '" + got + "' has shape " +
                            std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) {
                std::string tok;
                in >> tok;
                double v = 0.0;
                const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
                if (r.ec != std::errc{}) throw LoadError(path.string() + ": bad value in '" + got + "'");
                m(i, j) = v;
            }
    });
    std::string tail;
    if (!(in >> tail) || tail != "end") throw LoadError(path.string() + ": missing 'end'");
    return ck;
}

}  // namespace pgdag
