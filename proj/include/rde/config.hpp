#pragma once

#include "rde/experiments.hpp"
#include "rde/maps.hpp"
#include "rde/observable.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rde {

inline constexpr const char* kConfigSchema = "rde-config v1";

struct MapSpec {
    std::string family = "beta";  // beta | linear_mod1 | custom
    double prob = 1.0;
    int beta_int = 2;      // beta
    double beta = 2.0;     // linear_mod1
    double offset = 0.0;   // linear_mod1
    std::string label;     // custom
    std::vector<AffinePiece> pieces;  // custom

    PiecewiseMap build() const;
};

struct TermSpec {
    std::string kind;  // cos | sin | monomial | indicator | constant
    int order = 1;
    double lo = 0.0;
    double hi = 1.0;
    double coefficient = 1.0;
};

struct InitialSpec {
    std::string kind = "stationary";  // stationary | lebesgue | point
    double x0 = 0.0;
};

/// Parsed and validated experiment configuration. Every optional field holds
/// its default after parsing, so to_json() is a normal form.
struct ExperimentConfig {
    std::vector<MapSpec> maps;
    std::vector<TermSpec> terms;
    int grid = 1024;
    std::string kind;
    std::uint64_t master_seed = 1;
    unsigned threads = 0;
    std::string out_dir = ".";
    std::string name;  // report file stem; defaults to kind
    bool write_csv = true;
    bool write_samples = false;

    // simulation
    long long n = 1000;
    long long replicas = 1000;
    InitialSpec initial;
    std::string mode = "annealed";
    std::uint64_t omega_seed = 0;

    // kind-specific
    std::vector<long long> ladder;
    std::vector<double> eps_list;
    std::vector<std::uint64_t> omega_seeds;
    long long aux_replicas = 0;  // ks_replicas / quenched_replicas / doubled_replicas
    double alpha = 0.0;
    std::vector<long long> n_list;
    std::vector<double> t_grid;
    double gamma = 0.5;
    double p = 0.3;
    double ball_constant = 0.25;
    std::vector<double> interval = {-0.1, 0.1};
    int doubled_grid = 128;
    bool diagnostic = false;
    std::optional<double> band;  // override of the primary acceptance band

    RandomSystem build_system() const;
    Observable build_observable() const;
    nlohmann::json to_json() const;
};

/// Throws ConfigError with the offending field path.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Parses text; syntax errors report line and column.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::string& path);

/// Experiment kinds in sorted order.
const std::vector<std::string>& experiment_kinds();

}  // namespace rde
