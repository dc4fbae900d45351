#pragma once

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace rde {

/// One acceptance band: pass iff lower <= value <= upper.
struct Check {
    std::string name;
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::string target;  // asymptotic target in words
    bool pass = false;
};

/// Record of one experiment. Serializes to a JSON object with sorted keys;
/// everything except wall_time is a deterministic function of the inputs.
struct ExperimentReport {
    std::string kind;
    std::string system;
    std::string observable;
    nlohmann::json params = nlohmann::json::object();
    nlohmann::json prediction = nlohmann::json::object();
    nlohmann::json estimate = nlohmann::json::object();
    nlohmann::json seeds = nlohmann::json::object();
    double discrepancy = 0.0;
    long long n = 0;
    long long replicas = 0;
    std::vector<Check> checks;
    std::vector<std::string> warnings;
    double wall_time = 0.0;

    Check& add_check(std::string name, double value, double lower, double upper,
                     std::string target = {});
    bool passed() const;
    nlohmann::json to_json() const;
};

inline constexpr const char* kReportSchema = "rde-report v1";

/// |prediction - estimate|, divided by |prediction| when it is nonzero.
double discrepancy(double prediction, double estimate);

/// Finite doubles as numbers, the rest as strings ("inf", "-inf", "nan").
nlohmann::json json_number(double v);

void write_samples_csv(std::ostream& os, const std::vector<double>& samples);

}  // namespace rde
