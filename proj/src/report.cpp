#include "rde/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace rde {

Check& ExperimentReport::add_check(std::string name, double value, double lower, double upper,
                                   std::string target) {
    Check c;
    c.name = std::move(name);
    c.value = value;
    c.lower = lower;
    c.upper = upper;
    c.target = std::move(target);
    c.pass = std::isfinite(value) && value >= lower && value <= upper;
    checks.push_back(std::move(c));
    return checks.back();
}

bool ExperimentReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

nlohmann::json ExperimentReport::to_json() const {
    nlohmann::json j;
    j["schema"] = kReportSchema;
    j["kind"] = kind;
    j["system"] = system;
    j["observable"] = observable;
    j["params"] = params;
    j["prediction"] = prediction;
    j["estimate"] = estimate;
    j["seeds"] = seeds;
    j["discrepancy"] = json_number(discrepancy);
    j["n"] = n;
    j["replicas"] = replicas;
    nlohmann::json cs = nlohmann::json::array();
    for (const Check& c : checks) {
        cs.push_back({{"name", c.name},
                      {"value", json_number(c.value)},
                      {"lower", json_number(c.lower)},
                      {"upper", json_number(c.upper)},
                      {"target", c.target},
                      {"pass", c.pass}});
    }
    j["checks"] = cs;
    j["warnings"] = warnings;
    j["passed"] = passed();
    j["wall_time"] = wall_time;
    return j;
}

double discrepancy(double prediction, double estimate) {
    const double d = std::abs(prediction - estimate);
    return prediction != 0.0 ? d / std::abs(prediction) : d;
}

void write_samples_csv(std::ostream& os, const std::vector<double>& samples) {
    os << "sample\n" << std::setprecision(17);
    for (double v : samples) os << v << '\n';
}

}  // namespace rde
