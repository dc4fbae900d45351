#include "rde/config.hpp"

#include "rde/error.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rde {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) fail(path.empty() ? "config" : path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) fail(join(path, key), "unknown field");
    }
}

const json* find(const json& obj, const std::string& key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
    const json* v = find(obj, key);
    if (!v) fail(join(path, key), "missing required field");
    return *v;
}

double as_double(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
}

long long as_integer(const json& v, const std::string& path) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d == static_cast<double>(static_cast<long long>(d)) && std::abs(d) < 9.0e18) {
            return static_cast<long long>(d);
        }
    }
    fail(path, "expected an integer");
}

std::uint64_t as_seed(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    const long long s = as_integer(v, path);
    if (s < 0) fail(path, "seed must be nonnegative");
    return static_cast<std::uint64_t>(s);
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
}

template <class T, class F>
std::vector<T> as_list(const json& v, const std::string& path, F&& item) {
    if (!v.is_array()) fail(path, "expected a list");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(item(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

std::vector<double> as_doubles(const json& v, const std::string& path) {
    return as_list<double>(v, path, as_double);
}

std::vector<long long> as_integers(const json& v, const std::string& path) {
    return as_list<long long>(v, path, as_integer);
}

const std::set<std::string> kSimulationKeys = {"kind", "n", "replicas", "initial",
                                               "mode", "omega_seed", "band"};

struct KindInfo {
    bool simulates;
    std::set<std::string> extra;
    const char* aux_name;  // name of aux_replicas, or nullptr
};

const std::vector<std::pair<std::string, KindInfo>>& kind_table() {
    static const std::vector<std::pair<std::string, KindInfo>> table = {
        {"borel_cantelli", {true, {"p", "gamma", "C"}, nullptr}},
        {"clt", {true, {"ladder", "ks_replicas"}, "ks_replicas"}},
        {"concentration", {true, {"ladder", "t_grid"}, nullptr}},
        {"erdos_renyi", {true, {"alpha", "n_list"}, nullptr}},
        {"ldp", {true, {"eps", "ladder", "omega_seeds", "quenched_replicas"}, "quenched_replicas"}},
        {"local_limit", {true, {"interval", "ladder", "t_grid"}, nullptr}},
        {"martingale", {true, {}, nullptr}},
        {"quenched_clt",
         {true,
          {"omega_seeds", "doubled_replicas", "doubled_grid", "ladder", "diagnostic"},
          "doubled_replicas"}},
        {"shrinking_target_clt", {true, {"p", "gamma", "C"}, "variance_replicas"}},
        {"spectral", {false, {"band"}, nullptr}},
    };
    return table;
}

const KindInfo& kind_info(const std::string& kind, const std::string& path) {
    for (const auto& [name, info] : kind_table()) {
        if (name == kind) return info;
    }
    std::string known;
    for (const auto& [name, info] : kind_table()) known += (known.empty() ? "" : ", ") + name;
    fail(path, "unknown experiment kind '" + kind + "' (known: " + known + ")");
}

MapSpec parse_map(const json& m, const std::string& path) {
    check_keys(m, path, {"family", "prob", "params"});
    MapSpec spec;
    spec.family = as_string(require(m, "family", path), join(path, "family"));
    spec.prob = as_double(require(m, "prob", path), join(path, "prob"));
    const json empty = json::object();
    const json* params = find(m, "params");
    const json& p = params ? *params : empty;
    const std::string pp = join(path, "params");
    if (spec.family == "beta") {
        check_keys(p, pp, {"beta"});
        const long long b = as_integer(require(p, "beta", pp), join(pp, "beta"));
        if (b < 2 || b > 65536) fail(join(pp, "beta"), "integer beta must lie in [2, 65536]");
        spec.beta_int = static_cast<int>(b);
    } else if (spec.family == "linear_mod1") {
        check_keys(p, pp, {"beta", "offset"});
        spec.beta = as_double(require(p, "beta", pp), join(pp, "beta"));
        if (const json* o = find(p, "offset")) spec.offset = as_double(*o, join(pp, "offset"));
        if (!(spec.beta > 1.0)) fail(join(pp, "beta"), "beta must exceed 1");
        if (!(spec.offset >= 0.0 && spec.offset < 1.0)) fail(join(pp, "offset"), "offset must lie in [0,1)");
    } else if (spec.family == "custom") {
        check_keys(p, pp, {"label", "pieces"});
        spec.label = p.contains("label") ? as_string(p["label"], join(pp, "label")) : "custom";
        const std::string piecesp = join(pp, "pieces");
        spec.pieces = as_list<AffinePiece>(require(p, "pieces", pp), piecesp,
                                           [](const json& q, const std::string& qp) {
                                               check_keys(q, qp, {"lo", "hi", "slope", "intercept"});
                                               AffinePiece a;
                                               a.domain_lo = as_double(require(q, "lo", qp), join(qp, "lo"));
                                               a.domain_hi = as_double(require(q, "hi", qp), join(qp, "hi"));
                                               a.slope = as_double(require(q, "slope", qp), join(qp, "slope"));
                                               a.intercept = as_double(require(q, "intercept", qp),
                                                                       join(qp, "intercept"));
                                               return a;
                                           });
        if (spec.pieces.empty()) fail(piecesp, "custom map needs at least one piece");
    } else {
        fail(join(path, "family"), "unknown family '" + spec.family +
                                       "' (known: beta, custom, linear_mod1)");
    }
    return spec;
}

TermSpec parse_term(const json& t, const std::string& path) {
    if (!t.is_object()) fail(path, "expected an object");
    TermSpec s;
    s.kind = as_string(require(t, "kind", path), join(path, "kind"));
    if (s.kind == "cos" || s.kind == "sin") {
        check_keys(t, path, {"kind", "k", "coefficient"});
        const long long k = as_integer(require(t, "k", path), join(path, "k"));
        if (k < 0 || k > 1000000) fail(join(path, "k"), "frequency must lie in [0, 10^6]");
        s.order = static_cast<int>(k);
    } else if (s.kind == "monomial") {
        check_keys(t, path, {"kind", "degree", "coefficient"});
        const long long d = as_integer(require(t, "degree", path), join(path, "degree"));
        if (d < 0 || d > 64) fail(join(path, "degree"), "degree must lie in [0, 64]");
        s.order = static_cast<int>(d);
    } else if (s.kind == "indicator") {
        check_keys(t, path, {"kind", "lo", "hi", "coefficient"});
        s.lo = as_double(require(t, "lo", path), join(path, "lo"));
        s.hi = as_double(require(t, "hi", path), join(path, "hi"));
        if (!(s.lo >= 0.0 && s.hi <= 1.0 && s.lo < s.hi)) {
            fail(path, "indicator needs 0 <= lo < hi <= 1");
        }
    } else if (s.kind == "constant") {
        check_keys(t, path, {"kind", "coefficient"});
    } else {
        fail(join(path, "kind"), "unknown term kind '" + s.kind +
                                     "' (known: constant, cos, indicator, monomial, sin)");
    }
    if (const json* c = find(t, "coefficient")) s.coefficient = as_double(*c, join(path, "coefficient"));
    return s;
}

}  // namespace

PiecewiseMap MapSpec::build() const {
    if (family == "beta") return beta_map(beta_int);
    if (family == "linear_mod1") return linear_mod1(beta, offset);
    return piecewise_affine(label, pieces);
}

RandomSystem ExperimentConfig::build_system() const {
    std::vector<PiecewiseMap> ms;
    std::vector<double> probs;
    for (const MapSpec& m : maps) {
        ms.push_back(m.build());
        probs.push_back(m.prob);
    }
    return RandomSystem(std::move(ms), std::move(probs));
}

Observable ExperimentConfig::build_observable() const {
    Observable phi;
    for (const TermSpec& t : terms) {
        if (t.kind == "cos") {
            phi = phi + Observable::cosine(t.order, t.coefficient);
        } else if (t.kind == "sin") {
            phi = phi + Observable::sine(t.order, t.coefficient);
        } else if (t.kind == "monomial") {
            phi = phi + Observable::monomial(t.order, t.coefficient);
        } else if (t.kind == "indicator") {
            phi = phi + Observable::indicator(t.lo, t.hi, t.coefficient);
        } else {
            phi = phi + Observable::constant(t.coefficient);
        }
    }
    return phi;
}

ExperimentConfig parse_config(const json& doc) {
    check_keys(doc, "", {"schema", "system", "observable", "grid", "master_seed", "threads",
                         "output", "experiment"});
    const std::string schema = as_string(require(doc, "schema", ""), "schema");
    if (schema != kConfigSchema) {
        fail("schema", "expected \"" + std::string(kConfigSchema) + "\", got \"" + schema + "\"");
    }
    ExperimentConfig c;
    const json& sys = require(doc, "system", "");
    if (!sys.is_array() || sys.empty()) fail("system", "expected a nonempty list of maps");
    for (std::size_t i = 0; i < sys.size(); ++i) {
        c.maps.push_back(parse_map(sys[i], "system[" + std::to_string(i) + "]"));
    }
    const json& obs = require(doc, "observable", "");
    if (!obs.is_array() || obs.empty()) fail("observable", "expected a nonempty list of terms");
    for (std::size_t i = 0; i < obs.size(); ++i) {
        c.terms.push_back(parse_term(obs[i], "observable[" + std::to_string(i) + "]"));
    }
    if (const json* g = find(doc, "grid")) {
        const long long grid = as_integer(*g, "grid");
        if (grid < 8 || grid > 1 << 16) fail("grid", "grid must lie in [8, 65536]");
        c.grid = static_cast<int>(grid);
    }
    if (const json* s = find(doc, "master_seed")) c.master_seed = as_seed(*s, "master_seed");
    if (const json* t = find(doc, "threads")) {
        const long long th = as_integer(*t, "threads");
        if (th < 0 || th > 4096) fail("threads", "threads must lie in [0, 4096]");
        c.threads = static_cast<unsigned>(th);
    }
    if (const json* o = find(doc, "output")) {
        check_keys(*o, "output", {"dir", "name", "csv", "samples"});
        if (const json* v = find(*o, "dir")) c.out_dir = as_string(*v, "output.dir");
        if (const json* v = find(*o, "name")) c.name = as_string(*v, "output.name");
        if (const json* v = find(*o, "csv")) c.write_csv = as_bool(*v, "output.csv");
        if (const json* v = find(*o, "samples")) c.write_samples = as_bool(*v, "output.samples");
    }

    const json& e = require(doc, "experiment", "");
    if (!e.is_object()) fail("experiment", "expected an object");
    c.kind = as_string(require(e, "kind", "experiment"), "experiment.kind");
    const KindInfo& info = kind_info(c.kind, "experiment.kind");
    std::set<std::string> allowed = info.extra;
    allowed.insert("kind");
    if (info.aux_name) allowed.insert(info.aux_name);
    if (info.simulates) allowed.insert(kSimulationKeys.begin(), kSimulationKeys.end());
    check_keys(e, "experiment", allowed);
    if (c.name.empty()) c.name = c.kind;

    auto num = [&](const char* key, double& out) {
        if (const json* v = find(e, key)) out = as_double(*v, join("experiment", key));
    };
    auto integer = [&](const char* key, long long& out) {
        if (const json* v = find(e, key)) out = as_integer(*v, join("experiment", key));
    };
    integer("n", c.n);
    integer("replicas", c.replicas);
    if (c.n < 1) fail("experiment.n", "must be >= 1");
    if (c.replicas < 1) fail("experiment.replicas", "must be >= 1");
    if (const json* v = find(e, "band")) {
        c.band = as_double(*v, "experiment.band");
        if (!(*c.band > 0.0)) fail("experiment.band", "must be positive");
    }
    if (const json* v = find(e, "initial")) {
        check_keys(*v, "experiment.initial", {"kind", "x0"});
        c.initial.kind = as_string(require(*v, "kind", "experiment.initial"), "experiment.initial.kind");
        if (c.initial.kind == "point") {
            c.initial.x0 = as_double(require(*v, "x0", "experiment.initial"), "experiment.initial.x0");
            if (!(c.initial.x0 >= 0.0 && c.initial.x0 <= 1.0)) fail("experiment.initial.x0", "must lie in [0,1]");
        } else if (c.initial.kind != "stationary" && c.initial.kind != "lebesgue") {
            fail("experiment.initial.kind", "expected stationary, lebesgue or point");
        } else if (v->contains("x0")) {
            fail("experiment.initial.x0", "only valid for a point initial law");
        }
    }
    if (const json* v = find(e, "mode")) {
        c.mode = as_string(*v, "experiment.mode");
        if (c.mode != "annealed" && c.mode != "quenched") fail("experiment.mode", "expected annealed or quenched");
    }
    if (const json* v = find(e, "omega_seed")) c.omega_seed = as_seed(*v, "experiment.omega_seed");
    if (const json* v = find(e, "ladder")) c.ladder = as_integers(*v, "experiment.ladder");
    if (const json* v = find(e, "eps")) c.eps_list = as_doubles(*v, "experiment.eps");
    if (const json* v = find(e, "omega_seeds")) {
        c.omega_seeds = as_list<std::uint64_t>(*v, "experiment.omega_seeds", as_seed);
    }
    if (info.aux_name) integer(info.aux_name, c.aux_replicas);
    num("alpha", c.alpha);
    if (const json* v = find(e, "n_list")) c.n_list = as_integers(*v, "experiment.n_list");
    if (const json* v = find(e, "t_grid")) c.t_grid = as_doubles(*v, "experiment.t_grid");
    num("gamma", c.gamma);
    num("p", c.p);
    num("C", c.ball_constant);
    if (const json* v = find(e, "interval")) c.interval = as_doubles(*v, "experiment.interval");
    if (const json* v = find(e, "doubled_grid")) {
        const long long g = as_integer(*v, "experiment.doubled_grid");
        if (g < 8 || g > kDoubledGridGuard) fail("experiment.doubled_grid", "must lie in [8, 256]");
        c.doubled_grid = static_cast<int>(g);
    }
    if (const json* v = find(e, "diagnostic")) c.diagnostic = as_bool(*v, "experiment.diagnostic");

    // kind-specific validation
    for (long long m : c.ladder) {
        if (m < 1 || m > c.n) fail("experiment.ladder", "entries must lie in [1, n]");
    }
    if (c.aux_replicas < 0) fail(std::string("experiment.") + info.aux_name, "must be >= 0");
    if (c.kind == "ldp" && c.eps_list.empty()) fail("experiment.eps", "ldp needs eps values");
    if (c.kind == "erdos_renyi") {
        if (!(c.alpha > 0.0)) fail("experiment.alpha", "alpha must be positive");
        if (c.n_list.empty()) fail("experiment.n_list", "erdos_renyi needs n values");
        for (long long m : c.n_list) {
            if (m < 2) fail("experiment.n_list", "entries must be >= 2");
        }
    }
    if (c.kind == "quenched_clt" && c.omega_seeds.empty()) {
        fail("experiment.omega_seeds", "quenched_clt needs omega seeds");
    }
    if (c.kind == "local_limit" && (c.interval.size() != 2 || !(c.interval[1] > c.interval[0]))) {
        fail("experiment.interval", "expected [lo, hi] with lo < hi");
    }
    if (c.kind == "borel_cantelli" || c.kind == "shrinking_target_clt") {
        if (!(c.p >= 0.0 && c.p <= 1.0)) fail("experiment.p", "must lie in [0,1]");
        if (!(c.gamma >= 0.0 && c.gamma < 1.0)) fail("experiment.gamma", "must lie in [0,1)");
        if (!(c.ball_constant > 0.0 && c.ball_constant <= 1.0)) fail("experiment.C", "must lie in (0,1]");
    }
    for (double t : c.t_grid) {
        if (c.kind == "local_limit" && t == 0.0) fail("experiment.t_grid", "t = 0 is excluded");
    }

    try {
        (void)c.build_system();
        (void)c.build_observable();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& err) {
        fail("system", err.what());
    }
    return c;
}

json ExperimentConfig::to_json() const {
    json doc;
    doc["schema"] = kConfigSchema;
    json sys = json::array();
    for (const MapSpec& m : maps) {
        json j{{"family", m.family}, {"prob", m.prob}};
        if (m.family == "beta") {
            j["params"] = {{"beta", m.beta_int}};
        } else if (m.family == "linear_mod1") {
            j["params"] = {{"beta", m.beta}, {"offset", m.offset}};
        } else {
            json pieces = json::array();
            for (const AffinePiece& a : m.pieces) {
                pieces.push_back({{"lo", a.domain_lo},
                                  {"hi", a.domain_hi},
                                  {"slope", a.slope},
                                  {"intercept", a.intercept}});
            }
            j["params"] = {{"label", m.label}, {"pieces", pieces}};
        }
        sys.push_back(j);
    }
    doc["system"] = sys;
    json obs = json::array();
    for (const TermSpec& t : terms) {
        json j{{"kind", t.kind}, {"coefficient", t.coefficient}};
        if (t.kind == "cos" || t.kind == "sin") j["k"] = t.order;
        if (t.kind == "monomial") j["degree"] = t.order;
        if (t.kind == "indicator") {
            j["lo"] = t.lo;
            j["hi"] = t.hi;
        }
        obs.push_back(j);
    }
    doc["observable"] = obs;
    doc["grid"] = grid;
    doc["master_seed"] = master_seed;
    doc["threads"] = threads;
    doc["output"] = {{"dir", out_dir}, {"name", name}, {"csv", write_csv}, {"samples", write_samples}};

    const KindInfo& info = kind_info(kind, "experiment.kind");
    json e{{"kind", kind}};
    if (info.simulates) {
        e["n"] = n;
        e["replicas"] = replicas;
        json init{{"kind", initial.kind}};
        if (initial.kind == "point") init["x0"] = initial.x0;
        e["initial"] = init;
        e["mode"] = mode;
        e["omega_seed"] = omega_seed;
    }
    if (band) e["band"] = *band;
    const auto& x = info.extra;
    if (x.count("ladder")) e["ladder"] = ladder;
    if (x.count("eps")) e["eps"] = eps_list;
    if (x.count("omega_seeds")) e["omega_seeds"] = omega_seeds;
    if (info.aux_name) e[info.aux_name] = aux_replicas;
    if (x.count("alpha")) e["alpha"] = alpha;
    if (x.count("n_list")) e["n_list"] = n_list;
    if (x.count("t_grid")) e["t_grid"] = t_grid;
    if (x.count("gamma")) e["gamma"] = gamma;
    if (x.count("p")) e["p"] = p;
    if (x.count("C")) e["C"] = ball_constant;
    if (x.count("interval")) e["interval"] = interval;
    if (x.count("doubled_grid")) e["doubled_grid"] = doubled_grid;
    if (x.count("diagnostic")) e["diagnostic"] = diagnostic;
    doc["experiment"] = e;
    return doc;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& err) {
        // byte offset -> line:column
        std::size_t line = 1, col = 1;
        const std::size_t end = std::min<std::size_t>(err.byte, text.size());
        for (std::size_t i = 0; i + 1 < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream os;
        os << source << ":" << line << ":" << col << ": JSON syntax error (" << err.what() << ")";
        throw ConfigError(os.str());
    }
    try {
        return parse_config(doc);
    } catch (const ConfigError& err) {
        throw ConfigError(source + ": " + err.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds = [] {
        std::vector<std::string> k;
        for (const auto& [name, info] : kind_table()) k.push_back(name);
        std::sort(k.begin(), k.end());
        return k;
    }();
    return kinds;
}

}  // namespace rde
