#include "barrier/scenarios.hpp"

#include "barrier/errors.hpp"

#include <json.hpp>

#include <boost/math/constants/constants.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

namespace barrier::scenarios::detail {
const std::vector<std::pair<std::string_view, std::string_view>>& embedded();
}

namespace barrier {

namespace {

using json = nlohmann::json;

void allow(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in '" + where + "'");
}

const json& need(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError("missing key '" + std::string(key) + "' in '" + where + "'");
    return *it;
}

template <class T>
T get_as(const json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("'" + where + "' has the wrong type");
    }
}

template <class T>
T opt_as(const json& j, const char* key, T fallback, const std::string& where) {
    auto it = j.find(key);
    return it == j.end() ? fallback : get_as<T>(*it, where + "." + key);
}

Box parse_box(const json& j, const std::string& where) {
    allow(j, where, {"lo", "hi"});
    return Box(get_as<std::vector<double>>(need(j, "lo", where), where + ".lo"),
               get_as<std::vector<double>>(need(j, "hi", where), where + ".hi"));
}

Grid parse_grid(const json& box, const json& counts, std::size_t dim, const std::string& where) {
    Box b = parse_box(box, where + ".box");
    std::vector<int> c;
    if (counts.is_number_integer())
        c.assign(dim, counts.get<int>());
    else
        c = get_as<std::vector<int>>(counts, where + ".grid");
    if (b.dim() != dim || c.size() != dim) throw ConfigError("'" + where + "' box or grid has the wrong dimension");
    return Grid(std::move(b), std::move(c));
}

KappaFunction parse_alpha(const json& j, const std::string& where) {
    allow(j, where, {"kind", "params"});
    std::string kind = get_as<std::string>(need(j, "kind", where), where + ".kind");
    json p = j.value("params", json::object());
    const std::string pw = where + ".params";
    if (kind == "linear") {
        allow(p, pw, {"c"});
        return KappaFunction::linear(opt_as<double>(p, "c", 1.0, pw));
    }
    if (kind == "power") {
        allow(p, pw, {"c", "p"});
        return KappaFunction::power(opt_as<double>(p, "c", 1.0, pw), get_as<double>(need(p, "p", pw), pw + ".p"));
    }
    if (kind == "piecewise") {
        allow(p, pw, {"r", "v", "tail"});
        return KappaFunction::piecewise(get_as<std::vector<double>>(need(p, "r", pw), pw + ".r"),
                                        get_as<std::vector<double>>(need(p, "v", pw), pw + ".v"),
                                        get_as<double>(need(p, "tail", pw), pw + ".tail"));
    }
    throw ConfigError("unknown alpha kind '" + kind + "'");
}

KappaKappaFunction parse_alpha2(const json& j, const std::string& where) {
    allow(j, where, {"kind", "params"});
    std::string kind = get_as<std::string>(need(j, "kind", where), where + ".kind");
    json p = j.value("params", json::object());
    const std::string pw = where + ".params";
    if (kind == "product") {
        allow(p, pw, {"c", "eps"});
        return KappaKappaFunction::product(opt_as<double>(p, "c", 1.0, pw), opt_as<double>(p, "eps", 1e-3, pw));
    }
    if (kind == "separable") {
        allow(p, pw, {"alpha"});
        return KappaKappaFunction::separable(parse_alpha(need(p, "alpha", pw), pw + ".alpha"));
    }
    throw ConfigError("unknown alpha2 kind '" + kind + "'");
}

InputPolicy parse_policy(const json& j, const std::string& where, const Scenario& s) {
    if (j.is_string()) return parse_policy(json{{"kind", j}}, where, s);
    allow(j, where, {"kind", "controller", "resolution"});
    std::string kind = get_as<std::string>(need(j, "kind", where), where + ".kind");
    if (kind == "unbounded_affine") return InputPolicy::unbounded_affine();
    if (kind == "box_search") return InputPolicy::box_search(opt_as<int>(j, "resolution", 401, where));
    if (kind == "feedback")
        return InputPolicy::feedback(s.controller(opt_as<std::string>(j, "controller", "controller", where)));
    throw ConfigError("unknown policy kind '" + kind + "'");
}

ControllerPtr parse_controller(const json& j, const std::string& where, const Scenario& s) {
    allow(j, where, {"kind", "exprs", "field", "alpha", "penalty", "resolution"});
    std::string kind = opt_as<std::string>(j, "kind", "expression", where);
    const ControlSystem& sys = *s.system;
    if (kind == "expression") {
        auto exprs = get_as<std::vector<std::string>>(need(j, "exprs", where), where + ".exprs");
        if (exprs.size() != sys.m()) throw ConfigError("'" + where + "' needs one expression per input");
        return std::make_shared<ExpressionFeedback>(exprs, sys.state_vars());
    }
    std::string field = opt_as<std::string>(j, "field", "h", where);
    KappaFunction alpha = j.contains("alpha") ? parse_alpha(j["alpha"], where + ".alpha") : s.alpha;
    if (kind == "min_norm_cbf") return std::make_shared<MinNormCbf>(sys, s.field_ptr(field), alpha);
    if (kind == "clf_cbf_qp") {
        ClfSpec clf = s.clf();
        return std::make_shared<ClfCbfQp>(sys, clf.V, clf.W, s.field_ptr(field), alpha,
                                          opt_as<double>(j, "penalty", 100.0, where));
    }
    if (kind == "lattice_cbf")
        return std::make_shared<LatticeCbf>(sys, s.field_ptr(field), alpha, opt_as<int>(j, "resolution", 401, where));
    throw ConfigError("unknown controller kind '" + kind + "'");
}

void flatten(const json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(*it, prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (j.is_string()) {
        out[prefix] = j.get<std::string>();
    } else {
        out[prefix] = j.dump();
    }
}

std::shared_ptr<Scenario> build(const json& doc, const std::string& fallback_name) {
    allow(doc, "config", {"name", "description", "system", "fields", "alpha", "alpha2", "controller", "controllers",
                          "certify", "simulate", "reach", "compat", "expected"});
    auto s = std::make_shared<Scenario>();
    s->name = opt_as<std::string>(doc, "name", fallback_name, "config");
    s->description = opt_as<std::string>(doc, "description", "", "config");

    const json& js = need(doc, "system", "config");
    allow(js, "system", {"state_vars", "input_vars", "dynamics", "affine", "input_box", "sample_box"});
    auto xs = get_as<std::vector<std::string>>(need(js, "state_vars", "system"), "system.state_vars");
    auto us = get_as<std::vector<std::string>>(js.value("input_vars", json::array()), "system.input_vars");
    auto dyn = get_as<std::vector<std::string>>(need(js, "dynamics", "system"), "system.dynamics");
    s->system = std::make_shared<ControlSystem>(xs, us, dyn);
    if (js.contains("input_box")) s->system->set_input_box(parse_box(js["input_box"], "system.input_box"));
    if (js.contains("sample_box")) s->system->set_sample_box(parse_box(js["sample_box"], "system.sample_box"));
    if (js.contains("affine")) {
        const json& ja = js["affine"];
        allow(ja, "system.affine", {"a", "g"});
        s->system->set_affine(get_as<std::vector<std::string>>(need(ja, "a", "system.affine"), "system.affine.a"),
                              get_as<std::vector<std::vector<std::string>>>(need(ja, "g", "system.affine"),
                                                                            "system.affine.g"));
    }
    const std::size_t n = s->system->n();

    if (doc.contains("fields")) {
        const json& jf = doc["fields"];
        if (!jf.is_object()) throw ConfigError("'fields' must be an object");
        for (auto it = jf.begin(); it != jf.end(); ++it)
            s->fields[it.key()] =
                std::make_shared<ScalarField>(get_as<std::string>(*it, "fields." + it.key()), xs);
    }
    if (doc.contains("alpha")) s->alpha = parse_alpha(doc["alpha"], "alpha");
    if (doc.contains("alpha2")) s->alpha2 = parse_alpha2(doc["alpha2"], "alpha2");

    if (doc.contains("controller")) s->controllers["controller"] = parse_controller(doc["controller"], "controller", *s);
    if (doc.contains("controllers")) {
        const json& jc = doc["controllers"];
        if (!jc.is_object()) throw ConfigError("'controllers' must be an object");
        for (auto it = jc.begin(); it != jc.end(); ++it)
            s->controllers[it.key()] = parse_controller(*it, "controllers." + it.key(), *s);
    }

    if (doc.contains("certify")) {
        const json& jc = doc["certify"];
        allow(jc, "certify", {"box", "grid", "r_grid", "c_grid", "policy", "field_policies", "expansion",
                              "tolerances", "divergence"});
        CertificationConfig& c = s->certify;
        c.grid = parse_grid(need(jc, "box", "certify"), need(jc, "grid", "certify"), n, "certify");
        c.r_grid = get_as<std::vector<double>>(need(jc, "r_grid", "certify"), "certify.r_grid");
        c.c_grid = get_as<std::vector<double>>(jc.value("c_grid", json::array()), "certify.c_grid");
        if (jc.contains("policy")) c.policy = parse_policy(jc["policy"], "certify.policy", *s);
        if (jc.contains("expansion")) {
            const json& je = jc["expansion"];
            allow(je, "certify.expansion", {"factor", "steps"});
            c.expansion_factor = opt_as<double>(je, "factor", 2.0, "certify.expansion");
            c.expansion_steps = opt_as<int>(je, "steps", 1, "certify.expansion");
        }
        if (jc.contains("tolerances")) {
            const json& jt = jc["tolerances"];
            const std::string w = "certify.tolerances";
            allow(jt, w, {"tol0", "margin_tol", "lg_threshold", "strict_tol", "eps"});
            c.tol.tol0 = opt_as<double>(jt, "tol0", c.tol.tol0, w);
            c.tol.margin_tol = opt_as<double>(jt, "margin_tol", c.tol.margin_tol, w);
            c.tol.lg_threshold = opt_as<double>(jt, "lg_threshold", c.tol.lg_threshold, w);
            c.tol.strict_tol = opt_as<double>(jt, "strict_tol", c.tol.strict_tol, w);
            c.tol.eps = opt_as<double>(jt, "eps", c.tol.eps, w);
        }
        if (jc.contains("divergence")) {
            const json& jd = jc["divergence"];
            allow(jd, "certify.divergence", {"drop_factor", "min_steps"});
            c.divergence.drop_factor = opt_as<double>(jd, "drop_factor", 4.0, "certify.divergence");
            c.divergence.min_steps = opt_as<int>(jd, "min_steps", 2, "certify.divergence");
        }
        if (jc.contains("field_policies")) {
            const json& jp = jc["field_policies"];
            if (!jp.is_object()) throw ConfigError("'certify.field_policies' must be an object");
            for (auto it = jp.begin(); it != jp.end(); ++it)
                s->field_policies[it.key()] = parse_policy(*it, "certify.field_policies." + it.key(), *s);
        }
    }

    if (doc.contains("simulate")) {
        const json& j = doc["simulate"];
        allow(j, "simulate", {"x0", "T", "dt", "controller"});
        SimulateSpec sp;
        sp.x0 = get_as<std::vector<double>>(need(j, "x0", "simulate"), "simulate.x0");
        if (sp.x0.size() != n) throw ConfigError("'simulate.x0' has the wrong dimension");
        sp.T = opt_as<double>(j, "T", sp.T, "simulate");
        sp.dt = opt_as<double>(j, "dt", sp.dt, "simulate");
        sp.controller = opt_as<std::string>(j, "controller", sp.controller, "simulate");
        s->simulate = sp;
    }
    if (doc.contains("reach")) {
        const json& j = doc["reach"];
        allow(j, "reach", {"box", "grid", "horizons", "dt", "sigma_cells", "controller"});
        ReachSpec rs;
        rs.grid = parse_grid(need(j, "box", "reach"), need(j, "grid", "reach"), n, "reach");
        rs.horizons = get_as<std::vector<double>>(need(j, "horizons", "reach"), "reach.horizons");
        rs.dt = opt_as<double>(j, "dt", rs.dt, "reach");
        rs.sigma_cells = opt_as<double>(j, "sigma_cells", rs.sigma_cells, "reach");
        rs.controller = opt_as<std::string>(j, "controller", rs.controller, "reach");
        s->reach = rs;
    }
    if (doc.contains("compat")) {
        const json& j = doc["compat"];
        allow(j, "compat", {"box", "grid", "strict_tol", "lg_threshold", "angle_tol", "origin_cells"});
        CompatSpec cs;
        cs.grid = parse_grid(need(j, "box", "compat"), need(j, "grid", "compat"), n, "compat");
        cs.options.strict_tol = opt_as<double>(j, "strict_tol", cs.options.strict_tol, "compat");
        cs.options.lg_threshold = opt_as<double>(j, "lg_threshold", cs.options.lg_threshold, "compat");
        cs.options.angle_tol = opt_as<double>(j, "angle_tol", cs.options.angle_tol, "compat");
        cs.origin_cells = opt_as<double>(j, "origin_cells", cs.origin_cells, "compat");
        cs.options.origin_radius = cs.origin_cells * cs.grid.min_spacing() * (1.0 + 1e-9);
        s->compat = cs;
    }
    if (doc.contains("expected")) flatten(doc["expected"], "", s->expected);
    return s;
}

struct Registry {
    std::mutex mutex;
    std::map<std::string, std::shared_ptr<const Scenario>> cache;
};

Registry& registry() {
    static Registry r;
    return r;
}

} // namespace

const ScalarField& Scenario::field(const std::string& key) const {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("scenario '" + name + "' has no field '" + key + "'");
    return *it->second;
}

FieldPtr Scenario::field_ptr(const std::string& key) const {
    field(key);
    return fields.at(key);
}

ControllerPtr Scenario::controller(const std::string& key) const {
    auto it = controllers.find(key);
    if (it == controllers.end()) throw ConfigError("scenario '" + name + "' has no controller '" + key + "'");
    return it->second;
}

InputPolicy Scenario::policy_for(const std::string& f) const {
    auto it = field_policies.find(f);
    return it == field_policies.end() ? certify.policy : it->second;
}

ClfSpec Scenario::clf() const { return {field_ptr("V"), field_ptr("W")}; }

namespace scenarios {

std::vector<std::string> list() {
    std::vector<std::string> out;
    for (const auto& [name, text] : detail::embedded()) out.emplace_back(name);
    std::sort(out.begin(), out.end());
    return out;
}

std::string source(const std::string& name) {
    for (const auto& [n, text] : detail::embedded())
        if (n == name) return std::string(text);
    throw UnknownScenario(name);
}

std::shared_ptr<const Scenario> get(const std::string& name) {
    Registry& r = registry();
    std::lock_guard<std::mutex> lock(r.mutex);
    auto it = r.cache.find(name);
    if (it != r.cache.end()) return it->second;
    auto s = parse(source(name));
    r.cache[name] = s;
    return s;
}

std::shared_ptr<const Scenario> parse(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return build(doc, "config");
}

std::shared_ptr<const Scenario> load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    json doc;
    try {
        doc = json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in '" + path + "': " + e.what());
    }
    std::string stem = path;
    if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
    if (auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
    return build(doc, stem);
}

std::vector<std::pair<double, double>> feasible_input_intervals(double x) {
    std::vector<std::pair<double, double>> out;
    if (x - 1.0 >= 0) {
        double w = std::sqrt(x - 1.0);
        out.emplace_back(1.0 - w, 1.0 + w);
    }
    if (2.0 - x >= 0) {
        double w = std::sqrt(2.0 - x);
        out.emplace_back(-1.0 - w, -1.0 + w);
    }
    std::sort(out.begin(), out.end());
    if (out.size() == 2 && out[0].second >= out[1].first) {
        out[0].second = std::max(out[0].second, out[1].second);
        out.pop_back();
    }
    return out;
}

std::vector<Extended> exp_sin_sequence(int k_first, int k_last, double level) {
    if (k_first > k_last) throw ConfigError("empty index range");
    if (!(level > 0)) throw ConfigError("level must be positive");
    const Extended pi = boost::math::constants::pi<Extended>();
    const expr::Expression g = expr::Expression::parse("exp(x)*sin(x)", {"x"});
    std::vector<Extended> out;
    for (int k = k_first; k <= k_last; ++k) {
        Extended hi = (2 * k + 1) * pi;
        Extended lo = hi - pi / 4;
        out.push_back(bisect(g, lo, hi, Extended(level)));
    }
    return out;
}

} // namespace scenarios
} // namespace barrier
