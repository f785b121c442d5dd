#include "escada/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "escada/errors.hpp"

namespace escada {

Scenario scenario_from_string(const std::string& name) {
    if (name == "sme") return Scenario::SME;
    if (name == "mme") return Scenario::MME;
    if (name == "fixed-context") return Scenario::FixedContext;
    throw Error(ErrorKind::InvalidArgument, "unknown scenario '" + name + "'");
}

std::string to_string(Scenario scenario) {
    switch (scenario) {
        case Scenario::SME: return "sme";
        case Scenario::MME: return "mme";
        case Scenario::FixedContext: return "fixed-context";
    }
    return "unknown";
}

PolicyKind policy_from_string(const std::string& name) {
    if (name == "escada") return PolicyKind::Escada;
    if (name == "taco") return PolicyKind::Taco;
    if (name == "ts") return PolicyKind::Ts;
    if (name == "sts") return PolicyKind::Sts;
    if (name == "gp-ucb-r1") return PolicyKind::GpUcbR1;
    if (name == "gp-ucb-r2") return PolicyKind::GpUcbR2;
    if (name == "gp-ucb-r3") return PolicyKind::GpUcbR3;
    if (name == "calculator") return PolicyKind::Calculator;
    if (name == "random-safe") return PolicyKind::RandomSafe;
    throw Error(ErrorKind::InvalidArgument, "unknown policy '" + name + "'");
}

std::string to_string(PolicyKind policy) {
    switch (policy) {
        case PolicyKind::Escada: return "escada";
        case PolicyKind::Taco: return "taco";
        case PolicyKind::Ts: return "ts";
        case PolicyKind::Sts: return "sts";
        case PolicyKind::GpUcbR1: return "gp-ucb-r1";
        case PolicyKind::GpUcbR2: return "gp-ucb-r2";
        case PolicyKind::GpUcbR3: return "gp-ucb-r3";
        case PolicyKind::Calculator: return "calculator";
        case PolicyKind::RandomSafe: return "random-safe";
    }
    return "unknown";
}

bool uses_safe_set(PolicyKind p) {
    return p == PolicyKind::Escada || p == PolicyKind::Sts || p == PolicyKind::RandomSafe;
}

bool uses_gp(PolicyKind p) { return p != PolicyKind::Calculator; }

DoseMetric ExperimentConfig::dose_metric() const {
    if (metric == "kernel") return DoseMetric::kernel_induced(kernel);
    return DoseMetric::absolute();
}

ExperimentConfig default_config() {
    ExperimentConfig c;
    c.kernel.family = KernelFamily::SquaredExponential;
    c.kernel.lengthscales = Eigen::Vector3d(30.0, 30.0, 4.0);
    c.kernel.signal_variance = 22500.0;
    return c;
}

namespace {

// Collects every problem in a document instead of stopping at the first.
class Reader {
public:
    std::vector<std::string> errors;

    void object(const nlohmann::json& j, const std::string& where, const std::set<std::string>& allowed) {
        if (!j.is_object()) {
            errors.push_back(where + ": expected an object");
            return;
        }
        for (const auto& [key, _] : j.items()) {
            if (!allowed.count(key)) errors.push_back(where + ": unknown key '" + key + "'");
        }
    }

    template <typename T>
    void read(const nlohmann::json& j, const std::string& where, const std::string& key, T& out) {
        if (!j.is_object() || !j.contains(key)) return;
        const auto& v = j.at(key);
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw std::invalid_argument("expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw std::invalid_argument("expected a string");
            }
            out = v.get<T>();
        } catch (const std::exception& e) {
            errors.push_back(where + "." + key + ": " + e.what());
        }
    }

    void range(const nlohmann::json& j, const std::string& where, const std::string& key, Range& out) {
        if (!j.is_object() || !j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            errors.push_back(where + "." + key + ": expected [low, high]");
            return;
        }
        out = {v[0].get<double>(), v[1].get<double>()};
        if (!(out.first <= out.second)) errors.push_back(where + "." + key + ": low exceeds high");
    }

    template <typename F>
    void parse_enum(const nlohmann::json& j, const std::string& where, const std::string& key, F&& assign) {
        std::string name;
        const std::size_t before = errors.size();
        read(j, where, key, name);
        if (errors.size() != before || !j.is_object() || !j.contains(key)) return;
        try {
            assign(name);
        } catch (const Error& e) {
            errors.push_back(where + "." + key + ": " + e.what());
        }
    }
};

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.first, r.second}); }

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c = default_config();
    Reader r;
    r.object(j, "config",
             {"name", "problem", "environment", "kernel", "prior_mean", "metric", "beta", "lambda", "eval_resolution",
              "allow_coarse_grid", "scenario", "policies", "meal_events", "recommendations", "fixed_context", "init",
              "fixed_dose", "seed", "seed_count", "threads", "coverage_audit", "output_dir"});
    if (!j.is_object()) throw Error(ErrorKind::Config, r.errors.front());

    r.read(j, "config", "name", c.name);
    if (j.contains("problem")) {
        const auto& p = j["problem"];
        r.object(p, "problem", {"max_dose", "response_ceiling", "target", "t_min", "t_max", "alpha", "epsilon"});
        r.read(p, "problem", "max_dose", c.problem.max_dose);
        r.read(p, "problem", "response_ceiling", c.problem.response_ceiling);
        r.read(p, "problem", "target", c.problem.target);
        r.read(p, "problem", "t_min", c.problem.t_min);
        r.read(p, "problem", "t_max", c.problem.t_max);
        r.read(p, "problem", "alpha", c.problem.alpha);
        r.read(p, "problem", "epsilon", c.problem.epsilon);
    }
    if (j.contains("environment")) {
        const auto& e = j["environment"];
        auto& env = c.environment;
        r.object(e, "environment",
                 {"family", "patients", "patient_ranges", "meal_ranges", "saturation", "noise_variance", "lipschitz",
                  "lipschitz_margin", "gp_features", "truth_cache"});
        r.parse_enum(e, "environment", "family", [&](const std::string& s) { env.family = response_family_from_string(s); });
        r.read(e, "environment", "patients", env.patients);
        if (e.contains("patient_ranges")) {
            const auto& pr = e["patient_ranges"];
            r.object(pr, "environment.patient_ranges", {"cf", "icr", "offset", "calculator_mismatch"});
            r.range(pr, "environment.patient_ranges", "cf", env.patient_ranges.cf);
            r.range(pr, "environment.patient_ranges", "icr", env.patient_ranges.icr);
            r.range(pr, "environment.patient_ranges", "offset", env.patient_ranges.offset);
            r.range(pr, "environment.patient_ranges", "calculator_mismatch", env.patient_ranges.calculator_mismatch);
        }
        if (e.contains("meal_ranges")) {
            const auto& mr = e["meal_ranges"];
            r.object(mr, "environment.meal_ranges", {"cho", "fasting_glucose"});
            r.range(mr, "environment.meal_ranges", "cho", env.meal_ranges.cho);
            r.range(mr, "environment.meal_ranges", "fasting_glucose", env.meal_ranges.fasting_glucose);
        }
        if (e.contains("saturation")) {
            const auto& s = e["saturation"];
            r.object(s, "environment.saturation", {"floor", "softness"});
            r.read(s, "environment.saturation", "floor", env.saturation.floor);
            r.read(s, "environment.saturation", "softness", env.saturation.softness);
        }
        r.read(e, "environment", "noise_variance", env.noise_variance);
        if (e.contains("lipschitz") && !e["lipschitz"].is_null()) {
            double l = 0.0;
            r.read(e, "environment", "lipschitz", l);
            env.lipschitz = l;
        }
        r.read(e, "environment", "lipschitz_margin", env.lipschitz_margin);
        r.read(e, "environment", "gp_features", env.gp_features);
        r.read(e, "environment", "truth_cache", env.truth_cache);
    }
    if (j.contains("kernel")) {
        const auto& k = j["kernel"];
        r.object(k, "kernel", {"family", "lengthscales", "signal_variance"});
        r.parse_enum(k, "kernel", "family", [&](const std::string& s) { c.kernel.family = kernel_family_from_string(s); });
        if (k.is_object() && k.contains("lengthscales")) {
            const auto& ls = k["lengthscales"];
            bool ok = ls.is_array() && !ls.empty();
            if (ok) {
                for (const auto& v : ls) ok = ok && v.is_number();
            }
            if (!ok) {
                r.errors.push_back("kernel.lengthscales: expected a nonempty array of numbers");
            } else {
                c.kernel.lengthscales.resize(static_cast<Eigen::Index>(ls.size()));
                for (std::size_t i = 0; i < ls.size(); ++i) c.kernel.lengthscales(static_cast<Eigen::Index>(i)) = ls[i].get<double>();
            }
        }
        r.read(k, "kernel", "signal_variance", c.kernel.signal_variance);
    }
    r.read(j, "config", "prior_mean", c.prior_mean);
    r.read(j, "config", "metric", c.metric);
    if (j.contains("beta")) {
        const auto& b = j["beta"];
        r.object(b, "beta", {"mode", "delta", "sqrt_beta", "info_gain_inflation"});
        r.parse_enum(b, "beta", "mode", [&](const std::string& s) { c.beta.mode = beta_mode_from_string(s); });
        r.read(b, "beta", "delta", c.beta.delta);
        r.read(b, "beta", "sqrt_beta", c.beta.sqrt_beta);
        r.read(b, "beta", "info_gain_inflation", c.beta.info_gain_inflation);
    }
    r.read(j, "config", "lambda", c.lambda);
    r.read(j, "config", "eval_resolution", c.eval_resolution);
    r.read(j, "config", "allow_coarse_grid", c.allow_coarse_grid);
    r.parse_enum(j, "config", "scenario", [&](const std::string& s) { c.scenario = scenario_from_string(s); });
    if (j.contains("policies")) {
        const auto& ps = j["policies"];
        if (!ps.is_array()) {
            r.errors.push_back("config.policies: expected an array of policy names");
        } else {
            c.policies.clear();
            for (const auto& p : ps) {
                if (!p.is_string()) {
                    r.errors.push_back("config.policies: expected policy names as strings");
                    continue;
                }
                try {
                    c.policies.push_back(policy_from_string(p.get<std::string>()));
                } catch (const Error& e) {
                    r.errors.push_back(std::string("config.policies: ") + e.what());
                }
            }
        }
    }
    r.read(j, "config", "meal_events", c.meal_events);
    r.read(j, "config", "recommendations", c.recommendations);
    if (j.contains("fixed_context") && !j["fixed_context"].is_null()) {
        const auto& fc = j["fixed_context"];
        r.object(fc, "fixed_context", {"cho", "fasting_glucose"});
        MealEvent z;
        r.read(fc, "fixed_context", "cho", z.cho);
        r.read(fc, "fixed_context", "fasting_glucose", z.fasting_glucose);
        c.fixed_context = z;
    }
    r.parse_enum(j, "config", "init", [&](const std::string& s) { c.init = init_mode_from_string(s); });
    r.read(j, "config", "fixed_dose", c.fixed_dose);
    r.read(j, "config", "seed", c.seed);
    r.read(j, "config", "seed_count", c.seed_count);
    r.read(j, "config", "threads", c.threads);
    r.read(j, "config", "coverage_audit", c.coverage_audit);
    r.read(j, "config", "output_dir", c.output_dir);

    if (!r.errors.empty()) {
        std::ostringstream os;
        os << r.errors.size() << " configuration error(s):";
        for (const auto& e : r.errors) os << "\n  " << e;
        throw Error(ErrorKind::Config, os.str());
    }
    c.validate();
    return c;
}

void ExperimentConfig::validate() {
    std::vector<std::string> errors;
    warnings.clear();
    const auto check = [&](const char* what, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            errors.push_back(std::string(what) + ": " + e.what());
        }
    };
    check("problem", [&] { problem.validate(); });
    check("kernel", [&] { kernel.validate(); });
    check("beta", [&] { beta.validate(); });
    if (kernel.dim() != 3) errors.push_back("kernel.lengthscales: need 3 entries (CHO, fasting glucose, dose)");
    if (metric != "absolute" && metric != "kernel") errors.push_back("metric: expected \"absolute\" or \"kernel\"");
    const auto& env = environment;
    if (env.patients < 1) errors.push_back("environment.patients: must be at least 1");
    if (!(env.noise_variance > 0.0)) errors.push_back("environment.noise_variance: must be positive");
    if (env.lipschitz && !(*env.lipschitz > 0.0)) errors.push_back("environment.lipschitz: must be positive");
    if (!(env.lipschitz_margin >= 1.0)) errors.push_back("environment.lipschitz_margin: must be at least 1");
    if (env.gp_features < 1) errors.push_back("environment.gp_features: must be at least 1");
    if (!(env.saturation.softness > 0.0)) errors.push_back("environment.saturation.softness: must be positive");
    if (!(env.patient_ranges.cf.first > 0.0)) errors.push_back("environment.patient_ranges.cf: must be positive");
    if (!(env.patient_ranges.icr.first > 0.0)) errors.push_back("environment.patient_ranges.icr: must be positive");
    if (!(env.patient_ranges.calculator_mismatch.first > 0.0)) {
        errors.push_back("environment.patient_ranges.calculator_mismatch: must be positive");
    }
    if (!(env.meal_ranges.cho.first >= 0.0)) errors.push_back("environment.meal_ranges.cho: must be nonnegative");
    if (!(lambda > 0.0)) errors.push_back("lambda: must be positive");
    if (lambda >= problem.epsilon) {
        if (allow_coarse_grid) {
            warnings.push_back("lambda >= epsilon: convergence to the reachable set is not guaranteed");
        } else {
            errors.push_back("lambda: must be below problem.epsilon (set allow_coarse_grid to override)");
        }
    }
    if (!std::isfinite(prior_mean)) errors.push_back("prior_mean: must be finite");
    if (eval_resolution < 1) errors.push_back("eval_resolution: must be at least 1");
    if (policies.empty()) errors.push_back("policies: at least one policy is required");
    if (meal_events < 1) errors.push_back("meal_events: must be at least 1");
    if (scenario == Scenario::MME && meal_events < 2) errors.push_back("meal_events: MME needs at least 2 events");
    if (recommendations < 1) errors.push_back("recommendations: must be at least 1");
    if (seed_count < 1) errors.push_back("seed_count: must be at least 1");
    if (threads < 1) errors.push_back("threads: must be at least 1");
    if (fixed_dose < 0.0 || fixed_dose > problem.max_dose) errors.push_back("fixed_dose: outside [0, max_dose]");
    if (!errors.empty()) {
        std::ostringstream os;
        os << errors.size() << " configuration error(s):";
        for (const auto& e : errors) os << "\n  " << e;
        throw Error(ErrorKind::Config, os.str());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "config file '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["problem"] = {{"max_dose", c.problem.max_dose},   {"response_ceiling", c.problem.response_ceiling},
                    {"target", c.problem.target},       {"t_min", c.problem.t_min},
                    {"t_max", c.problem.t_max},         {"alpha", c.problem.alpha},
                    {"epsilon", c.problem.epsilon}};
    const auto& env = c.environment;
    nlohmann::json e;
    e["family"] = to_string(env.family);
    e["patients"] = env.patients;
    e["patient_ranges"] = {{"cf", range_json(env.patient_ranges.cf)},
                           {"icr", range_json(env.patient_ranges.icr)},
                           {"offset", range_json(env.patient_ranges.offset)},
                           {"calculator_mismatch", range_json(env.patient_ranges.calculator_mismatch)}};
    e["meal_ranges"] = {{"cho", range_json(env.meal_ranges.cho)},
                        {"fasting_glucose", range_json(env.meal_ranges.fasting_glucose)}};
    e["saturation"] = {{"floor", env.saturation.floor}, {"softness", env.saturation.softness}};
    e["noise_variance"] = env.noise_variance;
    e["lipschitz"] = env.lipschitz ? nlohmann::json(*env.lipschitz) : nlohmann::json(nullptr);
    e["lipschitz_margin"] = env.lipschitz_margin;
    e["gp_features"] = env.gp_features;
    e["truth_cache"] = env.truth_cache;
    j["environment"] = e;
    j["kernel"] = {{"family", to_string(c.kernel.family)},
                   {"lengthscales", std::vector<double>(c.kernel.lengthscales.data(),
                                                        c.kernel.lengthscales.data() + c.kernel.lengthscales.size())},
                   {"signal_variance", c.kernel.signal_variance}};
    j["prior_mean"] = c.prior_mean;
    j["metric"] = c.metric;
    j["beta"] = {{"mode", to_string(c.beta.mode)},
                 {"delta", c.beta.delta},
                 {"sqrt_beta", c.beta.sqrt_beta},
                 {"info_gain_inflation", c.beta.info_gain_inflation}};
    j["lambda"] = c.lambda;
    j["eval_resolution"] = c.eval_resolution;
    j["allow_coarse_grid"] = c.allow_coarse_grid;
    j["scenario"] = to_string(c.scenario);
    j["policies"] = nlohmann::json::array();
    for (auto p : c.policies) j["policies"].push_back(to_string(p));
    j["meal_events"] = c.meal_events;
    j["recommendations"] = c.recommendations;
    j["fixed_context"] = c.fixed_context ? nlohmann::json{{"cho", c.fixed_context->cho},
                                                          {"fasting_glucose", c.fixed_context->fasting_glucose}}
                                         : nlohmann::json(nullptr);
    j["init"] = to_string(c.init);
    j["fixed_dose"] = c.fixed_dose;
    j["seed"] = c.seed;
    j["seed_count"] = c.seed_count;
    j["threads"] = c.threads;
    j["coverage_audit"] = c.coverage_audit;
    j["output_dir"] = c.output_dir;
    return j;
}

void set_config_path(nlohmann::json& doc, const std::string& path, const nlohmann::json& value) {
    nlohmann::json* node = &doc;
    std::istringstream is(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(is, part, '.')) parts.push_back(part);
    if (parts.empty()) throw Error(ErrorKind::Config, "empty sweep key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw Error(ErrorKind::Config, "sweep key '" + path + "' crosses a non-object value");
        node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = value;
}

}  // namespace escada
