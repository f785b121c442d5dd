#include "escada/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "escada/errors.hpp"
#include "escada/gp.hpp"
#include "escada/policies.hpp"
#include "escada/rng.hpp"

#ifndef ESCADA_VERSION
#define ESCADA_VERSION "0.0.0"
#endif

namespace escada {

namespace fs = std::filesystem;

namespace {

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

std::shared_ptr<const GpTruth> load_or_sample_truth(const ExperimentConfig& config, double offset, std::uint64_t seed) {
    const auto& env = config.environment;
    if (!env.truth_cache.empty()) {
        const fs::path path = fs::path(env.truth_cache) / ("truth-" + hex(seed) + "-" + std::to_string(env.gp_features) + ".json");
        if (fs::exists(path)) {
            std::ifstream in(path);
            std::stringstream ss;
            ss << in.rdbuf();
            auto t = std::make_shared<GpTruth>(GpTruth::from_json(ss.str()));
            if (t->features() == env.gp_features && t->offset() == offset) return t;
        }
        auto t = std::make_shared<GpTruth>(GpTruth::sample(config.kernel, env.gp_features, offset, seed));
        fs::create_directories(path.parent_path());
        std::ofstream(path) << t->to_json();
        return t;
    }
    return std::make_shared<GpTruth>(GpTruth::sample(config.kernel, env.gp_features, offset, seed));
}

}  // namespace

PatientSetup build_patient(const ExperimentConfig& config, std::uint64_t seed, int patient) {
    PatientSetup p;
    p.index = patient;
    p.seed = derive_seed(seed, {stream_id("patient"), static_cast<std::uint64_t>(patient)});
    const auto& env = config.environment;

    ResponseModel& m = p.model;
    m.family = env.family;
    m.problem = config.problem;
    m.patient = sample_patient(env.patient_ranges, config.problem.target, p.seed);
    m.saturation = env.saturation;
    m.noise_variance = env.noise_variance;
    m.metric = config.dose_metric();
    if (m.family == ResponseFamily::GpSampled) {
        m.gp_truth = load_or_sample_truth(config, config.problem.target + m.patient.offset,
                                          derive_seed(p.seed, {stream_id("truth")}));
    }

    // Events depend on (seed, patient) only, so every scenario and policy sees the same ones.
    const std::uint64_t event_seed = derive_seed(seed, {stream_id("events"), static_cast<std::uint64_t>(patient)});
    if (config.scenario == Scenario::FixedContext) {
        p.events = {config.fixed_context ? *config.fixed_context
                                         : sample_meal_events(1, event_seed, env.meal_ranges).front()};
    } else {
        p.events = sample_meal_events(config.meal_events, event_seed, env.meal_ranges);
    }

    const double lipschitz =
        env.lipschitz ? *env.lipschitz : certify_lipschitz(m, m.metric, env.lipschitz_margin, p.events);
    m.lipschitz = LipschitzCertificate{lipschitz};
    p.grid = build_dose_grid(m.metric, lipschitz, config.problem.max_dose, config.lambda, config.problem.epsilon);
    p.eval = build_eval_grid(p.grid, config.eval_resolution);
    p.safety = SafetyParams{lipschitz, config.problem.t_min, config.problem.t_max, config.problem.max_dose, m.metric};
    p.beta = config.beta;
    p.beta.lipschitz = lipschitz;
    return p;
}

namespace {

// Posterior over f (or over a pseudo-reward) with a uniform interface for the
// fixed-context grid cache and the general GP state.
class Posterior {
public:
    virtual ~Posterior() = default;
    virtual void predict(int ctx, Eigen::VectorXd& mean, Eigen::VectorXd& var) = 0;
    virtual Eigen::VectorXd sample(int ctx, const std::vector<Eigen::Index>& admissible, std::uint64_t seed) = 0;
    /// Conditions on y at (ctx, dose); returns the predictive variance there beforehand.
    virtual double observe(int ctx, Eigen::Index eval_index, double dose, double y) = 0;
};

class GridBackend final : public Posterior {
public:
    GridBackend(const GPState& prior, Eigen::MatrixXd points, double jitter)
        : post_(prior, std::move(points)), jitter_(jitter) {}

    void predict(int, Eigen::VectorXd& mean, Eigen::VectorXd& var) override {
        mean = post_.mean();
        var = post_.variance();
    }
    Eigen::VectorXd sample(int, const std::vector<Eigen::Index>& admissible, std::uint64_t seed) override {
        Eigen::VectorXd mean(static_cast<Eigen::Index>(admissible.size()));
        for (std::size_t i = 0; i < admissible.size(); ++i) mean(static_cast<Eigen::Index>(i)) = post_.mean()(admissible[i]);
        return sample_gaussian(mean, post_.covariance(admissible), seed, jitter_);
    }
    double observe(int, Eigen::Index eval_index, double, double y) override {
        if (eval_index < 0) throw Error(ErrorKind::InvalidArgument, "grid posterior needs an eval-grid dose");
        return post_.observe(eval_index, y);
    }

private:
    GridPosterior post_;
    double jitter_;
};

class FullBackend final : public Posterior {
public:
    FullBackend(GPConfig config, std::vector<Eigen::MatrixXd> points)
        : gp_(std::move(config)), points_(std::move(points)) {}

    void predict(int ctx, Eigen::VectorXd& mean, Eigen::VectorXd& var) override {
        BatchPrediction p = gp_.predict_batch(points_[static_cast<std::size_t>(ctx)]);
        mean = std::move(p.mean);
        var = std::move(p.variance);
    }
    Eigen::VectorXd sample(int ctx, const std::vector<Eigen::Index>& admissible, std::uint64_t seed) override {
        const auto& all = points_[static_cast<std::size_t>(ctx)];
        Eigen::MatrixXd pts(all.rows(), static_cast<Eigen::Index>(admissible.size()));
        for (std::size_t i = 0; i < admissible.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = all.col(admissible[i]);
        return gp_sample_on_grid(gp_, pts, seed);
    }
    double observe(int ctx, Eigen::Index eval_index, double dose, double y) override {
        Eigen::VectorXd x;
        if (eval_index >= 0) {
            x = points_[static_cast<std::size_t>(ctx)].col(eval_index);
        } else {
            x = points_[static_cast<std::size_t>(ctx)].col(0);
            x(x.size() - 1) = dose;
        }
        const double v = gp_.predict(x).variance;
        gp_.update(x, y);
        return v;
    }

private:
    GPState gp_;
    std::vector<Eigen::MatrixXd> points_;
};

std::optional<Reward> reward_kind(PolicyKind p) {
    switch (p) {
        case PolicyKind::GpUcbR1: return Reward::R1;
        case PolicyKind::GpUcbR2: return Reward::R2;
        case PolicyKind::GpUcbR3: return Reward::R3;
        default: return std::nullopt;
    }
}

std::string run_label(const std::string& scenario, std::uint64_t seed, int patient, const std::vector<int>& contexts,
                      PolicyKind policy) {
    std::ostringstream os;
    os << scenario << "-s" << seed << "-p" << patient;
    if (contexts.size() == 1) {
        os << "-e" << contexts.front();
    } else {
        os << "-all";
    }
    os << '-' << to_string(policy);
    return os.str();
}

}  // namespace

RunResult run_bandit(const ExperimentConfig& config, const PatientSetup& patient, PolicyKind policy,
                     std::uint64_t seed, const std::vector<int>& contexts, int cycles) {
    if (contexts.empty() || cycles < 1) throw Error(ErrorKind::InvalidArgument, "a run needs contexts and cycles");
    const ResponseModel& model = patient.model;
    const EvalGrid& eval = patient.eval;
    const double target = config.problem.target;
    const std::string scenario = to_string(config.scenario);
    const auto num_events = static_cast<int>(patient.events.size());
    for (int c : contexts) {
        if (c < 0 || c >= num_events) throw Error(ErrorKind::InvalidArgument, "context index out of range");
    }

    RunResult result;
    const std::string run_id = run_label(scenario, seed, patient.index, contexts, policy);
    const bool safe_policy = uses_safe_set(policy);
    const bool single = contexts.size() == 1;
    const auto reward_type = reward_kind(policy);

    // Streams: policy randomness is keyed by the policy name, observation noise
    // by (patient, context) only, so all policies face the same noise draws.
    const std::uint64_t policy_stream =
        derive_seed(seed, {stream_id("policy"), stream_id(to_string(policy).c_str()),
                           static_cast<std::uint64_t>(patient.index), static_cast<std::uint64_t>(contexts.front()),
                           static_cast<std::uint64_t>(contexts.size())});
    const std::uint64_t noise_stream =
        derive_seed(seed, {stream_id("noise"), static_cast<std::uint64_t>(patient.index),
                           static_cast<std::uint64_t>(contexts.front()), static_cast<std::uint64_t>(contexts.size())});

    // Per-context truth and optimum on the eval grid.
    std::vector<Eigen::MatrixXd> points(static_cast<std::size_t>(num_events));
    std::vector<Eigen::VectorXd> truth(static_cast<std::size_t>(num_events));
    std::vector<double> optimum(static_cast<std::size_t>(num_events), 0.0);
    std::vector<SafeSet> safe(static_cast<std::size_t>(num_events));
    for (int c : contexts) {
        const auto ci = static_cast<std::size_t>(c);
        const MealEvent& z = patient.events[ci];
        points[ci] = eval.points(z.context());
        truth[ci].resize(eval.size());
        for (Eigen::Index i = 0; i < eval.size(); ++i) truth[ci](i) = true_response(model, z, eval.doses[static_cast<std::size_t>(i)]);
        optimum[ci] = optimal_dose(model, z);
        if (safe_policy) {
            const std::uint64_t init_seed = derive_seed(seed, {stream_id("init"), static_cast<std::uint64_t>(patient.index),
                                                               static_cast<std::uint64_t>(c)});
            safe[ci] = initial_safe_set(model, z, config.init, patient.grid, init_seed, config.fixed_dose);
            result.safe_sets.push_back({0, c, safe[ci]});
        }
    }

    GPConfig gp_config{config.kernel, config.environment.noise_variance};
    std::unique_ptr<Posterior> posterior;
    if (uses_gp(policy)) {
        if (single) {
            posterior = std::make_unique<GridBackend>(GPState(gp_config), points[static_cast<std::size_t>(contexts.front())],
                                                      1e-10 * config.kernel.signal_variance);
        } else {
            posterior = std::make_unique<FullBackend>(gp_config, points);
        }
    }
    InformationGainTracker info(config.environment.noise_variance);
    const CalculatorParams calculator =
        config.init == InitMode::TunedCalculator ? model.patient.tuned : model.patient.calculator;

    std::vector<Eigen::Index> everything(static_cast<std::size_t>(eval.size()));
    for (Eigen::Index i = 0; i < eval.size(); ++i) everything[static_cast<std::size_t>(i)] = i;

    Eigen::VectorXd mean;
    Eigen::VectorXd var;
    int round = 0;
    for (int cycle = 0; cycle < cycles; ++cycle) {
        for (int ctx : contexts) {
            ++round;
            const auto ci = static_cast<std::size_t>(ctx);
            const MealEvent& z = patient.events[ci];
            const std::uint64_t round_seed = derive_seed(policy_stream, {static_cast<std::uint64_t>(round)});

            RoundRecord rec;
            rec.run_id = run_id;
            rec.scenario = scenario;
            rec.policy = to_string(policy);
            rec.seed = seed;
            rec.patient = patient.index;
            rec.round = round;
            rec.context_id = ctx;
            rec.cho = z.cho;
            rec.fasting_glucose = z.fasting_glucose;
            rec.optimal_dose = optimum[ci];

            Recommendation choice;
            if (policy == PolicyKind::Calculator) {
                choice.dose = std::min(calculator_dose(calculator, z.cho, z.fasting_glucose), config.problem.max_dose);
                choice.branch = Branch::Calculator;
                choice.candidate_count = 1;
            } else {
                posterior->predict(ctx, mean, var);
                if (!reward_type) mean.array() += config.prior_mean;
                const double sqrt_beta = patient.beta.sqrt_beta_at(round, info.value());
                if (reward_type) {
                    rec.sqrt_beta = sqrt_beta;
                    choice = gp_ucb_select(mean, var, eval, everything, sqrt_beta);
                } else {
                    const bool needs_bounds = policy != PolicyKind::Ts;
                    BoundsTable bounds;
                    if (needs_bounds || config.coverage_audit) {
                        bounds = compute_bounds(mean, var, sqrt_beta, patient.grid, eval, patient.safety.metric,
                                                patient.safety.lipschitz, round);
                    }
                    if (needs_bounds) rec.sqrt_beta = sqrt_beta;
                    if (config.coverage_audit) {
                        bool covered = true;
                        for (Eigen::Index i = 0; i < eval.size() && covered; ++i) {
                            const double f = truth[ci](i);
                            covered = f >= bounds.lower(i) && f <= bounds.upper(i) && f >= bounds.lower_tight(i) &&
                                      f <= bounds.upper_tight(i);
                        }
                        rec.coverage = covered ? 1 : 0;
                    }
                    std::vector<Eigen::Index> admissible = everything;
                    if (safe_policy) {
                        safe[ci] = expand_safe_set(safe[ci], bounds, eval, patient.safety);
                        admissible = safe[ci].grid_members(eval);
                        rec.safe_measure = safe[ci].measure();
                        result.safe_sets.push_back({round, ctx, safe[ci]});
                        if (single && !result.summary.rounds_to_safe_optimal && safe[ci].contains(optimum[ci], 1e-9)) {
                            result.summary.rounds_to_safe_optimal = round;
                        }
                    }
                    switch (policy) {
                        case PolicyKind::Escada:
                        case PolicyKind::Taco: choice = taco_select(bounds, eval, admissible, target); break;
                        case PolicyKind::Ts:
                        case PolicyKind::Sts:
                            choice = thompson_select(
                                posterior->sample(ctx, admissible, round_seed).array() + config.prior_mean, eval,
                                admissible, target);
                            break;
                        case PolicyKind::RandomSafe: choice = random_safe_select(safe[ci], eval, round_seed); break;
                        default: throw Error(ErrorKind::InvalidArgument, "unhandled policy");
                    }
                }
            }

            const double y = observe(model, z, choice.dose, noise_stream, static_cast<std::uint64_t>(round));
            const double f = true_response(model, z, choice.dose);
            if (posterior) {
                const double observed = reward_type ? reward(*reward_type, y, target) : y - config.prior_mean;
                const double prior_var = posterior->observe(ctx, choice.eval_index, choice.dose, observed);
                rec.info_gain_increment = info.record(prior_var);
            }
            rec.dose = choice.dose;
            rec.y = y;
            rec.f = f;
            rec.regret = std::abs(f - target);
            rec.hypo = f < config.problem.t_min;
            rec.hyper = f > config.problem.t_max;
            rec.branch = to_string(choice.branch);
            rec.candidates = choice.candidate_count;
            result.records.push_back(std::move(rec));
        }
    }

    const auto rts = result.summary.rounds_to_safe_optimal;
    result.summary = summarize(result.records);
    result.summary.rounds_to_safe_optimal = rts;
    return result;
}

namespace {

struct Task {
    std::size_t setup = 0;
    PolicyKind policy = PolicyKind::Escada;
    std::uint64_t seed = 0;
    std::vector<int> contexts;
    int cycles = 1;
};

ExperimentResult execute(const ExperimentConfig& input) {
    ExperimentConfig config = input;
    config.validate();
    ExperimentResult out;
    out.config = config;
    out.warnings = config.warnings;

    std::vector<PatientSetup> setups;
    std::vector<std::uint64_t> setup_seeds;
    for (int s = 0; s < config.seed_count; ++s) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(s);
        for (int p = 0; p < config.environment.patients; ++p) {
            setups.push_back(build_patient(config, seed, p));
            setup_seeds.push_back(seed);
            for (const auto& w : setups.back().grid.warnings) {
                if (std::find(out.warnings.begin(), out.warnings.end(), w) == out.warnings.end()) out.warnings.push_back(w);
            }
        }
    }

    std::vector<Task> tasks;
    for (std::size_t i = 0; i < setups.size(); ++i) {
        const auto events = static_cast<int>(setups[i].events.size());
        if (config.scenario == Scenario::MME) {
            std::vector<int> all(static_cast<std::size_t>(events));
            for (int e = 0; e < events; ++e) all[static_cast<std::size_t>(e)] = e;
            for (auto pol : config.policies) tasks.push_back({i, pol, setup_seeds[i], all, config.recommendations});
        } else {
            for (int e = 0; e < events; ++e) {
                for (auto pol : config.policies) tasks.push_back({i, pol, setup_seeds[i], {e}, config.recommendations});
            }
        }
    }

    std::vector<std::optional<RunResult>> results(tasks.size());
    std::vector<std::string> failures(tasks.size());
    std::vector<std::exception_ptr> fatal(tasks.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            const Task& task = tasks[t];
            try {
                results[t] = run_bandit(config, setups[task.setup], task.policy, task.seed, task.contexts, task.cycles);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::DegenerateSet) {
                    failures[t] = run_label(to_string(config.scenario), task.seed, setups[task.setup].index,
                                            task.contexts, task.policy) +
                                  ": " + e.what();
                } else {
                    fatal[t] = std::current_exception();
                }
            } catch (...) {
                fatal[t] = std::current_exception();
            }
        }
    };
    const int threads = std::min<int>(config.threads, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : fatal) {
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (results[t]) {
            out.runs.push_back(std::move(*results[t]));
        } else {
            out.skipped.push_back(failures[t]);
        }
    }

    std::map<std::pair<std::string, std::string>, std::vector<RunSummary>> groups;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& r : out.runs) {
        const auto key = std::make_pair(r.summary.scenario, r.summary.policy);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(r.summary);
    }
    for (const auto& key : order) out.aggregate.push_back(aggregate_lenient(groups[key]));
    return out;
}

}  // namespace

ExperimentResult run_sme(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.scenario = Scenario::SME;
    return execute(c);
}

ExperimentResult run_mme(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.scenario = Scenario::MME;
    return execute(c);
}

ExperimentResult run_fixed_context(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.scenario = Scenario::FixedContext;
    return execute(c);
}

ExperimentResult run_experiment(const ExperimentConfig& config) { return execute(config); }

std::string records_csv(const ExperimentResult& result) {
    std::string out = round_record_csv_header() + "\n";
    for (const auto& run : result.runs) {
        for (const auto& r : run.records) {
            out += to_csv_row(r);
            out += '\n';
        }
    }
    return out;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json interval_list(const SafeSet& s) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& iv : s.intervals()) a.push_back({iv.lo, iv.hi});
    return a;
}

}  // namespace

nlohmann::json summary_json(const ExperimentResult& result) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["code_version"] = ESCADA_VERSION;
    j["config"] = to_json(result.config);
    j["warnings"] = result.warnings;
    j["skipped"] = result.skipped;
    j["notes"] = {
        {"beta", result.config.beta.mode == BetaMode::Theoretical
                     ? "theoretical beta uses info_gain_inflation times the achieved information gain in place of the "
                       "maximum information gain"
                     : "fixed sqrt(beta)"},
        {"excluded_metrics", "LBGI and HBGI are not reported; hypo and hyper frequencies are the safety metrics"},
        {"violations", "hypo and hyper flags use the noiseless response"}};
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : result.runs) {
        const auto& s = run.summary;
        nlohmann::json r;
        r["run_id"] = s.run_id;
        r["scenario"] = s.scenario;
        r["policy"] = s.policy;
        r["seed"] = s.seed;
        r["patient"] = s.patient;
        r["contexts"] = s.contexts;
        r["rounds"] = s.rounds;
        r["cumulative_regret"] = s.cumulative_regret;
        r["final_regret"] = s.final_regret;
        r["regret_per_context"] = s.regret_per_context;
        r["mean_abs_deviation"] = s.mean_abs_deviation;
        r["hypo_rate"] = s.hypo_rate;
        r["hyper_rate"] = s.hyper_rate;
        r["mean_y"] = s.mean_y;
        r["mean_f"] = s.mean_f;
        r["info_gain"] = s.info_gain;
        r["rounds_to_safe_optimal"] =
            s.rounds_to_safe_optimal ? nlohmann::json(*s.rounds_to_safe_optimal) : nlohmann::json(nullptr);
        r["coverage_held"] = s.coverage_held ? nlohmann::json(*s.coverage_held) : nlohmann::json(nullptr);
        runs.push_back(r);
    }
    j["runs"] = runs;
    nlohmann::json agg = nlohmann::json::array();
    for (const auto& a : result.aggregate) {
        agg.push_back({{"scenario", a.scenario},
                       {"policy", a.policy},
                       {"runs", a.runs},
                       {"regret_mean", number_or_null(a.final_regret.mean)},
                       {"regret_sd", number_or_null(a.final_regret.sd)},
                       {"hypo_mean", number_or_null(a.hypo_rate.mean)},
                       {"hyper_mean", number_or_null(a.hyper_rate.mean)}});
    }
    j["aggregate"] = agg;
    return j;
}

std::string aggregate_csv(const ExperimentResult& result) {
    std::string out = aggregate_csv_header() + "\n";
    for (const auto& a : result.aggregate) out += to_csv_row(a) + "\n";
    return out;
}

nlohmann::json safe_sets_json(const ExperimentResult& result) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : result.runs) {
        if (run.safe_sets.empty()) continue;
        nlohmann::json traj = nlohmann::json::array();
        for (const auto& snap : run.safe_sets) {
            traj.push_back({{"round", snap.round}, {"context_id", snap.context_id}, {"intervals", interval_list(snap.set)}});
        }
        runs.push_back({{"run_id", run.summary.run_id}, {"trajectory", traj}});
    }
    return {{"schema_version", 1}, {"runs", runs}};
}

void write_outputs(const ExperimentResult& result, const std::string& dir) {
    fs::create_directories(dir);
    const auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if (!f) throw Error(ErrorKind::Config, "cannot write " + (fs::path(dir) / name).string());
        f << body;
    };
    write("records.csv", records_csv(result));
    write("summary.json", summary_json(result).dump(2) + "\n");
    write("aggregate.csv", aggregate_csv(result));
    write("safesets.json", safe_sets_json(result).dump() + "\n");
}

int run_sweep(const nlohmann::json& base, const nlohmann::json& grid) {
    if (!grid.is_object() || grid.empty()) throw Error(ErrorKind::Config, "sweep grid must be a nonempty object");
    std::vector<std::string> keys;
    std::vector<std::vector<nlohmann::json>> values;
    for (const auto& [k, v] : grid.items()) {
        if (!v.is_array() || v.empty()) throw Error(ErrorKind::Config, "sweep key '" + k + "' needs a nonempty array");
        keys.push_back(k);
        values.emplace_back(v.begin(), v.end());
    }
    const std::string root = base.contains("output_dir") ? base["output_dir"].get<std::string>() : std::string("out");

    // Validate every combination before running any of them.
    std::vector<ExperimentConfig> configs;
    std::vector<std::vector<std::size_t>> picks;
    std::vector<std::size_t> idx(keys.size(), 0);
    for (;;) {
        nlohmann::json doc = base;
        for (std::size_t i = 0; i < keys.size(); ++i) set_config_path(doc, keys[i], values[i][idx[i]]);
        char name[32];
        std::snprintf(name, sizeof(name), "sweep-%03zu", configs.size());
        doc["output_dir"] = (fs::path(root) / name).string();
        configs.push_back(config_from_json(doc));
        picks.push_back(idx);
        std::size_t k = 0;
        while (k < keys.size() && ++idx[k] == values[k].size()) idx[k++] = 0;
        if (k == keys.size()) break;
    }

    fs::create_directories(root);
    std::ofstream index(fs::path(root) / "sweep.csv");
    index << "output_dir";
    for (const auto& k : keys) index << ',' << k;
    index << '\n';
    for (std::size_t c = 0; c < configs.size(); ++c) {
        write_outputs(run_experiment(configs[c]), configs[c].output_dir);
        index << configs[c].output_dir;
        for (std::size_t i = 0; i < keys.size(); ++i) index << ',' << values[i][picks[c][i]].dump();
        index << '\n';
    }
    return static_cast<int>(configs.size());
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void export_plots(const std::string& run_dir, const std::string& out_dir) {
    std::ifstream in(fs::path(run_dir) / "records.csv");
    if (!in) throw Error(ErrorKind::Config, "no records.csv in '" + run_dir + "'");
    std::string line;
    std::getline(in, line);
    if (line != round_record_csv_header()) throw Error(ErrorKind::Config, "records.csv has an unexpected header");

    std::map<std::string, std::vector<RoundRecord>> by_run;
    std::vector<std::string> run_order;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        RoundRecord r = round_record_from_csv(line);
        if (!by_run.count(r.run_id)) run_order.push_back(r.run_id);
        by_run[r.run_id].push_back(std::move(r));
    }
    std::map<std::pair<std::string, std::string>, std::vector<RunSummary>> groups;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& id : run_order) {
        RunSummary s = summarize(by_run[id]);
        const auto key = std::make_pair(s.scenario, s.policy);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(std::move(s));
    }

    fs::create_directories(out_dir);
    std::ofstream curves(fs::path(out_dir) / "regret_curves.csv");
    curves << "scenario,policy,round,mean,sd,lower,upper\n";
    std::ofstream box(fs::path(out_dir) / "boxplot_quantiles.csv");
    box << "scenario,policy,metric,min,q1,median,q3,max\n";
    for (const auto& key : order) {
        const auto& sums = groups[key];
        const AggregateRow row = aggregate_lenient(sums);
        for (std::size_t t = 0; t < row.curve.mean.size(); ++t) {
            curves << key.first << ',' << key.second << ',' << (t + 1) << ',' << format_number(row.curve.mean[t]) << ','
                   << format_number(row.curve.sd[t]) << ',' << format_number(row.curve.lower[t]) << ','
                   << format_number(row.curve.upper[t]) << '\n';
        }
        const auto emit = [&](const char* metric, auto field) {
            std::vector<double> v;
            for (const auto& s : sums) v.push_back(field(s));
            box << key.first << ',' << key.second << ',' << metric;
            for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) box << ',' << format_number(quantile(v, q));
            box << '\n';
        };
        emit("final_regret", [](const RunSummary& s) { return s.final_regret; });
        emit("regret_per_context", [](const RunSummary& s) { return s.regret_per_context; });
        emit("hypo_rate", [](const RunSummary& s) { return s.hypo_rate; });
        emit("hyper_rate", [](const RunSummary& s) { return s.hyper_rate; });
    }

    std::ofstream traj(fs::path(out_dir) / "safeset_trajectories.csv");
    traj << "run_id,round,context_id,interval,lo,hi\n";
    std::ifstream sj(fs::path(run_dir) / "safesets.json");
    if (sj) {
        nlohmann::json doc;
        sj >> doc;
        for (const auto& run : doc.at("runs")) {
            const auto id = run.at("run_id").get<std::string>();
            for (const auto& snap : run.at("trajectory")) {
                int k = 0;
                for (const auto& iv : snap.at("intervals")) {
                    traj << id << ',' << snap.at("round").get<int>() << ',' << snap.at("context_id").get<int>() << ','
                         << k++ << ',' << format_number(iv[0].get<double>()) << ',' << format_number(iv[1].get<double>())
                         << '\n';
                }
            }
        }
    }
}

}  // namespace escada
