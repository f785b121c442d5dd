#include "escada/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "escada/errors.hpp"

namespace escada {

const std::vector<std::string>& round_record_columns() {
    static const std::vector<std::string> cols = {
        "run_id", "scenario",  "policy",         "seed",       "patient",        "round",
        "context_id", "cho",   "fasting_glucose", "dose",      "y",              "f",
        "regret", "hypo",      "hyper",          "branch",     "candidates",     "safe_measure",
        "info_gain_increment", "sqrt_beta",      "coverage",   "optimal_dose"};
    return cols;
}

std::string round_record_csv_header() {
    std::string out;
    for (const auto& c : round_record_columns()) {
        if (!out.empty()) out += ',';
        out += c;
    }
    return out;
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

std::string to_csv_row(const RoundRecord& r) {
    std::ostringstream os;
    os << r.run_id << ',' << r.scenario << ',' << r.policy << ',' << r.seed << ',' << r.patient << ',' << r.round
       << ',' << r.context_id << ',' << format_number(r.cho) << ',' << format_number(r.fasting_glucose) << ','
       << format_number(r.dose) << ',' << format_number(r.y) << ',' << format_number(r.f) << ','
       << format_number(r.regret) << ',' << (r.hypo ? 1 : 0) << ',' << (r.hyper ? 1 : 0) << ',' << r.branch << ','
       << r.candidates << ',' << format_number(r.safe_measure) << ',' << format_number(r.info_gain_increment) << ','
       << format_number(r.sqrt_beta) << ',' << r.coverage << ',' << format_number(r.optimal_dose);
    return os.str();
}

namespace {

double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw Error(ErrorKind::InvalidArgument, "malformed number '" + s + "' in records");
    }
    return v;
}

template <typename Int>
Int parse_int(const std::string& s) {
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw Error(ErrorKind::InvalidArgument, "malformed integer '" + s + "' in records");
    }
    return v;
}

}  // namespace

RoundRecord round_record_from_csv(const std::string& line) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != round_record_columns().size()) {
        throw Error(ErrorKind::InvalidArgument, "records row has " + std::to_string(f.size()) + " fields, expected " +
                                                    std::to_string(round_record_columns().size()));
    }
    RoundRecord r;
    r.run_id = f[0];
    r.scenario = f[1];
    r.policy = f[2];
    r.seed = parse_int<std::uint64_t>(f[3]);
    r.patient = parse_int<int>(f[4]);
    r.round = parse_int<int>(f[5]);
    r.context_id = parse_int<int>(f[6]);
    r.cho = parse_double(f[7]);
    r.fasting_glucose = parse_double(f[8]);
    r.dose = parse_double(f[9]);
    r.y = parse_double(f[10]);
    r.f = parse_double(f[11]);
    r.regret = parse_double(f[12]);
    r.hypo = f[13] == "1";
    r.hyper = f[14] == "1";
    r.branch = f[15];
    r.candidates = parse_int<std::size_t>(f[16]);
    r.safe_measure = parse_double(f[17]);
    r.info_gain_increment = parse_double(f[18]);
    r.sqrt_beta = parse_double(f[19]);
    r.coverage = parse_int<int>(f[20]);
    r.optimal_dose = parse_double(f[21]);
    return r;
}

std::vector<double> cumulative_regret(const std::vector<RoundRecord>& records) {
    std::vector<double> out;
    out.reserve(records.size());
    double total = 0.0;
    int last_round = std::numeric_limits<int>::min();
    for (const auto& r : records) {
        if (r.round <= last_round) throw Error(ErrorKind::InvalidArgument, "records are not ordered by round");
        last_round = r.round;
        total += r.regret;
        out.push_back(total);
    }
    return out;
}

ViolationRates violation_frequencies(const std::vector<RoundRecord>& records) {
    if (records.empty()) return {};
    std::size_t hypo = 0;
    std::size_t hyper = 0;
    for (const auto& r : records) {
        hypo += r.hypo ? 1 : 0;
        hyper += r.hyper ? 1 : 0;
    }
    const auto n = static_cast<double>(records.size());
    return {static_cast<double>(hypo) / n, static_cast<double>(hyper) / n};
}

RunSummary summarize(const std::vector<RoundRecord>& records) {
    RunSummary s;
    if (records.empty()) return s;
    s.run_id = records.front().run_id;
    s.scenario = records.front().scenario;
    s.policy = records.front().policy;
    s.seed = records.front().seed;
    s.patient = records.front().patient;
    s.rounds = static_cast<int>(records.size());
    s.cumulative_regret = cumulative_regret(records);
    s.final_regret = s.cumulative_regret.back();
    std::set<int> contexts;
    double sum_y = 0.0;
    double sum_f = 0.0;
    bool audited = false;
    bool covered = true;
    for (const auto& r : records) {
        contexts.insert(r.context_id);
        sum_y += r.y;
        sum_f += r.f;
        s.info_gain += r.info_gain_increment;
        if (r.coverage >= 0) {
            audited = true;
            covered = covered && r.coverage == 1;
        }
    }
    s.contexts.assign(contexts.begin(), contexts.end());
    const auto n = static_cast<double>(records.size());
    s.regret_per_context = s.final_regret / static_cast<double>(contexts.size());
    s.mean_abs_deviation = s.final_regret / n;
    s.mean_y = sum_y / n;
    s.mean_f = sum_f / n;
    const auto rates = violation_frequencies(records);
    s.hypo_rate = rates.hypo;
    s.hyper_rate = rates.hyper;
    if (audited) s.coverage_held = covered;
    return s;
}

void RunningStats::push(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
}

double RunningStats::sd() const {
    if (n_ < 2) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(m2_ / static_cast<double>(n_ - 1));
}

namespace {

MeanSd mean_sd_lenient(const std::vector<double>& values) {
    MeanSd out;
    out.n = values.size();
    if (values.empty()) {
        out.mean = out.sd = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) {
        out.sd = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return out;
}

AggregateRow aggregate_impl(const std::vector<RunSummary>& summaries) {
    AggregateRow row;
    if (summaries.empty()) return row;
    row.scenario = summaries.front().scenario;
    row.policy = summaries.front().policy;
    row.runs = summaries.size();
    const auto collect = [&](auto field) {
        std::vector<double> v;
        v.reserve(summaries.size());
        for (const auto& s : summaries) v.push_back(field(s));
        return mean_sd_lenient(v);
    };
    row.final_regret = collect([](const RunSummary& s) { return s.final_regret; });
    row.regret_per_context = collect([](const RunSummary& s) { return s.regret_per_context; });
    row.mean_abs_deviation = collect([](const RunSummary& s) { return s.mean_abs_deviation; });
    row.hypo_rate = collect([](const RunSummary& s) { return s.hypo_rate; });
    row.hyper_rate = collect([](const RunSummary& s) { return s.hyper_rate; });
    row.mean_y = collect([](const RunSummary& s) { return s.mean_y; });
    row.mean_f = collect([](const RunSummary& s) { return s.mean_f; });
    row.info_gain = collect([](const RunSummary& s) { return s.info_gain; });
    std::vector<double> rts;
    for (const auto& s : summaries) {
        if (s.rounds_to_safe_optimal) rts.push_back(*s.rounds_to_safe_optimal);
    }
    row.rounds_to_safe_optimal = mean_sd_lenient(rts);

    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto& s : summaries) len = std::min(len, s.cumulative_regret.size());
    row.curve.mean.resize(len);
    row.curve.sd.resize(len);
    row.curve.lower.resize(len);
    row.curve.upper.resize(len);
    std::vector<double> column(summaries.size());
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t i = 0; i < summaries.size(); ++i) column[i] = summaries[i].cumulative_regret[t];
        const MeanSd ms = mean_sd_lenient(column);
        row.curve.mean[t] = ms.mean;
        row.curve.sd[t] = ms.sd;
        const double band = std::isnan(ms.sd) ? 0.0 : 0.25 * ms.sd;
        row.curve.lower[t] = ms.mean - band;
        row.curve.upper[t] = ms.mean + band;
    }
    return row;
}

}  // namespace

MeanSd mean_sd(const std::vector<double>& values) {
    if (values.size() < 2) throw Error(ErrorKind::InvalidArgument, "mean and sd need at least two values");
    return mean_sd_lenient(values);
}

AggregateRow aggregate(const std::vector<RunSummary>& summaries) {
    if (summaries.size() < 2) throw Error(ErrorKind::InvalidArgument, "aggregation needs at least two summaries");
    return aggregate_impl(summaries);
}

AggregateRow aggregate_lenient(const std::vector<RunSummary>& summaries) { return aggregate_impl(summaries); }

std::string aggregate_csv_header() {
    return "scenario,policy,runs,regret_mean,regret_sd,regret_per_context_mean,regret_per_context_sd,"
           "abs_dev_mean,abs_dev_sd,hypo_mean,hypo_sd,hyper_mean,hyper_sd,ppbg_y_mean,ppbg_y_sd,"
           "ppbg_f_mean,ppbg_f_sd,info_gain_mean,info_gain_sd,rounds_to_safe_optimal_mean,"
           "rounds_to_safe_optimal_sd,rounds_to_safe_optimal_runs";
}

std::string to_csv_row(const AggregateRow& row) {
    std::ostringstream os;
    os << row.scenario << ',' << row.policy << ',' << row.runs;
    for (const MeanSd* m : {&row.final_regret, &row.regret_per_context, &row.mean_abs_deviation, &row.hypo_rate,
                            &row.hyper_rate, &row.mean_y, &row.mean_f, &row.info_gain, &row.rounds_to_safe_optimal}) {
        os << ',' << format_number(m->mean) << ',' << format_number(m->sd);
    }
    os << ',' << row.rounds_to_safe_optimal.n;
    return os.str();
}

}  // namespace escada
