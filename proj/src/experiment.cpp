#include "mmoment/experiment.hpp"
#include "mmoment/errors.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace mmoment {

namespace {

constexpr std::uint64_t kSaltDeviation = 0x11;
constexpr std::uint64_t kSaltTail = 0x22;
constexpr std::uint64_t kSaltLewis = 0x33;
constexpr std::uint64_t kSaltPsi2 = 0x44;
constexpr std::uint64_t kSaltNorms = 0x55;
constexpr std::uint64_t kSaltFuzz = 0x66;
constexpr std::uint64_t kSaltPilot = 0x150;
constexpr std::uint64_t kSaltSubspace = 0x5b5;

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw config_error("config: bad numeric value for '" + key + "': " + v);
    }
}

long parse_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw config_error("config: bad integer value for '" + key + "': " + v);
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw config_error("config: bad seed value for '" + key + "': " + v);
    }
}

// "name(arg=value)" -> value, or nullopt when no parenthesized argument
std::optional<double> paren_param(const std::string& s, const std::string& arg) {
    const auto open = s.find('(');
    if (open == std::string::npos) return std::nullopt;
    const auto close = s.find(')', open);
    if (close == std::string::npos) throw config_error("config: unbalanced '(' in " + s);
    const std::string inner = s.substr(open + 1, close - open - 1);
    const auto eq = inner.find('=');
    if (eq == std::string::npos) throw config_error("config: expected key=value inside " + s);
    if (trim(inner.substr(0, eq)) != arg)
        throw config_error("config: unexpected parameter in " + s + " (wanted " + arg + ")");
    return parse_double(s, trim(inner.substr(eq + 1)));
}

std::string base_name(const std::string& s) {
    const auto open = s.find('(');
    return (open == std::string::npos) ? s : s.substr(0, open);
}

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt_long(long long v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

struct RowBuilder {
    const ExperimentConfig& cfg;
    std::string model_name, body_name;

    ResultRow operator()(long m, long replica, const std::string& metric, double value,
                         double se = 0.0, double ms = 0.0) const {
        ResultRow r;
        r.scenario = scenario_name(cfg.scenario);
        r.model = model_name;
        r.body = body_name;
        r.n = cfg.n;
        r.p = cfg.p;
        r.m = m;
        r.replica = replica;
        r.seed = cfg.seed;
        r.metric_name = metric;
        if (!std::isfinite(value))
            throw numeric_error("result row '" + metric + "' is not finite");
        r.metric_value = value;
        r.std_error = se;
        r.runtime_ms = ms;
        return r;
    }
};

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const std::size_t idx = std::size_t(q * (sorted.size() - 1));
    return sorted[idx];
}

} // namespace

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::deviation: return "deviation";
        case Scenario::tail: return "tail";
        case Scenario::lewis: return "lewis";
        case Scenario::psi2: return "psi2";
        case Scenario::norms: return "norms";
        case Scenario::fuzz: return "fuzz";
    }
    return "?";
}

Scenario scenario_from_name(const std::string& name) {
    if (name == "deviation") return Scenario::deviation;
    if (name == "tail") return Scenario::tail;
    if (name == "lewis") return Scenario::lewis;
    if (name == "psi2") return Scenario::psi2;
    if (name == "norms") return Scenario::norms;
    if (name == "fuzz") return Scenario::fuzz;
    throw config_error("config: unknown scenario '" + name + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    bool saw_scenario = false;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw config_error("config: expected 'key = value': " + t);
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key == "scenario") {
            cfg.scenario = scenario_from_name(value);
            saw_scenario = true;
        } else if (key == "model") {
            cfg.model = value;
        } else if (key == "body") {
            cfg.body = value;
        } else if (key == "n") {
            cfg.n = int(parse_long(key, value));
        } else if (key == "p") {
            cfg.p = parse_double(key, value);
        } else if (key == "q") {
            cfg.q = parse_double(key, value);
        } else if (key == "m_list") {
            cfg.m_list.clear();
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ','))
                cfg.m_list.push_back(parse_long(key, trim(item)));
        } else if (key == "replicas") {
            cfg.replicas = int(parse_long(key, value));
        } else if (key == "eps") {
            cfg.eps = parse_double(key, value);
        } else if (key == "alpha") {
            cfg.alpha = parse_double(key, value);
        } else if (key == "seed") {
            cfg.seed = parse_u64(key, value);
        } else if (key == "threads") {
            cfg.threads = int(parse_long(key, value));
        } else if (key == "subspace_file") {
            cfg.subspace_file = value;
        } else if (key == "atoms_file") {
            cfg.atoms_file = value;
        } else if (key == "constants.C") {
            cfg.constant_C = parse_double(key, value);
        } else if (key == "constants.c_alpha_p") {
            cfg.constant_c_alpha_p = parse_double(key, value);
        } else {
            throw config_error("config: unknown key '" + key + "'");
        }
    }
    if (!saw_scenario) throw config_error("config: missing 'scenario'");
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

RandomVectorModel model_from_config(const ExperimentConfig& cfg) {
    std::string name = cfg.model;
    bool iso = false;
    const std::string prefix = "isotropized_";
    if (name.rfind(prefix, 0) == 0) {
        iso = true;
        name = name.substr(prefix.size());
    }
    const std::string base = base_name(name);
    RandomVectorModel m = RandomVectorModel::gaussian_iso(std::max(cfg.n, 1));
    if (base == "gaussian_iso") {
        m = RandomVectorModel::gaussian_iso(cfg.n);
    } else if (base == "rademacher_cube") {
        m = RandomVectorModel::rademacher_cube(cfg.n);
    } else if (base == "laplace_iso") {
        m = RandomVectorModel::laplace_iso(cfg.n);
    } else if (base == "uniform_lq_ball") {
        const auto q = paren_param(name, "q");
        m = RandomVectorModel::uniform_lq_ball(cfg.n, q ? *q : cfg.q);
    } else if (base == "discrete_atoms") {
        if (cfg.atoms_file.empty())
            throw config_error("config: model discrete_atoms requires atoms_file");
        m = load_atoms_file(cfg.atoms_file);
        if (cfg.n != 0 && m.dim() != cfg.n)
            throw config_error("config: atoms_file dimension disagrees with n");
    } else {
        throw config_error("config: unknown model '" + cfg.model + "'");
    }
    if (iso) m = isotropize(m, 100000, RngStream(cfg.seed, kSaltPilot));
    return m;
}

ConvexBody body_from_config(const ExperimentConfig& cfg) {
    const std::string base = cfg.body.empty() ? "euclid_ball" : base_name(cfg.body);
    if (base == "euclid_ball") return ConvexBody::euclid_ball(cfg.n);
    if (base == "lq_ball") {
        const auto q = cfg.body.empty() ? std::nullopt : paren_param(cfg.body, "q");
        return ConvexBody::lq_ball(cfg.n, q ? *q : cfg.q);
    }
    throw config_error("config: unknown body '" + cfg.body + "' (CLI supports euclid_ball, lq_ball)");
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.replicas < 1) throw config_error("config: replicas must be >= 1");
    if (cfg.threads < 1) throw config_error("config: threads must be >= 1");
    for (std::size_t i = 0; i + 1 < cfg.m_list.size(); ++i)
        if (cfg.m_list[i] >= cfg.m_list[i + 1])
            throw config_error("config: m_list must be strictly increasing");
    for (long m : cfg.m_list)
        if (m < 1) throw config_error("config: m_list entries must be >= 1");

    switch (cfg.scenario) {
        case Scenario::deviation:
        case Scenario::tail: {
            if (cfg.model.empty()) throw config_error("config: scenario requires model");
            if (cfg.n < 1) throw config_error("config: scenario requires n >= 1");
            if (cfg.m_list.empty()) throw config_error("config: scenario requires m_list");
            if (cfg.p < 2.0) throw config_error("config: scenario requires p >= 2");
            const RandomVectorModel m = model_from_config(cfg);
            if (!m.exact_moment_available(cfg.p))
                throw config_error("config: model " + m.descriptor() +
                                   " has no exact moment oracle at p = " + fmt_double(cfg.p));
            body_from_config(cfg);
            if (cfg.scenario == Scenario::tail) {
                if (cfg.replicas < 200) throw config_error("config: tail requires replicas >= 200");
                if (cfg.alpha <= 0.0) throw config_error("config: tail requires alpha > 0");
            }
            break;
        }
        case Scenario::lewis: {
            const bool has_file = !cfg.subspace_file.empty();
            const bool has_gen = base_name(cfg.model) == "subspace_gaussian";
            if (!has_file && !has_gen)
                throw config_error(
                    "config: lewis requires subspace_file or model = subspace_gaussian(N=..)");
            if (has_gen) {
                const auto N = paren_param(cfg.model, "N");
                if (!N || long(*N) < 1)
                    throw config_error("config: subspace_gaussian needs N >= 1");
                if (cfg.n < 1) throw config_error("config: lewis generator requires n >= 1");
                if (long(*N) < cfg.n)
                    throw config_error("config: subspace_gaussian needs N >= n");
                if (cfg.p < 2.0) throw config_error("config: lewis requires p >= 2");
            }
            if (cfg.m_list.empty()) throw config_error("config: lewis requires m_list");
            break;
        }
        case Scenario::psi2: {
            const std::string base = base_name(cfg.model);
            if (base != "gaussian_iso" && base != "rademacher_cube")
                throw config_error("config: psi2 requires model gaussian_iso or rademacher_cube");
            if (cfg.n < 1) throw config_error("config: psi2 requires n >= 1");
            if (cfg.m_list.empty()) throw config_error("config: psi2 requires m_list");
            if (cfg.p < 2.0) throw config_error("config: psi2 requires p >= 2");
            break;
        }
        case Scenario::norms: {
            if (cfg.model.empty()) throw config_error("config: norms requires model");
            if (cfg.n < 1) throw config_error("config: norms requires n >= 1");
            if (cfg.m_list.empty()) throw config_error("config: norms requires m_list");
            if (cfg.alpha <= 0.0) throw config_error("config: norms requires alpha > 0");
            model_from_config(cfg);
            break;
        }
        case Scenario::fuzz: {
            if (cfg.n < 1) throw config_error("config: fuzz requires n >= 1");
            if (cfg.m_list.empty()) throw config_error("config: fuzz requires m_list");
            break;
        }
    }
}

std::string to_csv(const std::vector<ResultRow>& rows) {
    std::string out =
        "scenario,model,body,n,p,m,replica,seed,metric_name,metric_value,std_error,runtime_ms\n";
    for (const ResultRow& r : rows) {
        out += csv_field(r.scenario);
        out += ',';
        out += csv_field(r.model);
        out += ',';
        out += csv_field(r.body);
        out += ',';
        out += fmt_long(r.n);
        out += ',';
        out += fmt_double(r.p);
        out += ',';
        out += fmt_long(r.m);
        out += ',';
        out += fmt_long(r.replica);
        out += ',';
        out += fmt_long((long long)r.seed);
        out += ',';
        out += csv_field(r.metric_name);
        out += ',';
        out += fmt_double(r.metric_value);
        out += ',';
        out += fmt_double(r.std_error);
        out += ',';
        out += fmt_double(r.runtime_ms);
        out += '\n';
    }
    return out;
}

std::string to_csv_stable(const std::vector<ResultRow>& rows) {
    std::vector<ResultRow> masked = rows;
    for (ResultRow& r : masked) r.runtime_ms = 0.0;
    return to_csv(masked);
}

std::vector<std::vector<ResultRow>> run_tasks(
    int task_count, int threads, const std::function<std::vector<ResultRow>(int)>& fn) {
    std::vector<std::vector<ResultRow>> slots(task_count);
    if (task_count == 0) return slots;
    threads = std::min(std::max(threads, 1), task_count);
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error = nullptr;
    std::mutex err_mu;
    auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= task_count) return;
            try {
                slots[k] = fn(k);
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return slots;
}

std::vector<ResultRow> run_deviation(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const RandomVectorModel model = model_from_config(cfg);
    const ConvexBody body = body_from_config(cfg);
    RowBuilder row{cfg, model.descriptor(), body.descriptor()};
    const RngStream base(cfg.seed, kSaltDeviation);

    const double b_value =
        sup_exact_moment(body, model, cfg.p, RngStream(cfg.seed, kSaltDeviation + 1));

    const int M = int(cfg.m_list.size());
    const int R = cfg.replicas;
    auto task = [&](int k) {
        const int mi = k / R, r = k % R;
        const long m = cfg.m_list[mi];
        const double t0 = now_ms();
        RngStream rng = base.substream(std::uint64_t(k));
        const SampleMatrix s = sample(model, int(m), rng);
        DeviationOptions opts;
        opts.precomputed_B = b_value;
        opts.seed = rng.substream(1).stream_id();
        opts.constant_C = cfg.constant_C;
        const DeviationReport rep = deviation_sup(s, model, body, cfg.p, opts);
        const double ms = now_ms() - t0;
        std::vector<ResultRow> rows;
        rows.push_back(row(m, r, "V_p", rep.v_p, 0.0, ms));
        rows.push_back(row(m, r, "A", rep.A.value_or(0.0), 0.0, ms));
        rows.push_back(row(m, r, "B", rep.B, 0.0, ms));
        rows.push_back(row(m, r, "kappa_pm", rep.kappa, 0.0, ms));
        return rows;
    };
    auto slots = run_tasks(M * R, cfg.threads, task);

    std::vector<ResultRow> rows;
    for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
    // per-m aggregates of V_p
    for (int mi = 0; mi < M; ++mi) {
        std::vector<double> vals;
        for (int r = 0; r < R; ++r)
            for (const ResultRow& rr : slots[mi * R + r])
                if (rr.metric_name == "V_p") vals.push_back(rr.metric_value);
        std::sort(vals.begin(), vals.end());
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        rows.push_back(row(cfg.m_list[mi], -1, "V_p_mean", mean));
        rows.push_back(row(cfg.m_list[mi], -1, "V_p_median", quantile_sorted(vals, 0.5)));
        rows.push_back(row(cfg.m_list[mi], -1, "V_p_q90", quantile_sorted(vals, 0.9)));
    }
    return rows;
}

std::vector<ResultRow> run_tail(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const RandomVectorModel model = model_from_config(cfg);
    const ConvexBody body = body_from_config(cfg);
    RowBuilder row{cfg, model.descriptor(), body.descriptor()};
    const RngStream base(cfg.seed, kSaltTail);
    const long m = cfg.m_list.front();

    const double b_value = sup_exact_moment(body, model, cfg.p, RngStream(cfg.seed, kSaltTail + 1));

    auto task = [&](int r) {
        const double t0 = now_ms();
        RngStream rng = base.substream(std::uint64_t(r));
        const SampleMatrix s = sample(model, int(m), rng);
        DeviationOptions opts;
        opts.precomputed_B = b_value;
        opts.seed = rng.substream(1).stream_id();
        const DeviationReport rep = deviation_sup(s, model, body, cfg.p, opts);
        std::vector<ResultRow> rows;
        rows.push_back(row(m, r, "V_p", rep.v_p, 0.0, now_ms() - t0));
        return rows;
    };
    auto slots = run_tasks(cfg.replicas, cfg.threads, task);

    std::vector<ResultRow> rows;
    std::vector<double> vals;
    for (auto& s : slots) {
        rows.insert(rows.end(), s.begin(), s.end());
        vals.push_back(s.front().metric_value);
    }
    std::sort(vals.begin(), vals.end());
    const int grid = 25;
    const double t_max = vals.back();
    std::vector<double> ts, survs;
    for (int k = 0; k <= grid; ++k) {
        const double t = t_max * k / grid;
        const long count = long(vals.end() - std::lower_bound(vals.begin(), vals.end(), t));
        ts.push_back(t);
        survs.push_back(double(count) / double(vals.size()));
        rows.push_back(row(m, -1, "tail_t[" + fmt_long(k) + "]", t));
        rows.push_back(row(m, -1, "tail_survival[" + fmt_long(k) + "]", survs.back()));
    }
    // least squares on log(-log S) vs log t over interior points
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        if (survs[k] <= 0.0 || survs[k] >= 1.0 || ts[k] <= 0.0) continue;
        const double x = std::log(ts[k]);
        const double y = std::log(-std::log(survs[k]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++cnt;
    }
    if (cnt >= 3) {
        const double denom = cnt * sxx - sx * sx;
        const double shape = (cnt * sxy - sx * sy) / denom;
        const double intercept = (sy - shape * sx) / cnt;
        const double q_hat = std::exp(-intercept / shape);
        // fit quality: residual variance of the regression
        double ss_res = 0.0, ss_tot = 0.0;
        const double ybar = sy / cnt;
        for (std::size_t k = 0; k < ts.size(); ++k) {
            if (survs[k] <= 0.0 || survs[k] >= 1.0 || ts[k] <= 0.0) continue;
            const double x = std::log(ts[k]);
            const double y = std::log(-std::log(survs[k]));
            const double f = shape * x + intercept;
            ss_res += (y - f) * (y - f);
            ss_tot += (y - ybar) * (y - ybar);
        }
        rows.push_back(row(m, -1, "fit_shape", shape));
        rows.push_back(row(m, -1, "fit_Q", q_hat));
        rows.push_back(row(m, -1, "fit_r2", (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0));
        if (cfg.alpha > 0.0) rows.push_back(row(m, -1, "pred_shape", cfg.alpha / cfg.p));
    }
    return rows;
}

std::vector<ResultRow> run_lewis(const ExperimentConfig& cfg) {
    validate_config(cfg);
    Subspace s = cfg.subspace_file.empty()
                     ? random_gaussian_subspace(int(*paren_param(cfg.model, "N")), cfg.n, cfg.p,
                                                RngStream(cfg.seed, kSaltSubspace))
                     : load_subspace_file(cfg.subspace_file);
    ExperimentConfig eff = cfg;
    eff.n = s.dim();
    eff.p = s.p;
    RowBuilder row{eff, cfg.subspace_file.empty() ? cfg.model : "subspace_file", "h_ball"};
    const RngStream base(cfg.seed, kSaltLewis);

    std::vector<ResultRow> rows;
    const double t0 = now_ms();
    LewisDecomposition l;
    try {
        l = lewis_weights(s);
    } catch (const numeric_error&) {
        rows.push_back(row(0, -1, "solver_error", 1.0));
        return rows;
    }
    const double solver_ms = now_ms() - t0;
    const auto res = l.residuals();
    const double rec = reconstruction_residual(s, l, 200, base.substream(0xabc));
    rows.push_back(row(0, -1, "solver_iterations", l.iterations, 0.0, solver_ms));
    rows.push_back(row(0, -1, "fixed_point_residual", l.fixed_point_residual));
    rows.push_back(row(0, -1, "residual_unit_norm", res.unit_norm));
    rows.push_back(row(0, -1, "residual_identity", res.identity));
    rows.push_back(row(0, -1, "residual_trace", res.trace));
    rows.push_back(row(0, -1, "residual_reconstruction", rec));
    for (int i = 0; i < l.ambient(); ++i)
        rows.push_back(row(0, i, "weight", l.weights[i]));

    const int M = int(cfg.m_list.size());
    const int R = cfg.replicas;
    auto task = [&](int k) {
        const int mi = k / R, r = k % R;
        const long m = cfg.m_list[mi];
        const double start = now_ms();
        const EmbeddingReport rep = embed_sample(l, m, base.substream(std::uint64_t(k) + 1));
        const double ms = now_ms() - start;
        std::vector<ResultRow> out;
        out.push_back(row(m, r, "eps_E", rep.eps_E, 0.0, ms));
        out.push_back(row(m, r, "eps_H", rep.eps_H, 0.0, ms));
        return out;
    };
    auto slots = run_tasks(M * R, cfg.threads, task);
    for (auto& sl : slots) rows.insert(rows.end(), sl.begin(), sl.end());
    for (int mi = 0; mi < M; ++mi) {
        std::vector<double> ee, eh;
        for (int r = 0; r < R; ++r)
            for (const ResultRow& rr : slots[mi * R + r]) {
                if (rr.metric_name == "eps_E") ee.push_back(rr.metric_value);
                if (rr.metric_name == "eps_H") eh.push_back(rr.metric_value);
            }
        std::sort(ee.begin(), ee.end());
        std::sort(eh.begin(), eh.end());
        rows.push_back(row(cfg.m_list[mi], -1, "eps_E_median", quantile_sorted(ee, 0.5)));
        rows.push_back(row(cfg.m_list[mi], -1, "eps_H_median", quantile_sorted(eh, 0.5)));
    }
    if (cfg.eps > 0.0) {
        const auto sweep =
            embedding_calibration_sweep(s, cfg.eps, cfg.replicas, base.substream(0x731));
        for (const auto& sr : sweep) {
            const std::string tag = "[K=" + fmt_double(sr.calibration) + "]";
            rows.push_back(row(sr.m, -1, "calibration_success" + tag, sr.success_fraction));
            rows.push_back(row(sr.m, -1, "calibration_eps_E_median" + tag, sr.median_eps_e));
            rows.push_back(row(sr.m, -1, "calibration_eps_H_median" + tag, sr.median_eps_h));
        }
    }
    return rows;
}

std::vector<ResultRow> run_psi2(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const RandomVectorModel model = model_from_config(cfg);
    const ConvexBody sphere = ConvexBody::euclid_ball(cfg.n);
    RowBuilder row{cfg, model.descriptor(), "euclid_ball"};
    const RngStream base(cfg.seed, kSaltPsi2);
    const double p = cfg.p;

    const int M = int(cfg.m_list.size());
    const int R = cfg.replicas;
    auto task = [&](int k) {
        const int mi = k / R, r = k % R;
        const long m = cfg.m_list[mi];
        const double t0 = now_ms();
        RngStream rng = base.substream(std::uint64_t(k));
        const SampleMatrix s = sample(model, int(m), rng);
        double sup_v, inf_v;
        if (p == 2.0) {
            Mat c(cfg.n, cfg.n);
            for (int j = 0; j < s.count(); ++j)
                add_outer(c, 1.0 / s.count(), s.rows.row_ptr(j), cfg.n);
            const ExtremeEig e = sym_eig_extreme(c);
            sup_v = std::sqrt(std::max(0.0, e.lambda_max));
            inf_v = std::sqrt(std::max(0.0, e.lambda_min));
        } else {
            auto norm_emp = [&](const Vec& y) {
                return std::pow(empirical_pth_moment(s, y, p), 1.0 / p);
            };
            Objective up;
            up.value = norm_emp;
            up.grad = [&](const Vec& y) {
                const double v = norm_emp(y);
                if (v == 0.0) return Vec(cfg.n, 0.0);
                Vec g = empirical_pth_moment_grad(s, y, p);
                const double scale = std::pow(v, 1.0 - p) / p;
                for (double& x : g) x *= scale;
                return g;
            };
            Objective down;
            down.value = [&](const Vec& y) { return -norm_emp(y); };
            down.grad = [&](const Vec& y) {
                Vec g = up.grad(y);
                for (double& x : g) x = -x;
                return g;
            };
            MaximizeOptions mo;
            mo.sphere_only = true;
            mo.restarts = 30 * cfg.n;
            std::vector<Vec> anchors;
            for (int j = 0; j < s.count() && j < 64; ++j) {
                Vec rowj = s.rows.row(j);
                const double nr = norm2(rowj);
                if (nr > 0.0) anchors.push_back(vscale(rowj, 1.0 / nr));
            }
            sup_v = maximize_over_body(sphere, up, mo, rng.substream(2), anchors).value;
            inf_v = -maximize_over_body(sphere, down, mo, rng.substream(3), anchors).value;
        }
        std::vector<ResultRow> out;
        const double ms = now_ms() - t0;
        out.push_back(row(m, r, "sup_norm_emp", sup_v, 0.0, ms));
        out.push_back(row(m, r, "inf_norm_emp", inf_v, 0.0, ms));
        return out;
    };
    auto slots = run_tasks(M * R, cfg.threads, task);
    std::vector<ResultRow> rows;
    for (auto& sl : slots) rows.insert(rows.end(), sl.begin(), sl.end());

    // Gaussian comparison references, Monte Carlo
    const int mc = std::max(2000, cfg.replicas);
    for (int mi = 0; mi < M; ++mi) {
        const long m = cfg.m_list[mi];
        RngStream rz = base.substream(0x900 + std::uint64_t(mi));
        KahanSum zsum, zsq, ysum, ysq;
        for (int t = 0; t < mc; ++t) {
            KahanSum lp;
            for (long j = 0; j < m; ++j)
                lp.add(std::pow(std::fabs(rz.next_gaussian()), p));
            const double zp = std::pow(lp.value(), 1.0 / p);
            zsum.add(zp);
            zsq.add(zp * zp);
            double ys = 0.0;
            for (int i = 0; i < cfg.n; ++i) {
                const double g = rz.next_gaussian();
                ys += g * g;
            }
            const double yn = std::sqrt(ys);
            ysum.add(yn);
            ysq.add(yn * yn);
        }
        const double mfac = std::pow(double(m), 1.0 / p);
        const double ez = zsum.value() / mc, ey = ysum.value() / mc;
        const double sez =
            std::sqrt(std::max(0.0, zsq.value() / mc - ez * ez) / mc) / mfac;
        const double sey =
            std::sqrt(std::max(0.0, ysq.value() / mc - ey * ey) / mc) / mfac;
        rows.push_back(row(m, -1, "ref_gaussian_lp", ez / mfac, sez));
        rows.push_back(row(m, -1, "ref_gaussian_l2", ey / mfac, sey));

        std::vector<double> sups;
        for (int r = 0; r < R; ++r)
            for (const ResultRow& rr : slots[mi * R + r])
                if (rr.metric_name == "sup_norm_emp") sups.push_back(rr.metric_value);
        double mean = 0.0, var = 0.0;
        for (double v : sups) mean += v;
        mean /= sups.size();
        for (double v : sups) var += (v - mean) * (v - mean);
        var = (sups.size() > 1) ? var / (sups.size() - 1) : 0.0;
        rows.push_back(row(m, -1, "sup_norm_mean", mean, std::sqrt(var / sups.size())));
    }
    return rows;
}

std::vector<ResultRow> run_norms(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const RandomVectorModel model = model_from_config(cfg);
    RowBuilder row{cfg, model.descriptor(), ""};
    const RngStream base(cfg.seed, kSaltNorms);
    std::vector<ResultRow> rows;

    // kappa and the simpler-envelope comparison per m
    const int M = int(cfg.m_list.size());
    auto task = [&](int mi) {
        const long m = cfg.m_list[mi];
        const double t0 = now_ms();
        const MomentEstimate kap = kappa_pm(model, cfg.p, int(m), cfg.replicas,
                                            base.substream(0x100 + std::uint64_t(mi)));
        const double s_order = std::max(cfg.p, std::log(double(m)));
        const MomentEstimate ms_est = euclid_norm_moment(model, s_order, 20000,
                                                         base.substream(0x200 + std::uint64_t(mi)));
        const double e = std::exp(1.0);
        std::vector<ResultRow> out;
        const double ms = now_ms() - t0;
        out.push_back(row(m, -1, "kappa_pm", kap.value, kap.std_error, ms));
        out.push_back(row(m, -1, "eMs", e * ms_est.value, e * ms_est.std_error, ms));
        out.push_back(row(m, -1, "kappa_over_sqrt_n", kap.value / std::sqrt(double(cfg.n)),
                          kap.std_error / std::sqrt(double(cfg.n)), ms));
        return out;
    };
    auto slots = run_tasks(M, cfg.threads, task);
    for (auto& sl : slots) rows.insert(rows.end(), sl.begin(), sl.end());

    // psi_alpha of |X|_2 and of a few linear functionals
    {
        const int m_psi = std::max(1000, cfg.replicas);
        RngStream rr = base.substream(0x300);
        std::vector<double> norms(m_psi);
        for (int t = 0; t < m_psi; ++t) norms[t] = norm2(model.draw(rr));
        const PsiNormEstimate est = psi_alpha_norm(norms, cfg.alpha);
        rows.push_back(row(0, -1, "psi_alpha_x2", est.value, est.std_error));
        for (int k = 0; k < 3; ++k) {
            RngStream ry = base.substream(0x400 + std::uint64_t(k));
            Vec y(cfg.n);
            for (double& v : y) v = ry.next_gaussian();
            y = project_sphere(y);
            std::vector<double> projs(m_psi);
            RngStream rs = base.substream(0x500 + std::uint64_t(k));
            for (int t = 0; t < m_psi; ++t) projs[t] = dot(model.draw(rs), y);
            const PsiNormEstimate pe = psi_alpha_norm(projs, cfg.alpha);
            rows.push_back(row(0, k, "psi_alpha_proj", pe.value, pe.std_error));
        }
    }

    // growth of the psi norm of the running maximum
    {
        const int growth_reps = std::max(1000, cfg.replicas);
        const auto growth = max_psi_growth(model, cfg.alpha, cfg.m_list, growth_reps,
                                           base.substream(0x600));
        for (const auto& g : growth) {
            rows.push_back(row(g.m, -1, "psi_max", g.psi_of_max));
            rows.push_back(row(g.m, -1, "psi_max_ratio", g.ratio_to_log_power));
        }
    }
    return rows;
}

std::vector<ResultRow> run_fuzz(const ExperimentConfig& cfg) {
    validate_config(cfg);
    RowBuilder row{cfg, cfg.model.empty() ? "gaussian_iso" : cfg.model,
                   cfg.body.empty() ? "euclid_ball" : cfg.body};
    const RngStream base(cfg.seed, kSaltFuzz);
    std::vector<ResultRow> rows;

    std::vector<double> p_grid = {2.0, 2.5, 3.0, 4.0, 6.0};
    if (std::find(p_grid.begin(), p_grid.end(), cfg.p) == p_grid.end() && cfg.p >= 2.0)
        p_grid.push_back(cfg.p);

    const long scalar_trials = cfg.replicas;
    const long vector_trials = std::max(1L, long(cfg.replicas) / 10);
    const long m = cfg.m_list.front();

    ExperimentConfig model_cfg = cfg;
    if (model_cfg.model.empty()) model_cfg.model = "gaussian_iso";
    const RandomVectorModel model = model_from_config(model_cfg);
    const ConvexBody body = body_from_config(cfg);

    auto emit = [&](const InequalityLine& line, long m_used) {
        rows.push_back(row(m_used, -1, "trials[" + line.id + "]", double(line.trials)));
        rows.push_back(row(m_used, -1, "violations[" + line.id + "]", double(line.violations)));
        rows.push_back(row(m_used, -1, "worst_slack[" + line.id + "]", line.worst_slack));
        if (line.violations > 0)
            for (std::size_t k = 0; k < line.worst_inputs.size(); ++k)
                rows.push_back(row(m_used, long(k), "violation_input[" + line.id + "]",
                                   line.worst_inputs[k]));
    };

    for (std::size_t pi = 0; pi < p_grid.size(); ++pi) {
        const double p = p_grid[pi];
        const auto scalar_rep =
            check_scalar_inequalities(p, scalar_trials, base.substream(0x10 + pi));
        for (const auto& line : scalar_rep.lines) emit(line, 0);

        const SampleMatrix s =
            sample(model, int(m), base.substream(0x20 + pi));
        const QuasiMetricContext ctx(s, p);
        const auto vec_rep =
            check_quasimetric_properties(ctx, body, vector_trials, base.substream(0x30 + pi));
        for (const auto& line : vec_rep.lines) emit(line, m);

        const auto clark = verify_clarkson(body, vector_trials, base.substream(0x40 + pi));
        emit(clark, 0);
    }
    return rows;
}

bool has_numeric_error_row(const std::vector<ResultRow>& rows) {
    for (const ResultRow& r : rows)
        if (r.metric_name == "solver_error") return true;
    return false;
}

bool has_property_violation(const std::vector<ResultRow>& rows) {
    for (const ResultRow& r : rows)
        if (r.metric_name.rfind("violations[", 0) == 0 && r.metric_value > 0.0) return true;
    return false;
}

std::vector<ResultRow> run_scenario(const ExperimentConfig& cfg) {
    switch (cfg.scenario) {
        case Scenario::deviation: return run_deviation(cfg);
        case Scenario::tail: return run_tail(cfg);
        case Scenario::lewis: return run_lewis(cfg);
        case Scenario::psi2: return run_psi2(cfg);
        case Scenario::norms: return run_norms(cfg);
        case Scenario::fuzz: return run_fuzz(cfg);
    }
    throw config_error("run_scenario: unknown scenario");
}

} // namespace mmoment
