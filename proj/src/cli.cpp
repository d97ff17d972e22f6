#include "f3m/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "f3m/dataset_io.hpp"
#include "f3m/datasets.hpp"
#include "f3m/engine.hpp"
#include "f3m/error.hpp"
#include "f3m/krr.hpp"
#include "f3m/oracle.hpp"

namespace f3m {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kMatvecSchema = "f3m.matvec/1";
constexpr const char* kKrrSchema = "f3m.krr/1";
constexpr const char* kAccountSchema = "f3m.account/1";
constexpr const char* kGenSchema = "f3m.gen/1";
constexpr const char* kBenchSchema = "f3m.bench/1";

const std::set<std::string> kFlagKeys = {"exact", "deterministic", "export", "dense-baseline", "skip-error"};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// Expands `--config FILE` into flags placed before the explicit ones, so flags given
// on the command line win under the take-last policy.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> rest;
    std::vector<std::string> from_file;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) fail(ErrorKind::InvalidInput, "--config needs a file path");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
            continue;
        }
        std::ifstream is(path);
        if (!is) fail(ErrorKind::Io, "cannot open config file '" + path + "'");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            line = trim(line);
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                fail(ErrorKind::InvalidInput, path + ":" + std::to_string(line_no) + ": expected key=value");
            }
            std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            while (!key.empty() && key[0] == '-') key.erase(0, 1);
            if (kFlagKeys.count(key) != 0) {
                if (value == "true" || value == "1") from_file.push_back("--" + key);
                continue;
            }
            from_file.push_back("--" + key + "=" + value);
        }
    }
    if (rest.size() < 2) return rest;
    std::vector<std::string> out{rest[0], rest[1]};
    out.insert(out.end(), from_file.begin(), from_file.end());
    out.insert(out.end(), rest.begin() + 2, rest.end());
    return out;
}

struct EngineFlags {
    std::size_t r = 0;
    double eta = 0.5;
    std::size_t rho = 0;
    std::size_t zeta = 0;
    std::string grid = "full";
    int threads = 0;
    std::string precision = "f64";
    bool exact = false;
    bool deterministic = false;
    CLI::Option* r_opt = nullptr;
    CLI::Option* rho_opt = nullptr;
    CLI::Option* zeta_opt = nullptr;
};

struct DataFlags {
    std::string x;
    std::string y;
    std::string b;
    std::string kind = "uniform";
    std::size_t n = 10000;
    std::size_t d = 3;
    double hurst = 0.75;
    std::uint64_t seed = 0;
    std::string gamma;
    double gamma_ev = 1.0;
    CLI::Option* gamma_ev_opt = nullptr;
};

void add_engine_flags(CLI::App* app, EngineFlags& f) {
    f.r_opt = app->add_option("--r", f.r, "Interpolation nodes per box grid (default min(4^D, 2048))");
    app->add_option("--eta", f.eta, "Effective-variance limit for smooth fields")->capture_default_str();
    f.rho_opt = app->add_option("--rho", f.rho, "Small-field occupancy threshold (default 2x grid nodes)");
    f.zeta_opt = app->add_option("--zeta", f.zeta, "Stop dividing at this box occupancy (default grid nodes)");
    app->add_option("--grid", f.grid, "Node grid layout")->check(CLI::IsMember({"full", "sparse"}))->capture_default_str();
    app->add_option("--threads", f.threads, "Worker threads (0 = all)")->envname("F3M_THREADS");
    app->add_option("--precision", f.precision, "Near-field arithmetic")
        ->check(CLI::IsMember({"f64", "f32"}))
        ->capture_default_str();
    app->add_flag("--exact", f.exact, "Single exact block, no approximation");
    app->add_flag("--deterministic", f.deterministic, "Omit timings and timestamps from reports");
}

void add_data_flags(CLI::App* app, DataFlags& f, bool with_y) {
    app->add_option("--x", f.x, "F3M1 point file (otherwise generated from --kind/--n/--d/--seed)");
    if (with_y) app->add_option("--y", f.y, "F3M1 source point file (default: X)");
    app->add_option("--kind", f.kind, "Generated dataset kind")->capture_default_str();
    app->add_option("--n", f.n, "Generated point count")->capture_default_str();
    app->add_option("--d", f.d, "Generated dimension")->capture_default_str();
    app->add_option("--hurst", f.hurst, "Hurst index for fbm data")->capture_default_str();
    app->add_option("--seed", f.seed, "Base seed")->capture_default_str();
    auto* gamma = app->add_option("--gamma", f.gamma, "Lengthscale value, or 'median' for the median heuristic");
    f.gamma_ev_opt = app->add_option("--gamma-ev", f.gamma_ev, "Choose the lengthscale giving this effective variance");
    gamma->excludes(f.gamma_ev_opt);
}

F3MConfig engine_config(const EngineFlags& f) {
    F3MConfig cfg;
    if (f.r_opt->count() > 0) cfg.node_budget = f.r;
    cfg.eta = f.eta;
    if (f.rho_opt->count() > 0) cfg.rho = f.rho;
    if (f.zeta_opt->count() > 0) cfg.zeta = f.zeta;
    cfg.layout = f.grid == "sparse" ? GridLayout::Sparse : GridLayout::FullTensor;
    cfg.threads = f.threads;
    cfg.precision = f.precision == "f32" ? Precision::F32 : Precision::F64;
    cfg.exact = f.exact;
    cfg.deterministic = f.deterministic;
    cfg.validate();
    return cfg;
}

struct Problem {
    Points x;
    std::optional<Points> y;
    std::string source;

    [[nodiscard]] const Points& sources() const { return y ? *y : x; }
};

DatasetSpec dataset_spec(const DataFlags& f) {
    DatasetSpec spec;
    spec.kind = parse_dataset_kind(f.kind);
    spec.n = f.n;
    spec.dim = f.d;
    spec.seed = f.seed;
    spec.hurst = f.hurst;
    spec.validate();
    return spec;
}

Problem load_problem(const DataFlags& f) {
    Problem p;
    if (!f.x.empty()) {
        p.x = read_f3m(f.x);
        p.source = f.x;
        if (!f.y.empty()) {
            p.y = read_f3m(f.y);
            if (p.y->dim() != p.x.dim()) {
                fail(ErrorKind::InvalidInput, "X has dimension " + std::to_string(p.x.dim()) + " but Y has " +
                                                  std::to_string(p.y->dim()));
            }
        }
        return p;
    }
    const DatasetSpec spec = dataset_spec(f);
    p.x = generate(spec);
    if (spec.kind == DatasetKind::UniformVsNormal) p.y = generate_sources(spec);
    p.source = std::string("generated:") + to_string(spec.kind);
    if (!f.y.empty()) p.y = read_f3m(f.y);
    return p;
}

struct GammaChoice {
    double value = 1.0;
    std::string method;
};

GammaChoice resolve_gamma(const DataFlags& f, const Points& x) {
    GammaChoice g;
    if (f.gamma == "median") {
        g.value = median_heuristic(x, 1000, f.seed);
        g.method = "median";
    } else if (!f.gamma.empty()) {
        try {
            std::size_t used = 0;
            g.value = std::stod(f.gamma, &used);
            if (used != f.gamma.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            fail(ErrorKind::InvalidInput, "--gamma expects a number or 'median', got '" + f.gamma + "'");
        }
        g.method = "fixed";
    } else {
        g.value = solve_gamma_for_ev(x, f.gamma_ev);
        g.method = "ev:" + Json(f.gamma_ev).dump();
    }
    KernelSpec{KernelKind::Gaussian, g.value}.validate();
    return g;
}

std::vector<double> load_weights(const DataFlags& f, std::size_t n) {
    if (f.b.empty()) return normal_vector(n, f.seed, Stream::Weights);
    std::vector<double> b = read_vector(f.b);
    if (b.size() != n) {
        fail(ErrorKind::InvalidInput, "weight file holds " + std::to_string(b.size()) + " values, expected " +
                                          std::to_string(n));
    }
    return b;
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json manifest(const std::string& command, const std::vector<std::string>& args, std::uint64_t seed,
              bool deterministic) {
    Json m;
    m["command"] = command;
    m["argv"] = std::vector<std::string>(args.begin() + 1, args.end());
    m["seed"] = seed;
    m["version"] = kVersion;
    m["host_threads"] = omp_get_num_procs();
    m["deterministic"] = deterministic;
    if (!deterministic) m["timestamp"] = timestamp_utc();
    return m;
}

Json config_json(const F3MConfig& cfg, const ResolvedConfig& resolved, const Problem& p, const GammaChoice& g) {
    Json c;
    c["n_x"] = p.x.size();
    c["n_y"] = p.sources().size();
    c["dim"] = p.x.dim();
    c["data"] = p.source;
    c["kernel"] = "gaussian";
    c["gamma"] = g.value;
    c["gamma_method"] = g.method;
    c["r_requested"] = cfg.node_budget ? Json(*cfg.node_budget) : Json(nullptr);
    c["grid_nodes"] = resolved.grid_nodes;
    c["grid"] = cfg.layout == GridLayout::Sparse ? "sparse" : "full";
    c["eta"] = cfg.eta;
    c["rho"] = resolved.rho;
    c["zeta"] = resolved.zeta;
    c["precision"] = cfg.precision == Precision::F32 ? "f32" : "f64";
    c["exact"] = cfg.exact;
    c["threads"] = resolved.threads;
    return c;
}

Json depth_json(const RunStats& stats) {
    Json rows = Json::array();
    for (const DepthStats& d : stats.depths) {
        Json row;
        row["depth"] = d.depth;
        row["edge"] = d.edge;
        row["boxes_x"] = d.boxes_x;
        row["boxes_y"] = d.boxes_y;
        row["empty_x"] = d.empty_x;
        row["empty_y"] = d.empty_y;
        row["expanded"] = d.expanded;
        row["removed_empty"] = d.removed_empty;
        row["m_far"] = d.m_far;
        row["m_smooth"] = d.m_smooth;
        row["m_small"] = d.m_small;
        row["m_near"] = d.m_near;
        row["far_skipped"] = d.far_skipped;
        row["far_nodes"] = d.far_nodes;
        rows.push_back(row);
    }
    return rows;
}

void emit(const Json& report, const std::string& path, std::ostream& out) {
    const std::string text = report.dump(2) + "\n";
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
    os << text;
    if (!os) fail(ErrorKind::Io, "write to '" + path + "' failed");
}

// ---- gen -------------------------------------------------------------------

struct GenFlags {
    DataFlags data;
    std::string out;
    std::string y_out;
    std::string precision = "f64";
    std::size_t clusters = 10;
    double decay = 0.3;
};

int cmd_gen(const GenFlags& f, std::ostream& out) {
    if (f.out.empty()) fail(ErrorKind::InvalidInput, "gen needs --out");
    DatasetSpec spec = dataset_spec(f.data);
    spec.clusters_per_level = f.clusters;
    spec.cluster_decay = f.decay;
    spec.validate();
    const Points x = generate(spec);
    const Precision precision = f.precision == "f32" ? Precision::F32 : Precision::F64;
    write_f3m(f.out, x, precision);
    if (!f.y_out.empty()) write_f3m(f.y_out, generate_sources(spec), precision);

    Json summary;
    summary["schema"] = kGenSchema;
    summary["path"] = f.out;
    summary["kind"] = to_string(spec.kind);
    summary["n"] = x.size();
    summary["dim"] = x.dim();
    summary["seed"] = spec.seed;
    const std::vector<double> var = population_variance(x);
    Json dims = Json::array();
    for (std::size_t d = 0; d < x.dim(); ++d) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t i = 0; i < x.size(); ++i) {
            lo = std::min(lo, x(i, d));
            hi = std::max(hi, x(i, d));
        }
        dims.push_back({{"min", lo}, {"max", hi}, {"var", var[d]}});
    }
    summary["per_dim"] = dims;
    if (x.size() >= 2) {
        const GammaChoice g = resolve_gamma(f.data, x);
        summary["gamma"] = g.value;
        summary["ev"] = compute_effective_variance(x, g.value);
    }
    out << summary.dump(2) << "\n";
    return kExitOk;
}

// ---- ingest ----------------------------------------------------------------

struct IngestFlags {
    std::string csv;
    std::string x;
    std::string out;
    std::string columns;
    std::string delimiter = ",";
    std::size_t max_malformed = 10;
    bool export_mode = false;
};

int cmd_ingest(const IngestFlags& f, std::ostream& out) {
    if (f.out.empty()) fail(ErrorKind::InvalidInput, "ingest needs --out");
    if (f.delimiter.size() != 1) fail(ErrorKind::InvalidInput, "--delimiter must be one character");
    if (f.export_mode) {
        if (f.x.empty()) fail(ErrorKind::InvalidInput, "ingest --export needs --x");
        export_csv(f.out, read_f3m(f.x), f.delimiter[0]);
        out << Json{{"exported", f.out}}.dump() << "\n";
        return kExitOk;
    }
    if (f.csv.empty()) fail(ErrorKind::InvalidInput, "ingest needs --csv");
    CsvOptions options;
    options.delimiter = f.delimiter[0];
    options.max_malformed = f.max_malformed;
    if (!f.columns.empty()) {
        std::stringstream ss(f.columns);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                options.columns.push_back(std::stoul(item));
            } catch (const std::exception&) {
                fail(ErrorKind::InvalidInput, "bad column index '" + item + "'");
            }
        }
    }
    CsvReport report;
    const Points pts = ingest_csv(f.csv, options, &report);
    write_f3m(f.out, pts);
    Json summary;
    summary["path"] = f.out;
    summary["rows"] = report.rows;
    summary["dim"] = report.dim;
    summary["header_skipped"] = report.header_skipped;
    summary["rejected_nonfinite"] = report.rejected_nonfinite;
    summary["malformed_lines"] = report.malformed_lines;
    out << summary.dump(2) << "\n";
    return kExitOk;
}

// ---- matvec / account ----------------------------------------------------------

struct MatvecFlags {
    DataFlags data;
    EngineFlags engine;
    std::string out;
    std::size_t subset_m = 5000;
};

int cmd_matvec(const MatvecFlags& f, const std::vector<std::string>& args, std::ostream& out) {
    const Problem p = load_problem(f.data);
    const GammaChoice g = resolve_gamma(f.data, p.x);
    const KernelSpec kernel{KernelKind::Gaussian, g.value};
    const F3MConfig cfg = engine_config(f.engine);
    const ResolvedConfig resolved = resolve(cfg, p.x.dim());
    const std::vector<double> b = load_weights(f.data, p.sources().size());

    const MatvecResult result = f3m_matvec(p.x, p.sources(), b, kernel, cfg);
    const ErrorReport err = subset_error(kernel, p.x, p.sources(), b, result.v, f.subset_m, resolved.threads);
    const AccountingReport acc = account(result.stats, p.x.dim());

    Json report;
    report["schema"] = kMatvecSchema;
    report["manifest"] = manifest("matvec", args, f.data.seed, cfg.deterministic);
    Json c = config_json(cfg, resolved, p, g);
    c["subset_m"] = err.subset;
    report["config"] = c;
    if (!cfg.deterministic) {
        report["time_s"] = result.stats.build_seconds + result.stats.apply_seconds;
        report["build_s"] = result.stats.build_seconds;
        report["apply_s"] = result.stats.apply_seconds;
        report["oracle_s"] = err.exact_seconds;
    }
    report["relative_error"] = err.relative_error;
    report["final_depth"] = result.stats.final_depth;
    report["flushed_near"] = result.stats.flushed_near;
    report["peak_interactions"] = acc.peak_interactions;
    report["depths"] = depth_json(result.stats);
    emit(report, f.out, out);
    return kExitOk;
}

int cmd_account(const MatvecFlags& f, const std::vector<std::string>& args, std::ostream& out) {
    const Problem p = load_problem(f.data);
    const GammaChoice g = resolve_gamma(f.data, p.x);
    const KernelSpec kernel{KernelKind::Gaussian, g.value};
    const F3MConfig cfg = engine_config(f.engine);
    const ResolvedConfig resolved = resolve(cfg, p.x.dim());
    const F3MOperator op(p.x, p.sources(), kernel, cfg);
    const AccountingReport acc = account(op.stats(), p.x.dim());

    Json report;
    report["schema"] = kAccountSchema;
    report["manifest"] = manifest("account", args, f.data.seed, cfg.deterministic);
    report["config"] = config_json(cfg, resolved, p, g);
    Json rows = Json::array();
    for (const AccountingRow& row : acc.rows) {
        rows.push_back({{"depth", row.depth},
                        {"expanded", row.expanded},
                        {"surviving", row.surviving},
                        {"removed_empty", row.removed_empty},
                        {"m_far", row.m_far},
                        {"m_smooth", row.m_smooth},
                        {"m_small", row.m_small},
                        {"empty_product", row.empty_product},
                        {"holds", row.holds}});
    }
    report["identity_holds"] = true;
    report["peak_interactions"] = acc.peak_interactions;
    report["rows"] = rows;
    emit(report, f.out, out);
    return kExitOk;
}

// ---- bench -----------------------------------------------------------------

struct BenchFlags {
    DataFlags data;
    EngineFlags engine;
    std::string out;
    std::string n_list = "10000,100000";
    std::size_t repeats = 3;
    std::size_t subset_m = 5000;
    bool skip_error = false;
};

std::vector<std::size_t> parse_n_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        try {
            const double value = std::stod(item);
            if (!(value >= 1.0) || value != std::floor(value)) throw std::invalid_argument("not a count");
            out.push_back(static_cast<std::size_t>(value));
        } catch (const std::exception&) {
            fail(ErrorKind::InvalidInput, "bad entry '" + item + "' in --n-list");
        }
    }
    if (out.empty()) fail(ErrorKind::InvalidInput, "--n-list is empty");
    return out;
}

int cmd_bench(const BenchFlags& f, std::ostream& out) {
    const std::vector<std::size_t> sizes = parse_n_list(f.n_list);
    if (f.repeats < 1) fail(ErrorKind::InvalidInput, "--repeats must be >= 1");
    const F3MConfig cfg = engine_config(f.engine);
    std::ostringstream csv;
    csv << "n,D,kind,r,eta,seed,time_s,rel_err\n";
    std::vector<std::pair<double, double>> best;
    for (std::size_t n : sizes) {
        double fastest = std::numeric_limits<double>::infinity();
        for (std::size_t rep = 0; rep < f.repeats; ++rep) {
            DataFlags data = f.data;
            data.n = n;
            data.seed = f.data.seed + rep;
            const Problem p = load_problem(data);
            const GammaChoice g = resolve_gamma(data, p.x);
            const KernelSpec kernel{KernelKind::Gaussian, g.value};
            const std::vector<double> b = load_weights(data, p.sources().size());
            const auto start = Clock::now();
            const MatvecResult result = f3m_matvec(p.x, p.sources(), b, kernel, cfg);
            const double seconds = seconds_since(start);
            fastest = std::min(fastest, seconds);
            double rel = std::numeric_limits<double>::quiet_NaN();
            if (!f.skip_error) rel = subset_error(kernel, p.x, p.sources(), b, result.v, f.subset_m, cfg.threads).relative_error;
            const std::size_t r = resolve(cfg, p.x.dim()).grid_nodes;
            char line[256];
            std::snprintf(line, sizeof(line), "%zu,%zu,%s,%zu,%.17g,%llu,%.9g,%.17g\n", n, p.x.dim(), data.kind.c_str(), r,
                          cfg.eta, static_cast<unsigned long long>(data.seed), seconds, rel);
            csv << line;
        }
        best.emplace_back(static_cast<double>(n), fastest);
    }
    char footer[64];
    if (best.size() >= 3) {
        std::snprintf(footer, sizeof(footer), "slope,%.6f\n", scaling_slope(best));
    } else {
        std::snprintf(footer, sizeof(footer), "slope,nan\n");
    }
    csv << footer;
    if (f.out.empty()) {
        out << csv.str();
    } else {
        std::ofstream os(f.out, std::ios::trunc);
        if (!os) fail(ErrorKind::Io, "cannot open '" + f.out + "' for writing");
        os << csv.str();
    }
    return kExitOk;
}

// ---- krr -------------------------------------------------------------------

struct KrrFlags {
    DataFlags data;
    EngineFlags engine;
    std::string out;
    std::string labels;
    double lambda = 0.0;
    double tolerance = 1e-6;
    std::size_t max_iterations = 500;
    double test_fraction = 0.1;
    std::size_t planted_subset = 1000;
    double noise_variance = 0.1;
    bool dense_baseline = false;
};

int cmd_krr(const KrrFlags& f, const std::vector<std::string>& args, std::ostream& out) {
    const Problem p = load_problem(f.data);
    const Points& x = p.x;
    std::vector<double> y;
    bool planted = false;
    if (!f.labels.empty()) {
        y = read_vector(f.labels);
        if (y.size() != x.size()) fail(ErrorKind::InvalidInput, "label file length does not match X");
        require_finite(y, "labels");
    }
    const GammaChoice g = resolve_gamma(f.data, x);
    KrrConfig cfg;
    cfg.kernel = {KernelKind::Gaussian, g.value};
    cfg.f3m = engine_config(f.engine);
    cfg.tolerance = f.tolerance;
    cfg.max_iterations = f.max_iterations;
    if (y.empty()) {
        planted = true;
        y = planted_signal(x, cfg.kernel, f.planted_subset, f.noise_variance, f.data.seed).y;
    }

    const Split split = train_test_split(x.size(), f.test_fraction, f.data.seed);
    if (split.test.empty()) fail(ErrorKind::InvalidInput, "test split is empty; raise --test-fraction or --n");
    const Points x_train = x.select(split.train);
    const Points x_test = x.select(split.test);
    std::vector<double> y_train;
    std::vector<double> y_test;
    for (std::size_t i : split.train) y_train.push_back(y[i]);
    for (std::size_t i : split.test) y_test.push_back(y[i]);
    cfg.lambda = f.lambda > 0.0 ? f.lambda : 1e-3 * static_cast<double>(x_train.size());
    cfg.validate();

    // Fit the kernel part to centred targets; the training mean acts as the intercept.
    const double offset = std::accumulate(y_train.begin(), y_train.end(), 0.0) / static_cast<double>(y_train.size());
    for (double& v : y_train) v -= offset;

    const auto start = Clock::now();
    const CgResult cg = cg_solve(x_train, y_train, cfg);
    std::vector<double> pred = predict(x_train, cg.alpha, x_test, cfg);
    for (double& v : pred) v += offset;
    const double total = seconds_since(start);

    Json report;
    report["schema"] = kKrrSchema;
    report["manifest"] = manifest("krr", args, f.data.seed, cfg.f3m.deterministic);
    Json c = config_json(cfg.f3m, resolve(cfg.f3m, x.dim()), p, g);
    c["lambda"] = cfg.lambda;
    c["tolerance"] = cfg.tolerance;
    c["max_iterations"] = cfg.max_iterations;
    c["test_fraction"] = f.test_fraction;
    c["targets"] = planted ? "planted" : f.labels;
    report["config"] = c;
    report["n_train"] = x_train.size();
    report["n_test"] = x_test.size();
    report["iterations"] = cg.iterations;
    report["converged"] = cg.converged;
    report["residual"] = cg.residual;
    report["intercept"] = offset;
    double r2 = std::numeric_limits<double>::quiet_NaN();
    try {
        r2 = r_squared(y_test, pred);
        report["r2"] = r2;
    } catch (const Error&) {
        report["r2"] = nullptr;
    }
    const bool binary =
        std::all_of(y.begin(), y.end(), [](double v) { return v == 1.0 || v == -1.0; });
    if (binary) {
        try {
            report["auc"] = auc(y_test, pred);
        } catch (const Error&) {
            report["auc"] = nullptr;
        }
    }
    if (!cfg.f3m.deterministic) report["time_s"] = total;
    if (f.dense_baseline) {
        const CgResult dense = cg_solve_dense(x_train, y_train, cfg);
        Json d;
        d["iterations"] = dense.iterations;
        d["residual"] = dense.residual;
        if (!cfg.f3m.deterministic) {
            d["time_s"] = dense.seconds;
            d["speedup"] = dense.seconds / cg.seconds;
        }
        report["dense_baseline"] = d;
    }
    emit(report, f.out, out);
    return kExitOk;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Resource: return kExitResource;
        case ErrorKind::InternalConsistency: return kExitInternal;
        default: return kExitInvalidInput;
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fast kernel matrix-vector products for low-dimensional data", "f3m"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    GenFlags gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset as an F3M1 file");
    add_data_flags(gen_cmd, gen.data, false);
    gen_cmd->add_option("--out", gen.out, "Output F3M1 path");
    gen_cmd->add_option("--y-out", gen.y_out, "Also write the source set (normal side of uniform-vs-normal)");
    gen_cmd->add_option("--precision", gen.precision, "Payload precision")->check(CLI::IsMember({"f64", "f32"}));
    gen_cmd->add_option("--clusters", gen.clusters, "Clusters per level for clustered data");
    gen_cmd->add_option("--decay", gen.decay, "Per-level spread factor for clustered data");

    IngestFlags ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Convert CSV to F3M1, or F3M1 back to CSV with --export");
    ingest_cmd->add_option("--csv", ingest.csv, "Input CSV");
    ingest_cmd->add_option("--x", ingest.x, "Input F3M1 file (export mode)");
    ingest_cmd->add_option("--out", ingest.out, "Output path");
    ingest_cmd->add_option("--columns", ingest.columns, "Comma-separated zero-based column indices");
    ingest_cmd->add_option("--delimiter", ingest.delimiter, "Field delimiter");
    ingest_cmd->add_option("--max-malformed", ingest.max_malformed, "Malformed rows tolerated before aborting");
    ingest_cmd->add_flag("--export", ingest.export_mode, "Write CSV from an F3M1 file");

    MatvecFlags matvec;
    auto* matvec_cmd = app.add_subcommand("matvec", "Approximate K(X, Y) b and report the subset error");
    add_data_flags(matvec_cmd, matvec.data, true);
    add_engine_flags(matvec_cmd, matvec.engine);
    matvec_cmd->add_option("--b", matvec.data.b, "F3M1 weight vector (default: standard normal from --seed)");
    matvec_cmd->add_option("--out", matvec.out, "JSON report path (default stdout)");
    matvec_cmd->add_option("--subset-m", matvec.subset_m, "Rows used for the error estimate")->capture_default_str();

    MatvecFlags acc;
    auto* account_cmd = app.add_subcommand("account", "Per-depth interaction accounting of one run");
    add_data_flags(account_cmd, acc.data, true);
    add_engine_flags(account_cmd, acc.engine);
    account_cmd->add_option("--out", acc.out, "JSON report path (default stdout)");

    BenchFlags bench;
    auto* bench_cmd = app.add_subcommand("bench", "Time matvecs over several n and fit the log-log slope");
    add_data_flags(bench_cmd, bench.data, false);
    add_engine_flags(bench_cmd, bench.engine);
    bench_cmd->add_option("--n-list", bench.n_list, "Comma-separated sizes, e.g. 1e4,1e5,1e6")->capture_default_str();
    bench_cmd->add_option("--repeats", bench.repeats, "Runs per size with seeds seed, seed+1, ...")->capture_default_str();
    bench_cmd->add_option("--subset-m", bench.subset_m, "Rows used for the error estimate")->capture_default_str();
    bench_cmd->add_flag("--skip-error", bench.skip_error, "Do not compute rel_err");
    bench_cmd->add_option("--out", bench.out, "CSV path (default stdout)");

    KrrFlags krr;
    auto* krr_cmd = app.add_subcommand("krr", "Kernel ridge regression by conjugate gradients on the F3M operator");
    add_data_flags(krr_cmd, krr.data, false);
    add_engine_flags(krr_cmd, krr.engine);
    krr_cmd->add_option("--labels", krr.labels, "F3M1 target vector (default: planted signal)");
    krr_cmd->add_option("--lambda", krr.lambda, "Ridge parameter (default 1e-3 * n_train)");
    krr_cmd->add_option("--tol", krr.tolerance, "Relative residual tolerance")->capture_default_str();
    krr_cmd->add_option("--max-iter", krr.max_iterations, "CG iteration cap")->capture_default_str();
    krr_cmd->add_option("--test-fraction", krr.test_fraction, "Held-out fraction")->capture_default_str();
    krr_cmd->add_option("--planted-subset", krr.planted_subset, "Rows in the planted signal support");
    krr_cmd->add_option("--noise-variance", krr.noise_variance, "Planted noise variance");
    krr_cmd->add_flag("--dense-baseline", krr.dense_baseline, "Also solve with exact dense products");
    krr_cmd->add_option("--out", krr.out, "JSON report path (default stdout)");

    try {
        std::vector<std::string> args = expand_config(raw_args);
        std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
        try {
            app.parse(std::move(reversed));
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kExitOk : kExitInvalidInput;
        }
        if (*gen_cmd) return cmd_gen(gen, out);
        if (*ingest_cmd) return cmd_ingest(ingest, out);
        if (*matvec_cmd) return cmd_matvec(matvec, args, out);
        if (*account_cmd) return cmd_account(acc, args, out);
        if (*bench_cmd) return cmd_bench(bench, out);
        if (*krr_cmd) return cmd_krr(krr, args, out);
        return kExitInvalidInput;
    } catch (const Error& e) {
        err << "f3m: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::bad_alloc&) {
        err << "f3m: out of memory\n";
        return kExitResource;
    } catch (const std::exception& e) {
        err << "f3m: " << e.what() << "\n";
        return kExitInvalidInput;
    }
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace f3m
