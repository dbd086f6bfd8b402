// Command-line front end: capacity runs, activation/level sweeps, the
// finite-size Monte Carlo reference estimator, and overlap-curve dumps.
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tcm/activations.hpp"
#include "tcm/errors.hpp"
#include "tcm/free_energy.hpp"
#include "tcm/oracle.hpp"
#include "tcm/overlap.hpp"
#include "tcm/solver.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;
constexpr int kExitDomain = 4;

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

tcm::LevelSpec parse_level(const std::string& s) {
    if (s == "1") return {1, false};
    if (s == "2-partial") return {2, true};
    if (s == "2-full") return {2, false};
    if (s == "3-full") return {3, false};
    const std::string prefix = "r-full:";
    if (s.rfind(prefix, 0) == 0) {
        const std::string num = s.substr(prefix.size());
        if (!num.empty() && std::all_of(num.begin(), num.end(),
                                        [](unsigned char c) { return std::isdigit(c); })) {
            const int r = std::stoi(num);
            if (r >= 2 && r <= 9) return {r, false};
        }
    }
    throw tcm::ConfigError("unrecognized level selector '" + s +
                           "' (expected 1 | 2-partial | 2-full | 3-full | r-full:N)");
}

// Writes `content` to `path`, or to stdout when path is empty.  Output is
// assembled fully before this call so failures never leave partial files.
void emit(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw tcm::ConfigError("cannot open output path '" + path + "'");
    out << content;
    if (!out) throw tcm::ConfigError("failed writing output path '" + path + "'");
}

// Capacity rows use the fixed column order (gamma_sq, gamma_sq_p,
// p_r..p_2, q_r..q_2, c_r..c_2, alpha_c); parameters absent at a lower level
// render as p -> 1, q -> 0, c -> 0, with the level label as the variant tag.
struct Row {
    std::string activation;
    std::string level;
    int width = 3;  // number of layer columns rendered (>= 3, grows for r = 4)
    std::vector<double> p, q, c;  // index 0 is layer 2
    double gamma_sq = 0.0, gamma_sq_p = 0.0, alpha_c = 0.0;
    double resid_stationarity = 0.0, resid_psi = 0.0;
    long iterations = 0;
    double wall_time_s = 0.0;
    std::string note;
};

Row make_row(const tcm::CapacityReport& rep, int width) {
    Row row;
    row.activation = rep.activation;
    row.level = rep.level.label();
    row.width = std::max(width, static_cast<int>(rep.params.p.size()) + 1);
    row.p = rep.params.p;
    row.q = rep.params.q;
    row.c = rep.params.c;
    row.gamma_sq = rep.params.gamma_sq;
    row.gamma_sq_p = rep.params.gamma_sq_p;
    row.alpha_c = rep.alpha_c;
    row.resid_stationarity = rep.resid_stationarity;
    row.resid_psi = rep.resid_psi;
    row.iterations = rep.iterations;
    row.wall_time_s = rep.wall_time_s;
    row.note = rep.note;
    return row;
}

double layer_value(const std::vector<double>& v, int layer, double absent) {
    // layer is the subscript (2, 3, ...); v[0] holds layer 2.
    const int idx = layer - 2;
    if (idx >= 0 && idx < static_cast<int>(v.size())) return v[idx];
    return absent;
}

std::vector<std::string> row_headers(int width) {
    std::vector<std::string> h = {"activation", "level", "gamma_sq", "gamma_sq_p"};
    for (int k = width; k >= 3; --k) h.push_back("p" + std::to_string(k));
    h.push_back("p2");
    for (int k = width; k >= 3; --k) h.push_back("q" + std::to_string(k));
    h.push_back("q2");
    for (int k = width; k >= 3; --k) h.push_back("c" + std::to_string(k));
    h.push_back("c2");
    h.push_back("alpha_c");
    h.push_back("note");
    return h;
}

std::vector<std::string> row_cells(const Row& row, const char* spec) {
    std::vector<std::string> cells = {row.activation, row.level, fmt(row.gamma_sq, spec),
                                      fmt(row.gamma_sq_p, spec)};
    for (int k = row.width; k >= 2; --k) cells.push_back(fmt(layer_value(row.p, k, 1.0), spec));
    for (int k = row.width; k >= 2; --k) cells.push_back(fmt(layer_value(row.q, k, 0.0), spec));
    for (int k = row.width; k >= 2; --k) cells.push_back(fmt(layer_value(row.c, k, 0.0), spec));
    cells.push_back(fmt(row.alpha_c, spec));
    cells.push_back(row.note);
    return cells;
}

std::string render_csv(const std::vector<Row>& rows) {
    int width = 3;
    for (const Row& r : rows) width = std::max(width, r.width);
    std::ostringstream os;
    const auto headers = row_headers(width);
    for (size_t i = 0; i < headers.size(); ++i) os << (i ? "," : "") << headers[i];
    os << "\n";
    for (const Row& r : rows) {
        Row padded = r;
        padded.width = width;
        const auto cells = row_cells(padded, "%.17g");
        for (size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << "\n";
    }
    return os.str();
}

std::string render_pretty(const std::vector<Row>& rows) {
    int width = 3;
    for (const Row& r : rows) width = std::max(width, r.width);
    const auto headers = row_headers(width);
    std::vector<std::vector<std::string>> table;
    for (const Row& r : rows) {
        Row padded = r;
        padded.width = width;
        table.push_back(row_cells(padded, "%.6f"));
    }
    std::vector<size_t> w(headers.size());
    for (size_t i = 0; i < headers.size(); ++i) {
        w[i] = headers[i].size();
        for (const auto& cells : table) w[i] = std::max(w[i], cells[i].size());
    }
    std::ostringstream os;
    for (size_t i = 0; i < headers.size(); ++i) {
        os << (i ? "  " : "");
        os << headers[i] << std::string(w[i] - headers[i].size(), ' ');
    }
    os << "\n";
    size_t total = 0;
    for (size_t i = 0; i < w.size(); ++i) total += w[i] + (i ? 2 : 0);
    os << std::string(total, '-') << "\n";
    for (const auto& cells : table) {
        for (size_t i = 0; i < cells.size(); ++i) {
            os << (i ? "  " : "");
            os << cells[i] << std::string(w[i] - cells[i].size(), ' ');
        }
        os << "\n";
    }
    return os.str();
}

json row_json(const Row& row) {
    json j;
    j["activation"] = row.activation;
    j["level"] = row.level;
    j["alpha_c"] = row.alpha_c;
    j["gamma_sq"] = row.gamma_sq;
    j["gamma_sq_p"] = row.gamma_sq_p;
    j["p"] = row.p;
    j["q"] = row.q;
    j["c"] = row.c;
    j["resid_stationarity"] = row.resid_stationarity;
    j["resid_psi"] = row.resid_psi;
    j["iterations"] = row.iterations;
    j["wall_time_s"] = row.wall_time_s;
    j["note"] = row.note;
    return j;
}

struct CommonOpts {
    std::string activation;
    std::vector<std::string> activations;
    std::string level;
    std::vector<std::string> levels;
    std::string format = "pretty-table";
    std::string out;
    int grid_order = 120;
    double alpha_lo = 1.5;
    double alpha_hi = 5.0;
};

tcm::SolverConfig make_solver_config(const CommonOpts& opts) {
    tcm::SolverConfig cfg;
    cfg.grid_order = opts.grid_order;
    cfg.alpha_lo = opts.alpha_lo;
    cfg.alpha_hi = opts.alpha_hi;
    tcm::validate(cfg);
    return cfg;
}

void check_format(const std::string& f) {
    if (f != "csv" && f != "json" && f != "pretty-table")
        throw tcm::ConfigError("unrecognized format '" + f +
                               "' (expected csv | json | pretty-table)");
}

tcm::CapacityReport run_cell(const std::string& activation, const tcm::LevelSpec& level,
                             const tcm::SolverConfig& cfg) {
    const tcm::ActivationSpec& act = tcm::activation_by_id(activation);
    const tcm::OverlapFunction rho(act, tcm::moments(act, tcm::gauss_hermite(120)));
    return tcm::capacity(act, rho, level, cfg);
}

int cmd_capacity(const CommonOpts& opts) {
    check_format(opts.format);
    const tcm::LevelSpec level = parse_level(opts.level);
    const tcm::SolverConfig cfg = make_solver_config(opts);
    const tcm::CapacityReport rep = run_cell(opts.activation, level, cfg);
    const Row row = make_row(rep, 3);
    std::string content;
    if (opts.format == "csv") {
        content = render_csv({row});
    } else if (opts.format == "json") {
        content = row_json(row).dump(2) + "\n";
    } else {
        content = render_pretty({row});
    }
    emit(opts.out, content);
    return 0;
}

std::string plot_path_for(const std::string& out) {
    const std::string suffix = ".csv";
    if (out.size() >= suffix.size() &&
        out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
        return out.substr(0, out.size() - suffix.size()) + ".plot.csv";
    return out + ".plot.csv";
}

int cmd_sweep(const CommonOpts& opts) {
    check_format(opts.format);
    std::vector<std::string> acts = opts.activations;
    if (acts.empty()) acts = {"relu", "quadratic", "erf", "tanh"};
    std::vector<std::string> levels = opts.levels;
    if (levels.empty()) levels = {"1", "2-full", "3-full"};
    if (levels.empty() || acts.empty()) throw tcm::ConfigError("empty sweep axis");
    std::vector<tcm::LevelSpec> specs;
    for (const auto& l : levels) specs.push_back(parse_level(l));
    for (const auto& a : acts) tcm::activation_by_id(a);  // validate before spawning work
    const tcm::SolverConfig cfg = make_solver_config(opts);

    struct Cell {
        bool ok = false;
        tcm::CapacityReport rep;
        std::string error;
    };
    // Cells are independent; compute them concurrently and assemble in a
    // fixed order so the output never depends on scheduling.
    std::vector<std::future<Cell>> futures;
    for (const auto& level : specs)
        for (const auto& a : acts)
            futures.push_back(std::async(std::launch::async, [a, level, &cfg] {
                Cell cell;
                try {
                    cell.rep = run_cell(a, level, cfg);
                    cell.ok = true;
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
                return cell;
            }));
    std::vector<std::vector<Cell>> grid(specs.size());
    size_t idx = 0;
    for (size_t i = 0; i < specs.size(); ++i)
        for (size_t j = 0; j < acts.size(); ++j) grid[i].push_back(futures[idx++].get());

    bool any_failed = false;
    std::ostringstream matrix;
    matrix << "level";
    for (const auto& a : acts) matrix << "," << a;
    matrix << "\n";
    for (size_t i = 0; i < specs.size(); ++i) {
        matrix << specs[i].label();
        for (size_t j = 0; j < acts.size(); ++j) {
            matrix << ",";
            if (grid[i][j].ok)
                matrix << fmt(grid[i][j].rep.alpha_c);
            else
                any_failed = true;
        }
        matrix << "\n";
    }

    std::ostringstream plot;
    plot << "level_index,activation,alpha_c\n";
    for (size_t i = 0; i < specs.size(); ++i)
        for (size_t j = 0; j < acts.size(); ++j)
            if (grid[i][j].ok)
                plot << specs[i].r << "," << acts[j] << "," << fmt(grid[i][j].rep.alpha_c)
                     << "\n";

    std::string content;
    if (opts.format == "json") {
        json j;
        j["levels"] = levels;
        j["activations"] = acts;
        json cells = json::array();
        for (size_t i = 0; i < specs.size(); ++i)
            for (size_t j2 = 0; j2 < acts.size(); ++j2) {
                const Cell& c = grid[i][j2];
                json cj;
                cj["level"] = specs[i].label();
                cj["activation"] = acts[j2];
                if (c.ok) {
                    cj["report"] = row_json(make_row(c.rep, 3));
                } else {
                    cj["error"] = c.error;
                }
                cells.push_back(cj);
            }
        j["cells"] = cells;
        content = j.dump(2) + "\n";
    } else if (opts.format == "csv") {
        content = matrix.str();
    } else {
        std::vector<Row> rows;
        for (size_t i = 0; i < specs.size(); ++i)
            for (size_t j = 0; j < acts.size(); ++j)
                if (grid[i][j].ok) rows.push_back(make_row(grid[i][j].rep, 3));
        content = render_pretty(rows);
    }

    for (size_t i = 0; i < specs.size(); ++i)
        for (size_t j = 0; j < acts.size(); ++j)
            if (!grid[i][j].ok)
                std::cerr << "cell (" << specs[i].label() << ", " << acts[j]
                          << ") failed: " << grid[i][j].error << "\n";

    emit(opts.out, content);
    if (!opts.out.empty()) {
        emit(plot_path_for(opts.out), plot.str());
    } else if (opts.format != "json") {
        std::cout << "\n# plot data (level_index vs alpha_c)\n" << plot.str();
    }
    return any_failed ? kExitSolver : 0;
}

struct OracleOpts {
    std::string activation = "relu";
    int d = 4096;
    long samples = 100000;
    unsigned long long seed = 1;
    std::string format = "pretty-table";
    std::string out;
};

int cmd_oracle(const OracleOpts& opts) {
    check_format(opts.format);
    const tcm::ActivationSpec& act = tcm::activation_by_id(opts.activation);
    tcm::McConfig cfg;
    cfg.d = opts.d;
    cfg.samples = opts.samples;
    cfg.seed = opts.seed;
    const tcm::McEstimate est = tcm::mc_estimate(act, cfg);
    const tcm::MomentSet ms = tcm::moments(act, tcm::gauss_hermite(120));
    const double limit = tcm::z_infinity(ms);
    const double gap = std::abs(est.mean - limit);

    std::string content;
    if (opts.format == "json") {
        json j;
        j["activation"] = opts.activation;
        j["d"] = opts.d;
        j["samples"] = opts.samples;
        j["seed"] = opts.seed;
        j["mean"] = est.mean;
        j["std_error"] = est.std_error;
        j["limit"] = limit;
        j["gap"] = gap;
        j["n_infeasible_fallbacks"] = est.n_infeasible_fallbacks;
        j["n_polished"] = est.n_polished;
        content = j.dump(2) + "\n";
    } else if (opts.format == "csv") {
        std::ostringstream os;
        os << "activation,d,samples,seed,mean,std_error,limit,gap,n_infeasible_fallbacks,"
              "n_polished\n";
        os << opts.activation << "," << opts.d << "," << opts.samples << "," << opts.seed << ","
           << fmt(est.mean) << "," << fmt(est.std_error) << "," << fmt(limit) << "," << fmt(gap)
           << "," << est.n_infeasible_fallbacks << "," << est.n_polished << "\n";
        content = os.str();
    } else {
        std::ostringstream os;
        os << "activation:     " << opts.activation << "\n";
        os << "d:              " << opts.d << "   samples: " << opts.samples
           << "   seed: " << opts.seed << "\n";
        os << "mean:           " << fmt(est.mean, "%.8f") << " +/- " << fmt(est.std_error, "%.2e")
           << "\n";
        os << "analytic limit: " << fmt(limit, "%.8f") << "   gap: " << fmt(gap, "%.2e") << "\n";
        os << "infeasible fallbacks: " << est.n_infeasible_fallbacks
           << "   polished: " << est.n_polished << "\n";
        content = os.str();
    }
    emit(opts.out, content);
    return 0;
}

struct PbarOpts {
    std::string activation = "relu";
    std::string lattice;
    std::string out;
};

int cmd_pbar(const PbarOpts& opts) {
    double start = 0.0, step = 0.0, end = 0.0;
    {
        std::istringstream is(opts.lattice);
        char c1 = 0, c2 = 0;
        if (!(is >> start >> c1 >> step >> c2 >> end) || c1 != ':' || c2 != ':' ||
            !(is >> std::ws).eof() || step <= 0.0 || end < start)
            throw tcm::ConfigError("malformed lattice spec '" + opts.lattice +
                                   "' (expected start:step:end with step > 0)");
    }
    if (start < 0.0 || end > 1.0)
        throw tcm::DomainError("lattice must lie inside [0, 1]");
    const tcm::ActivationSpec& act = tcm::activation_by_id(opts.activation);
    const tcm::OverlapFunction rho(act, tcm::moments(act, tcm::gauss_hermite(120)));
    std::ostringstream os;
    os << "p,pbar\n";
    // Tolerate the accumulated rounding of repeated addition at the endpoint.
    for (double p = start; p <= end + 1e-12; p += step) {
        const double pc = std::min(p, 1.0);
        os << fmt(pc, "%.12g") << "," << fmt(rho.direct(pc), "%.12g") << "\n";
    }
    emit(opts.out, os.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Capacity of wide treelike committee machines via lifted "
                 "interpolation: solver, sweeps, and finite-size reference runs"};
    app.require_subcommand(1);

    CommonOpts cap_opts;
    CLI::App* cap = app.add_subcommand("capacity", "Solve one (activation, level) capacity");
    cap->add_option("--activation", cap_opts.activation, "Activation id")->required();
    cap->add_option("--level", cap_opts.level,
                    "Level selector: 1 | 2-partial | 2-full | 3-full | r-full:N")
        ->required();
    cap->add_option("--grid-order", cap_opts.grid_order, "Per-axis quadrature order");
    cap->add_option("--alpha-lo", cap_opts.alpha_lo, "Lower edge of the alpha bracket");
    cap->add_option("--alpha-hi", cap_opts.alpha_hi, "Upper edge of the alpha bracket");
    cap->add_option("--format", cap_opts.format, "csv | json | pretty-table");
    cap->add_option("--out", cap_opts.out, "Output path (stdout when omitted)");
    cap->set_config("--config", "", "Flat key=value config file; flags override");

    CommonOpts sweep_opts;
    CLI::App* sweep = app.add_subcommand("sweep", "Capacity matrix across activations and levels");
    sweep->add_option("--activation", sweep_opts.activations,
                      "Activation ids (repeatable; default all four)");
    sweep->add_option("--level", sweep_opts.levels,
                      "Level selectors (repeatable; default 1, 2-full, 3-full)");
    sweep->add_option("--grid-order", sweep_opts.grid_order, "Per-axis quadrature order");
    sweep->add_option("--alpha-lo", sweep_opts.alpha_lo, "Lower edge of the alpha bracket");
    sweep->add_option("--alpha-hi", sweep_opts.alpha_hi, "Upper edge of the alpha bracket");
    sweep->add_option("--format", sweep_opts.format, "csv | json | pretty-table");
    sweep->add_option("--out", sweep_opts.out,
                      "Output path; plot data goes to a sibling .plot.csv file");
    sweep->set_config("--config", "", "Flat key=value config file; flags override");

    OracleOpts oracle_opts;
    CLI::App* oracle = app.add_subcommand("oracle", "Finite-size Monte Carlo reference estimate");
    oracle->add_option("--activation", oracle_opts.activation, "Activation id");
    oracle->add_option("--d", oracle_opts.d, "Per-neuron input width (even)");
    oracle->add_option("--samples", oracle_opts.samples, "Monte Carlo sample count");
    oracle->add_option("--seed", oracle_opts.seed, "RNG seed");
    oracle->add_option("--format", oracle_opts.format, "csv | json | pretty-table");
    oracle->add_option("--out", oracle_opts.out, "Output path (stdout when omitted)");
    oracle->set_config("--config", "", "Flat key=value config file; flags override");

    PbarOpts pbar_opts;
    CLI::App* pbar = app.add_subcommand("pbar", "Dump the overlap curve on a lattice as CSV");
    pbar->add_option("--activation", pbar_opts.activation, "Activation id");
    pbar->add_option("--lattice", pbar_opts.lattice, "Lattice spec start:step:end")->required();
    pbar->add_option("--out", pbar_opts.out, "Output path (stdout when omitted)");
    pbar->set_config("--config", "", "Flat key=value config file; flags override");

    try {
        app.parse(argc, argv);
        if (cap->parsed()) return cmd_capacity(cap_opts);
        if (sweep->parsed()) return cmd_sweep(sweep_opts);
        if (oracle->parsed()) return cmd_oracle(oracle_opts);
        if (pbar->parsed()) return cmd_pbar(pbar_opts);
        return kExitUsage;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const tcm::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const tcm::ConvergenceError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const tcm::DomainError& e) {
        std::cerr << "numerical domain failure: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
