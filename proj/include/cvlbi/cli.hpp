#pragma once

// Command-line front end: `cvlbi <state|fisher|compare|estimate> [flags]`.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure.
// `--config FILE` reads flat `key=value` lines named like the long flags
// (e.g. `n-bar=1`); flags given on the command line win.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cvlbi/errors.hpp"
#include "cvlbi/estimate.hpp"
#include "cvlbi/fisher.hpp"
#include "cvlbi/interferometer.hpp"
#include "cvlbi/io.hpp"
#include "cvlbi/schemes.hpp"
#include "cvlbi/states.hpp"

namespace cvlbi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

enum class Format { csv, json };

struct RunConfig {
    double epsilon = 0.1;
    double g1 = 0.0;
    double g2 = 0.0;
    double n_bar = 1.0;
    double theta = 0.0;
    double delta_nu = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t samples = 100000;
    std::uint64_t shots = 10000;
    std::uint64_t replications = 100;
    std::string output_path;
    std::optional<Format> format;

    // fisher
    bool monte_carlo = false;
    // compare
    double eps_min = 1e-4;
    double eps_max = 1.0;
    std::size_t eps_points = 200;
    bool exact = false;
    std::string report_path;

    [[nodiscard]] InterferometerConfig interferometer() const {
        return {SourceParams(epsilon, g1, g2), TmsvParams(n_bar, theta)};
    }
};

namespace detail {

using io::json;

inline void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open output file '" + path + "'");
    f << text;
}

inline void matrix_rows_csv(std::ostream& os, const std::string& name, const Eigen::MatrixXd& m,
                            const std::vector<std::string>& labels) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            const auto rl = labels.empty() ? std::to_string(i) : labels[static_cast<std::size_t>(i)];
            const auto cl = labels.empty() ? std::to_string(j) : labels[static_cast<std::size_t>(j)];
            os << name << ',' << rl << ',' << cl << ',' << format_sig(m(i, j), 10) << '\n';
        }
    }
}

inline std::vector<std::string> label_strings(const QuadratureOrdering& o) {
    std::vector<std::string> out;
    for (const auto& l : o.labels()) out.push_back(l.str());
    return out;
}

inline std::string cmd_state(const RunConfig& rc) {
    const auto cfg = rc.interferometer();
    const auto v_rho = astronomical_covariance(cfg.source);
    const auto v_sigma = tmsv_covariance_closed(cfg.resource);
    const auto v_f = full_output_covariance(cfg);
    const auto reduced = reduced_covariance(cfg);

    if (rc.format.value_or(Format::json) == Format::csv) {
        std::ostringstream os;
        os << "matrix,row,col,value\n";
        matrix_rows_csv(os, "V_rho", v_rho.matrix(), label_strings(v_rho.ordering()));
        matrix_rows_csv(os, "V_sigma", v_sigma.matrix(), label_strings(v_sigma.ordering()));
        matrix_rows_csv(os, "V_f", v_f.matrix(), label_strings(v_f.ordering()));
        matrix_rows_csv(os, "V_r", reduced.v_r.matrix(), label_strings(reduced.v_r.ordering()));
        return os.str();
    }
    json j{{"config", io::to_json(cfg)},
           {"convention", "vacuum covariance = identity"},
           {"V_rho", io::to_json(v_rho)},
           {"V_sigma", io::to_json(v_sigma)},
           {"V_f", io::to_json(v_f)},
           {"V_r", io::to_json(reduced.v_r)},
           {"V_r_closed_form", io::matrix_json(reduced.closed_form)},
           {"V_r_discrepancy", reduced.discrepancy()},
           {"abbreviations", io::to_json(reduced.abbrev)}};
    return io::dump(j);
}

inline double max_relative_difference(const Eigen::Matrix2d& a, const Eigen::Matrix2d& ref) {
    double worst = 0.0;
    const double scale = ref.cwiseAbs().maxCoeff();
    for (Index i = 0; i < 2; ++i) {
        for (Index j = 0; j < 2; ++j) {
            const double denom = std::abs(ref(i, j)) > 0.0 ? std::abs(ref(i, j)) : scale;
            worst = std::max(worst, std::abs(a(i, j) - ref(i, j)) / denom);
        }
    }
    return worst;
}

inline std::string cmd_fisher(const RunConfig& rc) {
    const auto cfg = rc.interferometer();
    const auto analytic = fisher_analytic(cfg);
    const auto lim0 = fisher_limit_closed_form(rc.epsilon, rc.g1, rc.g2, SqueezingLimit::vanishing);
    const auto lim_inf = fisher_limit_closed_form(rc.epsilon, rc.g1, rc.g2, SqueezingLimit::infinite);
    std::optional<MonteCarloFisher> mc;
    if (rc.monte_carlo) mc = fisher_monte_carlo(cfg, rc.samples, rc.seed);

    if (rc.format.value_or(Format::json) == Format::csv) {
        std::ostringstream os;
        os << "quantity,row,col,value\n";
        const std::vector<std::string> g{"g1", "g2"};
        matrix_rows_csv(os, "analytic", analytic.matrix(), g);
        matrix_rows_csv(os, "limit_n_bar_0", lim0.matrix(), g);
        matrix_rows_csv(os, "limit_n_bar_inf", lim_inf.matrix(), g);
        if (mc) {
            matrix_rows_csv(os, "monte_carlo", mc->estimate.matrix(), g);
            matrix_rows_csv(os, "monte_carlo_se", mc->standard_error, g);
        }
        return os.str();
    }
    auto limit_json = [&](const FisherMatrix& f) {
        auto j = io::to_json(f);
        j["max_relative_difference_from_analytic"] = max_relative_difference(analytic.matrix(), f.matrix());
        return j;
    };
    json j{{"config", io::to_json(cfg)},
           {"analytic", io::to_json(analytic)},
           {"limits", {{"n_bar->0", limit_json(lim0)}, {"n_bar->inf", limit_json(lim_inf)}}}};
    if (mc) j["monte_carlo"] = io::to_json(*mc);
    return io::dump(j);
}

inline std::string cmd_compare(const RunConfig& rc, std::string& report_text) {
    if (rc.eps_points < 2) throw ValidationError("eps-points must be >= 2");
    const auto grid = log_epsilon_grid(rc.eps_points, rc.eps_min, rc.eps_max);
    CurveOptions opts;
    opts.mode = rc.exact ? BoundMode::exact : BoundMode::lowest_order;
    opts.g1 = rc.g1;
    opts.g2 = rc.g2;
    if (rc.exact) SourceParams(rc.epsilon, rc.g1, rc.g2);  // validates g for the exact CV norms
    const auto curves = cumulative_curves(grid, rc.delta_nu, opts);
    const auto report = io::to_json(ordering_report(grid));
    report_text = io::dump(report);

    if (rc.format.value_or(Format::csv) == Format::json) {
        json cj = json::array();
        for (const auto& c : curves) cj.push_back(io::to_json(c));
        return io::dump(json{{"curves", std::move(cj)}, {"ordering", report}});
    }
    std::ostringstream os;
    write_curves_csv(os, curves);
    return os.str();
}

inline std::string cmd_estimate(const RunConfig& rc) {
    const auto result = crb_experiment(rc.interferometer(), rc.shots, rc.replications, rc.seed);
    if (rc.format.value_or(Format::json) == Format::csv) {
        std::ostringstream os;
        os << "replication,g1_hat,g2_hat\n";
        for (std::size_t r = 0; r < result.estimates.size(); ++r) {
            os << r << ',' << format_sig(result.estimates[r](0), 10) << ','
               << format_sig(result.estimates[r](1), 10) << '\n';
        }
        return os.str();
    }
    return io::dump(io::to_json(result));
}

}  // namespace detail

/// Parses argv and runs one subcommand. Output goes to `out` unless --output is given.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    CLI::App app{"Continuous-variable entanglement-assisted interferometry: states, Fisher information, "
                 "scheme comparison and Cramer-Rao experiments.",
                 "cvlbi"};
    app.set_config("--config", "", "Read flat key=value parameters from a file; flags override it");
    app.option_defaults()->always_capture_default();

    app.add_option("--epsilon", rc.epsilon, "Mean photon flux per coherence time (> 0)");
    app.add_option("--g1", rc.g1, "Real part of the mutual coherence");
    app.add_option("--g2", rc.g2, "Imaginary part of the mutual coherence");
    app.add_option("--n-bar", rc.n_bar, "Mean photon number per mode of the squeezed resource (>= 0)");
    app.add_option("--theta", rc.theta, "Squeezing phase in radians");
    app.add_option("--delta-nu", rc.delta_nu, "Common bandwidth, measurements per second (> 0)");
    app.add_option("--seed", rc.seed, "Master random seed");
    app.add_option("--samples", rc.samples, "Monte Carlo samples for `fisher --mc` (>= 1000)");
    app.add_option("--shots", rc.shots, "Shots per record for `estimate`");
    app.add_option("--replications", rc.replications, "Replications for `estimate` (>= 30)");
    app.add_option("--output,-o", rc.output_path, "Write the result here instead of stdout");
    std::string format;
    app.add_option("--format", format, "Output format (default: csv for compare, json otherwise)")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--mc", rc.monte_carlo, "fisher: add the Monte Carlo estimate");
    app.add_option("--eps-min", rc.eps_min, "compare: smallest epsilon of the log grid");
    app.add_option("--eps-max", rc.eps_max, "compare: largest epsilon of the log grid (<= 1)");
    app.add_option("--eps-points", rc.eps_points, "compare: number of grid points");
    app.add_flag("--exact", rc.exact, "compare: use exact finite-epsilon trace norms for the CV schemes");
    app.add_option("--report", rc.report_path, "compare: also write the ordering report JSON here");

    auto* state = app.add_subcommand("state", "Covariance matrices of the input, output and measured states");
    auto* fisher = app.add_subcommand("fisher", "Fisher information of the homodyne outcomes");
    auto* compare = app.add_subcommand("compare", "Cumulative Fisher information of all schemes vs epsilon");
    auto* estimate = app.add_subcommand("estimate", "Maximum-likelihood estimation vs the Cramer-Rao bound");
    for (auto* sub : {state, fisher, compare, estimate}) sub->fallthrough();
    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    if (!format.empty()) rc.format = format == "csv" ? Format::csv : Format::json;

    try {
        if (state->parsed()) {
            detail::write_text(rc.output_path, detail::cmd_state(rc), out);
        } else if (fisher->parsed()) {
            detail::write_text(rc.output_path, detail::cmd_fisher(rc), out);
        } else if (compare->parsed()) {
            std::string report;
            const auto text = detail::cmd_compare(rc, report);
            detail::write_text(rc.output_path, text, out);
            if (!rc.report_path.empty()) detail::write_text(rc.report_path, report, out);
        } else if (estimate->parsed()) {
            detail::write_text(rc.output_path, detail::cmd_estimate(rc), out);
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

}  // namespace cvlbi::cli
