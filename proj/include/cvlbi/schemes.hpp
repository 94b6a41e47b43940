#pragma once

// Cumulative Fisher information per unit time for five interferometry schemes.
//
// Every scheme's single-shot trace norm is kept to lowest order in eps as a
// power law k * eps^p, and every scheme is credited the same number of
// measurements per second (the common bandwidth delta_nu). The CV schemes can
// optionally use the exact finite-eps trace norms of the limit Fisher matrices.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cvlbi/errors.hpp"
#include "cvlbi/fisher.hpp"

namespace cvlbi {

enum class SchemeId { cv_inf, cv_0, dd, local, gjc12 };

inline constexpr std::array<SchemeId, 5> kAllSchemes{SchemeId::cv_inf, SchemeId::cv_0, SchemeId::dd,
                                                     SchemeId::local, SchemeId::gjc12};

inline std::string_view scheme_name(SchemeId id) {
    switch (id) {
        case SchemeId::cv_inf: return "CV_INF";
        case SchemeId::cv_0:   return "CV_0";
        case SchemeId::dd:     return "DD";
        case SchemeId::local:  return "LOCAL";
        case SchemeId::gjc12:  return "GJC12";
    }
    return "?";
}

inline SchemeId parse_scheme(std::string_view name) {
    for (auto id : kAllSchemes) {
        if (scheme_name(id) == name) return id;
    }
    throw ValidationError("unknown scheme '" + std::string(name) + "'");
}

/// Lowest-order single-shot trace norm, coefficient * eps^power.
struct PowerLaw {
    double coefficient;
    int power;

    [[nodiscard]] double operator()(double eps) const { return coefficient * std::pow(eps, power); }
};

inline PowerLaw single_shot_law(SchemeId id) {
    switch (id) {
        case SchemeId::cv_inf: return {2.0, 2};
        case SchemeId::cv_0:   return {1.0, 2};
        case SchemeId::dd:     return {1.0, 1};
        case SchemeId::local:  return {1.0, 2};
        case SchemeId::gjc12:  return {0.5, 1};
    }
    return {0.0, 0};
}

/// Successful measurements per second. Homodyne, photon counting and the
/// single-photon teleportation scheme are all taken to run at the bandwidth.
inline double rate_factor(SchemeId /*id*/, double delta_nu) {
    if (!std::isfinite(delta_nu) || !(delta_nu > 0.0)) {
        throw ValidationError("delta_nu must be > 0");
    }
    return delta_nu;
}

inline void check_epsilon_range(double eps) {
    if (!std::isfinite(eps) || !(eps > 0.0) || eps > 1.0) {
        throw ValidationError("epsilon must be in (0, 1]");
    }
}

inline double single_shot_bound(SchemeId id, double eps) {
    check_epsilon_range(eps);
    return single_shot_law(id)(eps);
}

enum class BoundMode { lowest_order, exact };

inline std::string_view mode_name(BoundMode m) {
    return m == BoundMode::lowest_order ? "lowest-order" : "exact";
}

inline BoundMode parse_mode(std::string_view name) {
    if (name == "lowest-order") return BoundMode::lowest_order;
    if (name == "exact") return BoundMode::exact;
    throw ValidationError("unknown bound mode '" + std::string(name) + "'");
}

struct CurvePoint {
    double epsilon;
    double bound;
};

struct SchemeCurve {
    SchemeId scheme;
    BoundMode mode = BoundMode::lowest_order;
    double delta_nu = 1.0;
    std::vector<CurvePoint> points;
};

struct CurveOptions {
    BoundMode mode = BoundMode::lowest_order;
    // Coherence used for the exact CV trace norms.
    double g1 = 0.0;
    double g2 = 0.0;
};

inline void check_epsilon_grid(std::span<const double> grid) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        check_epsilon_range(grid[i]);
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw ValidationError("epsilon grid must be strictly increasing");
        }
    }
}

/// `count` log-spaced points on [lo, hi], endpoints included.
inline std::vector<double> log_epsilon_grid(std::size_t count = 200, double lo = 1e-4, double hi = 1.0) {
    if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw ValidationError("invalid epsilon grid bounds");
    std::vector<double> grid(count);
    const double step = std::log(hi / lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) grid[i] = lo * std::exp(step * static_cast<double>(i));
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

inline std::vector<SchemeCurve> cumulative_curves(std::span<const double> eps_grid, double delta_nu,
                                                  const CurveOptions& options = {}) {
    check_epsilon_grid(eps_grid);
    std::vector<SchemeCurve> curves;
    for (auto id : kAllSchemes) {
        const double rate = rate_factor(id, delta_nu);
        const bool exact =
            options.mode == BoundMode::exact && (id == SchemeId::cv_inf || id == SchemeId::cv_0);
        SchemeCurve curve{id, exact ? BoundMode::exact : BoundMode::lowest_order, delta_nu, {}};
        curve.points.reserve(eps_grid.size());
        for (double eps : eps_grid) {
            double single = single_shot_bound(id, eps);
            if (exact) {
                const auto limit =
                    id == SchemeId::cv_inf ? SqueezingLimit::infinite : SqueezingLimit::vanishing;
                single = fisher_limit_closed_form(eps, options.g1, options.g2, limit).trace_norm();
            }
            curve.points.push_back({eps, rate * single});
        }
        curves.push_back(std::move(curve));
    }
    return curves;
}

// ---------------------------------------------------------------------------
// CSV: header `epsilon,scheme,bound,mode`, one row per (scheme, epsilon),
// schemes in kAllSchemes order, numbers with 10 significant digits.

inline constexpr std::string_view kCurvesCsvHeader = "epsilon,scheme,bound,mode";

inline std::string format_sig(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline void write_curves_csv(std::ostream& os, std::span<const SchemeCurve> curves) {
    os << kCurvesCsvHeader << '\n';
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            os << format_sig(p.epsilon, 10) << ',' << scheme_name(c.scheme) << ','
               << format_sig(p.bound, 10) << ',' << mode_name(c.mode) << '\n';
        }
    }
}

inline double parse_double(std::string_view text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ValidationError("not a number: '" + std::string(text) + "'");
    }
    return v;
}

/// Reads CSV produced by write_curves_csv. Rows are grouped into curves by
/// (scheme, mode) in order of first appearance; delta_nu is not stored and
/// is left at 1.
inline std::vector<SchemeCurve> read_curves_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kCurvesCsvHeader) {
        throw ValidationError("curves CSV: missing or wrong header");
    }
    std::vector<SchemeCurve> curves;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::array<std::string_view, 4> fields;
        std::string_view rest(line);
        for (std::size_t i = 0; i < 4; ++i) {
            const auto comma = rest.find(',');
            if ((i < 3) == (comma == std::string_view::npos)) {
                throw ValidationError("curves CSV: expected 4 fields in '" + line + "'");
            }
            fields[i] = rest.substr(0, comma);
            rest = i < 3 ? rest.substr(comma + 1) : std::string_view{};
        }
        const auto id = parse_scheme(fields[1]);
        const auto mode = parse_mode(fields[3]);
        auto it = std::find_if(curves.begin(), curves.end(),
                               [&](const SchemeCurve& c) { return c.scheme == id && c.mode == mode; });
        if (it == curves.end()) {
            curves.push_back({id, mode, 1.0, {}});
            it = std::prev(curves.end());
        }
        it->points.push_back({parse_double(fields[0]), parse_double(fields[2])});
    }
    return curves;
}

// ---------------------------------------------------------------------------
// Ordering report.

/// Below this eps the lowest-order ranking is DD > GJC12 > CV_INF > CV_0 = LOCAL.
inline constexpr double kOrderingRegimeLimit = 0.25;

struct OrderingEntry {
    double epsilon = 0.0;
    std::array<double, kAllSchemes.size()> values{};   // lowest-order, delta_nu = 1, kAllSchemes order
    std::vector<std::vector<SchemeId>> ranking;       // descending, ties grouped
    std::optional<bool> expected_ordering_holds;      // set only for eps < kOrderingRegimeLimit
};

struct Crossing {
    SchemeId above_before;  // larger bound just below the crossing
    SchemeId above_after;
    double epsilon;
};

struct OrderingReport {
    std::vector<OrderingEntry> entries;
    std::vector<Crossing> crossings;
    std::vector<std::pair<SchemeId, SchemeId>> coincident;
};

inline bool nearly_equal(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b));
}

inline std::vector<std::vector<SchemeId>> rank_schemes(double eps) {
    std::vector<SchemeId> ids(kAllSchemes.begin(), kAllSchemes.end());
    std::stable_sort(ids.begin(), ids.end(), [&](SchemeId a, SchemeId b) {
        return single_shot_law(a)(eps) > single_shot_law(b)(eps);
    });
    std::vector<std::vector<SchemeId>> tiers;
    for (auto id : ids) {
        const double v = single_shot_law(id)(eps);
        if (!tiers.empty() && nearly_equal(single_shot_law(tiers.back().front())(eps), v)) {
            tiers.back().push_back(id);
        } else {
            tiers.push_back({id});
        }
    }
    return tiers;
}

/// eps at which two power laws cross, if they have different exponents.
inline std::optional<double> crossover(const PowerLaw& a, const PowerLaw& b) {
    if (a.power == b.power) return std::nullopt;
    return std::pow(b.coefficient / a.coefficient, 1.0 / static_cast<double>(a.power - b.power));
}

inline OrderingReport ordering_report(std::span<const double> eps_grid) {
    check_epsilon_grid(eps_grid);
    OrderingReport report;
    if (eps_grid.empty()) return report;

    for (double eps : eps_grid) {
        OrderingEntry e;
        e.epsilon = eps;
        for (std::size_t i = 0; i < kAllSchemes.size(); ++i) e.values[i] = single_shot_law(kAllSchemes[i])(eps);
        e.ranking = rank_schemes(eps);
        if (eps < kOrderingRegimeLimit) {
            const auto v = [&](SchemeId id) { return single_shot_law(id)(eps); };
            e.expected_ordering_holds = v(SchemeId::dd) > v(SchemeId::gjc12) &&
                                        v(SchemeId::gjc12) > v(SchemeId::cv_inf) &&
                                        v(SchemeId::cv_inf) > v(SchemeId::cv_0) &&
                                        v(SchemeId::cv_0) == v(SchemeId::local);
        }
        report.entries.push_back(std::move(e));
    }

    const double lo = eps_grid.front();
    const double hi = eps_grid.back();
    for (std::size_t i = 0; i < kAllSchemes.size(); ++i) {
        for (std::size_t j = i + 1; j < kAllSchemes.size(); ++j) {
            const auto a = single_shot_law(kAllSchemes[i]);
            const auto b = single_shot_law(kAllSchemes[j]);
            if (a.power == b.power) {
                if (a.coefficient == b.coefficient) report.coincident.emplace_back(kAllSchemes[i], kAllSchemes[j]);
                continue;
            }
            const double x = *crossover(a, b);
            if (x < lo || x > hi) continue;
            // The lower power dominates for small eps.
            const bool a_first = a.power < b.power;
            report.crossings.push_back({a_first ? kAllSchemes[i] : kAllSchemes[j],
                                        a_first ? kAllSchemes[j] : kAllSchemes[i], x});
        }
    }
    std::stable_sort(report.crossings.begin(), report.crossings.end(),
                     [](const Crossing& x, const Crossing& y) { return x.epsilon < y.epsilon; });
    return report;
}

}  // namespace cvlbi
