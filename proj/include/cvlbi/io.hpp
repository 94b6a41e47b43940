#pragma once

// JSON views of the library's result types.

#include <Eigen/Dense>
#include <json.hpp>

#include <string>

#include "cvlbi/estimate.hpp"
#include "cvlbi/fisher.hpp"
#include "cvlbi/gaussian_core.hpp"
#include "cvlbi/interferometer.hpp"
#include "cvlbi/schemes.hpp"

namespace cvlbi::io {

using nlohmann::json;

template <class Derived>
json matrix_json(const Eigen::MatrixBase<Derived>& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j) + 0.0);  // no "-0.0"
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json ordering_json(const QuadratureOrdering& o) {
    json labels = json::array();
    for (const auto& l : o.labels()) labels.push_back(l.str());
    return labels;
}

inline json to_json(const CovarianceMatrix& v) {
    return {{"ordering", ordering_json(v.ordering())},
            {"reduced", v.ordering().is_reduced()},
            {"matrix", matrix_json(v.matrix())}};
}

inline json to_json(const InterferometerConfig& cfg) {
    return {{"epsilon", cfg.source.epsilon()},
            {"g1", cfg.source.g1()},
            {"g2", cfg.source.g2()},
            {"n_bar", cfg.resource.n_bar()},
            {"theta", cfg.resource.theta()},
            {"r", cfg.resource.r()}};
}

inline json to_json(const Abbreviations& ab) {
    return {{"a", ab.a}, {"b", ab.b}, {"c", ab.c}, {"d", ab.d}, {"e", ab.e}, {"f", ab.f}};
}

inline json to_json(const FisherMatrix& f) {
    return {{"matrix", matrix_json(f.matrix())},
            {"trace_norm", f.trace_norm()},
            {"eigenvalues", {f.eigenvalues()(0), f.eigenvalues()(1)}}};
}

inline json to_json(const MonteCarloFisher& mc) {
    return {{"matrix", matrix_json(mc.estimate.matrix())},
            {"standard_error", matrix_json(mc.standard_error)},
            {"trace_norm", mc.estimate.trace_norm()},
            {"mean_score", {mc.mean_score(0), mc.mean_score(1)}},
            {"mean_score_error", {mc.mean_score_error(0), mc.mean_score_error(1)}},
            {"samples", mc.samples},
            {"seed", mc.seed},
            {"chunk_size", kMonteCarloChunk}};
}

inline json to_json(const SchemeCurve& c) {
    json pts = json::array();
    for (const auto& p : c.points) pts.push_back({p.epsilon, p.bound});
    return {{"scheme", scheme_name(c.scheme)},
            {"mode", mode_name(c.mode)},
            {"delta_nu", c.delta_nu},
            {"points", std::move(pts)}};
}

inline json to_json(const OrderingReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries) {
        json values = json::object();
        for (std::size_t i = 0; i < kAllSchemes.size(); ++i) {
            values[std::string(scheme_name(kAllSchemes[i]))] = e.values[i];
        }
        json ranking = json::array();
        for (const auto& tier : e.ranking) {
            json t = json::array();
            for (auto id : tier) t.push_back(scheme_name(id));
            ranking.push_back(std::move(t));
        }
        json holds = e.expected_ordering_holds ? json(*e.expected_ordering_holds) : json(nullptr);
        entries.push_back({{"epsilon", e.epsilon},
                           {"values", std::move(values)},
                           {"ranking", std::move(ranking)},
                           {"expected_ordering_holds", std::move(holds)}});
    }
    json crossings = json::array();
    for (const auto& c : r.crossings) {
        crossings.push_back({{"epsilon", c.epsilon},
                             {"above_before", scheme_name(c.above_before)},
                             {"above_after", scheme_name(c.above_after)}});
    }
    json coincident = json::array();
    for (const auto& [a, b] : r.coincident) coincident.push_back({scheme_name(a), scheme_name(b)});
    return {{"expected_ordering", "DD > GJC12 > CV_INF > CV_0 = LOCAL"},
            {"regime_limit", kOrderingRegimeLimit},
            {"entries", std::move(entries)},
            {"crossings", std::move(crossings)},
            {"coincident", std::move(coincident)}};
}

inline json to_json(const EstimateResult& r) {
    return {{"config", to_json(r.config)},
            {"estimator", "maximum-likelihood"},
            {"shots", r.shots},
            {"replications", r.replications},
            {"seed", r.seed},
            {"g_hat_mean", {r.g_hat_mean(0), r.g_hat_mean(1)}},
            {"cov_hat", matrix_json(r.covariance_hat)},
            {"crb", matrix_json(r.crb)},
            {"trace_ratio", r.trace_ratio},
            {"efficiency_window", {0.8, 1.5}},
            {"within_efficiency_window", r.within_efficiency_window()},
            {"min_excess_eigenvalue", r.min_excess_eigenvalue},
            {"excess_standard_error", r.excess_standard_error},
            {"consistent_with_bound", r.consistent_with_bound()},
            {"boundary_estimates", r.boundary_estimates}};
}

/// Text form used for every JSON file the tool writes.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace cvlbi::io
