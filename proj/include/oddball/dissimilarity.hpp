#ifndef ODDBALL_DISSIMILARITY_HPP
#define ODDBALL_DISSIMILARITY_HPP

// Neuronal dissimilarity from firing-rate vectors and the statistics used to
// judge an index against visual-search decision delays.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>

#include "oddball/harness.hpp"
#include "oddball/lambda_solver.hpp"
#include "oddball/random.hpp"

namespace oddball {

inline constexpr double kDefaultRateFloor = 1e-3;

/// Mean firing rate per image and neuron, in events per slot. Rates below
/// the floor are raised to it when the table is built.
class FiringRateTable {
public:
    FiringRateTable() = default;

    FiringRateTable(std::vector<std::string> images, std::vector<std::vector<double>> rates,
                    double floor = kDefaultRateFloor)
        : images_(std::move(images)), rates_(std::move(rates)), floored_(images_.size(), 0) {
        if (!(floor > 0.0)) throw std::invalid_argument("FiringRateTable: floor must be positive");
        if (images_.size() != rates_.size()) throw std::invalid_argument("FiringRateTable: image/rate count mismatch");
        if (rates_.empty()) throw std::invalid_argument("FiringRateTable: no images");
        const std::size_t d = rates_.front().size();
        if (d == 0) throw std::invalid_argument("FiringRateTable: no neurons");
        for (std::size_t a = 0; a < rates_.size(); ++a) {
            if (rates_[a].size() != d) throw std::invalid_argument("FiringRateTable: ragged rate vectors");
            for (double& v : rates_[a]) {
                if (!std::isfinite(v) || v < 0.0)
                    throw std::invalid_argument("FiringRateTable: rates must be finite and nonnegative");
                if (v < floor) {
                    v = floor;
                    ++floored_[a];
                }
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return images_.size(); }
    [[nodiscard]] std::size_t neurons() const { return rates_.empty() ? 0 : rates_.front().size(); }
    [[nodiscard]] const std::string& image(std::size_t a) const { return images_.at(a); }
    [[nodiscard]] const std::vector<double>& rates(std::size_t a) const { return rates_.at(a); }
    [[nodiscard]] std::size_t floored_cells(std::size_t a) const { return floored_.at(a); }
    [[nodiscard]] const std::vector<std::string>& images() const { return images_; }

    [[nodiscard]] std::size_t index_of(const std::string& id) const {
        const auto it = std::find(images_.begin(), images_.end(), id);
        if (it == images_.end()) throw std::out_of_range("FiringRateTable: unknown image '" + id + "'");
        return static_cast<std::size_t>(it - images_.begin());
    }

private:
    std::vector<std::string> images_;
    std::vector<std::vector<double>> rates_;
    std::vector<std::size_t> floored_;
};

struct DissimilarityEntry {
    std::size_t odd = 0;
    std::size_t distractor = 0;
    double d_star = 0.0;
    bool degenerate = false;
    std::size_t floored_cells = 0;  // floored cells in the two rate vectors
};

/// Entry (a, b) is D* with image a as the oddball among K-1 copies of b.
/// Not symmetric; both orientations are stored.
class DissimilarityMatrix {
public:
    DissimilarityMatrix(std::size_t n, std::size_t k) : n_(n), k_(k), entries_(n * n) {}

    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] std::size_t k() const { return k_; }
    [[nodiscard]] const DissimilarityEntry& at(std::size_t odd, std::size_t distractor) const {
        return entries_.at(odd * n_ + distractor);
    }
    DissimilarityEntry& at(std::size_t odd, std::size_t distractor) { return entries_.at(odd * n_ + distractor); }
    [[nodiscard]] const std::vector<DissimilarityEntry>& entries() const { return entries_; }

private:
    std::size_t n_;
    std::size_t k_;
    std::vector<DissimilarityEntry> entries_;
};

inline DissimilarityMatrix pairwise_dstar(const FiringRateTable& table, std::size_t k, std::size_t parallelism = 1) {
    if (k < 3) throw std::invalid_argument("pairwise_dstar: K must be at least 3");
    const std::size_t n = table.size();
    DissimilarityMatrix matrix(n, k);
    parallel_for(n * n, parallelism, [&](std::size_t cell) {
        const std::size_t a = cell / n;
        const std::size_t b = cell % n;
        DissimilarityEntry& e = matrix.at(a, b);
        e.odd = a;
        e.distractor = b;
        e.floored_cells = table.floored_cells(a) + (a == b ? 0 : table.floored_cells(b));
        const auto config = OddConfig::make(k, 0, table.rates(a), table.rates(b));
        e.degenerate = config.is_degenerate();
        e.d_star = e.degenerate ? 0.0 : d_star(config);
    });
    return matrix;
}

/// log(AM / GM) of positive values; 0 iff all values are equal.
inline double log_am_gm(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("log_am_gm: empty input");
    double sum = 0.0;
    double log_sum = 0.0;
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::domain_error("log_am_gm: values must be positive");
        sum += v;
        log_sum += std::log(v);
    }
    const auto m = static_cast<double>(values.size());
    return std::max(0.0, std::log(sum / m) - log_sum / m);
}

struct AnovaResult {
    double f = 0.0;
    double p = 1.0;
    double df_between = 0.0;
    double df_within = 0.0;
};

/// One-way ANOVA F test for equality of group means.
inline AnovaResult anova_f(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw std::invalid_argument("anova_f: need at least two groups");
    std::size_t total = 0;
    double grand_sum = 0.0;
    for (const auto& g : groups) {
        if (g.size() < 2) throw std::invalid_argument("anova_f: each group needs at least two samples");
        total += g.size();
        grand_sum += std::accumulate(g.begin(), g.end(), 0.0);
    }
    const double grand_mean = grand_sum / static_cast<double>(total);
    double ss_between = 0.0;
    double ss_within = 0.0;
    for (const auto& g : groups) {
        const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
        ss_between += static_cast<double>(g.size()) * (mean - grand_mean) * (mean - grand_mean);
        for (double x : g) ss_within += (x - mean) * (x - mean);
    }
    AnovaResult r;
    r.df_between = static_cast<double>(groups.size() - 1);
    r.df_within = static_cast<double>(total - groups.size());
    const double ms_between = ss_between / r.df_between;
    const double ms_within = ss_within / r.df_within;
    if (ms_within == 0.0) {
        if (ms_between == 0.0) throw std::domain_error("anova_f: all samples identical");
        r.f = std::numeric_limits<double>::infinity();
        r.p = 0.0;
        return r;
    }
    r.f = ms_between / ms_within;
    r.p = r.f == 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(boost::math::fisher_f(r.df_between, r.df_within), r.f));
    return r;
}

/// Pearson correlation coefficient.
inline double correlation(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("correlation: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("correlation: need at least three points");
    const auto m = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / m;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / m;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::domain_error("correlation: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// One visual-search trial: decision delay for an (odd, distractor) display.
struct SearchTrial {
    std::string odd_id;
    std::string distractor_id;
    double delay = 0.0;
};

struct SearchAnalysis {
    double pearson_r = 0.0;  // mean delay vs 1/D* across pairs
    double anova_f = 0.0;    // groups: delay * D* per pair
    double anova_p = 1.0;
    double log_am_gm = 0.0;  // of per-pair means of delay * D*
    std::size_t pairs = 0;
};

/// Compare decision delays against a dissimilarity matrix. Pairs are taken
/// in first-appearance order; degenerate pairs are rejected.
inline SearchAnalysis analyze_search(const std::vector<std::string>& images, const DissimilarityMatrix& matrix,
                                     const std::vector<SearchTrial>& trials) {
    if (images.size() != matrix.size()) throw std::invalid_argument("analyze_search: image list does not match matrix");
    auto index_of = [&images](const std::string& id) {
        const auto it = std::find(images.begin(), images.end(), id);
        if (it == images.end()) throw std::out_of_range("analyze_search: unknown image '" + id + "'");
        return static_cast<std::size_t>(it - images.begin());
    };
    std::vector<std::pair<std::size_t, std::size_t>> order;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> delays;
    for (const SearchTrial& t : trials) {
        const auto key = std::make_pair(index_of(t.odd_id), index_of(t.distractor_id));
        if (!(t.delay > 0.0)) throw std::domain_error("analyze_search: delays must be positive");
        auto [it, inserted] = delays.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(t.delay);
    }
    std::vector<double> mean_delay, inv_index, products;
    std::vector<std::vector<double>> groups;
    for (const auto& key : order) {
        const DissimilarityEntry& e = matrix.at(key.first, key.second);
        if (e.degenerate || !(e.d_star > 0.0))
            throw std::domain_error("analyze_search: degenerate pair " + images[key.first] + "/" + images[key.second]);
        const auto& ds = delays.at(key);
        const double mean = std::accumulate(ds.begin(), ds.end(), 0.0) / static_cast<double>(ds.size());
        mean_delay.push_back(mean);
        inv_index.push_back(1.0 / e.d_star);
        products.push_back(mean * e.d_star);
        std::vector<double> g;
        for (double d : ds) g.push_back(d * e.d_star);
        groups.push_back(std::move(g));
    }
    SearchAnalysis out;
    out.pairs = order.size();
    out.pearson_r = correlation(mean_delay, inv_index);
    const AnovaResult a = anova_f(groups);
    out.anova_f = a.f;
    out.anova_p = a.p;
    out.log_am_gm = log_am_gm(products);
    return out;
}

struct SyntheticSearchSpec {
    std::size_t images = 8;
    std::size_t neurons = 10;
    std::size_t k = 8;               // display size
    std::size_t pairs = 24;
    std::size_t trials_per_pair = 20;
    double delay_constant = 1.0;     // planted E[delay] = C / D*
    double pair_noise = 0.05;        // relative sd of the per-pair mean
    double trial_noise = 0.10;       // relative sd of single-trial delays
    std::uint64_t seed = 1;
};

struct SyntheticSearchData {
    FiringRateTable table;
    std::vector<SearchTrial> trials;
};

/// Random log-normal firing rates, and delays planted as C / D* with
/// multiplicative Gaussian noise at pair and trial level.
inline SyntheticSearchData make_synthetic_search(const SyntheticSearchSpec& spec) {
    if (spec.images < 2 || spec.neurons == 0) throw std::invalid_argument("make_synthetic_search: bad table size");
    if (spec.pairs > spec.images * (spec.images - 1))
        throw std::invalid_argument("make_synthetic_search: more pairs than ordered image pairs");
    Stream stream(spec.seed);
    auto normal = [&stream] {
        // Box-Muller; one variate per call.
        const double u1 = stream.uniform_open();
        const double u2 = stream.uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    };

    std::vector<std::string> ids;
    std::vector<std::vector<double>> rates;
    for (std::size_t a = 0; a < spec.images; ++a) {
        ids.push_back("img" + std::to_string(a + 1));
        std::vector<double> r(spec.neurons);
        for (double& v : r) v = std::exp(std::log(2.0) + 0.6 * normal());
        rates.push_back(std::move(r));
    }
    SyntheticSearchData data{FiringRateTable(ids, rates), {}};

    std::vector<std::pair<std::size_t, std::size_t>> all_pairs;
    for (std::size_t a = 0; a < spec.images; ++a)
        for (std::size_t b = 0; b < spec.images; ++b)
            if (a != b) all_pairs.emplace_back(a, b);
    for (std::size_t i = 0; i < spec.pairs; ++i) {  // partial Fisher-Yates
        const std::size_t j = i + stream.index(all_pairs.size() - i);
        std::swap(all_pairs[i], all_pairs[j]);
    }
    for (std::size_t p = 0; p < spec.pairs; ++p) {
        const auto [a, b] = all_pairs[p];
        const double ds = d_star(OddConfig::make(spec.k, 0, data.table.rates(a), data.table.rates(b)));
        const double pair_mean = spec.delay_constant / ds * std::max(0.05, 1.0 + spec.pair_noise * normal());
        for (std::size_t t = 0; t < spec.trials_per_pair; ++t) {
            const double delay = pair_mean * std::max(0.05, 1.0 + spec.trial_noise * normal());
            data.trials.push_back({ids[a], ids[b], delay});
        }
    }
    return data;
}

}  // namespace oddball

#endif  // ODDBALL_DISSIMILARITY_HPP
