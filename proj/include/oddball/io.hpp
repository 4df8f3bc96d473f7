#ifndef ODDBALL_IO_HPP
#define ODDBALL_IO_HPP

// External file formats. Process and image indices are 1-based in every
// format written or read here; the library API is 0-based.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "oddball/dissimilarity.hpp"
#include "oddball/harness.hpp"
#include "oddball/lambda_solver.hpp"
#include "oddball/policy.hpp"

namespace oddball {

/// Malformed or invalid user input.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest round-trip text for a double; fixed across platforms for the
/// same value.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    if (v == std::trunc(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

inline std::vector<std::string> split_csv_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline double parse_number(const std::string& text, std::size_t line, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        while (used < text.size() && (text[used] == ' ' || text[used] == '\t')) ++used;
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw InputError("line " + std::to_string(line) + ": cannot parse " + what + " '" + text + "'");
    }
}

template <typename Row>
void read_csv(std::istream& in, const std::vector<std::string>& required_prefix, Row&& on_row,
              std::vector<std::string>* header_out = nullptr) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty CSV input");
    const auto header = split_csv_line(line);
    if (header.size() < required_prefix.size()) throw InputError("line 1: header has too few columns");
    for (std::size_t i = 0; i < required_prefix.size(); ++i)
        if (header[i] != required_prefix[i])
            throw InputError("line 1: expected column '" + required_prefix[i] + "', found '" + header[i] + "'");
    if (header_out) *header_out = header;
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw InputError("line " + std::to_string(number) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        on_row(fields, number);
    }
}

}  // namespace detail

/// Parse an experiment spec:
/// {"k":5,"odd_index":3,"r1":[10.0],"r2":[1.0],"l_grid":[100,1000],
///  "trials":10000,"seed":42,"max_slots":10000000,"trace_sampling":0.0}
/// odd_index is 1-based; max_slots and trace_sampling are optional.
inline ExperimentSpec parse_experiment_spec(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, column] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        throw InputError("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + e.what());
    }
    try {
        if (!j.is_object()) throw InputError("experiment spec must be a JSON object");
        for (const char* key : {"k", "odd_index", "r1", "r2", "l_grid", "trials", "seed"})
            if (!j.contains(key)) throw InputError(std::string("experiment spec is missing '") + key + "'");
        const auto k = j.at("k").get<std::int64_t>();
        const auto odd = j.at("odd_index").get<std::int64_t>();
        if (k < 3) throw InputError("k must be at least 3");
        if (odd < 1 || odd > k) throw InputError("odd_index must lie in [1, k]");
        ExperimentSpec spec;
        spec.truth = OddConfig::make(static_cast<std::size_t>(k), static_cast<std::size_t>(odd - 1),
                                     j.at("r1").get<std::vector<double>>(), j.at("r2").get<std::vector<double>>());
        spec.l_grid = j.at("l_grid").get<std::vector<double>>();
        const auto trials = j.at("trials").get<std::int64_t>();
        if (trials <= 0) throw InputError("trials must be positive");
        spec.trials_per_point = static_cast<std::uint64_t>(trials);
        spec.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("max_slots")) {
            const auto cap = j.at("max_slots").get<double>();
            if (!(cap >= 1.0) || cap > 1e15) throw InputError("max_slots must be a positive integer");
            spec.max_slots = static_cast<std::uint64_t>(cap);
        }
        if (j.contains("trace_sampling")) spec.trace_sampling = j.at("trace_sampling").get<double>();
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid experiment spec: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("invalid experiment spec: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw InputError(std::string("invalid experiment spec: ") + e.what());
    }
}

inline void write_report_csv(std::ostream& out, const ExperimentReport& report) {
    out << "L,threshold,trials,errors,error_rate,error_ci_hi,mean_tau,se_tau,tau_over_lnL,lower_bound,inv_dstar,capped\n";
    for (const ReportRow& r : report.rows) {
        out << format_double(r.l) << ',' << format_double(r.threshold) << ',' << r.trials << ',' << r.errors << ','
            << format_double(r.error_rate) << ',' << format_double(r.error_ci_hi) << ',' << format_double(r.mean_tau)
            << ',' << format_double(r.se_tau) << ',' << format_double(r.tau_over_ln_l) << ','
            << format_double(r.lower_bound) << ',' << format_double(r.inv_dstar) << ',' << r.capped << '\n';
    }
}

/// One JSON object per slot, then a final summary object.
inline void write_trace_jsonl(std::ostream& out, const TrialOutcome& outcome) {
    if (!outcome.traced) throw std::logic_error("write_trace_jsonl: outcome has no trace");
    for (const SlotRecord& r : outcome.trace) {
        nlohmann::ordered_json j;
        j["n"] = r.n;
        j["action"] = r.action + 1;
        j["count"] = r.count;
        j["leader"] = r.leader + 1;
        j["z_leader"] = r.z_leader;
        out << j.dump() << '\n';
    }
    nlohmann::ordered_json fin;
    fin["tau"] = outcome.tau;
    fin["delta"] = outcome.delta + 1;
    fin["correct"] = outcome.correct;
    fin["capped"] = outcome.capped;
    out << fin.dump() << '\n';
}

inline void write_drift_csv(std::ostream& out, const DriftReport& report, const OddConfig& truth) {
    const std::size_t k = truth.k;
    out << "seed,n,leader,z_over_n,d_star,z_rel_err,freq_err_inf,complement_rel_err_max";
    for (std::size_t j = 1; j <= k; ++j) out << ",freq_" << j;
    for (std::size_t j = 1; j <= k; ++j) out << ",rate_" << j;
    out << '\n';
    const double r_tilde = report.lambda.r_tilde[0];
    for (const DriftRow& row : report.rows) {
        double freq_err = 0.0;
        double comp_err = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            freq_err = std::max(freq_err, std::abs(row.frequency[j] - report.lambda.lambda[j]));
            if (j != truth.odd_index) comp_err = std::max(comp_err, std::abs(row.complement_rate[j] / r_tilde - 1.0));
        }
        out << row.seed << ',' << row.n << ',' << row.leader + 1 << ',' << format_double(row.z_true_over_n) << ','
            << format_double(report.d_star) << ','
            << format_double(std::abs(row.z_true_over_n - report.d_star) / report.d_star) << ','
            << format_double(freq_err) << ',' << format_double(comp_err);
        for (double f : row.frequency) out << ',' << format_double(f);
        for (double r : row.rate_hat) out << ',' << format_double(r);
        out << '\n';
    }
}

/// Header `image_id,neuron_1,...,neuron_D`.
inline FiringRateTable read_firing_rates_csv(std::istream& in, double floor = kDefaultRateFloor) {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rates;
    std::vector<std::string> header;
    detail::read_csv(
        in, {"image_id"},
        [&](const std::vector<std::string>& f, std::size_t line) {
            ids.push_back(f[0]);
            std::vector<double> r;
            for (std::size_t c = 1; c < f.size(); ++c) {
                const double v = detail::parse_number(f[c], line, "rate");
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw InputError("line " + std::to_string(line) + ": rates must be finite and nonnegative");
                r.push_back(v);
            }
            rates.push_back(std::move(r));
        },
        &header);
    if (header.size() < 2) throw InputError("line 1: no neuron columns");
    for (std::size_t c = 1; c < header.size(); ++c)
        if (header[c] != "neuron_" + std::to_string(c))
            throw InputError("line 1: expected column 'neuron_" + std::to_string(c) + "', found '" + header[c] + "'");
    if (ids.empty()) throw InputError("no image rows");
    for (std::size_t a = 0; a < ids.size(); ++a)
        for (std::size_t b = 0; b < a; ++b)
            if (ids[a] == ids[b]) throw InputError("duplicate image id '" + ids[a] + "'");
    return FiringRateTable(std::move(ids), std::move(rates), floor);
}

inline void write_firing_rates_csv(std::ostream& out, const FiringRateTable& table) {
    out << "image_id";
    for (std::size_t d = 1; d <= table.neurons(); ++d) out << ",neuron_" << d;
    out << '\n';
    for (std::size_t a = 0; a < table.size(); ++a) {
        out << table.image(a);
        for (double v : table.rates(a)) out << ',' << format_double(v);
        out << '\n';
    }
}

inline void write_matrix_csv(std::ostream& out, const std::vector<std::string>& images,
                             const DissimilarityMatrix& matrix) {
    out << "odd_id,distractor_id,dstar,degenerate,floored_cells\n";
    for (const DissimilarityEntry& e : matrix.entries())
        out << images.at(e.odd) << ',' << images.at(e.distractor) << ',' << format_double(e.d_star) << ','
            << (e.degenerate ? 1 : 0) << ',' << e.floored_cells << '\n';
}

struct LoadedMatrix {
    std::vector<std::string> images;  // first-appearance order
    DissimilarityMatrix matrix{0, 3};
};

inline LoadedMatrix read_matrix_csv(std::istream& in, std::size_t k = 3) {
    struct Raw {
        std::string odd, distractor;
        double d_star;
        bool degenerate;
        std::size_t floored;
    };
    std::vector<Raw> raw;
    detail::read_csv(in, {"odd_id", "distractor_id", "dstar", "degenerate", "floored_cells"},
                     [&](const std::vector<std::string>& f, std::size_t line) {
                         const double ds = detail::parse_number(f[2], line, "dstar");
                         const double deg = detail::parse_number(f[3], line, "degenerate flag");
                         const double fl = detail::parse_number(f[4], line, "floored_cells");
                         if (deg != 0.0 && deg != 1.0)
                             throw InputError("line " + std::to_string(line) + ": degenerate must be 0 or 1");
                         raw.push_back({f[0], f[1], ds, deg == 1.0, static_cast<std::size_t>(fl)});
                     });
    LoadedMatrix out;
    std::map<std::string, std::size_t> index;
    auto intern = [&](const std::string& id) {
        auto [it, inserted] = index.try_emplace(id, out.images.size());
        if (inserted) out.images.push_back(id);
        return it->second;
    };
    for (const Raw& r : raw) {
        intern(r.odd);
        intern(r.distractor);
    }
    out.matrix = DissimilarityMatrix(out.images.size(), k);
    for (std::size_t a = 0; a < out.images.size(); ++a) {
        out.matrix.at(a, a).odd = a;
        out.matrix.at(a, a).distractor = a;
        out.matrix.at(a, a).degenerate = true;
    }
    for (const Raw& r : raw) {
        const std::size_t a = index.at(r.odd);
        const std::size_t b = index.at(r.distractor);
        out.matrix.at(a, b) = DissimilarityEntry{a, b, r.d_star, r.degenerate, r.floored};
    }
    return out;
}

/// Header `odd_id,distractor_id,delay`.
inline std::vector<SearchTrial> read_search_trials_csv(std::istream& in) {
    std::vector<SearchTrial> trials;
    detail::read_csv(in, {"odd_id", "distractor_id", "delay"},
                     [&](const std::vector<std::string>& f, std::size_t line) {
                         trials.push_back({f[0], f[1], detail::parse_number(f[2], line, "delay")});
                     });
    if (trials.empty()) throw InputError("no trial rows");
    return trials;
}

inline void write_search_trials_csv(std::ostream& out, const std::vector<SearchTrial>& trials) {
    out << "odd_id,distractor_id,delay\n";
    for (const SearchTrial& t : trials) out << t.odd_id << ',' << t.distractor_id << ',' << format_double(t.delay) << '\n';
}

inline nlohmann::ordered_json analysis_json(const SearchAnalysis& a) {
    nlohmann::ordered_json j;
    j["pearson_r"] = a.pearson_r;
    j["anova_f"] = a.anova_f;
    j["anova_p"] = a.anova_p;
    j["log_am_gm"] = a.log_am_gm;
    j["pairs"] = a.pairs;
    return j;
}

}  // namespace oddball

#endif  // ODDBALL_IO_HPP
