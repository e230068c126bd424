#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace paneldml {

/// Names of the columns that make up a long-format panel file.
struct ColumnSpec {
    std::string y;
    std::string d;
    std::vector<std::string> x;
    std::string panel_id;
    std::string time_id;
    std::optional<std::string> cluster_id;  // defaults to panel_id
    char delimiter = ',';
};

/// Column-wise observations before validation. Row order is arbitrary.
struct RawPanel {
    std::vector<std::string> panel_id;
    std::vector<long long> time_id;
    std::vector<std::string> cluster_id;  // empty -> use panel_id
    std::vector<double> y;
    std::vector<double> d;
    Eigen::MatrixXd x;  // n x p

    std::string y_name = "y";
    std::string d_name = "d";
    std::vector<std::string> x_names;
    std::string panel_name = "id";
    std::string time_name = "time";
    std::string cluster_name;  // empty -> panel_name
};

struct SubjectRange {
    std::string id;
    std::size_t begin = 0;
    std::size_t end = 0;
    int cluster = 0;

    std::size_t size() const { return end - begin; }
};

struct PanelInfo {
    std::size_t n_obs = 0;
    std::size_t n_subjects = 0;
    std::size_t n_groups = 0;

    bool operator==(const PanelInfo&) const = default;
};

namespace detail {

inline std::optional<long long> parse_integer(std::string_view s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_real(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Integer-looking ids sort numerically and before any other id, so "2" < "10".
inline bool panel_less(const std::string& a, const std::string& b) {
    auto ia = parse_integer(a);
    auto ib = parse_integer(b);
    if (ia && ib) return *ia < *ib;
    if (ia != ib && (ia || ib)) return ia.has_value();
    return a < b;
}

// Splits one delimited record. Double-quoted fields may contain the delimiter
// and "" escapes; embedded newlines are not supported.
inline std::vector<std::string> split_record(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace detail

/// Validated long-format panel, sorted by (panel id, time id). Immutable once
/// built; share freely across threads.
class PanelDataset {
public:
    /// Validates and sorts raw observations. Throws the DataError subclasses
    /// documented in errors.hpp.
    static PanelDataset build(RawPanel raw, bool strict_time_gaps = false);

    std::size_t n_obs() const { return static_cast<std::size_t>(y_.size()); }
    std::size_t n_covariates() const { return static_cast<std::size_t>(x_.cols()); }
    std::size_t n_subjects() const { return subjects_.size(); }
    std::size_t n_clusters() const { return cluster_labels_.size(); }

    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::VectorXd& d() const { return d_; }
    const Eigen::MatrixXd& x() const { return x_; }
    const std::vector<long long>& time_ids() const { return time_; }

    const std::vector<SubjectRange>& subjects() const { return subjects_; }
    /// Subject index (into subjects()) of every row.
    const std::vector<int>& subject_of_row() const { return subject_of_row_; }
    /// Dense cluster code of every row, in [0, n_clusters()).
    const std::vector<int>& cluster_of_row() const { return cluster_of_row_; }
    const std::vector<std::string>& cluster_labels() const { return cluster_labels_; }

    const std::string& y_name() const { return y_name_; }
    const std::string& d_name() const { return d_name_; }
    const std::vector<std::string>& x_names() const { return x_names_; }
    const std::string& panel_name() const { return panel_name_; }
    const std::string& time_name() const { return time_name_; }
    const std::string& cluster_name() const { return cluster_name_; }

    /// Copy with y replaced; rows keep the current (sorted) order.
    PanelDataset with_outcome(Eigen::VectorXd y) const {
        if (y.size() != y_.size()) throw DimensionMismatch("replacement outcome has wrong length");
        PanelDataset out = *this;
        out.y_ = std::move(y);
        return out;
    }

    /// Copy with the covariate matrix (and its names) replaced.
    PanelDataset with_covariates(Eigen::MatrixXd x, std::vector<std::string> names) const {
        if (x.rows() != x_.rows() || static_cast<Eigen::Index>(names.size()) != x.cols()) {
            throw DimensionMismatch("replacement covariates have wrong shape");
        }
        PanelDataset out = *this;
        out.x_ = std::move(x);
        out.x_names_ = std::move(names);
        return out;
    }

private:
    PanelDataset() = default;

    Eigen::VectorXd y_;
    Eigen::VectorXd d_;
    Eigen::MatrixXd x_;
    std::vector<long long> time_;
    std::vector<SubjectRange> subjects_;
    std::vector<int> subject_of_row_;
    std::vector<int> cluster_of_row_;
    std::vector<std::string> cluster_labels_;
    std::string y_name_, d_name_, panel_name_, time_name_, cluster_name_;
    std::vector<std::string> x_names_;
};

inline PanelDataset PanelDataset::build(RawPanel raw, bool strict_time_gaps) {
    const std::size_t n = raw.panel_id.size();
    if (raw.time_id.size() != n || raw.y.size() != n || raw.d.size() != n ||
        static_cast<std::size_t>(raw.x.rows()) != n ||
        (!raw.cluster_id.empty() && raw.cluster_id.size() != n)) {
        throw DimensionMismatch("panel columns have inconsistent lengths");
    }
    if (n == 0) throw DataError("panel has no observations");
    if (raw.x_names.empty()) {
        for (Eigen::Index j = 0; j < raw.x.cols(); ++j) raw.x_names.push_back("X" + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(raw.x_names.size()) != raw.x.cols()) {
        throw DimensionMismatch("covariate names do not match covariate count");
    }
    for (std::size_t i = 0; i < n; ++i) {
        bool ok = std::isfinite(raw.y[i]) && std::isfinite(raw.d[i]) && raw.x.row(i).allFinite();
        if (!ok) throw NonFiniteInput("missing or non-finite value at row " + std::to_string(i + 1));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = raw.panel_id[a];
        const auto& pb = raw.panel_id[b];
        if (pa != pb) return detail::panel_less(pa, pb);
        return raw.time_id[a] < raw.time_id[b];
    });

    PanelDataset out;
    const auto p = raw.x.cols();
    out.y_.resize(n);
    out.d_.resize(n);
    out.x_.resize(n, p);
    out.time_.resize(n);
    out.subject_of_row_.resize(n);
    out.cluster_of_row_.resize(n);

    std::map<std::string, int> cluster_code;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t src = order[r];
        out.y_[r] = raw.y[src];
        out.d_[r] = raw.d[src];
        out.x_.row(r) = raw.x.row(src);
        out.time_[r] = raw.time_id[src];

        const std::string& pid = raw.panel_id[src];
        const std::string& cid = raw.cluster_id.empty() ? pid : raw.cluster_id[src];
        auto [it, inserted] = cluster_code.try_emplace(cid, static_cast<int>(out.cluster_labels_.size()));
        if (inserted) out.cluster_labels_.push_back(cid);

        if (out.subjects_.empty() || out.subjects_.back().id != pid) {
            out.subjects_.push_back({pid, r, r, it->second});
        } else {
            auto& s = out.subjects_.back();
            if (out.time_[r] == out.time_[r - 1]) throw DuplicateKey(pid, out.time_[r]);
            if (s.cluster != it->second) throw ClusterSplitsSubject(pid);
            if (strict_time_gaps && out.time_[r] != out.time_[r - 1] + 1) {
                throw GapInSeries(pid, out.time_[r - 1], out.time_[r]);
            }
        }
        out.subjects_.back().end = r + 1;
        out.subject_of_row_[r] = static_cast<int>(out.subjects_.size() - 1);
        out.cluster_of_row_[r] = it->second;
    }
    for (const auto& s : out.subjects_) {
        if (s.size() < 2) throw SingletonSubject(s.id);
    }

    out.y_name_ = std::move(raw.y_name);
    out.d_name_ = std::move(raw.d_name);
    out.x_names_ = std::move(raw.x_names);
    out.panel_name_ = std::move(raw.panel_name);
    out.time_name_ = std::move(raw.time_name);
    out.cluster_name_ = raw.cluster_name.empty() ? out.panel_name_ : std::move(raw.cluster_name);
    return out;
}

inline PanelInfo panel_info(const PanelDataset& data) {
    return {data.n_obs(), data.n_subjects(), data.n_clusters()};
}

/// Reads a delimited long-format table with one header row.
inline PanelDataset load_long_table(std::istream& in, const ColumnSpec& spec,
                                    bool strict_time_gaps = false) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("input is empty (header row expected)");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = detail::split_record(line, spec.delimiter);
    for (auto& h : header) h = detail::trim(h);
    auto column = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw MissingColumn(name);
        return static_cast<std::size_t>(it - header.begin());
    };

    const std::size_t c_panel = column(spec.panel_id);
    const std::size_t c_time = column(spec.time_id);
    const std::size_t c_y = column(spec.y);
    const std::size_t c_d = column(spec.d);
    const std::size_t c_cluster = spec.cluster_id ? column(*spec.cluster_id) : c_panel;
    std::vector<std::size_t> c_x;
    for (const auto& name : spec.x) c_x.push_back(column(name));

    RawPanel raw;
    std::vector<double> xbuf;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ++row;
        auto cells = detail::split_record(line, spec.delimiter);
        if (cells.size() != header.size()) {
            throw DataError("data row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " fields, header has " + std::to_string(header.size()));
        }
        auto real = [&](std::size_t c) {
            auto v = detail::parse_real(cells[c]);
            if (!v) throw NonNumericCell(row, header[c], cells[c]);
            return *v;
        };
        raw.panel_id.push_back(detail::trim(cells[c_panel]));
        auto t = detail::parse_integer(detail::trim(cells[c_time]));
        if (!t) throw NonNumericCell(row, header[c_time], cells[c_time]);
        raw.time_id.push_back(*t);
        raw.cluster_id.push_back(detail::trim(cells[c_cluster]));
        raw.y.push_back(real(c_y));
        raw.d.push_back(real(c_d));
        for (std::size_t c : c_x) xbuf.push_back(real(c));
    }

    const auto p = static_cast<Eigen::Index>(c_x.size());
    raw.x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        xbuf.data(), static_cast<Eigen::Index>(row), p);
    raw.y_name = spec.y;
    raw.d_name = spec.d;
    raw.x_names = spec.x;
    raw.panel_name = spec.panel_id;
    raw.time_name = spec.time_id;
    raw.cluster_name = spec.cluster_id.value_or(spec.panel_id);
    return PanelDataset::build(std::move(raw), strict_time_gaps);
}

inline PanelDataset load_long_table(const std::string& path, const ColumnSpec& spec,
                                    bool strict_time_gaps = false) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return load_long_table(in, spec, strict_time_gaps);
}

}  // namespace paneldml
