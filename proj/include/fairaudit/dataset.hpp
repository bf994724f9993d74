#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairaudit/csv.hpp"
#include "fairaudit/errors.hpp"

namespace fairaudit {

enum class FeatureKind { numeric, categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
};

/// Column declarations for a tabular audit: which column carries protected
/// group membership (S), which carries the binary target (Y), which literal
/// codes S=1 / Y=1, and which columns are model features. An optional
/// decision column holds recorded decisions (A) for decision-level audits.
struct Schema {
    std::string protected_column;
    std::string protected_value;
    std::string label_column;
    std::string positive_label;
    std::vector<FeatureSpec> feature_columns;
    std::optional<std::string> decision_column;

    void validate() const;
    const FeatureSpec* find_feature(const std::string& name) const;

    static Schema from_json(const nlohmann::json& doc);
    static Schema load(const std::string& path);
    nlohmann::json to_json() const;
};

/// How to partition rows when controlling for non-protected attributes:
/// exact grouping on column value tuples, or quantile binning of numeric
/// columns. Quantile boundaries sit at the empirical j/k quantiles
/// (nearest-rank); values equal to a boundary fall into the lower bin.
struct Stratification {
    enum class Strategy { exact, quantile };
    Strategy strategy = Strategy::exact;
    std::vector<std::string> columns;
    int bins = 0;  // quantile strategy only

    static Stratification exact_on(std::vector<std::string> columns);
    static Stratification quantile_bins(std::vector<std::string> columns, int bins);
    static Stratification from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

struct Stratum {
    std::string key;
    std::vector<std::size_t> rows;
};

/// Immutable tabular data with derived S/Y codings and per-row weights.
/// All columns from the source file are retained verbatim so that writing
/// and reloading a dataset round-trips exactly.
class Dataset {
  public:
    static Dataset load_csv(const std::string& path, const Schema& schema);
    static Dataset from_table(const Schema& schema, csv::Table table);

    const Schema& schema() const { return schema_; }
    std::size_t n() const { return n_; }
    const std::vector<int>& s() const { return s_; }
    const std::vector<int>& y() const { return y_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::optional<std::vector<int>>& decision() const { return decision_; }

    std::size_t group_count(int s_value) const;
    double group_weight(int s_value) const;
    double total_weight() const;

    bool has_column(const std::string& name) const;
    const std::vector<std::string>& raw_column(const std::string& name) const;
    /// Parsed values of a numeric feature column.
    const std::vector<double>& numeric_feature(const std::string& name) const;
    /// Strict 0/1 parse of any column (used for sub-target outcome columns).
    std::vector<double> binary_column(const std::string& name) const;

    csv::Table to_table() const;
    void write_csv(const std::string& path) const;

    /// Copies with one aspect replaced; validation is re-run.
    Dataset with_weights(std::vector<double> weights) const;
    Dataset with_labels(const std::vector<int>& labels) const;
    Dataset subset(const std::vector<std::size_t>& rows) const;

    /// Content hash covering schema, all columns, and weights.
    std::string fingerprint() const;

  private:
    Dataset() = default;

    Schema schema_;
    std::vector<std::string> column_order_;
    std::map<std::string, std::vector<std::string>> columns_;
    std::map<std::string, std::vector<double>> numeric_features_;
    std::vector<int> s_;
    std::vector<int> y_;
    std::optional<std::vector<int>> decision_;
    std::vector<double> weights_;
    std::size_t n_ = 0;
};

/// Name of the reserved weights column used when a dataset with non-unit
/// weights is written to CSV.
inline constexpr const char* kWeightColumn = "_weight";

/// Deterministic holdout split, stratified on (s, y): every cell's holdout
/// count is round(fraction * cell size), so each cell's share is within one
/// row of the requested fraction.
std::pair<Dataset, Dataset> split(const Dataset& d, double holdout_fraction, std::uint64_t seed);

/// Partition rows per the stratification spec. The result is always a
/// partition of [0, n); this is checked on every call.
std::vector<Stratum> stratify(const Dataset& d, const Stratification& spec);

/// Nearest-rank empirical quantile boundaries b_j = sorted[ceil(j*n/k) - 1]
/// for j = 1..k-1, and the matching bin assignment (values equal to a
/// boundary fall into the lower bin).
std::vector<double> quantile_boundaries(std::vector<double> values, int bins);
int quantile_bin(double x, const std::vector<double>& boundaries);

}  // namespace fairaudit
