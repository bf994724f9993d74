#include "fairaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "fairaudit/canonical_json.hpp"
#include "fairaudit/rng.hpp"

namespace fairaudit {

namespace {

std::string trim(const std::string& text) {
    auto begin = text.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    auto end = text.find_last_not_of(" \t");
    return text.substr(begin, end - begin + 1);
}

double parse_double(const std::string& raw, std::size_t row, const std::string& column) {
    std::string t = trim(raw);
    require(!t.empty(), ErrorCode::MissingValue,
            "empty value in column '" + column + "' at data row " + std::to_string(row + 1));
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value)) {
        fail(ErrorCode::UnparsableNumeric, "cannot parse '" + raw + "' in column '" + column +
                                               "' at data row " + std::to_string(row + 1));
    }
    return value;
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::set<std::string> distinct_values(const std::vector<std::string>& column) {
    return {column.begin(), column.end()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Schema

void Schema::validate() const {
    require(!protected_column.empty() && !label_column.empty(), ErrorCode::InvalidSchema,
            "protected and label columns are required");
    std::set<std::string> names{protected_column, label_column};
    for (const auto& f : feature_columns) {
        require(f.name != protected_column && f.name != label_column, ErrorCode::InvalidSchema,
                "feature '" + f.name + "' collides with protected or label column");
        require(names.insert(f.name).second, ErrorCode::InvalidSchema,
                "duplicate column name '" + f.name + "'");
    }
    if (decision_column) {
        require(names.insert(*decision_column).second, ErrorCode::InvalidSchema,
                "decision column '" + *decision_column + "' collides with another declared column");
    }
}

const FeatureSpec* Schema::find_feature(const std::string& name) const {
    for (const auto& f : feature_columns) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

Schema Schema::from_json(const nlohmann::json& doc) {
    require(doc.is_object(), ErrorCode::InvalidSchema, "schema document must be a JSON object");
    Schema s;
    try {
        s.protected_column = doc.at("protected").at("column").get<std::string>();
        s.protected_value = doc.at("protected").at("value").get<std::string>();
        s.label_column = doc.at("label").at("column").get<std::string>();
        s.positive_label = doc.at("label").at("positive").get<std::string>();
        for (const auto& f : doc.value("features", nlohmann::json::array())) {
            FeatureSpec spec;
            spec.name = f.at("name").get<std::string>();
            std::string kind = f.at("kind").get<std::string>();
            if (kind == "numeric") {
                spec.kind = FeatureKind::numeric;
            } else if (kind == "categorical") {
                spec.kind = FeatureKind::categorical;
            } else {
                fail(ErrorCode::InvalidSchema, "unknown feature kind '" + kind + "'");
            }
            s.feature_columns.push_back(std::move(spec));
        }
        if (doc.contains("decision") && !doc.at("decision").is_null()) {
            s.decision_column = doc.at("decision").at("column").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidSchema, std::string("malformed schema document: ") + e.what());
    }
    s.validate();
    return s;
}

Schema Schema::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::IoError, "cannot open schema file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidSchema, std::string("schema is not valid JSON: ") + e.what());
    }
    return from_json(doc);
}

nlohmann::json Schema::to_json() const {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& f : feature_columns) {
        features.push_back({{"name", f.name},
                            {"kind", f.kind == FeatureKind::numeric ? "numeric" : "categorical"}});
    }
    nlohmann::json doc{{"protected", {{"column", protected_column}, {"value", protected_value}}},
                       {"label", {{"column", label_column}, {"positive", positive_label}}},
                       {"features", features}};
    if (decision_column) doc["decision"] = {{"column", *decision_column}};
    return doc;
}

// ---------------------------------------------------------------------------
// Stratification

Stratification Stratification::exact_on(std::vector<std::string> columns) {
    Stratification s;
    s.strategy = Strategy::exact;
    s.columns = std::move(columns);
    return s;
}

Stratification Stratification::quantile_bins(std::vector<std::string> columns, int bins) {
    Stratification s;
    s.strategy = Strategy::quantile;
    s.columns = std::move(columns);
    s.bins = bins;
    return s;
}

Stratification Stratification::from_json(const nlohmann::json& doc) {
    require(doc.is_object(), ErrorCode::InvalidConfig, "stratification must be a JSON object");
    std::string strategy = doc.value("strategy", "");
    std::vector<std::string> columns;
    for (const auto& c : doc.value("columns", nlohmann::json::array())) {
        columns.push_back(c.get<std::string>());
    }
    require(!columns.empty(), ErrorCode::InvalidConfig, "stratification needs at least one column");
    if (strategy == "exact") return exact_on(columns);
    if (strategy == "quantile") return quantile_bins(columns, doc.value("bins", 0));
    fail(ErrorCode::InvalidConfig, "unknown stratification strategy '" + strategy + "'");
}

nlohmann::json Stratification::to_json() const {
    nlohmann::json doc{{"strategy", strategy == Strategy::exact ? "exact" : "quantile"},
                       {"columns", columns}};
    if (strategy == Strategy::quantile) doc["bins"] = bins;
    return doc;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::load_csv(const std::string& path, const Schema& schema) {
    return from_table(schema, csv::read_file(path));
}

Dataset Dataset::from_table(const Schema& schema, csv::Table table) {
    schema.validate();
    Dataset d;
    d.schema_ = schema;
    d.n_ = table.rows.size();

    for (std::size_t j = 0; j < table.header.size(); ++j) {
        const std::string& name = table.header[j];
        require(!d.columns_.count(name), ErrorCode::InvalidSchema,
                "duplicate column '" + name + "' in file header");
        d.column_order_.push_back(name);
        auto& col = d.columns_[name];
        col.reserve(d.n_);
        for (const auto& row : table.rows) col.push_back(row[j]);
    }

    auto need = [&](const std::string& name) -> const std::vector<std::string>& {
        auto it = d.columns_.find(name);
        require(it != d.columns_.end(), ErrorCode::MissingColumn,
                "column '" + name + "' not present in file");
        return it->second;
    };

    // Protected coding.
    const auto& prot = need(schema.protected_column);
    auto prot_values = distinct_values(prot);
    require(prot_values.size() <= 2, ErrorCode::NonBinaryProtected,
            "protected column '" + schema.protected_column + "' has " +
                std::to_string(prot_values.size()) + " distinct values");
    d.s_.reserve(d.n_);
    for (std::size_t i = 0; i < d.n_; ++i) {
        require(!trim(prot[i]).empty(), ErrorCode::MissingValue,
                "empty protected value at data row " + std::to_string(i + 1));
        d.s_.push_back(prot[i] == schema.protected_value ? 1 : 0);
    }

    // Label coding.
    const auto& label = need(schema.label_column);
    auto label_values = distinct_values(label);
    require(label_values.size() <= 2, ErrorCode::NonBinaryLabel,
            "label column '" + schema.label_column + "' has " +
                std::to_string(label_values.size()) + " distinct values");
    d.y_.reserve(d.n_);
    for (std::size_t i = 0; i < d.n_; ++i) {
        require(!trim(label[i]).empty(), ErrorCode::MissingValue,
                "empty label at data row " + std::to_string(i + 1));
        d.y_.push_back(label[i] == schema.positive_label ? 1 : 0);
    }

    // Features.
    for (const auto& f : schema.feature_columns) {
        const auto& col = need(f.name);
        if (f.kind == FeatureKind::numeric) {
            auto& parsed = d.numeric_features_[f.name];
            parsed.reserve(d.n_);
            for (std::size_t i = 0; i < d.n_; ++i) parsed.push_back(parse_double(col[i], i, f.name));
        } else {
            for (std::size_t i = 0; i < d.n_; ++i) {
                require(!trim(col[i]).empty(), ErrorCode::MissingValue,
                        "empty value in column '" + f.name + "' at data row " + std::to_string(i + 1));
            }
        }
    }

    // Recorded decisions, when declared. Accepts either the schema's positive
    // literal or a plain 0/1 coding.
    if (schema.decision_column) {
        const auto& col = need(*schema.decision_column);
        auto values = distinct_values(col);
        require(values.size() <= 2, ErrorCode::NonBinaryDecision,
                "decision column '" + *schema.decision_column + "' has " +
                    std::to_string(values.size()) + " distinct values");
        std::string positive;
        if (values.count(schema.positive_label)) {
            positive = schema.positive_label;
        } else {
            for (const auto& v : values) {
                require(v == "0" || v == "1", ErrorCode::NonBinaryDecision,
                        "decision column value '" + v + "' is neither the positive literal nor 0/1");
            }
            positive = "1";
        }
        std::vector<int> a;
        a.reserve(d.n_);
        for (std::size_t i = 0; i < d.n_; ++i) a.push_back(col[i] == positive ? 1 : 0);
        d.decision_ = std::move(a);
    }

    // Weights: reserved sidecar column, defaulting to 1.
    if (d.columns_.count(kWeightColumn)) {
        const auto& col = d.columns_.at(kWeightColumn);
        d.weights_.reserve(d.n_);
        for (std::size_t i = 0; i < d.n_; ++i) {
            double w = parse_double(col[i], i, kWeightColumn);
            require(w >= 0.0, ErrorCode::InvalidParam,
                    "negative weight at data row " + std::to_string(i + 1));
            d.weights_.push_back(w);
        }
    } else {
        d.weights_.assign(d.n_, 1.0);
    }

    require(d.n_ >= 1, ErrorCode::InvalidParam, "dataset has no rows");
    require(d.group_count(1) >= 1, ErrorCode::EmptyGroup, "no rows with S=1 after coding");
    require(d.group_count(0) >= 1, ErrorCode::EmptyGroup, "no rows with S=0 after coding");
    return d;
}

std::size_t Dataset::group_count(int s_value) const {
    std::size_t count = 0;
    for (int v : s_) count += (v == s_value);
    return count;
}

double Dataset::group_weight(int s_value) const {
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        if (s_[i] == s_value) total += weights_[i];
    }
    return total;
}

double Dataset::total_weight() const {
    double total = 0.0;
    for (double w : weights_) total += w;
    return total;
}

bool Dataset::has_column(const std::string& name) const { return columns_.count(name) > 0; }

const std::vector<std::string>& Dataset::raw_column(const std::string& name) const {
    auto it = columns_.find(name);
    require(it != columns_.end(), ErrorCode::UnknownColumn, "no column named '" + name + "'");
    return it->second;
}

const std::vector<double>& Dataset::numeric_feature(const std::string& name) const {
    auto it = numeric_features_.find(name);
    require(it != numeric_features_.end(), ErrorCode::UnknownColumn,
            "'" + name + "' is not a numeric feature");
    return it->second;
}

std::vector<double> Dataset::binary_column(const std::string& name) const {
    const auto& raw = raw_column(name);
    std::vector<double> out;
    out.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        if (raw[i] == "1" || raw[i] == schema_.positive_label) {
            out.push_back(1.0);
        } else if (raw[i] == "0") {
            out.push_back(0.0);
        } else {
            fail(ErrorCode::InvalidOutcome, "column '" + name + "' is not 0/1 coded at data row " +
                                                std::to_string(i + 1));
        }
    }
    return out;
}

csv::Table Dataset::to_table() const {
    csv::Table table;
    table.header = column_order_;
    bool unit_weights = std::all_of(weights_.begin(), weights_.end(),
                                    [](double w) { return w == 1.0; });
    bool emit_weights = !unit_weights && !columns_.count(kWeightColumn);
    if (emit_weights) table.header.push_back(kWeightColumn);
    table.rows.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        std::vector<std::string> row;
        row.reserve(table.header.size());
        for (const auto& name : column_order_) row.push_back(columns_.at(name)[i]);
        if (emit_weights) row.push_back(format_double(weights_[i]));
        table.rows.push_back(std::move(row));
    }
    return table;
}

void Dataset::write_csv(const std::string& path) const { csv::write_file(path, to_table()); }

Dataset Dataset::with_weights(std::vector<double> weights) const {
    require(weights.size() == n_, ErrorCode::InvalidParam, "weight vector length mismatch");
    csv::Table table = to_table();
    Dataset d = from_table(schema_, std::move(table));
    for (double w : weights) {
        require(w >= 0.0 && std::isfinite(w), ErrorCode::InvalidParam, "weights must be finite and >= 0");
    }
    d.weights_ = std::move(weights);
    // Refresh the stored weight column so a write/reload round-trips.
    if (d.columns_.count(kWeightColumn)) {
        auto& col = d.columns_[kWeightColumn];
        for (std::size_t i = 0; i < d.n_; ++i) col[i] = format_double(d.weights_[i]);
    } else {
        d.column_order_.push_back(kWeightColumn);
        auto& col = d.columns_[kWeightColumn];
        col.reserve(d.n_);
        for (std::size_t i = 0; i < d.n_; ++i) col.push_back(format_double(d.weights_[i]));
    }
    return d;
}

Dataset Dataset::with_labels(const std::vector<int>& labels) const {
    require(labels.size() == n_, ErrorCode::InvalidParam, "label vector length mismatch");
    std::string negative_literal;
    for (std::size_t i = 0; i < n_; ++i) {
        if (y_[i] == 0) {
            negative_literal = columns_.at(schema_.label_column)[i];
            break;
        }
    }
    csv::Table table = to_table();
    std::size_t label_idx = 0;
    while (table.header[label_idx] != schema_.label_column) ++label_idx;
    for (std::size_t i = 0; i < n_; ++i) {
        require(labels[i] == 0 || labels[i] == 1, ErrorCode::InvalidParam, "labels must be 0/1");
        if (labels[i] == 1) {
            table.rows[i][label_idx] = schema_.positive_label;
        } else {
            require(!negative_literal.empty(), ErrorCode::InvalidParam,
                    "cannot demote rows: no negative label literal present in the data");
            table.rows[i][label_idx] = negative_literal;
        }
    }
    return from_table(schema_, std::move(table));
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    csv::Table table;
    table.header = column_order_;
    table.rows.reserve(rows.size());
    for (std::size_t i : rows) {
        require(i < n_, ErrorCode::InvalidParam, "row index out of range");
        std::vector<std::string> row;
        row.reserve(column_order_.size());
        for (const auto& name : column_order_) row.push_back(columns_.at(name)[i]);
        table.rows.push_back(std::move(row));
    }
    Dataset d = from_table(schema_, std::move(table));
    std::vector<double> w;
    w.reserve(rows.size());
    for (std::size_t i : rows) w.push_back(weights_[i]);
    d.weights_ = std::move(w);
    return d;
}

std::string Dataset::fingerprint() const {
    std::string bytes = canonical_dump(schema_.to_json());
    for (const auto& name : column_order_) {
        bytes += '\x1f';
        bytes += name;
        for (const auto& v : columns_.at(name)) {
            bytes += '\x1e';
            bytes += v;
        }
    }
    bytes += '\x1f';
    for (double w : weights_) {
        bytes += format_double(w);
        bytes += ';';
    }
    return fnv1a_hex(bytes);
}

// ---------------------------------------------------------------------------
// split / stratify

std::pair<Dataset, Dataset> split(const Dataset& d, double holdout_fraction, std::uint64_t seed) {
    require(holdout_fraction > 0.0 && holdout_fraction < 1.0, ErrorCode::InvalidParam,
            "holdout fraction must lie in (0, 1)");
    require(d.n() >= 4, ErrorCode::InvalidParam, "need at least 4 rows to split");

    std::vector<std::vector<std::size_t>> cells(4);
    for (std::size_t i = 0; i < d.n(); ++i) {
        cells[static_cast<std::size_t>(d.s()[i]) * 2 + static_cast<std::size_t>(d.y()[i])].push_back(i);
    }

    Rng rng(seed);
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> holdout_rows;
    for (auto& cell : cells) {
        if (cell.empty()) continue;
        auto take = static_cast<std::size_t>(
            std::llround(holdout_fraction * static_cast<double>(cell.size())));
        require(take < cell.size(), ErrorCode::DegenerateSplit,
                "an (s, y) cell of size " + std::to_string(cell.size()) +
                    " would leave the training side empty");
        rng.shuffle(cell);
        for (std::size_t k = 0; k < cell.size(); ++k) {
            (k < take ? holdout_rows : train_rows).push_back(cell[k]);
        }
    }
    require(!holdout_rows.empty(), ErrorCode::DegenerateSplit, "holdout side is empty");
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(holdout_rows.begin(), holdout_rows.end());
    return {d.subset(train_rows), d.subset(holdout_rows)};
}

std::vector<double> quantile_boundaries(std::vector<double> values, int bins) {
    std::sort(values.begin(), values.end());
    std::vector<double> bounds;
    auto n = static_cast<std::size_t>(values.size());
    for (int j = 1; j < bins; ++j) {
        auto rank = static_cast<std::size_t>(
            std::ceil(static_cast<double>(j) * static_cast<double>(n) / bins));
        if (rank == 0) rank = 1;
        bounds.push_back(values[rank - 1]);
    }
    return bounds;
}

int quantile_bin(double x, const std::vector<double>& boundaries) {
    int bin = 0;
    for (double b : boundaries) bin += (x > b) ? 1 : 0;  // ties fall into the lower bin
    return bin;
}

std::vector<Stratum> stratify(const Dataset& d, const Stratification& spec) {
    require(!spec.columns.empty(), ErrorCode::InvalidParam, "stratification needs columns");
    std::map<std::string, std::vector<std::size_t>> groups;

    if (spec.strategy == Stratification::Strategy::exact) {
        std::vector<const std::vector<std::string>*> cols;
        for (const auto& name : spec.columns) cols.push_back(&d.raw_column(name));
        for (std::size_t i = 0; i < d.n(); ++i) {
            std::string key;
            for (std::size_t c = 0; c < cols.size(); ++c) {
                if (c) key += '|';
                key += spec.columns[c] + "=" + (*cols[c])[i];
            }
            groups[key].push_back(i);
        }
    } else {
        require(spec.bins >= 2, ErrorCode::InvalidParam, "quantile binning needs at least 2 bins");
        std::vector<const std::vector<double>*> cols;
        std::vector<std::vector<double>> bounds;
        for (const auto& name : spec.columns) {
            require(d.has_column(name), ErrorCode::UnknownColumn, "no column named '" + name + "'");
            const FeatureSpec* f = d.schema().find_feature(name);
            require(f != nullptr && f->kind == FeatureKind::numeric,
                    ErrorCode::NonNumericQuantileColumn,
                    "quantile stratification requires numeric feature columns ('" + name + "')");
            cols.push_back(&d.numeric_feature(name));
            bounds.push_back(quantile_boundaries(*cols.back(), spec.bins));
        }
        for (std::size_t i = 0; i < d.n(); ++i) {
            std::string key;
            for (std::size_t c = 0; c < cols.size(); ++c) {
                if (c) key += '|';
                key += spec.columns[c] + "[" +
                       std::to_string(quantile_bin((*cols[c])[i], bounds[c])) + "]";
            }
            groups[key].push_back(i);
        }
    }

    std::vector<Stratum> strata;
    std::size_t covered = 0;
    for (auto& [key, rows] : groups) {
        covered += rows.size();
        strata.push_back({key, std::move(rows)});
    }
    require(covered == d.n(), ErrorCode::InvalidParam, "stratification failed to partition rows");
    return strata;
}

}  // namespace fairaudit
