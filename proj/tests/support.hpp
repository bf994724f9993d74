#pragma once

// Shared builders for the test suites: in-memory datasets and small random
// instances for property-style checks.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "fairaudit/dataset.hpp"
#include "fairaudit/rng.hpp"

namespace fairaudit::testing {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct DatasetSpec {
    std::vector<int> s;
    std::vector<int> y;
    // name -> (kind, values)
    std::vector<std::tuple<std::string, FeatureKind, std::vector<std::string>>> features;
    std::vector<double> weights;  // optional
};

inline Dataset build(const DatasetSpec& spec) {
    Schema schema;
    schema.protected_column = "group";
    schema.protected_value = "a";
    schema.label_column = "label";
    schema.positive_label = "1";
    for (const auto& [name, kind, values] : spec.features) {
        schema.feature_columns.push_back({name, kind});
    }

    csv::Table table;
    table.header = {"group", "label"};
    for (const auto& [name, kind, values] : spec.features) table.header.push_back(name);
    if (!spec.weights.empty()) table.header.push_back(kWeightColumn);
    for (std::size_t i = 0; i < spec.s.size(); ++i) {
        std::vector<std::string> row{spec.s[i] == 1 ? "a" : "b", spec.y[i] == 1 ? "1" : "0"};
        for (const auto& [name, kind, values] : spec.features) row.push_back(values[i]);
        if (!spec.weights.empty()) row.push_back(num(spec.weights[i]));
        table.rows.push_back(std::move(row));
    }
    return Dataset::from_table(schema, std::move(table));
}

/// n1 protected rows with k1 positives first, then n0 favored with k0.
inline Dataset two_group(std::size_t n1, std::size_t k1, std::size_t n0, std::size_t k0) {
    DatasetSpec spec;
    for (std::size_t i = 0; i < n1; ++i) {
        spec.s.push_back(1);
        spec.y.push_back(i < k1 ? 1 : 0);
    }
    for (std::size_t i = 0; i < n0; ++i) {
        spec.s.push_back(0);
        spec.y.push_back(i < k0 ? 1 : 0);
    }
    return build(spec);
}

/// Random small dataset: one numeric feature, one categorical "bucket"
/// column usable for stratification, random weights, both groups present.
inline Dataset random_dataset(Rng& rng, std::size_t max_n = 200, bool random_weights = true) {
    std::size_t n = 8 + rng.below(max_n - 7);
    DatasetSpec spec;
    int levels = 2 + static_cast<int>(rng.below(3));
    std::vector<std::string> bucket, x;
    for (std::size_t i = 0; i < n; ++i) {
        int s = i == 0 ? 1 : i == 1 ? 0 : (rng.bernoulli(0.5) ? 1 : 0);
        spec.s.push_back(s);
        spec.y.push_back(rng.bernoulli(0.3 + 0.2 * s) ? 1 : 0);
        bucket.push_back("b" + std::to_string(rng.below(static_cast<std::uint64_t>(levels))));
        x.push_back(num(rng.normal()));
        spec.weights.push_back(random_weights ? 0.25 + rng.uniform01() * 2.0 : 1.0);
    }
    spec.features.push_back({"x", FeatureKind::numeric, x});
    spec.features.push_back({"bucket", FeatureKind::categorical, bucket});
    return build(spec);
}

}  // namespace fairaudit::testing
