#include "churn/error.hpp"
#include "churn/preprocess.hpp"
#include "churn/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace churn::preprocess {
namespace {

// Guards against 0.1 * 10 landing a hair under 1.
std::size_t floor_part(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

// Tops up per-class counts so they sum to `total`, one extra unit at a time
// to the class with the largest unmet fractional quota (ties: lower class).
void apportion(std::array<std::size_t, 2>& counts, const std::array<double, 2>& quotas,
               const std::array<std::size_t, 2>& capacity, std::size_t total) {
    std::size_t assigned = counts[0] + counts[1];
    while (assigned < total) {
        int best = -1;
        double best_gap = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < 2; ++k) {
            if (counts[k] >= capacity[k]) continue;
            const double gap = quotas[k] - static_cast<double>(counts[k]);
            if (gap > best_gap) {
                best_gap = gap;
                best = k;
            }
        }
        if (best < 0) break;
        ++counts[best];
        ++assigned;
    }
}

}  // namespace

void SplitSpec::validate() const {
    for (double f : {train_fraction, test_fraction, validation_fraction}) {
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fractions must each lie in (0, 1)");
    }
    if (std::abs(train_fraction + test_fraction + validation_fraction - 1.0) > 1e-12) {
        throw ConfigError("split fractions must sum to 1");
    }
}

PartSizes part_sizes(std::size_t n, const SplitSpec& spec) {
    PartSizes sizes;
    sizes.train = floor_part(spec.train_fraction, n);
    sizes.validation = floor_part(spec.validation_fraction, n);
    sizes.test = n - sizes.train - sizes.validation;
    return sizes;
}

SplitIndices split_indices(std::span<const int> labels, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = labels.size();
    if (n < 3) throw ConfigError("split needs at least 3 rows, got " + std::to_string(n));

    const PartSizes sizes = part_sizes(n, spec);
    if (sizes.train == 0) throw ConfigError("split: train part empty for " + std::to_string(n) + " rows");
    if (sizes.validation == 0) throw ConfigError("split: validation part empty for " + std::to_string(n) + " rows");
    if (sizes.test == 0) throw ConfigError("split: test part empty for " + std::to_string(n) + " rows");

    Rng rng(spec.seed);
    SplitIndices out;

    if (!spec.stratified) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(std::span(order), rng);
        const auto train_end = order.begin() + static_cast<std::ptrdiff_t>(sizes.train);
        const auto val_end = train_end + static_cast<std::ptrdiff_t>(sizes.validation);
        out.train.assign(order.begin(), train_end);
        out.validation.assign(train_end, val_end);
        out.test.assign(val_end, order.end());
        return out;
    }

    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y != 0 && y != 1) throw SchemaError("split: labels must be 0 or 1");
        by_class[static_cast<std::size_t>(y)].push_back(i);
    }

    // Part totals follow the unstratified floor rule; each class receives
    // floor(fraction * class_count) plus at most one unit of the leftover.
    std::array<std::size_t, 2> class_n{by_class[0].size(), by_class[1].size()};
    std::array<double, 2> train_quota{}, val_quota{};
    std::array<std::size_t, 2> train_c{}, val_c{};
    for (int k = 0; k < 2; ++k) {
        train_quota[k] = spec.train_fraction * static_cast<double>(class_n[k]);
        val_quota[k] = spec.validation_fraction * static_cast<double>(class_n[k]);
        train_c[k] = floor_part(spec.train_fraction, class_n[k]);
        val_c[k] = floor_part(spec.validation_fraction, class_n[k]);
    }
    apportion(train_c, train_quota, class_n, sizes.train);
    std::array<std::size_t, 2> remaining{class_n[0] - train_c[0], class_n[1] - train_c[1]};
    for (int k = 0; k < 2; ++k) val_c[k] = std::min(val_c[k], remaining[k]);
    apportion(val_c, val_quota, remaining, sizes.validation);

    for (int k = 0; k < 2; ++k) {
        auto& idx = by_class[k];
        shuffle(std::span(idx), rng);
        const auto train_end = idx.begin() + static_cast<std::ptrdiff_t>(train_c[k]);
        const auto val_end = train_end + static_cast<std::ptrdiff_t>(val_c[k]);
        out.train.insert(out.train.end(), idx.begin(), train_end);
        out.validation.insert(out.validation.end(), train_end, val_end);
        out.test.insert(out.test.end(), val_end, idx.end());
    }
    shuffle(std::span(out.train), rng);
    shuffle(std::span(out.validation), rng);
    shuffle(std::span(out.test), rng);
    return out;
}

DatasetSplit split(const NumericDataset& dataset, const SplitSpec& spec) {
    const auto idx = split_indices(dataset.labels, spec);
    return {dataset.subset(idx.train), dataset.subset(idx.test), dataset.subset(idx.validation)};
}

}  // namespace churn::preprocess
