#include "churn/error.hpp"
#include "churn/pipeline.hpp"
#include "churn/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace churn::pipeline {
namespace {

using tabular::CellValue;
using tabular::ColumnKind;

template <std::size_t N>
const char* pick(Rng& rng, const std::array<const char*, N>& values, const std::array<double, N>& weights) {
    double u = uniform01(rng) * std::accumulate(weights.begin(), weights.end(), 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        if (u < weights[i]) return values[i];
        u -= weights[i];
    }
    return values[N - 1];
}

// Exponential count with the given mean, floored.
double count_with_mean(Rng& rng, double mean) {
    return std::floor(-mean * std::log1p(-uniform01(rng)));
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

bool flag(Rng& rng, double p) { return uniform01(rng) < p; }

struct Customer {
    std::string id;
    const char* gender;
    const char* marital;
    const char* religion;
    const char* occupation;
    const char* state;
    const char* lga;
    bool inactive;
    double tenure_months;
    std::array<double, 6> accounts;  // product flags
    double lcy_count, lcy_vol, lcy_revenue;
    double fcy_count, fcy_vol, fcy_revenue;
    double lifestyle_count, lifestyle_vol, lifestyle_revenue;
    double latent;
};

constexpr std::array<const char*, 6> kAccountColumns{
    "current_account", "xclusive_subscript", "current_account_corp",
    "savings_deposit_youth", "community_savings_account", "hida"};

}  // namespace

tabular::Frame gen_synthetic(const SyntheticSpec& spec) {
    if (spec.n_rows < 10) throw ConfigError("gen_synthetic: n_rows must be >= 10");
    if (!(spec.churn_rate >= 0.0 && spec.churn_rate < 1.0)) throw ConfigError("gen_synthetic: churn_rate must be in [0, 1)");
    if (!(spec.null_rate >= 0.0 && spec.null_rate < 1.0)) throw ConfigError("gen_synthetic: null_rate must be in [0, 1)");

    Rng rng(spec.seed);
    const std::size_t n = spec.n_rows;
    std::vector<Customer> rows(n);

    for (std::size_t i = 0; i < n; ++i) {
        auto& c = rows[i];
        char id[32];
        std::snprintf(id, sizeof(id), "C%07zu", i + 1);
        c.id = id;
        c.gender = pick(rng, std::array{"M", "F"}, std::array{0.52, 0.48});
        c.marital = pick(rng, std::array{"S", "M", "D"}, std::array{0.45, 0.48, 0.07});
        c.religion = pick(rng, std::array{"Christian", "Islam", "Other Religion"}, std::array{0.52, 0.44, 0.04});
        c.occupation = pick(rng, std::array{"Civil Servant", "Trader", "Student", "Engineer", "Self Employed", "Retired"},
                            std::array{0.20, 0.25, 0.15, 0.10, 0.22, 0.08});
        c.state = pick(rng, std::array{"Lagos", "Oyo", "Ogun", "Kano", "Rivers", "Abuja FCT"},
                       std::array{0.35, 0.18, 0.12, 0.12, 0.11, 0.12});
        c.lga = pick(rng, std::array{"Ibadan North", "Ikeja", "Eti-Osa", "Abeokuta South", "Nassarawa"},
                     std::array{0.2, 0.2, 0.2, 0.2, 0.2});
        c.inactive = flag(rng, 0.06);
        c.tenure_months = std::floor(1.0 + uniform01(rng) * 180.0);
        const bool student = std::string_view(c.occupation) == "Student";
        c.accounts = {flag(rng, 0.70) ? 1.0 : 0.0, flag(rng, 0.05) ? 1.0 : 0.0, flag(rng, 0.03) ? 1.0 : 0.0,
                      flag(rng, student ? 0.5 : 0.08) ? 1.0 : 0.0, flag(rng, 0.06) ? 1.0 : 0.0,
                      flag(rng, 0.15) ? 1.0 : 0.0};

        const double activity = c.inactive ? 0.15 : 1.0;
        c.lcy_count = count_with_mean(rng, 18.0 * activity);
        c.lcy_vol = round2(c.lcy_count * 5000.0 * (0.5 + uniform01(rng)));
        c.lcy_revenue = round2(c.lcy_count * 10.0 + c.lcy_vol * 0.001);
        c.fcy_count = count_with_mean(rng, 1.2 * activity);
        c.fcy_vol = round2(c.fcy_count * 300.0 * (0.5 + uniform01(rng)));
        c.fcy_revenue = round2(c.fcy_vol * 0.015);
        c.lifestyle_count = count_with_mean(rng, 5.0 * activity);
        c.lifestyle_vol = round2(c.lifestyle_count * 8000.0 * (0.5 + uniform01(rng)));
        c.lifestyle_revenue = round2(c.lifestyle_count * 50.0);

        // Ground truth: logistic latent score over a feature subset.
        const double u = std::clamp(uniform01(rng), 1e-12, 1.0 - 1e-12);
        const double noise = std::log(u / (1.0 - u));
        c.latent = 3.5 * (c.inactive ? 1.0 : 0.0) + 2.0 * (c.tenure_months < 12.0 ? 1.0 : 0.0) -
                   0.9 * std::log1p(c.lcy_count) - 0.5 * std::log1p(c.lifestyle_count) +
                   0.6 * (std::string_view(c.marital) == "S" ? 1.0 : 0.0) - 1.0 * c.accounts[5] +
                   0.25 * noise;
    }

    // Exactly round(rate * n) churners: the highest latent scores.
    const auto n_churn = static_cast<std::size_t>(std::llround(spec.churn_rate * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rows[a].latent > rows[b].latent; });
    std::vector<bool> churned(n, false);
    for (std::size_t k = 0; k < n_churn; ++k) churned[order[k]] = true;

    // High-null column: an exact share of rows, chosen at random.
    std::vector<std::size_t> null_rows(n);
    std::iota(null_rows.begin(), null_rows.end(), std::size_t{0});
    shuffle(std::span(null_rows), rng);
    const double high_null = std::max(kHighNullFraction, spec.null_rate);
    const auto n_high_null = static_cast<std::size_t>(std::ceil(high_null * static_cast<double>(n)));
    std::vector<bool> lga_missing(n, false);
    for (std::size_t k = 0; k < n_high_null; ++k) lga_missing[null_rows[k]] = true;

    std::vector<std::string> names{"cust_id", "gender", "marital_status", "religion", "occupation", "state",
                                   kHighNullColumn, "cust_txn_status", "tenure_months"};
    names.insert(names.end(), kAccountColumns.begin(), kAccountColumns.end());
    for (const char* name : {"mobapp_fund_trsl_lcy_count", "mobapp_fund_trsl_lcy_vol", "mobapp_fund_trsl_lcy_revenue",
                             "mobapp_fund_trsl_fcy_count", "mobapp_fund_trsl_fcy_vol", "mobapp_fund_trsl_fcy_revenue",
                             "mobapp_lifestyle_count", "mobapp_lifestyle_vol", "mobapp_lifestyle_revenue"}) {
        names.emplace_back(name);
    }
    names.emplace_back("churn");

    std::vector<ColumnKind> kinds(names.size(), ColumnKind::Numeric);
    for (std::size_t c = 0; c <= 7; ++c) kinds[c] = ColumnKind::Categorical;
    kinds.back() = ColumnKind::Categorical;

    std::vector<std::vector<CellValue>> cells;
    cells.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = rows[i];
        std::vector<CellValue> row;
        row.reserve(names.size());
        row.emplace_back(c.id);
        for (const char* text : {c.gender, c.marital, c.religion, c.occupation, c.state}) row.emplace_back(std::string(text));
        row.emplace_back(std::string(c.lga));
        row.emplace_back(std::string(c.inactive ? "Inactive" : "Active"));
        row.emplace_back(c.tenure_months);
        for (double a : c.accounts) row.emplace_back(a);
        for (double v : {c.lcy_count, c.lcy_vol, c.lcy_revenue, c.fcy_count, c.fcy_vol, c.fcy_revenue,
                         c.lifestyle_count, c.lifestyle_vol, c.lifestyle_revenue}) {
            row.emplace_back(v);
        }
        row.emplace_back(std::string(churned[i] ? "Yes" : "No"));

        // Null injection on every feature column except the id, the target
        // and the high-null column (which has its own rule).
        for (std::size_t col = 1; col + 1 < row.size(); ++col) {
            if (col == 6) continue;
            if (spec.null_rate > 0.0 && uniform01(rng) < spec.null_rate) row[col] = tabular::Missing{};
        }
        if (lga_missing[i]) row[6] = tabular::Missing{};
        cells.push_back(std::move(row));
    }
    return tabular::Frame(std::move(names), std::move(kinds), std::move(cells));
}

}  // namespace churn::pipeline
