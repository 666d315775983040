#pragma once

// Back-derivation of integer confusion counts from rounded, published metric rows.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kbound::testing {

struct PublishedRow {
  std::string model, method, dataset;
  double unc_r, acc, align, conser, overco;
  std::int64_t nominal_total;
};

struct Counts {
  std::int64_t tp, fp, tn, fn;
  std::int64_t total() const { return tp + fp + tn + fn; }
};

inline std::vector<PublishedRow> load_published(const nlohmann::json& j) {
  std::vector<PublishedRow> out;
  for (const auto& r : j.at("rows")) {
    const std::string ds = r.at("dataset");
    out.push_back({r.at("model"), r.at("method"), ds, r.at("unc_r"), r.at("acc"), r.at("align"),
                   r.at("conser"), r.at("overco"), j.at("nominal_total").at(ds).get<std::int64_t>()});
  }
  return out;
}

inline bool within(std::int64_t num, std::int64_t den, double target, double tol) {
  return std::abs(static_cast<double>(num) / static_cast<double>(den) - target) <= tol + 1e-12;
}

/// Integers k with |k/n - v| <= tol.
inline std::pair<std::int64_t, std::int64_t> int_range(double v, std::int64_t n, double tol) {
  const auto lo = static_cast<std::int64_t>(std::ceil((v - tol) * static_cast<double>(n) - 1e-9));
  const auto hi = static_cast<std::int64_t>(std::floor((v + tol) * static_cast<double>(n) + 1e-9));
  return {std::max<std::int64_t>(lo, 0), std::min(hi, n)};
}

/// Counts over exactly n records reproducing all five ratios within tol, if any.
inline std::optional<Counts> counts_for_total(const PublishedRow& r, std::int64_t n, double tol) {
  const auto [fn_lo, fn_hi] = int_range(r.conser, n, tol);
  const auto [fp_lo, fp_hi] = int_range(r.overco, n, tol);
  const auto [ac_lo, ac_hi] = int_range(r.acc, n, tol);
  for (std::int64_t fn = fn_lo; fn <= fn_hi; ++fn) {
    for (std::int64_t fp = fp_lo; fp <= fp_hi; ++fp) {
      for (std::int64_t correct = ac_lo; correct <= ac_hi; ++correct) {
        const std::int64_t tp = correct - fn;
        const std::int64_t tn = n - tp - fp - fn;
        if (tp < 0 || tn < 0) continue;
        if (within(fn + tn, n, r.unc_r, tol) && within(tp + tn, n, r.align, tol)) {
          return Counts{tp, fp, tn, fn};
        }
      }
    }
  }
  return std::nullopt;
}

/// Searches totals outward from the nominal dataset size.
inline std::optional<Counts> back_derive(const PublishedRow& r, double tol = 0.0005,
                                         std::int64_t max_total = 3000) {
  for (std::int64_t d = 0; d <= max_total; ++d) {
    for (std::int64_t n : {r.nominal_total - d, r.nominal_total + d}) {
      if (n < 1 || n > max_total) continue;
      if (auto c = counts_for_total(r, n, tol)) return c;
      if (d == 0) break;
    }
  }
  return std::nullopt;
}

/// U + Acc - Align - 2*Conser is identically zero for exact counts; five roundings of at
/// most tol each bound it by 5*tol (the Conser term counts twice, so 6*tol).
inline double identity_gap(const PublishedRow& r) {
  return r.unc_r + r.acc - r.align - 2 * r.conser;
}

}  // namespace kbound::testing
