#pragma once

// 11-point interpolated average precision (PASCAL VOC 2007 style):
//
//   AP = (1/11) sum_{t in {0, 0.1, ..., 1}} max_{recall >= t} precision
//
// Thresholds are handled as k/10 with the integer comparison
// 10 * hits >= k * positives, so no floating-point threshold drift occurs.

#include <algorithm>
#include <array>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lapklr/error.hpp"
#include "lapklr/format.hpp"

namespace lapklr {

struct RankedPredictions {
    std::vector<double> scores;
    std::vector<int> relevance;  // 0/1, parallel to scores

    std::size_t positives() const {
        return static_cast<std::size_t>(std::count(relevance.begin(), relevance.end(), 1));
    }
};

/// Sample order by descending score; equal scores keep their original order.
inline std::vector<std::size_t> rank_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

inline double average_precision_11pt(const RankedPredictions& preds) {
    if (preds.scores.size() != preds.relevance.size())
        throw DataError("scores and relevance have different lengths");
    for (int r : preds.relevance)
        if (r != 0 && r != 1) throw DataError("relevance values must be 0 or 1");
    const std::size_t positives = preds.positives();
    if (positives == 0) throw DataError("AP undefined for class with no positives");

    // best[k] = max precision over ranks whose recall >= k/10
    std::array<double, 11> best{};
    const auto order = rank_order(preds.scores);
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (preds.relevance[order[rank]] != 1) continue;
        ++hits;
        const double precision = static_cast<double>(hits) / static_cast<double>(rank + 1);
        for (std::size_t k = 0; k <= 10; ++k)
            if (10 * hits >= k * positives) best[k] = std::max(best[k], precision);
    }
    double sum = 0.0;
    for (double b : best) sum += b;
    return sum / 11.0;
}

inline double mean_ap(std::span<const double> aps) {
    if (aps.empty()) throw DataError("mAP of an empty class list is undefined");
    double sum = 0.0;
    for (double a : aps) sum += a;
    return sum / static_cast<double>(aps.size());
}

struct EvalReport {
    std::vector<std::pair<std::string, double>> per_class_ap;
    double map_value = 0.0;
    std::vector<std::pair<std::string, std::string>> skipped_classes;  // class, reason
};

/// Build a report from named per-class predictions. Classes with no
/// positives are skipped and listed, never scored as AP 0.
inline EvalReport evaluate(const std::vector<std::pair<std::string, RankedPredictions>>& classes) {
    EvalReport report;
    std::vector<double> aps;
    for (const auto& [name, preds] : classes) {
        if (preds.positives() == 0) {
            report.skipped_classes.emplace_back(name, "no positives in evaluation set");
            continue;
        }
        const double ap = average_precision_11pt(preds);
        report.per_class_ap.emplace_back(name, ap);
        aps.push_back(ap);
    }
    if (!aps.empty()) report.map_value = mean_ap(aps);
    return report;
}

/// Human-readable table.
inline void write_report_table(std::ostream& os, const EvalReport& r) {
    std::size_t width = 5;
    for (const auto& [name, ap] : r.per_class_ap) width = std::max(width, name.size());
    auto pad = [&](const std::string& s) { return s + std::string(width - s.size() + 2, ' '); };
    os << pad("class") << "AP\n";
    for (const auto& [name, ap] : r.per_class_ap) os << pad(name) << format_double(ap) << '\n';
    os << pad("mAP") << format_double(r.map_value) << '\n';
    for (const auto& [name, why] : r.skipped_classes) os << "# skipped " << name << ": " << why << '\n';
}

/// Key-value form: "class AP" per line, then "mAP value".
inline void write_report_kv(std::ostream& os, const EvalReport& r) {
    for (const auto& [name, ap] : r.per_class_ap) os << name << ' ' << format_double(ap) << '\n';
    for (const auto& [name, why] : r.skipped_classes) os << "# skipped " << name << ' ' << why << '\n';
    os << "mAP " << format_double(r.map_value) << '\n';
}

}  // namespace lapklr
