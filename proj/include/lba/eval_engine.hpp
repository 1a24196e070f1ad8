#pragma once

#include <string>
#include <vector>

#include "lba/metrics.hpp"

// Directory-level evaluation: pairs prediction and ground-truth files by
// stem (.pgm / .png), evaluates each pair on a bounded worker pool, and
// aggregates in stem-sorted order so the output is byte-identical for any
// job count. Ground-truth pixels binarize at byte >= 128; predictions scale
// by 1/255.

namespace lba::evalengine {

struct PairOutcome {
    std::string stem;
    bool ok = false;
    std::string error; // set when !ok
    metrics::MetricReport report;
};

struct EvalResult {
    std::string dataset;
    std::vector<PairOutcome> outcomes; // stem-sorted, one per scanned prediction file
    metrics::MetricReport aggregate;   // over the ok pairs
    int n_ok = 0;
    int n_err = 0;
};

// jobs < 1 clamps to 1.
EvalResult evaluate_directories(const std::string& pred_dir, const std::string& gt_dir,
                                int jobs, const std::string& dataset_name);

std::string report_json(const EvalResult& r);
void write_report_json(const EvalResult& r, const std::string& path);
void write_curves_csv(const metrics::Curve256& c, const std::string& path);

} // namespace lba::evalengine
