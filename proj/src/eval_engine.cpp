#include "lba/eval_engine.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "lba/image_io.hpp"

namespace fs = std::filesystem;

namespace lba::evalengine {

namespace {

bool supported_ext(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".pgm" || ext == ".png";
}

// stem -> file path; a stem present with both extensions is ambiguous
std::map<std::string, std::string> scan_dir(const std::string& dir, std::vector<std::string>* ambiguous) {
    require(fs::is_directory(dir), strprintf("'%s' is not a directory", dir.c_str()));
    std::map<std::string, std::string> out;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && supported_ext(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        const std::string stem = p.stem().string();
        if (out.count(stem) > 0) {
            if (ambiguous != nullptr) ambiguous->push_back(stem);
            continue;
        }
        out[stem] = p.string();
    }
    return out;
}

PairOutcome evaluate_one(const std::string& stem, const std::string& pred_path, const std::string& gt_path) {
    PairOutcome out;
    out.stem = stem;
    try {
        const imageio::ImagePlane pred = imageio::load_plane(pred_path);
        const imageio::ImagePlane gt = imageio::load_plane(gt_path);
        require(pred.w == gt.w && pred.h == gt.h,
                strprintf("size mismatch %lldx%lld vs %lldx%lld", (long long)pred.w, (long long)pred.h,
                          (long long)gt.w, (long long)gt.h));
        metrics::SaliencyMap s{pred.h, pred.w, {}};
        s.v.resize(pred.samples.size());
        for (std::size_t i = 0; i < pred.samples.size(); ++i)
            s.v[i] = static_cast<double>(pred.samples[i]) / 255.0;
        metrics::BinaryMask g{gt.h, gt.w, {}};
        g.v.resize(gt.samples.size());
        for (std::size_t i = 0; i < gt.samples.size(); ++i) g.v[i] = gt.samples[i] >= 128 ? 1 : 0;
        out.report = metrics::evaluate_pair(s, g);
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

} // namespace

EvalResult evaluate_directories(const std::string& pred_dir, const std::string& gt_dir,
                                int jobs, const std::string& dataset_name) {
    std::vector<std::string> pred_ambiguous;
    const auto preds = scan_dir(pred_dir, &pred_ambiguous);
    // on the GT side the lexicographically first file silently wins
    const auto gts = scan_dir(gt_dir, nullptr);

    EvalResult result;
    result.dataset = dataset_name;

    struct Job {
        std::string stem, pred, gt;
    };
    std::vector<Job> jobs_list;
    for (const auto& [stem, pred_path] : preds) {
        const auto it = gts.find(stem);
        if (it == gts.end()) {
            PairOutcome miss;
            miss.stem = stem;
            miss.error = "no matching ground truth";
            result.outcomes.push_back(std::move(miss));
        } else {
            jobs_list.push_back({stem, pred_path, it->second});
        }
    }
    for (const std::string& stem : pred_ambiguous) {
        PairOutcome amb;
        amb.stem = stem;
        amb.error = "ambiguous stem (multiple prediction files)";
        result.outcomes.push_back(std::move(amb));
    }

    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(jobs_list.size())));
    std::vector<PairOutcome> done(jobs_list.size());
    if (!jobs_list.empty()) {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs_list.size()) return;
                done[i] = evaluate_one(jobs_list[i].stem, jobs_list[i].pred, jobs_list[i].gt);
            }
        };
        std::vector<std::thread> pool;
        for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
    }
    for (auto& outcome : done) result.outcomes.push_back(std::move(outcome));
    std::sort(result.outcomes.begin(), result.outcomes.end(),
              [](const PairOutcome& a, const PairOutcome& b) { return a.stem < b.stem; });

    std::vector<metrics::MetricReport> ok_reports;
    for (const PairOutcome& o : result.outcomes) {
        if (o.ok) {
            ok_reports.push_back(o.report);
            ++result.n_ok;
        } else {
            ++result.n_err;
        }
    }
    if (!ok_reports.empty()) result.aggregate = metrics::aggregate(ok_reports);
    return result;
}

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20)
                    out += strprintf("\\u%04x", c);
                else
                    out += c;
        }
    }
    return out;
}

// Fixed 6-decimal formatting keeps golden reports stable.
std::string num6(double v) { return strprintf("%.6f", v); }

void append_scalars(std::string& out, const metrics::MetricReport& r) {
    out += "\"mae\": " + num6(r.mae) + ", ";
    out += "\"s_alpha\": " + num6(r.s_alpha) + ", ";
    out += "\"f_max\": " + num6(r.f_max) + ", ";
    out += "\"f_mean\": " + num6(r.f_mean) + ", ";
    out += "\"f_adp\": " + num6(r.f_adp) + ", ";
    out += "\"e_max\": " + num6(r.e_max) + ", ";
    out += "\"e_mean\": " + num6(r.e_mean) + ", ";
    out += "\"e_adp\": " + num6(r.e_adp);
}

} // namespace

std::string report_json(const EvalResult& r) {
    std::string out = "{\n";
    out += "  \"dataset\": \"" + json_escape(r.dataset) + "\",\n";
    out += "  \"n_images\": " + strprintf("%d", r.n_ok) + ",\n";
    out += "  \"alpha\": " + num6(metrics::kAlpha) + ",\n";
    out += "  \"beta2\": " + num6(metrics::kBeta2) + ",\n";
    out += "  ";
    append_scalars(out, r.aggregate);
    out += ",\n  \"per_image\": [";
    bool first = true;
    for (const PairOutcome& o : r.outcomes) {
        if (!o.ok) continue;
        out += first ? "\n" : ",\n";
        first = false;
        out += "    {\"name\": \"" + json_escape(o.stem) + "\", ";
        append_scalars(out, o.report);
        out += strprintf(", \"degenerate_gt\": %s}", o.report.degenerate_gt ? "true" : "false");
    }
    out += first ? "],\n" : "\n  ],\n";
    out += "  \"errors\": [";
    first = true;
    for (const PairOutcome& o : r.outcomes) {
        if (o.ok) continue;
        out += first ? "\n" : ",\n";
        first = false;
        out += "    {\"name\": \"" + json_escape(o.stem) + "\", \"error\": \"" + json_escape(o.error) + "\"}";
    }
    out += first ? "]\n" : "\n  ]\n";
    out += "}\n";
    return out;
}

void write_report_json(const EvalResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), strprintf("cannot write '%s'", path.c_str()));
    out << report_json(r);
    require(out.good(), strprintf("short write to '%s'", path.c_str()));
}

void write_curves_csv(const metrics::Curve256& c, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), strprintf("cannot write '%s'", path.c_str()));
    out << "threshold,precision,recall,f,e\n";
    for (int t = 0; t < metrics::kThresholds; ++t) {
        const auto i = static_cast<std::size_t>(t);
        out << num6(c.threshold[i]) << ',' << num6(c.precision[i]) << ',' << num6(c.recall[i]) << ','
            << num6(c.f[i]) << ',' << num6(c.e[i]) << '\n';
    }
    require(out.good(), strprintf("short write to '%s'", path.c_str()));
}

} // namespace lba::evalengine
