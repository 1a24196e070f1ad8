#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lba/autograd.hpp"
#include "lba/params.hpp"

// Central-finite-difference verification of every analytic VJP. Each
// registered entry builds a seeded random problem (inputs, optionally a
// parameter store, and a scalar forward on the tape) and compares analytic
// gradients against (f(x+h) - f(x-h)) / 2h at h = 1e-4, in 64-bit.
//
// Relative error uses a unit floor: |a - d| / max(1, |a|, |d|), so values
// below 1 are compared absolutely. Small problems are checked exhaustively;
// module/network entries sample coordinates and add random-direction probes
// (directional derivative vs. the analytic gradient's projection).

namespace lba::gradcheck {

struct Report {
    std::string op;
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    double tolerance = 1e-5;
    int n_checked = 0;
    int n_skipped = 0; // probes straddling a kink (see below)
    bool pass = false;
    int n_compared() const { return n_checked; }
};

struct Problem {
    std::vector<Tensor> tensors;
    std::vector<Matrix3> matrices;
    std::shared_ptr<ParamStore> params; // optional
    // scalar forward; parameter leaves are bound through the bank when a
    // store exists
    std::function<Var(Tape&, const std::vector<Var>& tv, const std::vector<Var>& mv, ParamBank* bank)> fwd;
    // problems too large for exhaustive per-element differencing set this;
    // the harness then samples this many coordinates per tensor plus
    // directional probes
    int sample_coords = 0;
    double tolerance = 1e-5;
};

using Builder = std::function<Problem(std::uint64_t seed)>;

const std::vector<std::string>& op_names();
bool has_op(const std::string& name);
Report run(const std::string& name, std::uint64_t seed);
std::vector<Report> run_all(std::uint64_t seed);

// Exposed for tests that define ad-hoc problems.
Report check(const std::string& label, Problem problem);

} // namespace lba::gradcheck
