#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajseg/numerics/grad_check.hpp"

namespace trajseg {

struct GradSuiteOptions {
    GradCheckOptions check;
    int points = 5;              // random points per operation
    int entries_per_param = 4;   // weight entries probed per parameter tensor
    std::uint64_t seed = 1;
};

/// Module names accepted by run_grad_suite, in suite order.
[[nodiscard]] const std::vector<std::string>& grad_suite_modules();

/// Finite-difference checks of every differentiable operation of `module`
/// ("all" runs every module). One report per operation, worst case over
/// all points. Unknown names throw InputError.
[[nodiscard]] std::vector<GradCheckReport> run_grad_suite(const std::string& module, const GradSuiteOptions& opt = {});

/// Aligned text table of reports, one line per checked input.
[[nodiscard]] std::string grad_report_table(const std::vector<GradCheckReport>& reports);

}  // namespace trajseg
