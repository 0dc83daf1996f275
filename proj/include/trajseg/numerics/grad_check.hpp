#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "trajseg/numerics/autodiff.hpp"

namespace trajseg {

struct GradCheckOptions {
    double epsilon = 1e-3;
    double tolerance = 1e-4;
    /// Lower bound of the relative-error denominator, so gradients that are
    /// zero analytically are compared absolutely rather than relatively.
    double floor = 1e-6;
    /// Multiplies the analytic gradient before comparison. 1 in normal use;
    /// the negative-control tests set it to 2.
    double analytic_scale = 1.0;
};

struct GradCheckReport {
    std::string operation;
    std::vector<std::string> input_names;
    std::vector<double> max_relative_error;  // one per input
    double tolerance = 0;
    bool passed = false;

    [[nodiscard]] double worst() const {
        return max_relative_error.empty() ? 0.0
                                          : *std::max_element(max_relative_error.begin(), max_relative_error.end());
    }
};

/// max |a - n| / max(max |a|, max |n|, floor) over one tensor. Entries are
/// compared on the scale of the tensor's gradient: an entry whose true
/// gradient nearly cancels would otherwise be judged by the O(eps^2)
/// truncation error of the central difference alone.
inline double relative_error(const Mat<double>& analytic, const Mat<double>& numeric, double floor) {
    if (analytic.size() == 0) return 0.0;
    const double scale = std::max({analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), floor});
    return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

/// Builds a scalar (1x1) loss from tape variables holding the inputs.
using GradCheckFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

/// Compares reverse-mode gradients of `fn` at `point` against central
/// differences of every entry; one relative_error per input.
inline GradCheckReport grad_check(const std::string& operation, const std::vector<std::string>& names,
                                  const std::vector<Mat<double>>& point, const GradCheckFn& fn,
                                  const GradCheckOptions& opt = {}) {
    auto evaluate = [&](const std::vector<Mat<double>>& xs) {
        Tape<double> tape;
        std::vector<Var<double>> vars;
        vars.reserve(xs.size());
        for (const auto& x : xs) vars.push_back(tape.variable(x));
        const Var<double> loss = fn(tape, vars);
        const double v = loss.value()(0, 0);
        if (!std::isfinite(v)) throw NumericError(operation + ": non-finite function value");
        return v;
    };

    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& x : point) vars.push_back(tape.variable(x));
    const Var<double> loss = fn(tape, vars);
    if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError(operation + ": loss must be 1x1");
    if (!std::isfinite(loss.value()(0, 0))) throw NumericError(operation + ": non-finite function value");
    tape.backward(loss);

    GradCheckReport report;
    report.operation = operation;
    report.input_names = names;
    report.tolerance = opt.tolerance;
    std::vector<Mat<double>> probe = point;
    for (std::size_t k = 0; k < point.size(); ++k) {
        const Mat<double> analytic = tape.grad(vars[k]) * opt.analytic_scale;
        Mat<double> numeric(analytic.rows(), analytic.cols());
        for (Eigen::Index i = 0; i < point[k].size(); ++i) {
            const double x0 = point[k](i);
            probe[k](i) = x0 + opt.epsilon;
            const double fp = evaluate(probe);
            probe[k](i) = x0 - opt.epsilon;
            const double fm = evaluate(probe);
            probe[k](i) = x0;
            numeric(i) = (fp - fm) / (2 * opt.epsilon);
        }
        report.max_relative_error.push_back(relative_error(analytic, numeric, opt.floor));
    }
    report.passed = report.worst() <= opt.tolerance;
    return report;
}

}  // namespace trajseg
