#pragma once

// Central finite-difference oracle for gradient checks. Kept independent of
// the tape's backward pass: it only re-evaluates forward values.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ccr/diff/tape.hpp"

namespace ccr::testing {

struct FdReport {
  bool ok = true;
  std::size_t worst_index = 0;
  double worst_rel = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// build(tape, x) must construct a scalar root from a var leaf it creates via
// tape.var(x) and return {root, var_id}.
using BuildFn =
    std::function<std::pair<ccr::diff::ValueId, ccr::diff::ValueId>(ccr::diff::Tape&,
                                                                    const std::vector<double>&)>;

inline FdReport check_gradient(const BuildFn& build, std::vector<double> x,
                               double rel_tol = 1e-4, double abs_floor = 1e-7,
                               double h = 1e-5) {
  ccr::diff::Tape tape;
  auto [root, var_id] = build(tape, x);
  tape.backward(root);
  const std::vector<double> analytic = tape.grad_of(var_id);

  FdReport report;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    ccr::diff::Tape tp;
    const double fp = tp.scalar_value(build(tp, x).first);
    x[i] = keep - h;
    ccr::diff::Tape tm;
    const double fm = tm.scalar_value(build(tm, x).first);
    x[i] = keep;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), abs_floor});
    const double rel = std::fabs(numeric - analytic[i]) / denom;
    const bool within = std::fabs(numeric - analytic[i]) <= abs_floor || rel <= rel_tol;
    if (!within && rel > report.worst_rel) {
      report.ok = false;
      report.worst_index = i;
      report.worst_rel = rel;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
  }
  return report;
}

// Perturbs entries of a named parameter in the store and compares the central
// difference of a scalar-valued forward pass against the accumulated grad.
// forward() must rebuild the graph from the store's current values and return
// the loss value; grad must already be accumulated for the unperturbed point.
template <typename ForwardFn>
FdReport check_param_gradient(ccr::diff::ParamStore& store, const std::string& name,
                              const std::vector<std::size_t>& indices, const ForwardFn& forward,
                              const std::vector<double>& analytic, double rel_tol = 1e-4,
                              double abs_floor = 1e-7, double h = 1e-5) {
  FdReport report;
  auto& values = store.at(name).value;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    const double keep = values[i];
    values[i] = keep + h;
    const double fp = forward();
    values[i] = keep - h;
    const double fm = forward();
    values[i] = keep;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::fabs(numeric), std::fabs(analytic[k]), abs_floor});
    const double rel = std::fabs(numeric - analytic[k]) / denom;
    const bool within = std::fabs(numeric - analytic[k]) <= abs_floor || rel <= rel_tol;
    if (!within && rel > report.worst_rel) {
      report.ok = false;
      report.worst_index = i;
      report.worst_rel = rel;
      report.analytic = analytic[k];
      report.numeric = numeric;
    }
  }
  return report;
}

}  // namespace ccr::testing
