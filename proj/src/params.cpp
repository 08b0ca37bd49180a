// Copyright 2026 The ier Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ier/params.hpp"

#include <algorithm>
#include <cmath>

namespace ier {

GradCheckReport grad_check(const std::function<double(const Vec&)>& loss, const Vec& params, const Vec& analytic,
                           double h) {
  if (analytic.size() != params.size()) throw DomainError("grad_check: gradient size mismatch");
  GradCheckReport report;
  report.analytic = analytic;
  report.numeric = Vec::Zero(params.size());
  Vec probe = params;
  for (Index i = 0; i < params.size(); ++i) {
    probe(i) = params(i) + h;
    const double up = loss(probe);
    probe(i) = params(i) - h;
    const double down = loss(probe);
    probe(i) = params(i);
    report.numeric(i) = (up - down) / (2.0 * h);
  }
  const double floor = std::max(1e-3 * (analytic.size() ? analytic.cwiseAbs().maxCoeff() : 0.0), 1e-10);
  for (Index i = 0; i < params.size(); ++i) {
    const double a = analytic(i);
    const double n = report.numeric(i);
    const double abs_err = std::abs(a - n);
    const double rel = abs_err / std::max({std::abs(a), std::abs(n), floor});
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  return report;
}

}  // namespace ier
