// Copyright 2026 The MTMN Authors.
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

#ifndef MTMN_GRADCHECK_HPP_
#define MTMN_GRADCHECK_HPP_

#include <algorithm>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mtmn/autodiff.hpp"

namespace mtmn {

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
  double abs_err = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  double max_rel_err = 0.0;  // over entries above the absolute floor
  double max_abs_err = 0.0;
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::vector<GradCheckEntry> worst;  // sorted by relative error, capped

  bool passed() const { return failed == 0; }
};

/// Central-difference check of every trainable scalar (or a seeded sample of
/// `sample_per_param` scalars per parameter when positive) against the
/// gradients accumulated by `build_loss`'s backward pass.
///
/// An entry passes if |analytic - numeric| <= abs_floor or the relative error
/// |a - n| / max(|a|, |n|) is within rel_tol. Near-zero gradients (dead paths)
/// are therefore compared absolutely.
inline GradCheckReport finite_diff_check(ParamStore& params,
                                         const std::function<Var()>& build_loss, double epsilon,
                                         double rel_tol = 1e-4, double abs_floor = 1e-7,
                                         std::size_t sample_per_param = 0, Rng* rng = nullptr,
                                         std::size_t keep_worst = 10) {
  if (epsilon <= 0.0) throw ContractError("finite_diff_check: epsilon must be positive");
  params.zero_grads();
  Var loss = build_loss();
  backward(loss);

  std::vector<std::pair<std::string, std::vector<double>>> analytic;
  for (const auto& p : params.all())
    if (p.trainable) analytic.emplace_back(p.name, std::vector<double>(
                                                        p.grad().data(), p.grad().data() + p.grad().size()));

  GradCheckReport report;
  std::size_t slot = 0;
  for (auto& p : params.all()) {
    if (!p.trainable) continue;
    const auto& grads = analytic[slot++].second;
    std::vector<std::size_t> indices;
    if (sample_per_param == 0 || sample_per_param >= p.value().size()) {
      indices.resize(p.value().size());
      for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    } else {
      if (!rng) throw ContractError("finite_diff_check: sampling needs an rng");
      for (std::size_t i = 0; i < sample_per_param; ++i)
        indices.push_back(static_cast<std::size_t>(rng->below(p.value().size())));
    }
    for (std::size_t i : indices) {
      const double saved = p.value()[i];
      p.value()[i] = saved + epsilon;
      const double up = build_loss()->value[0];
      p.value()[i] = saved - epsilon;
      const double down = build_loss()->value[0];
      p.value()[i] = saved;

      GradCheckEntry e;
      e.param = p.name;
      e.index = i;
      e.analytic = grads[i];
      e.numeric = (up - down) / (2.0 * epsilon);
      e.abs_err = std::abs(e.analytic - e.numeric);
      const double denom = std::max(std::abs(e.analytic), std::abs(e.numeric));
      // Entries under the absolute floor count as zero relative error: both
      // sides vanish and the quotient is noise.
      e.rel_err = (e.abs_err > abs_floor && denom > 0.0) ? e.abs_err / denom : 0.0;
      e.ok = e.abs_err <= abs_floor || e.rel_err <= rel_tol;

      report.checked++;
      if (!e.ok) report.failed++;
      report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
      report.max_abs_err = std::max(report.max_abs_err, e.abs_err);
      report.worst.push_back(e);
      std::push_heap(report.worst.begin(), report.worst.end(),
                     [](const GradCheckEntry& a, const GradCheckEntry& b) {
                       return a.rel_err > b.rel_err;  // min-heap on rel_err
                     });
      if (report.worst.size() > keep_worst) {
        std::pop_heap(report.worst.begin(), report.worst.end(),
                      [](const GradCheckEntry& a, const GradCheckEntry& b) {
                        return a.rel_err > b.rel_err;
                      });
        report.worst.pop_back();
      }
    }
  }
  std::sort(report.worst.begin(), report.worst.end(),
            [](const GradCheckEntry& a, const GradCheckEntry& b) { return a.rel_err > b.rel_err; });
  return report;
}

inline std::string format_gradcheck(const GradCheckReport& r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf),
                "checked %zu gradients, %zu failed, max rel err %.3e, max abs err %.3e\n",
                r.checked, r.failed, r.max_rel_err, r.max_abs_err);
  out += buf;
  out += "worst entries:\n";
  for (const auto& e : r.worst) {
    std::snprintf(buf, sizeof(buf), "  %-28s [%4zu] analytic % .9e numeric % .9e rel %.3e %s\n",
                  e.param.c_str(), e.index, e.analytic, e.numeric, e.rel_err,
                  e.ok ? "ok" : "FAIL");
    out += buf;
  }
  return out;
}

}  // namespace mtmn

#endif  // MTMN_GRADCHECK_HPP_
