// Copyright 2026 The lpskit Authors.
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

#include "lps/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "lps/kink.hpp"
#include "lps/ops.hpp"
#include "lps/rng.hpp"

namespace lps {
namespace {

template <typename T>
struct Evaluation {
  double value;
  std::uint64_t signature;
  double magnitude;  // sum of |w * y| over the reduced output
};

template <typename T>
class Checker {
 public:
  Checker(std::function<Var<T>()> f, const GradCheckOptions& opt) : f_(std::move(f)), opt_(opt) {
    if (!(opt.eps >= 1e-4 && opt.eps <= 1e-2)) {
      throw Error(ErrorKind::kValidation,
                  "grad_check: eps must lie in [1e-4, 1e-2], got " + std::to_string(opt.eps),
                  {{"eps", std::to_string(opt.eps)}});
    }
  }

  // Runs f once to fix the reduction weights; returns the scalar root.
  Var<T> root() {
    Var<T> out = f_();
    if (weights_.empty()) {
      if (out.value().size() == 1) {
        weights_ = BasicTensor<T>(out.shape(), T(1));
      } else {
        Rng rng(opt_.seed ^ 0xC0FFEE1234ULL);
        weights_ = rng.uniform_tensor<T>(out.shape(), -1.0, 1.0);
      }
    }
    magnitude_ = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      magnitude_ += std::abs(static_cast<double>(weights_[i]) * static_cast<double>(out.value()[i]));
    }
    return ops::weighted_sum(out, weights_);
  }

  Evaluation<T> evaluate() {
    kink::Scope scope;
    const double v = static_cast<double>(root().value()[0]);
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::kNumeric, "grad_check: function produced a non-finite value",
                  {{"value", std::to_string(v)}});
    }
    return {v, scope.signature(), magnitude_};
  }

  void probe(BasicTensor<T>& value, const BasicTensor<T>& analytic, Rng& rng,
             const Evaluation<T>& base, GradCheckResult* result) {
    std::vector<std::size_t> coords(value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt_.max_coords != 0 && opt_.max_coords < coords.size()) {
      for (std::size_t i = 0; i < opt_.max_coords; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.next_u64() % (coords.size() - i));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(opt_.max_coords);
    }
    const T eps = static_cast<T>(opt_.eps);
    // About a thousand times the roundoff of the stencil, so differences that
    // are pure cancellation noise do not register as errors.
    const double floor =
        std::max(1e-6, 131072.0 * std::numeric_limits<T>::epsilon() *
                           std::max(1.0, base.magnitude) / opt_.eps);
    for (std::size_t idx : coords) {
      const T saved = value[idx];
      value[idx] = saved + eps;
      const Evaluation<T> plus = evaluate();
      value[idx] = saved - eps;
      const Evaluation<T> minus = evaluate();
      value[idx] = saved;
      if (opt_.skip_kinks && (plus.signature != base.signature || minus.signature != base.signature)) {
        ++result->skipped;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * opt_.eps);
      const double analytic_v = analytic.empty() ? 0.0 : static_cast<double>(analytic[idx]);
      result->max_rel_error =
          std::max(result->max_rel_error, relative_error(analytic_v, numeric, floor));
      ++result->checked;
    }
  }

 private:
  std::function<Var<T>()> f_;
  GradCheckOptions opt_;
  BasicTensor<T> weights_;
  double magnitude_ = 0.0;
};

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

template <typename T>
GradCheckResult grad_check(const GradFn<T>& f, const std::vector<BasicTensor<T>>& inputs,
                           const GradCheckOptions& opt) {
  std::vector<BasicTensor<T>> values = inputs;
  bool analytic_pass = true;
  std::vector<Var<T>> leaves;
  auto build = [&]() {
    std::vector<Var<T>> vars;
    for (const auto& v : values) {
      vars.push_back(analytic_pass ? Var<T>::leaf(v) : Var<T>::constant(v));
    }
    if (analytic_pass) leaves = vars;
    return f(vars);
  };
  Checker<T> checker(build, opt);
  backward(checker.root());
  analytic_pass = false;
  std::vector<BasicTensor<T>> analytic;
  for (const auto& l : leaves) analytic.push_back(l.grad());

  GradCheckResult result;
  Rng rng(opt.seed);
  const Evaluation<T> base = checker.evaluate();
  for (std::size_t i = 0; i < values.size(); ++i) {
    checker.probe(values[i], analytic[i], rng, base, &result);
  }
  return result;
}

template <typename T>
GradCheckResult grad_check_params(const std::function<Var<T>()>& f, ParamStore<T>& store,
                                  const GradCheckOptions& opt) {
  Checker<T> checker(f, opt);
  store.reset_grads();
  backward(checker.root());
  std::vector<BasicTensor<T>> analytic;
  for (auto& p : store) analytic.push_back(p.grad());

  GradCheckResult result;
  Rng rng(opt.seed);
  const Evaluation<T> base = checker.evaluate();
  std::size_t i = 0;
  for (auto& p : store) {
    checker.probe(p.value(), analytic[i++], rng, base, &result);
  }
  return result;
}

template GradCheckResult grad_check(const GradFn<float>&, const std::vector<BasicTensor<float>>&,
                                    const GradCheckOptions&);
template GradCheckResult grad_check(const GradFn<double>&,
                                    const std::vector<BasicTensor<double>>&,
                                    const GradCheckOptions&);
template GradCheckResult grad_check_params(const std::function<Var<float>()>&, ParamStore<float>&,
                                           const GradCheckOptions&);
template GradCheckResult grad_check_params(const std::function<Var<double>()>&,
                                           ParamStore<double>&, const GradCheckOptions&);

}  // namespace lps
