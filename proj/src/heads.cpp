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

#include "lps/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lps/kink.hpp"

namespace lps {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

void check_target(const Shape& logits, const std::vector<std::uint32_t>& target,
                  std::uint32_t ignore_id, const char* what) {
  if (logits.size() != 3) {
    throw Error(ErrorKind::kShape, std::string(what) + ": logits must be (C, H, W), got " +
                                       shape_str(logits),
                {{"logits", shape_str(logits)}});
  }
  const std::size_t plane = static_cast<std::size_t>(logits[1]) * logits[2];
  if (target.size() != plane) {
    throw Error(ErrorKind::kShape,
                std::string(what) + ": target has " + std::to_string(target.size()) +
                    " pixels, logits " + shape_str(logits),
                {{"logits", shape_str(logits)}, {"target", std::to_string(target.size())}});
  }
  bool any = false;
  for (std::size_t i = 0; i < plane; ++i) {
    if (target[i] == ignore_id) continue;
    if (target[i] >= static_cast<std::uint32_t>(logits[0])) {
      throw Error(ErrorKind::kRange,
                  std::string(what) + ": target class " + std::to_string(target[i]) +
                      " at pixel " + std::to_string(i) + " outside " + shape_str(logits),
                  {{"pixel", std::to_string(i)}, {"class", std::to_string(target[i])}});
    }
    any = true;
  }
  if (!any) {
    throw Error(ErrorKind::kValidation, std::string(what) + ": every pixel is ignored",
                {{"ignore_id", std::to_string(ignore_id)}});
  }
}

}  // namespace

void require_divisible_by_32(const Shape& shape, const char* what) {
  const std::size_t n = shape.size();
  if (n < 2 || n > 3 || shape[n - 2] <= 0 || shape[n - 1] <= 0 || shape[n - 2] % 32 != 0 ||
      shape[n - 1] % 32 != 0) {
    throw Error(ErrorKind::kShape,
                std::string(what) + ": spatial extents must be positive multiples of 32, got " +
                    shape_str(shape),
                {{"shape", shape_str(shape)}});
  }
}

ProximityGrid input_grid(const Tensor& input, int search, int k) {
  const int h = input.dim(1), w = input.dim(2);
  Tensor range({h, w});
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const float v = input.at(0, r, c);
      range[static_cast<std::size_t>(r) * w + c] = v;
      valid[static_cast<std::size_t>(r) * w + c] = v > 0.0f ? 1 : 0;
    }
  }
  return build_proximity_grid(range, valid, search, search, k);
}

template <typename T>
Var<T> pixel_nll(const Var<T>& logits, const std::vector<std::uint32_t>& target,
                 std::uint32_t ignore_id) {
  check_target(logits.shape(), target, ignore_id, "pixel_nll");
  const auto& x = logits.value();
  const int ch = x.dim(0);
  const std::size_t plane = target.size();
  BasicTensor<T> prob(x.shape());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < plane; ++p) {
    T m = x[p];
    for (int c = 1; c < ch; ++c) m = std::max(m, x[c * plane + p]);
    T s = T(0);
    for (int c = 0; c < ch; ++c) s += std::exp(x[c * plane + p] - m);
    const T log_s = std::log(s);
    for (int c = 0; c < ch; ++c) prob[c * plane + p] = std::exp(x[c * plane + p] - m - log_s);
    if (target[p] == ignore_id) continue;
    total -= static_cast<double>(x[target[p] * plane + p] - m - log_s);
    ++count;
  }
  const T inv = T(1) / static_cast<T>(count);
  return make_result<T>(
      BasicTensor<T>({1}, static_cast<T>(total / static_cast<double>(count))), {logits},
      [prob = std::move(prob), target, ignore_id, inv, ch, plane](
          const BasicTensor<T>& g, std::vector<NodePtr<T>>& parents) {
        auto& n = parents[0];
        if (!n->requires_grad) return;
        n->ensure_grad();
        for (std::size_t p = 0; p < plane; ++p) {
          if (target[p] == ignore_id) continue;
          for (int c = 0; c < ch; ++c) {
            const T onehot = target[p] == static_cast<std::uint32_t>(c) ? T(1) : T(0);
            n->grad[c * plane + p] += g[0] * inv * (prob[c * plane + p] - onehot);
          }
        }
      });
}

std::vector<double> lovasz_grad(const std::vector<std::uint8_t>& fg_sorted) {
  const std::size_t n = fg_sorted.size();
  std::vector<double> jac(n);
  double gts = 0.0;
  for (auto f : fg_sorted) gts += f;
  double cum_fg = 0.0, cum_bg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum_fg += fg_sorted[i];
    cum_bg += 1.0 - fg_sorted[i];
    const double inter = gts - cum_fg;
    const double uni = gts + cum_bg;
    jac[i] = 1.0 - inter / uni;
  }
  for (std::size_t i = n; i-- > 1;) jac[i] -= jac[i - 1];
  return jac;
}

template <typename T>
Var<T> lovasz_softmax(const Var<T>& probs, const std::vector<std::uint32_t>& target,
                      std::uint32_t ignore_id) {
  check_target(probs.shape(), target, ignore_id, "lovasz_softmax");
  const auto& pv = probs.value();
  const int ch = pv.dim(0);
  const std::size_t plane = target.size();
  std::vector<std::size_t> pixels;
  for (std::size_t p = 0; p < plane; ++p) {
    if (target[p] != ignore_id) pixels.push_back(p);
  }
  // Per present class: pixel order by descending error and the matching
  // Lovasz gradient.
  struct ClassTerm {
    int cls;
    std::vector<std::size_t> order;
    std::vector<double> grad;
  };
  std::vector<ClassTerm> terms;
  double total = 0.0;
  const bool rec = kink::recording();
  for (int c = 0; c < ch; ++c) {
    const auto cu = static_cast<std::uint32_t>(c);
    if (std::none_of(pixels.begin(), pixels.end(), [&](std::size_t p) { return target[p] == cu; })) {
      continue;
    }
    std::vector<T> err(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const T fg = target[pixels[i]] == cu ? T(1) : T(0);
      err[i] = std::abs(fg - pv[c * plane + pixels[i]]);
    }
    ClassTerm term;
    term.cls = c;
    term.order.resize(pixels.size());
    std::iota(term.order.begin(), term.order.end(), std::size_t{0});
    std::stable_sort(term.order.begin(), term.order.end(),
                     [&](std::size_t a, std::size_t b) { return err[a] > err[b]; });
    std::vector<std::uint8_t> fg_sorted(pixels.size());
    for (std::size_t j = 0; j < pixels.size(); ++j) {
      fg_sorted[j] = target[pixels[term.order[j]]] == cu ? 1 : 0;
      if (rec) kink::mix(term.order[j]);
    }
    term.grad = lovasz_grad(fg_sorted);
    double loss_c = 0.0;
    for (std::size_t j = 0; j < pixels.size(); ++j) {
      loss_c += static_cast<double>(err[term.order[j]]) * term.grad[j];
    }
    total += loss_c;
    terms.push_back(std::move(term));
  }
  const double inv = 1.0 / static_cast<double>(terms.size());
  return make_result<T>(
      BasicTensor<T>({1}, static_cast<T>(total * inv)), {probs},
      [terms = std::move(terms), pixels = std::move(pixels), target, inv, plane](
          const BasicTensor<T>& g, std::vector<NodePtr<T>>& parents) {
        auto& n = parents[0];
        if (!n->requires_grad) return;
        n->ensure_grad();
        for (const auto& term : terms) {
          const auto cu = static_cast<std::uint32_t>(term.cls);
          for (std::size_t j = 0; j < term.order.size(); ++j) {
            const std::size_t p = pixels[term.order[j]];
            // d|fg - prob| / d prob is -1 on foreground and +1 elsewhere.
            const double sign = target[p] == cu ? -1.0 : 1.0;
            n->grad[term.cls * plane + p] +=
                g[0] * static_cast<T>(inv * term.grad[j] * sign);
          }
        }
      });
}

template <typename T>
SemanticLoss<T> semantic_loss(const Var<T>& logits, const std::vector<std::uint32_t>& target,
                              std::uint32_t ignore_id) {
  SemanticLoss<T> out;
  out.pixel = pixel_nll(logits, target, ignore_id);
  out.lovasz = lovasz_softmax(ops::softmax_channels(logits), target, ignore_id);
  out.total = ops::add(out.pixel, out.lovasz);
  return out;
}

double pixel_accuracy(const Tensor& logits, const std::vector<std::uint32_t>& target,
                      std::uint32_t ignore_id) {
  const int ch = logits.dim(0);
  const std::size_t plane = static_cast<std::size_t>(logits.dim(1)) * logits.dim(2);
  if (target.size() != plane) {
    throw Error(ErrorKind::kShape, "pixel_accuracy: target size does not match logits",
                {{"logits", shape_str(logits.shape())}});
  }
  std::size_t hit = 0, total = 0;
  for (std::size_t p = 0; p < plane; ++p) {
    if (target[p] == ignore_id) continue;
    int best = 0;
    for (int c = 1; c < ch; ++c) {
      if (logits[c * plane + p] > logits[static_cast<std::size_t>(best) * plane + p]) best = c;
    }
    hit += static_cast<std::uint32_t>(best) == target[p];
    ++total;
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

#define LPS_INSTANTIATE_LOSS(T)                                                             \
  template Var<T> pixel_nll(const Var<T>&, const std::vector<std::uint32_t>&, std::uint32_t); \
  template Var<T> lovasz_softmax(const Var<T>&, const std::vector<std::uint32_t>&,          \
                                 std::uint32_t);                                            \
  template SemanticLoss<T> semantic_loss(const Var<T>&, const std::vector<std::uint32_t>&,  \
                                         std::uint32_t);

LPS_INSTANTIATE_LOSS(float)
LPS_INSTANTIATE_LOSS(double)

#undef LPS_INSTANTIATE_LOSS

}  // namespace lps
