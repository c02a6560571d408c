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

#include "lps/range_ops.hpp"

#include <algorithm>
#include <cstdlib>

namespace lps {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
BasicTensor<T>* grad_slot(const NodePtr<T>& n) {
  if (!n->requires_grad) return nullptr;
  n->ensure_grad();
  return &n->grad;
}

}  // namespace

ProximityGrid build_proximity_grid(const Tensor& range, const std::vector<std::uint8_t>& valid,
                                   int search_h, int search_w, int k) {
  if (search_h < 1 || search_w < 1 || search_h % 2 == 0 || search_w % 2 == 0 ||
      search_h > 255 || search_w > 255) {
    throw Error(ErrorKind::kValidation,
                "proximity grid search extents must be odd and in [1, 255], got " +
                    std::to_string(search_h) + "x" + std::to_string(search_w),
                {{"key", "search"},
                 {"value", std::to_string(search_h) + "x" + std::to_string(search_w)}});
  }
  if (k < 1 || k > search_h * search_w) {
    throw Error(ErrorKind::kValidation,
                "proximity grid k must lie in [1, search area], got " + std::to_string(k),
                {{"key", "k"}, {"value", std::to_string(k)}});
  }
  int h, w;
  if (range.rank() == 2) {
    h = range.dim(0);
    w = range.dim(1);
  } else if (range.rank() == 3 && range.dim(0) == 1) {
    h = range.dim(1);
    w = range.dim(2);
  } else {
    throw Error(ErrorKind::kShape,
                "proximity grid needs an (H, W) or (1, H, W) range map, got " +
                    shape_str(range.shape()),
                {{"shape", shape_str(range.shape())}});
  }
  if (!valid.empty() && valid.size() != static_cast<std::size_t>(h) * w) {
    throw Error(ErrorKind::kShape, "validity mask size does not match the range map",
                {{"mask", std::to_string(valid.size())}, {"range", shape_str(range.shape())}});
  }
  auto is_valid = [&](std::size_t px) { return valid.empty() || valid[px] != 0; };

  ProximityGrid grid;
  grid.height = h;
  grid.width = w;
  grid.k = k;
  grid.offsets.assign(static_cast<std::size_t>(h) * w * k * 2, 0);
  const int hh = search_h / 2, hw = search_w / 2;

  struct Cand {
    float diff;
    int cheb;
    int order;
    int dr, dc;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<std::size_t>(search_h) * search_w);
  const auto& rv = range.storage();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t px = static_cast<std::size_t>(r) * w + c;
      if (!is_valid(px)) continue;  // all entries stay (0, 0)
      const float rq = rv[px];
      cands.clear();
      for (int dr = -hh; dr <= hh; ++dr) {
        for (int dc = -hw; dc <= hw; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const std::size_t q = static_cast<std::size_t>(rr) * w + cc;
          if (!is_valid(q)) continue;
          cands.push_back({std::abs(rv[q] - rq), std::max(std::abs(dr), std::abs(dc)),
                           (dr + hh) * search_w + (dc + hw), dr, dc});
        }
      }
      const std::size_t n = std::min(cands.size(), static_cast<std::size_t>(k));
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(n),
                        cands.end(), [](const Cand& a, const Cand& b) {
                          if (a.diff != b.diff) return a.diff < b.diff;
                          if (a.cheb != b.cheb) return a.cheb < b.cheb;
                          return a.order < b.order;
                        });
      std::sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(n),
                [](const Cand& a, const Cand& b) {
                  return a.diff != b.diff ? a.diff < b.diff : a.order < b.order;
                });
      for (std::size_t i = 0; i < n; ++i) {
        grid.offsets[(px * k + i) * 2] = static_cast<std::int8_t>(cands[i].dr);
        grid.offsets[(px * k + i) * 2 + 1] = static_cast<std::int8_t>(cands[i].dc);
      }
    }
  }
  return grid;
}

template <typename T>
Var<T> proximity_conv(const Var<T>& x, const ProximityGrid& grid, const Var<T>& w,
                      const Var<T>& b) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  if (xv.rank() != 3 || xv.dim(1) != grid.height || xv.dim(2) != grid.width) {
    throw Error(ErrorKind::kShape,
                "proximity_conv: input " + shape_str(xv.shape()) + " does not match grid " +
                    std::to_string(grid.height) + "x" + std::to_string(grid.width),
                {{"input", shape_str(xv.shape())},
                 {"grid", std::to_string(grid.height) + "x" + std::to_string(grid.width)}});
  }
  if (wv.rank() != 4 || wv.dim(1) != xv.dim(0) || wv.dim(2) * wv.dim(3) != grid.k) {
    throw Error(ErrorKind::kShape,
                "proximity_conv: weight " + shape_str(wv.shape()) + " incompatible with input " +
                    shape_str(xv.shape()) + " and k=" + std::to_string(grid.k),
                {{"input", shape_str(xv.shape())}, {"weight", shape_str(wv.shape())}});
  }
  const bool has_bias = b.defined();
  if (has_bias && (b.value().rank() != 1 || b.value().dim(0) != wv.dim(0))) {
    throw Error(ErrorKind::kShape,
                "proximity_conv: bias " + shape_str(b.shape()) + " does not match weight " +
                    shape_str(wv.shape()),
                {{"bias", shape_str(b.shape())}, {"weight", shape_str(wv.shape())}});
  }
  const int out_c = wv.dim(0), in_c = xv.dim(0), k = grid.k;
  const int h = grid.height, wd = grid.width;
  const std::size_t plane = static_cast<std::size_t>(h) * wd;
  BasicTensor<T> y({out_c, h, wd});
  for (int o = 0; o < out_c; ++o) {
    const T bias = has_bias ? b.value()[static_cast<std::size_t>(o)] : T(0);
    for (std::size_t px = 0; px < plane; ++px) {
      const int r = static_cast<int>(px / wd), c = static_cast<int>(px % wd);
      T acc = bias;
      for (int i = 0; i < k; ++i) {
        const std::size_t src =
            static_cast<std::size_t>(r + grid.drow(px, i)) * wd + (c + grid.dcol(px, i));
        for (int ci = 0; ci < in_c; ++ci) {
          acc += wv[(static_cast<std::size_t>(o) * in_c + ci) * k + i] * xv[ci * plane + src];
        }
      }
      y[o * plane + px] = acc;
    }
  }
  std::vector<Var<T>> parents = {x, w};
  if (has_bias) parents.push_back(b);
  return make_result<T>(
      std::move(y), std::move(parents),
      [grid](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
        const auto& xv = p[0]->value;
        const auto& wv = p[1]->value;
        BasicTensor<T>* gx = grad_slot(p[0]);
        BasicTensor<T>* gw = grad_slot(p[1]);
        BasicTensor<T>* gb = p.size() > 2 ? grad_slot(p[2]) : nullptr;
        const int out_c = wv.dim(0), in_c = xv.dim(0), k = grid.k, wd = grid.width;
        const std::size_t plane = static_cast<std::size_t>(grid.height) * wd;
        for (int o = 0; o < out_c; ++o) {
          for (std::size_t px = 0; px < plane; ++px) {
            const T go = g[o * plane + px];
            if (gb != nullptr) (*gb)[static_cast<std::size_t>(o)] += go;
            const int r = static_cast<int>(px / wd), c = static_cast<int>(px % wd);
            for (int i = 0; i < k; ++i) {
              const std::size_t src =
                  static_cast<std::size_t>(r + grid.drow(px, i)) * wd + (c + grid.dcol(px, i));
              for (int ci = 0; ci < in_c; ++ci) {
                const std::size_t widx = (static_cast<std::size_t>(o) * in_c + ci) * k + i;
                if (gw != nullptr) (*gw)[widx] += go * xv[ci * plane + src];
                if (gx != nullptr) (*gx)[ci * plane + src] += go * wv[widx];
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> gated_blend(const Var<T>& g, const Var<T>& a, const Var<T>& b) {
  require_same_shape(g.shape(), a.shape(), "gated_blend");
  require_same_shape(a.shape(), b.shape(), "gated_blend");
  const auto& gv = g.value();
  BasicTensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = gv[i] * a.value()[i] + (T(1) - gv[i]) * b.value()[i];
  }
  return make_result<T>(std::move(y), {g, a, b},
                        [](const BasicTensor<T>& go, std::vector<NodePtr<T>>& p) {
                          const auto& gv = p[0]->value;
                          const auto& av = p[1]->value;
                          const auto& bv = p[2]->value;
                          BasicTensor<T>* gg = grad_slot(p[0]);
                          BasicTensor<T>* ga = grad_slot(p[1]);
                          BasicTensor<T>* gb = grad_slot(p[2]);
                          for (std::size_t i = 0; i < go.size(); ++i) {
                            if (gg != nullptr) (*gg)[i] += go[i] * (av[i] - bv[i]);
                            if (ga != nullptr) (*ga)[i] += go[i] * gv[i];
                            if (gb != nullptr) (*gb)[i] += go[i] * (T(1) - gv[i]);
                          }
                        });
}

template <typename T>
Var<T> scaled_offset_coords(const Var<T>& d, int oy, int ox) {
  const auto& dv = d.value();
  if (dv.rank() != 3 || dv.dim(0) != 1) {
    throw Error(ErrorKind::kShape,
                "dilation map must be (1, H, W), got " + shape_str(dv.shape()),
                {{"shape", shape_str(dv.shape())}});
  }
  const int h = dv.dim(1), w = dv.dim(2);
  BasicTensor<T> coords({2, h, w});
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const T dd = dv.at(0, r, c);
      coords.at(0, r, c) = static_cast<T>(r) + dd * static_cast<T>(oy);
      coords.at(1, r, c) = static_cast<T>(c) + dd * static_cast<T>(ox);
    }
  }
  return make_result<T>(std::move(coords), {d},
                        [oy, ox](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          BasicTensor<T>* gd = grad_slot(p[0]);
                          if (gd == nullptr) return;
                          const std::size_t plane = gd->size();
                          for (std::size_t i = 0; i < plane; ++i) {
                            (*gd)[i] += g[i] * static_cast<T>(oy) +
                                        g[plane + i] * static_cast<T>(ox);
                          }
                        });
}

template <typename T>
Var<T> depthwise_taps(const std::vector<Var<T>>& taps, const Var<T>& w) {
  const auto& wv = w.value();
  if (taps.empty() || wv.rank() != 4 || wv.dim(1) != 1 ||
      static_cast<std::size_t>(wv.dim(2) * wv.dim(3)) != taps.size()) {
    throw Error(ErrorKind::kShape,
                "depthwise_taps: weight " + shape_str(wv.shape()) + " does not match " +
                    std::to_string(taps.size()) + " taps",
                {{"weight", shape_str(wv.shape())}});
  }
  const Shape& s = taps[0].shape();
  for (const auto& t : taps) require_same_shape(s, t.shape(), "depthwise_taps");
  if (s.size() != 3 || s[0] != wv.dim(0)) {
    throw Error(ErrorKind::kShape,
                "depthwise_taps: taps " + shape_str(s) + " do not match weight " +
                    shape_str(wv.shape()),
                {{"taps", shape_str(s)}, {"weight", shape_str(wv.shape())}});
  }
  const int ch = s[0];
  const int k = static_cast<int>(taps.size());
  const std::size_t plane = static_cast<std::size_t>(s[1]) * s[2];
  BasicTensor<T> y(s);
  for (int c = 0; c < ch; ++c) {
    for (int i = 0; i < k; ++i) {
      const T wc = wv[static_cast<std::size_t>(c) * k + i];
      const auto& tv = taps[static_cast<std::size_t>(i)].value();
      for (std::size_t p = 0; p < plane; ++p) y[c * plane + p] += wc * tv[c * plane + p];
    }
  }
  std::vector<Var<T>> parents = taps;
  parents.push_back(w);
  return make_result<T>(std::move(y), std::move(parents),
                        [ch, k, plane](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          const auto& wv = p[static_cast<std::size_t>(k)]->value;
                          BasicTensor<T>* gw = grad_slot(p[static_cast<std::size_t>(k)]);
                          for (int i = 0; i < k; ++i) {
                            const auto& tv = p[static_cast<std::size_t>(i)]->value;
                            BasicTensor<T>* gt = grad_slot(p[static_cast<std::size_t>(i)]);
                            for (int c = 0; c < ch; ++c) {
                              const std::size_t widx = static_cast<std::size_t>(c) * k + i;
                              T acc = T(0);
                              for (std::size_t q = 0; q < plane; ++q) {
                                const T go = g[c * plane + q];
                                acc += go * tv[c * plane + q];
                                if (gt != nullptr) (*gt)[c * plane + q] += go * wv[widx];
                              }
                              if (gw != nullptr) (*gw)[widx] += acc;
                            }
                          }
                        });
}

#define LPS_INSTANTIATE_RANGE_OPS(T)                                                         \
  template Var<T> proximity_conv(const Var<T>&, const ProximityGrid&, const Var<T>&,         \
                                 const Var<T>&);                                             \
  template Var<T> gated_blend(const Var<T>&, const Var<T>&, const Var<T>&);                  \
  template Var<T> scaled_offset_coords(const Var<T>&, int, int);                             \
  template Var<T> depthwise_taps(const std::vector<Var<T>>&, const Var<T>&);

LPS_INSTANTIATE_RANGE_OPS(float)
LPS_INSTANTIATE_RANGE_OPS(double)

#undef LPS_INSTANTIATE_RANGE_OPS

}  // namespace lps
