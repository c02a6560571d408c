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

#include "lps/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "lps/kink.hpp"

namespace lps::kernels {
namespace {

void require_rank(const Shape& s, int rank, const char* what) {
  if (static_cast<int>(s.size()) != rank) {
    throw Error(ErrorKind::kShape,
                std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                    shape_str(s),
                {{"shape", shape_str(s)}});
  }
}

int pad_for(int kernel, int dilation, Padding padding) {
  return padding == Padding::kSame ? dilation * (kernel - 1) / 2 : 0;
}

// Range [lo, hi) of output positions o such that o*stride + offset lies in
// [0, in).
void valid_range(int out, int in, int stride, int offset, int* lo, int* hi) {
  int l = 0;
  if (offset < 0) l = (-offset + stride - 1) / stride;
  int h = out;
  if (in - 1 - offset < 0) {
    h = 0;
  } else {
    h = std::min(out, (in - 1 - offset) / stride + 1);
  }
  *lo = l;
  *hi = std::max(l, h);
}

void check_conv_shapes(const Shape& x, const Shape& w, const Shape& b) {
  require_rank(x, 3, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  if (x[0] != w[1]) {
    throw Error(ErrorKind::kShape,
                "conv2d: input channels " + std::to_string(x[0]) + " of input " + shape_str(x) +
                    " do not match weight in_ch " + std::to_string(w[1]) + " of weight " +
                    shape_str(w),
                {{"input", shape_str(x)}, {"weight", shape_str(w)}});
  }
  if (!b.empty() && !(b.size() == 1 && b[0] == w[0])) {
    throw Error(ErrorKind::kShape,
                "conv2d: bias " + shape_str(b) + " does not match weight " + shape_str(w),
                {{"bias", shape_str(b)}, {"weight", shape_str(w)}});
  }
}

template <typename T>
void fill_sample_taps(const BasicTensor<T>& x, T r, T c, SamplePadding pad, int* r0, int* r1,
                      int* c0, int* c1, T* fr, T* fc, bool* clamped_r, bool* clamped_c) {
  const int h = x.height();
  const int w = x.width();
  *clamped_r = false;
  *clamped_c = false;
  if (pad == SamplePadding::kClamp) {
    if (r < T(0)) { r = T(0); *clamped_r = true; }
    if (r > T(h - 1)) { r = T(h - 1); *clamped_r = true; }
    if (c < T(0)) { c = T(0); *clamped_c = true; }
    if (c > T(w - 1)) { c = T(w - 1); *clamped_c = true; }
  }
  const T rf = std::floor(r);
  const T cf = std::floor(c);
  *r0 = static_cast<int>(rf);
  *c0 = static_cast<int>(cf);
  *fr = r - rf;
  *fc = c - cf;
  *r1 = *r0 + 1;
  *c1 = *c0 + 1;
  if (pad == SamplePadding::kClamp) {
    *r1 = std::min(*r1, h - 1);
    *c1 = std::min(*c1, w - 1);
  }
}

}  // namespace

int conv_out_extent(int in, int kernel, int dilation, int stride, Padding padding) {
  const int pad = pad_for(kernel, dilation, padding);
  const int span = dilation * (kernel - 1) + 1;
  const int out = (in + 2 * pad - span) / stride + 1;
  return std::max(out, 0);
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                              const BasicTensor<T>& b, const Conv2dOptions& opt) {
  check_conv_shapes(x.shape(), w.shape(), b.shape());
  const int in_c = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  const int out_c = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int out_h = conv_out_extent(in_h, kh, opt.dilation_h, opt.stride, opt.padding);
  const int out_w = conv_out_extent(in_w, kw, opt.dilation_w, opt.stride, opt.padding);
  const int ph = pad_for(kh, opt.dilation_h, opt.padding);
  const int pw = pad_for(kw, opt.dilation_w, opt.padding);
  BasicTensor<T> y({out_c, out_h, out_w});
  for (int o = 0; o < out_c; ++o) {
    const T bias = b.empty() ? T(0) : b[static_cast<std::size_t>(o)];
    T* yo = &y.at(o, 0, 0);
    std::fill(yo, yo + static_cast<std::size_t>(out_h) * out_w, bias);
    for (int ky = 0; ky < kh; ++ky) {
      const int off_y = ky * opt.dilation_h - ph;
      int y_lo, y_hi;
      valid_range(out_h, in_h, opt.stride, off_y, &y_lo, &y_hi);
      for (int kx = 0; kx < kw; ++kx) {
        const int off_x = kx * opt.dilation_w - pw;
        int x_lo, x_hi;
        valid_range(out_w, in_w, opt.stride, off_x, &x_lo, &x_hi);
        for (int c = 0; c < in_c; ++c) {
          const T wv = w[((static_cast<std::size_t>(o) * in_c + c) * kh + ky) * kw + kx];
          for (int oy = y_lo; oy < y_hi; ++oy) {
            const T* xr = &x.at(c, oy * opt.stride + off_y, 0);
            T* yr = yo + static_cast<std::size_t>(oy) * out_w;
            for (int ox = x_lo; ox < x_hi; ++ox) {
              yr[ox] += wv * xr[ox * opt.stride + off_x];
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& gy,
                     const Conv2dOptions& opt, BasicTensor<T>* gx, BasicTensor<T>* gw,
                     BasicTensor<T>* gb) {
  const int in_c = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  const int out_c = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int out_h = gy.dim(1), out_w = gy.dim(2);
  const int ph = pad_for(kh, opt.dilation_h, opt.padding);
  const int pw = pad_for(kw, opt.dilation_w, opt.padding);
  for (int o = 0; o < out_c; ++o) {
    const T* go = &gy.at(o, 0, 0);
    if (gb != nullptr) {
      T s = T(0);
      for (std::size_t i = 0; i < static_cast<std::size_t>(out_h) * out_w; ++i) s += go[i];
      (*gb)[static_cast<std::size_t>(o)] += s;
    }
    for (int ky = 0; ky < kh; ++ky) {
      const int off_y = ky * opt.dilation_h - ph;
      int y_lo, y_hi;
      valid_range(out_h, in_h, opt.stride, off_y, &y_lo, &y_hi);
      for (int kx = 0; kx < kw; ++kx) {
        const int off_x = kx * opt.dilation_w - pw;
        int x_lo, x_hi;
        valid_range(out_w, in_w, opt.stride, off_x, &x_lo, &x_hi);
        for (int c = 0; c < in_c; ++c) {
          const std::size_t widx = ((static_cast<std::size_t>(o) * in_c + c) * kh + ky) * kw + kx;
          const T wv = w[widx];
          T acc = T(0);
          for (int oy = y_lo; oy < y_hi; ++oy) {
            const int iy = oy * opt.stride + off_y;
            const T* xr = &x.at(c, iy, 0);
            const T* gr = go + static_cast<std::size_t>(oy) * out_w;
            T* gxr = gx != nullptr ? &gx->at(c, iy, 0) : nullptr;
            for (int ox = x_lo; ox < x_hi; ++ox) {
              const int ix = ox * opt.stride + off_x;
              acc += gr[ox] * xr[ix];
              if (gxr != nullptr) gxr[ix] += wv * gr[ox];
            }
          }
          if (gw != nullptr) (*gw)[widx] += acc;
        }
      }
    }
  }
}

template <typename T>
BasicTensor<T> depthwise_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                                 const Conv2dOptions& opt) {
  require_rank(x.shape(), 3, "depthwise input");
  require_rank(w.shape(), 4, "depthwise weight");
  if (w.dim(0) != x.dim(0) || w.dim(1) != 1) {
    throw Error(ErrorKind::kShape,
                "depthwise: weight " + shape_str(w.shape()) + " does not match input " +
                    shape_str(x.shape()),
                {{"input", shape_str(x.shape())}, {"weight", shape_str(w.shape())}});
  }
  const int ch = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int kh = w.dim(2), kw = w.dim(3);
  const int ph = pad_for(kh, opt.dilation_h, opt.padding);
  const int pw = pad_for(kw, opt.dilation_w, opt.padding);
  const int out_h = conv_out_extent(h, kh, opt.dilation_h, 1, opt.padding);
  const int out_w = conv_out_extent(wd, kw, opt.dilation_w, 1, opt.padding);
  BasicTensor<T> y({ch, out_h, out_w});
  for (int c = 0; c < ch; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      const int off_y = ky * opt.dilation_h - ph;
      int y_lo, y_hi;
      valid_range(out_h, h, 1, off_y, &y_lo, &y_hi);
      for (int kx = 0; kx < kw; ++kx) {
        const int off_x = kx * opt.dilation_w - pw;
        int x_lo, x_hi;
        valid_range(out_w, wd, 1, off_x, &x_lo, &x_hi);
        const T wv = w[(static_cast<std::size_t>(c) * kh + ky) * kw + kx];
        for (int oy = y_lo; oy < y_hi; ++oy) {
          const T* xr = &x.at(c, oy + off_y, 0);
          T* yr = &y.at(c, oy, 0);
          for (int ox = x_lo; ox < x_hi; ++ox) yr[ox] += wv * xr[ox + off_x];
        }
      }
    }
  }
  return y;
}

template <typename T>
void depthwise_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& gy,
                        const Conv2dOptions& opt, BasicTensor<T>* gx, BasicTensor<T>* gw) {
  const int ch = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int kh = w.dim(2), kw = w.dim(3);
  const int ph = pad_for(kh, opt.dilation_h, opt.padding);
  const int pw = pad_for(kw, opt.dilation_w, opt.padding);
  const int out_h = gy.dim(1), out_w = gy.dim(2);
  for (int c = 0; c < ch; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      const int off_y = ky * opt.dilation_h - ph;
      int y_lo, y_hi;
      valid_range(out_h, h, 1, off_y, &y_lo, &y_hi);
      for (int kx = 0; kx < kw; ++kx) {
        const int off_x = kx * opt.dilation_w - pw;
        int x_lo, x_hi;
        valid_range(out_w, wd, 1, off_x, &x_lo, &x_hi);
        const std::size_t widx = (static_cast<std::size_t>(c) * kh + ky) * kw + kx;
        const T wv = w[widx];
        T acc = T(0);
        for (int oy = y_lo; oy < y_hi; ++oy) {
          const T* xr = &x.at(c, oy + off_y, 0);
          const T* gr = &gy.at(c, oy, 0);
          T* gxr = gx != nullptr ? &gx->at(c, oy + off_y, 0) : nullptr;
          for (int ox = x_lo; ox < x_hi; ++ox) {
            acc += gr[ox] * xr[ox + off_x];
            if (gxr != nullptr) gxr[ox + off_x] += wv * gr[ox];
          }
        }
        if (gw != nullptr) (*gw)[widx] += acc;
      }
    }
  }
}

template <typename T>
BasicTensor<T> bilinear_sample_forward(const BasicTensor<T>& x, const BasicTensor<T>& coords,
                                       SamplePadding pad) {
  require_rank(x.shape(), 3, "bilinear_sample input");
  require_rank(coords.shape(), 3, "bilinear_sample coords");
  if (coords.dim(0) != 2) {
    throw Error(ErrorKind::kShape,
                "bilinear_sample: coords must be (2, H, W), got " + shape_str(coords.shape()),
                {{"coords", shape_str(coords.shape())}});
  }
  const int ch = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = coords.dim(1), ow = coords.dim(2);
  BasicTensor<T> y({ch, oh, ow});
  const bool rec = kink::recording();
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      int r0, r1, c0, c1;
      T fr, fc;
      bool cr, cc;
      fill_sample_taps(x, coords.at(0, i, j), coords.at(1, i, j), pad, &r0, &r1, &c0, &c1, &fr,
                       &fc, &cr, &cc);
      if (rec) {
        kink::mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(r0)) * 0x9E3779B1u +
                  static_cast<std::uint64_t>(static_cast<std::int64_t>(c0)) * 0x85EBCA77u +
                  (cr ? 1u : 0u) + (cc ? 2u : 0u));
      }
      const bool in_r0 = r0 >= 0 && r0 < h, in_r1 = r1 >= 0 && r1 < h;
      const bool in_c0 = c0 >= 0 && c0 < w, in_c1 = c1 >= 0 && c1 < w;
      for (int c = 0; c < ch; ++c) {
        const T v00 = (in_r0 && in_c0) ? x.at(c, r0, c0) : T(0);
        const T v01 = (in_r0 && in_c1) ? x.at(c, r0, c1) : T(0);
        const T v10 = (in_r1 && in_c0) ? x.at(c, r1, c0) : T(0);
        const T v11 = (in_r1 && in_c1) ? x.at(c, r1, c1) : T(0);
        y.at(c, i, j) = (T(1) - fr) * ((T(1) - fc) * v00 + fc * v01) +
                        fr * ((T(1) - fc) * v10 + fc * v11);
      }
    }
  }
  return y;
}

template <typename T>
void bilinear_sample_backward(const BasicTensor<T>& x, const BasicTensor<T>& coords,
                              SamplePadding pad, const BasicTensor<T>& gy, BasicTensor<T>* gx,
                              BasicTensor<T>* gcoords) {
  const int ch = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = coords.dim(1), ow = coords.dim(2);
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      int r0, r1, c0, c1;
      T fr, fc;
      bool cr, cc;
      fill_sample_taps(x, coords.at(0, i, j), coords.at(1, i, j), pad, &r0, &r1, &c0, &c1, &fr,
                       &fc, &cr, &cc);
      const bool in_r0 = r0 >= 0 && r0 < h, in_r1 = r1 >= 0 && r1 < h;
      const bool in_c0 = c0 >= 0 && c0 < w, in_c1 = c1 >= 0 && c1 < w;
      T g_r = T(0), g_c = T(0);
      for (int c = 0; c < ch; ++c) {
        const T g = gy.at(c, i, j);
        const T v00 = (in_r0 && in_c0) ? x.at(c, r0, c0) : T(0);
        const T v01 = (in_r0 && in_c1) ? x.at(c, r0, c1) : T(0);
        const T v10 = (in_r1 && in_c0) ? x.at(c, r1, c0) : T(0);
        const T v11 = (in_r1 && in_c1) ? x.at(c, r1, c1) : T(0);
        g_r += g * ((T(1) - fc) * (v10 - v00) + fc * (v11 - v01));
        g_c += g * ((T(1) - fr) * (v01 - v00) + fr * (v11 - v10));
        if (gx != nullptr) {
          if (in_r0 && in_c0) gx->at(c, r0, c0) += g * (T(1) - fr) * (T(1) - fc);
          if (in_r0 && in_c1) gx->at(c, r0, c1) += g * (T(1) - fr) * fc;
          if (in_r1 && in_c0) gx->at(c, r1, c0) += g * fr * (T(1) - fc);
          if (in_r1 && in_c1) gx->at(c, r1, c1) += g * fr * fc;
        }
      }
      if (gcoords != nullptr) {
        if (!cr) gcoords->at(0, i, j) += g_r;
        if (!cc) gcoords->at(1, i, j) += g_c;
      }
    }
  }
}

namespace {

struct Tap {
  int i0, i1;
  double frac;
};

std::vector<Tap> resize_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    taps[static_cast<std::size_t>(d)] = {i0, std::min(i0 + 1, in - 1), src - i0};
  }
  return taps;
}

}  // namespace

template <typename T>
BasicTensor<T> resize_bilinear_forward(const BasicTensor<T>& x, int out_h, int out_w) {
  require_rank(x.shape(), 3, "resize input");
  if (out_h <= 0 || out_w <= 0) {
    throw Error(ErrorKind::kShape,
                "resize: zero target extent " + std::to_string(out_h) + "x" + std::to_string(out_w),
                {{"target", std::to_string(out_h) + "x" + std::to_string(out_w)}});
  }
  const auto rt = resize_taps(x.dim(1), out_h);
  const auto ct = resize_taps(x.dim(2), out_w);
  BasicTensor<T> y({x.dim(0), out_h, out_w});
  for (int c = 0; c < x.dim(0); ++c) {
    for (int i = 0; i < out_h; ++i) {
      const Tap& r = rt[static_cast<std::size_t>(i)];
      const T fr = static_cast<T>(r.frac);
      for (int j = 0; j < out_w; ++j) {
        const Tap& q = ct[static_cast<std::size_t>(j)];
        const T fc = static_cast<T>(q.frac);
        y.at(c, i, j) = (T(1) - fr) * ((T(1) - fc) * x.at(c, r.i0, q.i0) + fc * x.at(c, r.i0, q.i1)) +
                        fr * ((T(1) - fc) * x.at(c, r.i1, q.i0) + fc * x.at(c, r.i1, q.i1));
      }
    }
  }
  return y;
}

template <typename T>
void resize_bilinear_backward(const BasicTensor<T>& gy, int in_h, int in_w, BasicTensor<T>* gx) {
  const int out_h = gy.dim(1), out_w = gy.dim(2);
  const auto rt = resize_taps(in_h, out_h);
  const auto ct = resize_taps(in_w, out_w);
  for (int c = 0; c < gy.dim(0); ++c) {
    for (int i = 0; i < out_h; ++i) {
      const Tap& r = rt[static_cast<std::size_t>(i)];
      const T fr = static_cast<T>(r.frac);
      for (int j = 0; j < out_w; ++j) {
        const Tap& q = ct[static_cast<std::size_t>(j)];
        const T fc = static_cast<T>(q.frac);
        const T g = gy.at(c, i, j);
        gx->at(c, r.i0, q.i0) += g * (T(1) - fr) * (T(1) - fc);
        gx->at(c, r.i0, q.i1) += g * (T(1) - fr) * fc;
        gx->at(c, r.i1, q.i0) += g * fr * (T(1) - fc);
        gx->at(c, r.i1, q.i1) += g * fr * fc;
      }
    }
  }
}

template <typename T>
BasicTensor<T> avg_pool2_forward(const BasicTensor<T>& x) {
  require_rank(x.shape(), 3, "avg_pool2 input");
  if (x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
    throw Error(ErrorKind::kShape, "avg_pool2: extents must be even, got " + shape_str(x.shape()),
                {{"input", shape_str(x.shape())}});
  }
  BasicTensor<T> y({x.dim(0), x.dim(1) / 2, x.dim(2) / 2});
  for (int c = 0; c < y.dim(0); ++c) {
    for (int i = 0; i < y.dim(1); ++i) {
      for (int j = 0; j < y.dim(2); ++j) {
        y.at(c, i, j) = T(0.25) * (x.at(c, 2 * i, 2 * j) + x.at(c, 2 * i, 2 * j + 1) +
                                   x.at(c, 2 * i + 1, 2 * j) + x.at(c, 2 * i + 1, 2 * j + 1));
      }
    }
  }
  return y;
}

template <typename T>
void avg_pool2_backward(const BasicTensor<T>& gy, BasicTensor<T>* gx) {
  for (int c = 0; c < gy.dim(0); ++c) {
    for (int i = 0; i < gy.dim(1); ++i) {
      for (int j = 0; j < gy.dim(2); ++j) {
        const T g = T(0.25) * gy.at(c, i, j);
        gx->at(c, 2 * i, 2 * j) += g;
        gx->at(c, 2 * i, 2 * j + 1) += g;
        gx->at(c, 2 * i + 1, 2 * j) += g;
        gx->at(c, 2 * i + 1, 2 * j + 1) += g;
      }
    }
  }
}

template <typename T>
BasicTensor<T> softmax_channels_forward(const BasicTensor<T>& x) {
  require_rank(x.shape(), 3, "softmax input");
  const int ch = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  BasicTensor<T> y(x.shape());
  for (std::size_t p = 0; p < plane; ++p) {
    T m = -std::numeric_limits<T>::infinity();
    for (int c = 0; c < ch; ++c) m = std::max(m, x[c * plane + p]);
    T s = T(0);
    for (int c = 0; c < ch; ++c) {
      const T e = std::exp(x[c * plane + p] - m);
      y[c * plane + p] = e;
      s += e;
    }
    for (int c = 0; c < ch; ++c) y[c * plane + p] /= s;
  }
  return y;
}

template <typename T>
void softmax_channels_backward(const BasicTensor<T>& y, const BasicTensor<T>& gy,
                               BasicTensor<T>* gx) {
  const int ch = y.dim(0);
  const std::size_t plane = static_cast<std::size_t>(y.dim(1)) * y.dim(2);
  for (std::size_t p = 0; p < plane; ++p) {
    T dot = T(0);
    for (int c = 0; c < ch; ++c) dot += y[c * plane + p] * gy[c * plane + p];
    for (int c = 0; c < ch; ++c) {
      (*gx)[c * plane + p] += y[c * plane + p] * (gy[c * plane + p] - dot);
    }
  }
}

template <typename T>
BasicTensor<T> channel_norm_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                    const BasicTensor<T>& beta, T eps, NormCache<T>* cache) {
  require_rank(x.shape(), 3, "channel_norm input");
  const int ch = x.dim(0);
  if (gamma.size() != static_cast<std::size_t>(ch) || beta.size() != static_cast<std::size_t>(ch)) {
    throw Error(ErrorKind::kShape,
                "channel_norm: affine " + shape_str(gamma.shape()) + " does not match input " +
                    shape_str(x.shape()),
                {{"input", shape_str(x.shape())}, {"gamma", shape_str(gamma.shape())}});
  }
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  BasicTensor<T> y(x.shape());
  BasicTensor<T> xhat(x.shape());
  std::vector<T> inv_std(static_cast<std::size_t>(ch));
  for (int c = 0; c < ch; ++c) {
    const T* xc = &x[c * plane];
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += xc[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = xc[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(plane);
    const T is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    inv_std[static_cast<std::size_t>(c)] = is;
    const T m = static_cast<T>(mean);
    for (std::size_t i = 0; i < plane; ++i) {
      const T n = (xc[i] - m) * is;
      xhat[c * plane + i] = n;
      y[c * plane + i] = gamma[static_cast<std::size_t>(c)] * n + beta[static_cast<std::size_t>(c)];
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
void channel_norm_backward(const NormCache<T>& cache, const BasicTensor<T>& gamma,
                           const BasicTensor<T>& gy, BasicTensor<T>* gx, BasicTensor<T>* ggamma,
                           BasicTensor<T>* gbeta) {
  const BasicTensor<T>& xhat = cache.normalized;
  const int ch = xhat.dim(0);
  const std::size_t plane = static_cast<std::size_t>(xhat.dim(1)) * xhat.dim(2);
  for (int c = 0; c < ch; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      sum_g += gy[c * plane + i];
      sum_gx += static_cast<double>(gy[c * plane + i]) * xhat[c * plane + i];
    }
    if (gbeta != nullptr) (*gbeta)[static_cast<std::size_t>(c)] += static_cast<T>(sum_g);
    if (ggamma != nullptr) (*ggamma)[static_cast<std::size_t>(c)] += static_cast<T>(sum_gx);
    if (gx != nullptr) {
      const T k = gamma[static_cast<std::size_t>(c)] * cache.inv_std[static_cast<std::size_t>(c)];
      const T mg = static_cast<T>(sum_g / static_cast<double>(plane));
      const T mgx = static_cast<T>(sum_gx / static_cast<double>(plane));
      for (std::size_t i = 0; i < plane; ++i) {
        (*gx)[c * plane + i] += k * (gy[c * plane + i] - mg - xhat[c * plane + i] * mgx);
      }
    }
  }
}

#define LPS_INSTANTIATE_KERNELS(T)                                                              \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                         const BasicTensor<T>&, const Conv2dOptions&);          \
  template void conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                const BasicTensor<T>&, const Conv2dOptions&, BasicTensor<T>*,   \
                                BasicTensor<T>*, BasicTensor<T>*);                              \
  template BasicTensor<T> depthwise_forward(const BasicTensor<T>&, const BasicTensor<T>&,       \
                                            const Conv2dOptions&);                              \
  template void depthwise_backward(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                   const BasicTensor<T>&, const Conv2dOptions&,                 \
                                   BasicTensor<T>*, BasicTensor<T>*);                           \
  template BasicTensor<T> bilinear_sample_forward(const BasicTensor<T>&, const BasicTensor<T>&, \
                                                  SamplePadding);                               \
  template void bilinear_sample_backward(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                         SamplePadding, const BasicTensor<T>&,                  \
                                         BasicTensor<T>*, BasicTensor<T>*);                     \
  template BasicTensor<T> resize_bilinear_forward(const BasicTensor<T>&, int, int);             \
  template void resize_bilinear_backward(const BasicTensor<T>&, int, int, BasicTensor<T>*);     \
  template BasicTensor<T> avg_pool2_forward(const BasicTensor<T>&);                             \
  template void avg_pool2_backward(const BasicTensor<T>&, BasicTensor<T>*);                     \
  template BasicTensor<T> softmax_channels_forward(const BasicTensor<T>&);                      \
  template void softmax_channels_backward(const BasicTensor<T>&, const BasicTensor<T>&,         \
                                          BasicTensor<T>*);                                     \
  template BasicTensor<T> channel_norm_forward(const BasicTensor<T>&, const BasicTensor<T>&,    \
                                               const BasicTensor<T>&, T, NormCache<T>*);        \
  template void channel_norm_backward(const NormCache<T>&, const BasicTensor<T>&,               \
                                      const BasicTensor<T>&, BasicTensor<T>*, BasicTensor<T>*,  \
                                      BasicTensor<T>*);

LPS_INSTANTIATE_KERNELS(float)
LPS_INSTANTIATE_KERNELS(double)

#undef LPS_INSTANTIATE_KERNELS

}  // namespace lps::kernels
