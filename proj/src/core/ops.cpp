// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/core/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "infoplane/errors.hpp"

namespace infoplane::ops {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void require_4d(const Var& x, const char* op) {
  if (x.value().ndim() != 4) throw ShapeError(std::string(op) + ": expected NCHW, got " + shape_str(x.shape()));
}

struct Geometry {
  int n, c, h, w;
};

Geometry geom(const Tensor& t) { return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)}; }

// Elementwise unary op with derivative expressed through input and output values.
template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  Tensor out(a.shape());
  const float* x = a.value().data();
  float* y = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) y[i] = f(x[i]);
  return make_result(std::move(out), {a}, [dfdx](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    const float* x = in.value.data();
    const float* y = self.value.data();
    const float* gy = self.grad.data();
    float* gx = g.data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += gy[i] * dfdx(x[i], y[i]);
  });
}

// cols[(c*kh + ky)*kw + kx][(n*Ho + oy)*Wo + ox] = x[n][c][oy*s + ky - pt][ox*s + kx - pl]
void im2col(const float* x, int n, int c, int h, int w, int kh, int kw, int stride, int pt, int pl, int ho,
            int wo, float* cols) {
  const std::size_t p_total = static_cast<std::size_t>(n) * ho * wo;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        float* row = cols + ((static_cast<std::size_t>(ci) * kh + ky) * kw + kx) * p_total;
        for (int ni = 0; ni < n; ++ni) {
          const float* plane = x + (static_cast<std::size_t>(ni) * c + ci) * h * w;
          float* dst = row + static_cast<std::size_t>(ni) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - pt;
            float* drow = dst + oy * wo;
            if (iy < 0 || iy >= h) {
              std::fill(drow, drow + wo, 0.0f);
              continue;
            }
            const float* srow = plane + iy * w;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - pl;
              drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im(const float* cols, int n, int c, int h, int w, int kh, int kw, int stride, int pt, int pl, int ho,
            int wo, float* x) {
  const std::size_t p_total = static_cast<std::size_t>(n) * ho * wo;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const float* row = cols + ((static_cast<std::size_t>(ci) * kh + ky) * kw + kx) * p_total;
        for (int ni = 0; ni < n; ++ni) {
          float* plane = x + (static_cast<std::size_t>(ni) * c + ci) * h * w;
          const float* src = row + static_cast<std::size_t>(ni) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - pt;
            if (iy < 0 || iy >= h) continue;
            float* drow = plane + iy * w;
            const float* srow = src + oy * wo;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - pl;
              if (ix >= 0 && ix < w) drow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

// NCHW -> [C, N*H*W]
FloatBuffer to_channel_major(const Tensor& t) {
  const auto g = geom(t);
  const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
  FloatBuffer out(t.size());
  for (int ni = 0; ni < g.n; ++ni) {
    for (int ci = 0; ci < g.c; ++ci) {
      const float* src = t.data() + (static_cast<std::size_t>(ni) * g.c + ci) * hw;
      std::copy(src, src + hw, out.data() + (static_cast<std::size_t>(ci) * g.n + ni) * hw);
    }
  }
  return out;
}

// [C, N*H*W] -> NCHW, accumulating when `accumulate` is set.
void from_channel_major(const float* cm, Tensor& t, bool accumulate) {
  const auto g = geom(t);
  const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
  for (int ni = 0; ni < g.n; ++ni) {
    for (int ci = 0; ci < g.c; ++ci) {
      const float* src = cm + (static_cast<std::size_t>(ci) * g.n + ni) * hw;
      float* dst = t.data() + (static_cast<std::size_t>(ni) * g.c + ci) * hw;
      if (accumulate) {
        for (std::size_t i = 0; i < hw; ++i) dst[i] += src[i];
      } else {
        std::copy(src, src + hw, dst);
      }
    }
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  float* y = out.data();
  const float* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) y[i] += bv[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->accumulate(self.grad);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  float* y = out.data();
  const float* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) y[i] *= bv[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const float* gy = self.grad.data();
    if (na.requires_grad) {
      float* ga = na.grad_buffer().data();
      const float* bv = nb.value.data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (nb.requires_grad) {
      float* gb = nb.grad_buffer().data();
      const float* av = na.value.data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

Var scale(const Var& a, float s) {
  return unary(a, [s](float x) { return s * x; }, [s](float, float) { return s; });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](float x) {
        if (x >= 0) return 1.0f / (1.0f + std::exp(-x));
        const float e = std::exp(x);
        return e / (1.0f + e);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](float x) { return std::tanh(x); }, [](float, float y) { return 1.0f - y * y; });
}

Var leaky_relu(const Var& a, float slope) {
  return unary(
      a, [slope](float x) { return x > 0 ? x : slope * x; }, [slope](float x, float) { return x > 0 ? 1.0f : slope; });
}

Var elu(const Var& a) {
  return unary(
      a, [](float x) { return x > 0 ? x : std::expm1(x); }, [](float x, float y) { return x > 0 ? 1.0f : y + 1.0f; });
}

Var concat_elu(const Var& a) { return elu(concat_channels(a, scale(a, -1.0f))); }

Var concat_channels(const Var& a, const Var& b) {
  require_4d(a, "concat_channels");
  require_4d(b, "concat_channels");
  const auto ga = geom(a.value());
  const auto gb = geom(b.value());
  if (ga.n != gb.n || ga.h != gb.h || ga.w != gb.w) {
    throw ShapeError("concat_channels: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t hw = static_cast<std::size_t>(ga.h) * ga.w;
  Tensor out({ga.n, ga.c + gb.c, ga.h, ga.w});
  for (int n = 0; n < ga.n; ++n) {
    const float* sa = a.value().data() + static_cast<std::size_t>(n) * ga.c * hw;
    const float* sb = b.value().data() + static_cast<std::size_t>(n) * gb.c * hw;
    float* dst = out.data() + static_cast<std::size_t>(n) * (ga.c + gb.c) * hw;
    std::copy(sa, sa + ga.c * hw, dst);
    std::copy(sb, sb + gb.c * hw, dst + ga.c * hw);
  }
  return make_result(std::move(out), {a, b}, [ga, gb, hw](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    for (int n = 0; n < ga.n; ++n) {
      const float* src = self.grad.data() + static_cast<std::size_t>(n) * (ga.c + gb.c) * hw;
      if (na.requires_grad) {
        float* d = na.grad_buffer().data() + static_cast<std::size_t>(n) * ga.c * hw;
        for (std::size_t i = 0; i < ga.c * hw; ++i) d[i] += src[i];
      }
      if (nb.requires_grad) {
        float* d = nb.grad_buffer().data() + static_cast<std::size_t>(n) * gb.c * hw;
        for (std::size_t i = 0; i < gb.c * hw; ++i) d[i] += src[ga.c * hw + i];
      }
    }
  });
}

Var slice_channels(const Var& a, int begin, int end) {
  require_4d(a, "slice_channels");
  const auto g = geom(a.value());
  if (begin < 0 || end > g.c || begin >= end) throw ShapeError("slice_channels: bad range");
  const int c = end - begin;
  const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
  Tensor out({g.n, c, g.h, g.w});
  for (int n = 0; n < g.n; ++n) {
    const float* src = a.value().data() + (static_cast<std::size_t>(n) * g.c + begin) * hw;
    std::copy(src, src + c * hw, out.data() + static_cast<std::size_t>(n) * c * hw);
  }
  return make_result(std::move(out), {a}, [g, begin, c, hw](Node& self) {
    Node& in = *self.inputs[0];
    float* d = in.grad_buffer().data();
    for (int n = 0; n < g.n; ++n) {
      const float* src = self.grad.data() + static_cast<std::size_t>(n) * c * hw;
      float* dst = d + (static_cast<std::size_t>(n) * g.c + begin) * hw;
      for (std::size_t i = 0; i < c * hw; ++i) dst[i] += src[i];
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.accumulate(self.grad.reshaped(in.value.shape()));
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (float v : a.value().values()) s += v;
  return make_result(Tensor({1}, static_cast<float>(s)), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    const float g = self.grad[0];
    float* d = in.grad_buffer().data();
    for (std::size_t i = 0; i < in.value.size(); ++i) d[i] += g;
  });
}

Var conv2d(const Var& x, const Var& w, const Var& bias, const ConvOptions& opt) {
  require_4d(x, "conv2d");
  const auto gx = geom(x.value());
  const Tensor& wt = w.value();
  if (wt.ndim() != 4 || wt.dim(1) != gx.c) {
    throw ShapeError("conv2d: weight " + shape_str(wt.shape()) + " incompatible with input " + shape_str(x.shape()));
  }
  const int cout = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
  const int ho = (gx.h + opt.pad_top + opt.pad_bottom - kh) / opt.stride + 1;
  const int wo = (gx.w + opt.pad_left + opt.pad_right - kw) / opt.stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: empty output for input " + shape_str(x.shape()));
  const int k = gx.c * kh * kw;
  const int p = gx.n * ho * wo;

  auto cols = std::make_shared<FloatBuffer>(static_cast<std::size_t>(k) * p);
  im2col(x.value().data(), gx.n, gx.c, gx.h, gx.w, kh, kw, opt.stride, opt.pad_top, opt.pad_left, ho, wo,
         cols->data());
  FloatBuffer out_cm(static_cast<std::size_t>(cout) * p);
  MapMat om(out_cm.data(), cout, p);
  om.noalias() = ConstMapMat(wt.data(), cout, k) * ConstMapMat(cols->data(), k, p);
  if (bias) {
    for (int co = 0; co < cout; ++co) om.row(co).array() += bias.value()[co];
  }
  Tensor out({gx.n, cout, ho, wo});
  from_channel_major(out_cm.data(), out, false);

  std::vector<Var> inputs{x, w};
  if (bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [gx, cout, kh, kw, ho, wo, k, p, opt, cols](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    FloatBuffer g_cm = to_channel_major(self.grad);
    ConstMapMat gm(g_cm.data(), cout, p);
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      float* gb = self.inputs[2]->grad_buffer().data();
      for (int co = 0; co < cout; ++co) gb[co] += gm.row(co).sum();
    }
    if (nw.requires_grad) {
      MapMat gw(nw.grad_buffer().data(), cout, k);
      gw.noalias() += gm * ConstMapMat(cols->data(), k, p).transpose();
    }
    if (nx.requires_grad) {
      FloatBuffer dcols(static_cast<std::size_t>(k) * p);
      MapMat(dcols.data(), k, p).noalias() = ConstMapMat(nw.value.data(), cout, k).transpose() * gm;
      col2im(dcols.data(), gx.n, gx.c, gx.h, gx.w, kh, kw, opt.stride, opt.pad_top, opt.pad_left, ho, wo,
             nx.grad_buffer().data());
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& bias, int stride, int extra_h, int extra_w) {
  require_4d(x, "conv_transpose2d");
  const auto gx = geom(x.value());
  const Tensor& wt = w.value();
  if (wt.ndim() != 4 || wt.dim(0) != gx.c) {
    throw ShapeError("conv_transpose2d: weight " + shape_str(wt.shape()) + " incompatible with input " +
                     shape_str(x.shape()));
  }
  const int cout = wt.dim(1), kh = wt.dim(2), kw = wt.dim(3);
  const int ho = (gx.h - 1) * stride + kh + extra_h;
  const int wo = (gx.w - 1) * stride + kw + extra_w;
  const int k = cout * kh * kw;
  const int p = gx.n * gx.h * gx.w;

  auto x_cm = std::make_shared<FloatBuffer>(to_channel_major(x.value()));
  FloatBuffer cols(static_cast<std::size_t>(k) * p);
  MapMat(cols.data(), k, p).noalias() =
      ConstMapMat(wt.data(), gx.c, k).transpose() * ConstMapMat(x_cm->data(), gx.c, p);
  Tensor out({gx.n, cout, ho, wo});
  col2im(cols.data(), gx.n, cout, ho, wo, kh, kw, stride, 0, 0, gx.h, gx.w, out.data());
  if (bias) {
    const std::size_t hw = static_cast<std::size_t>(ho) * wo;
    for (int n = 0; n < gx.n; ++n) {
      for (int co = 0; co < cout; ++co) {
        float* d = out.data() + (static_cast<std::size_t>(n) * cout + co) * hw;
        for (std::size_t i = 0; i < hw; ++i) d[i] += bias.value()[co];
      }
    }
  }
  std::vector<Var> inputs{x, w};
  if (bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [gx, cout, kh, kw, ho, wo, k, p, stride, x_cm](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    FloatBuffer gcols(static_cast<std::size_t>(k) * p);
    im2col(self.grad.data(), gx.n, cout, ho, wo, kh, kw, stride, 0, 0, gx.h, gx.w, gcols.data());
    ConstMapMat gc(gcols.data(), k, p);
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      float* gb = self.inputs[2]->grad_buffer().data();
      const std::size_t hw = static_cast<std::size_t>(ho) * wo;
      for (int n = 0; n < gx.n; ++n) {
        for (int co = 0; co < cout; ++co) {
          const float* g = self.grad.data() + (static_cast<std::size_t>(n) * cout + co) * hw;
          double s = 0;
          for (std::size_t i = 0; i < hw; ++i) s += g[i];
          gb[co] += static_cast<float>(s);
        }
      }
    }
    if (nw.requires_grad) {
      MapMat gw(nw.grad_buffer().data(), gx.c, k);
      gw.noalias() += ConstMapMat(x_cm->data(), gx.c, p) * gc.transpose();
    }
    if (nx.requires_grad) {
      FloatBuffer dx_cm(static_cast<std::size_t>(gx.c) * p);
      MapMat(dx_cm.data(), gx.c, p).noalias() = ConstMapMat(nw.value.data(), gx.c, k) * gc;
      from_channel_major(dx_cm.data(), nx.grad_buffer(), true);
    }
  });
}

Var crop(const Var& x, int top, int left, int height, int width) {
  require_4d(x, "crop");
  const auto g = geom(x.value());
  if (top < 0 || left < 0 || top + height > g.h || left + width > g.w || height <= 0 || width <= 0) {
    throw ShapeError("crop: window out of range for " + shape_str(x.shape()));
  }
  Tensor out({g.n, g.c, height, width});
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c)
      for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j) out.at(n, c, i, j) = x.value().at(n, c, top + i, left + j);
  return make_result(std::move(out), {x}, [g, top, left, height, width](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < g.n; ++n)
      for (int c = 0; c < g.c; ++c)
        for (int i = 0; i < height; ++i)
          for (int j = 0; j < width; ++j) gx.at(n, c, top + i, left + j) += self.grad.at(n, c, i, j);
  });
}

Var shift(const Var& x, int down, int right) {
  require_4d(x, "shift");
  const auto g = geom(x.value());
  Tensor out({g.n, g.c, g.h, g.w});
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c)
      for (int i = 0; i < g.h; ++i) {
        const int si = i - down;
        if (si < 0 || si >= g.h) continue;
        for (int j = 0; j < g.w; ++j) {
          const int sj = j - right;
          if (sj >= 0 && sj < g.w) out.at(n, c, i, j) = x.value().at(n, c, si, sj);
        }
      }
  return make_result(std::move(out), {x}, [g, down, right](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < g.n; ++n)
      for (int c = 0; c < g.c; ++c)
        for (int i = 0; i < g.h; ++i) {
          const int si = i - down;
          if (si < 0 || si >= g.h) continue;
          for (int j = 0; j < g.w; ++j) {
            const int sj = j - right;
            if (sj >= 0 && sj < g.w) gx.at(n, c, si, sj) += self.grad.at(n, c, i, j);
          }
        }
  });
}

Var avg_pool2d(const Var& x, int kernel) {
  require_4d(x, "avg_pool2d");
  const auto g = geom(x.value());
  if (kernel <= 0 || g.h % kernel || g.w % kernel) {
    throw ShapeError("avg_pool2d: kernel " + std::to_string(kernel) + " does not tile " + shape_str(x.shape()));
  }
  const int ho = g.h / kernel, wo = g.w / kernel;
  const float inv = 1.0f / static_cast<float>(kernel * kernel);
  Tensor out({g.n, g.c, ho, wo});
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c)
      for (int i = 0; i < g.h; ++i)
        for (int j = 0; j < g.w; ++j) out.at(n, c, i / kernel, j / kernel) += x.value().at(n, c, i, j) * inv;
  return make_result(std::move(out), {x}, [g, kernel, inv](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < g.n; ++n)
      for (int c = 0; c < g.c; ++c)
        for (int i = 0; i < g.h; ++i)
          for (int j = 0; j < g.w; ++j) gx.at(n, c, i, j) += self.grad.at(n, c, i / kernel, j / kernel) * inv;
  });
}

Var upsample_nearest(const Var& x, int factor) {
  require_4d(x, "upsample_nearest");
  const auto g = geom(x.value());
  Tensor out({g.n, g.c, g.h * factor, g.w * factor});
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c)
      for (int i = 0; i < g.h * factor; ++i)
        for (int j = 0; j < g.w * factor; ++j) out.at(n, c, i, j) = x.value().at(n, c, i / factor, j / factor);
  return make_result(std::move(out), {x}, [g, factor](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < g.n; ++n)
      for (int c = 0; c < g.c; ++c)
        for (int i = 0; i < g.h * factor; ++i)
          for (int j = 0; j < g.w * factor; ++j) gx.at(n, c, i / factor, j / factor) += self.grad.at(n, c, i, j);
  });
}

Var pixel_shuffle(const Var& x, int factor) {
  require_4d(x, "pixel_shuffle");
  const auto g = geom(x.value());
  const int rr = factor * factor;
  if (factor <= 0 || g.c % rr) {
    throw ShapeError("pixel_shuffle: channels " + std::to_string(g.c) + " not divisible by " + std::to_string(rr));
  }
  const int co = g.c / rr;
  Tensor out({g.n, co, g.h * factor, g.w * factor});
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < co; ++c)
      for (int a = 0; a < factor; ++a)
        for (int b = 0; b < factor; ++b)
          for (int i = 0; i < g.h; ++i)
            for (int j = 0; j < g.w; ++j)
              out.at(n, c, i * factor + a, j * factor + b) = x.value().at(n, c * rr + a * factor + b, i, j);
  return make_result(std::move(out), {x}, [g, factor, rr, co](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (int n = 0; n < g.n; ++n)
      for (int c = 0; c < co; ++c)
        for (int a = 0; a < factor; ++a)
          for (int b = 0; b < factor; ++b)
            for (int i = 0; i < g.h; ++i)
              for (int j = 0; j < g.w; ++j)
                gx.at(n, c * rr + a * factor + b, i, j) += self.grad.at(n, c, i * factor + a, j * factor + b);
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Tensor& xt = x.value();
  const Tensor& wt = w.value();
  if (xt.ndim() != 2 || wt.ndim() != 2 || wt.dim(1) != xt.dim(1)) {
    throw ShapeError("linear: input " + shape_str(xt.shape()) + " weight " + shape_str(wt.shape()));
  }
  const int n = xt.dim(0), d = xt.dim(1), o = wt.dim(0);
  Tensor out({n, o});
  MapMat om(out.data(), n, o);
  om.noalias() = ConstMapMat(xt.data(), n, d) * ConstMapMat(wt.data(), o, d).transpose();
  if (b) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < o; ++j) om(i, j) += b.value()[j];
  }
  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(b);
  return make_result(std::move(out), std::move(inputs), [n, d, o](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    ConstMapMat gm(self.grad.data(), n, o);
    if (nx.requires_grad) {
      MapMat(nx.grad_buffer().data(), n, d).noalias() += gm * ConstMapMat(nw.value.data(), o, d);
    }
    if (nw.requires_grad) {
      MapMat(nw.grad_buffer().data(), o, d).noalias() += gm.transpose() * ConstMapMat(nx.value.data(), n, d);
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      float* gb = self.inputs[2]->grad_buffer().data();
      for (int j = 0; j < o; ++j) gb[j] += gm.col(j).sum();
    }
  });
}

Var add_channel_bias(const Var& x, const Var& v) {
  require_4d(x, "add_channel_bias");
  const auto g = geom(x.value());
  if (v.value().ndim() != 2 || v.dim(0) != g.n || v.dim(1) != g.c) {
    throw ShapeError("add_channel_bias: " + shape_str(v.shape()) + " vs " + shape_str(x.shape()));
  }
  const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
  Tensor out = x.value();
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c) {
      float* d = out.data() + (static_cast<std::size_t>(n) * g.c + c) * hw;
      const float add = v.value()[static_cast<std::size_t>(n) * g.c + c];
      for (std::size_t i = 0; i < hw; ++i) d[i] += add;
    }
  return make_result(std::move(out), {x, v}, [g, hw](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nv = *self.inputs[1];
    if (nx.requires_grad) nx.accumulate(self.grad);
    if (nv.requires_grad) {
      float* gv = nv.grad_buffer().data();
      for (int n = 0; n < g.n; ++n)
        for (int c = 0; c < g.c; ++c) {
          const float* s = self.grad.data() + (static_cast<std::size_t>(n) * g.c + c) * hw;
          double acc = 0;
          for (std::size_t i = 0; i < hw; ++i) acc += s[i];
          gv[static_cast<std::size_t>(n) * g.c + c] += static_cast<float>(acc);
        }
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               bool training, float momentum, float eps) {
  require_4d(x, "batch_norm");
  const auto g = geom(x.value());
  const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
  const double m = static_cast<double>(g.n) * hw;
  FloatBuffer mean(g.c), invstd(g.c);
  if (training) {
    for (int c = 0; c < g.c; ++c) {
      double s = 0, s2 = 0;
      for (int n = 0; n < g.n; ++n) {
        const float* p = x.value().data() + (static_cast<std::size_t>(n) * g.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double mu = s / m;
      for (int n = 0; n < g.n; ++n) {
        const float* p = x.value().data() + (static_cast<std::size_t>(n) * g.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) s2 += (p[i] - mu) * (p[i] - mu);
      }
      const double var = s2 / m;
      mean[c] = static_cast<float>(mu);
      invstd[c] = static_cast<float>(1.0 / std::sqrt(var + eps));
      const double unbiased = m > 1 ? s2 / (m - 1) : var;
      running_mean[c] = static_cast<float>((1 - momentum) * running_mean[c] + momentum * mu);
      running_var[c] = static_cast<float>((1 - momentum) * running_var[c] + momentum * unbiased);
    }
  } else {
    for (int c = 0; c < g.c; ++c) {
      mean[c] = running_mean[c];
      invstd[c] = 1.0f / std::sqrt(running_var[c] + eps);
    }
  }
  Tensor xhat({g.n, g.c, g.h, g.w});
  Tensor out({g.n, g.c, g.h, g.w});
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * g.c + c) * hw;
      const float ga = gamma.value()[c], be = beta.value()[c];
      for (std::size_t i = 0; i < hw; ++i) {
        const float xh = (x.value()[off + i] - mean[c]) * invstd[c];
        xhat[off + i] = xh;
        out[off + i] = ga * xh + be;
      }
    }
  auto saved = std::make_shared<Tensor>(std::move(xhat));
  return make_result(std::move(out), {x, gamma, beta}, [g, hw, m, invstd, saved, training](Node& self) {
    Node& nx = *self.inputs[0];
    Node& ng = *self.inputs[1];
    Node& nb = *self.inputs[2];
    const Tensor& xhat = *saved;
    for (int c = 0; c < g.c; ++c) {
      double sum_dy = 0, sum_dy_xh = 0;
      for (int n = 0; n < g.n; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * g.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += self.grad[off + i];
          sum_dy_xh += self.grad[off + i] * xhat[off + i];
        }
      }
      if (ng.requires_grad) ng.grad_buffer()[c] += static_cast<float>(sum_dy_xh);
      if (nb.requires_grad) nb.grad_buffer()[c] += static_cast<float>(sum_dy);
      if (!nx.requires_grad) continue;
      const float ga = ng.value[c];
      Tensor& gx = nx.grad_buffer();
      for (int n = 0; n < g.n; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * g.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          if (training) {
            gx[off + i] += static_cast<float>(ga * invstd[c] *
                                              (self.grad[off + i] - sum_dy / m - xhat[off + i] * sum_dy_xh / m));
          } else {
            gx[off + i] += ga * invstd[c] * self.grad[off + i];
          }
        }
      }
    }
  });
}

Tensor log_softmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) throw ShapeError("log_softmax_rows: expected [N, K]");
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + static_cast<std::size_t>(i) * k;
    const float mx = *std::max_element(row, row + k);
    double s = 0;
    for (int j = 0; j < k; ++j) s += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = mx + std::log(s);
    for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(i) * k + j] = static_cast<float>(row[j] - lse);
  }
  return out;
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels, std::vector<double>* per_example) {
  const Tensor& lt = logits.value();
  if (lt.ndim() != 2 || lt.dim(0) != static_cast<int>(labels.size())) {
    throw ShapeError("softmax_cross_entropy: logits " + shape_str(lt.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const int n = lt.dim(0), k = lt.dim(1);
  Tensor logp = log_softmax_rows(lt);
  double total = 0;
  if (per_example) per_example->assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k) throw InvalidParameter("label out of range");
    const double nll = -static_cast<double>(logp[static_cast<std::size_t>(i) * k + labels[i]]);
    total += nll;
    if (per_example) (*per_example)[i] = nll;
  }
  std::vector<int> lab(labels.begin(), labels.end());
  auto lp = std::make_shared<Tensor>(std::move(logp));
  return make_result(Tensor({1}, static_cast<float>(total / n)), {logits}, [n, k, lab, lp](Node& self) {
    Tensor& g = self.inputs[0]->grad_buffer();
    const float scale = self.grad[0] / static_cast<float>(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i) * k + j;
        g[idx] += scale * (std::exp((*lp)[idx]) - (j == lab[i] ? 1.0f : 0.0f));
      }
  });
}

Var mse(const Var& a, const Tensor& target) {
  if (a.value().size() != target.size()) throw ShapeError("mse: size mismatch");
  double s = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = a.value()[i] - target[i];
    s += d * d;
  }
  const double count = static_cast<double>(target.size());
  auto tgt = std::make_shared<Tensor>(target);
  return make_result(Tensor({1}, static_cast<float>(s / count)), {a}, [tgt, count](Node& self) {
    Node& in = *self.inputs[0];
    Tensor& g = in.grad_buffer();
    const float scale = static_cast<float>(2.0 * self.grad[0] / count);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * (in.value[i] - (*tgt)[i]);
  });
}

}  // namespace infoplane::ops
