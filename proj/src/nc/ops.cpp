#include "deconas/nc/ops.hpp"

#include <algorithm>
#include <cmath>

#include "deconas/errors.hpp"

namespace deconas::nc {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

// Elementwise unary op whose derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
  });
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& parent : self.parents) {
      if (!parent->requires_grad) continue;
      auto& g = parent->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t p = 0; p < 2; ++p) {
      if (!self.parents[p]->requires_grad) continue;
      auto& g = self.parents[p]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[p] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; },
               [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double, double out) { return out * (1.0 - out); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](double, double out) { return 1.0 - out * out; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return make_result({1}, {total}, {x}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const std::optional<Tensor>& bias,
              int dilation, bool depthwise) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  const int batch = input.dim(0), cin = input.dim(1), height = input.dim(2), width = input.dim(3);
  const int cout = kernel.dim(0), kcin = kernel.dim(1), ksize = kernel.dim(2);
  if (kernel.dim(3) != ksize || ksize % 2 == 0) throw ShapeError("conv2d: kernel must be square with odd size");
  if (dilation < 1) throw ShapeError("conv2d: dilation must be >= 1");
  if (depthwise) {
    if (kcin != 1 || cout != cin) {
      throw ShapeError("conv2d: depthwise kernel " + shape_string(kernel.shape()) +
                       " does not match " + std::to_string(cin) + " input channels");
    }
  } else if (kcin != cin) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kcin) + " input channels, got " +
                     std::to_string(cin));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != cout)) throw ShapeError("conv2d: bias must have Cout entries");

  const int pad = dilation * (ksize - 1) / 2;
  const std::size_t plane = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);

  // Calls fn(b, co, ci, kernel_index, dy, dx, y0, y1, x0, x1) for every tap.
  auto for_each_tap = [=](auto&& fn) {
    for (int b = 0; b < batch; ++b) {
      for (int co = 0; co < cout; ++co) {
        const int ci_begin = depthwise ? co : 0;
        const int ci_end = depthwise ? co + 1 : cin;
        for (int ci = ci_begin; ci < ci_end; ++ci) {
          for (int ky = 0; ky < ksize; ++ky) {
            const int dy = ky * dilation - pad;
            const int y0 = std::max(0, -dy), y1 = std::min(height, height - dy);
            if (y0 >= y1) continue;
            for (int kx = 0; kx < ksize; ++kx) {
              const int dx = kx * dilation - pad;
              const int x0 = std::max(0, -dx), x1 = std::min(width, width - dx);
              if (x0 >= x1) continue;
              const std::size_t widx =
                  ((static_cast<std::size_t>(co) * kcin + (depthwise ? 0 : ci)) * ksize + ky) * ksize + kx;
              fn(b, co, ci, widx, dy, dx, y0, y1, x0, x1);
            }
          }
        }
      }
    }
  };

  std::vector<double> out(static_cast<std::size_t>(batch) * cout * plane, 0.0);
  const double* in = input.values().data();
  const double* w = kernel.values().data();
  if (bias) {
    const auto bv = bias->values();
    for (int b = 0; b < batch; ++b)
      for (int co = 0; co < cout; ++co)
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(b) * cout + co) * plane),
                    plane, bv[static_cast<std::size_t>(co)]);
  }
  for_each_tap([&](int b, int co, int ci, std::size_t widx, int dy, int dx, int y0, int y1, int x0, int x1) {
    const double wv = w[widx];
    double* out_plane = out.data() + (static_cast<std::size_t>(b) * cout + co) * plane;
    const double* in_plane = in + (static_cast<std::size_t>(b) * cin + ci) * plane;
    for (int y = y0; y < y1; ++y) {
      double* o = out_plane + static_cast<std::size_t>(y) * width;
      const double* i = in_plane + static_cast<std::size_t>(y + dy) * width + dx;
      for (int x = x0; x < x1; ++x) o[x] += wv * i[x];
    }
  });

  std::vector<Tensor> parents{input, kernel};
  if (bias) parents.push_back(*bias);
  return make_result(
      {batch, cout, height, width}, std::move(out), std::move(parents),
      [=](Node& self) {
        Node& pin = *self.parents[0];
        Node& pk = *self.parents[1];
        const double* go = self.grad.data();
        double* gin = pin.requires_grad ? pin.grad_buffer().data() : nullptr;
        double* gk = pk.requires_grad ? pk.grad_buffer().data() : nullptr;
        const double* inv = pin.value.data();
        const double* wv = pk.value.data();
        for_each_tap([&](int b, int co, int ci, std::size_t widx, int dy, int dx, int y0, int y1, int x0, int x1) {
          const double* go_plane = go + (static_cast<std::size_t>(b) * cout + co) * plane;
          const std::size_t in_off = (static_cast<std::size_t>(b) * cin + ci) * plane;
          if (gin) {
            const double wt = wv[widx];
            for (int y = y0; y < y1; ++y) {
              const double* g = go_plane + static_cast<std::size_t>(y) * width;
              double* gi = gin + in_off + static_cast<std::size_t>(y + dy) * width + dx;
              for (int x = x0; x < x1; ++x) gi[x] += wt * g[x];
            }
          }
          if (gk) {
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
              const double* g = go_plane + static_cast<std::size_t>(y) * width;
              const double* i = inv + in_off + static_cast<std::size_t>(y + dy) * width + dx;
              for (int x = x0; x < x1; ++x) acc += g[x] * i[x];
            }
            gk[widx] += acc;
          }
        });
        if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
          auto& gb = self.parents[2]->grad_buffer();
          for (int b = 0; b < batch; ++b) {
            for (int co = 0; co < cout; ++co) {
              const double* g = go + (static_cast<std::size_t>(b) * cout + co) * plane;
              double acc = 0.0;
              for (std::size_t i = 0; i < plane; ++i) acc += g[i];
              gb[static_cast<std::size_t>(co)] += acc;
            }
          }
        }
      });
}

Tensor pixel_shuffle(const Tensor& input, int r) {
  require_rank(input, 4, "pixel_shuffle");
  if (r < 1) throw ShapeError("pixel_shuffle: factor must be >= 1");
  const int batch = input.dim(0), cin = input.dim(1), height = input.dim(2), width = input.dim(3);
  if (cin % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(cin) + " channels not divisible by " +
                     std::to_string(r * r));
  }
  const int cout = cin / (r * r);
  const int oh = height * r, ow = width * r;
  // gather[i] = source index of output element i.
  std::vector<std::size_t> gather(input.numel());
  std::size_t idx = 0;
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < cout; ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          const int src_c = c * r * r + r * (y % r) + (x % r);
          gather[idx++] = ((static_cast<std::size_t>(b) * cin + src_c) * height + y / r) * width + x / r;
        }
  std::vector<double> out(gather.size());
  const auto in = input.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[gather[i]];
  return make_result({batch, cout, oh, ow}, std::move(out), {input},
                     [gather = std::move(gather)](Node& self) {
                       auto& g = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < gather.size(); ++i) g[gather[i]] += self.grad[i];
                     });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  const int batch = x.dim(0), channels = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * static_cast<std::size_t>(x.dim(3));
  if (plane == 0) throw ShapeError("global_avg_pool: empty spatial extent");
  std::vector<double> out(static_cast<std::size_t>(batch) * channels);
  const auto in = x.values();
  for (std::size_t bc = 0; bc < out.size(); ++bc) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += in[bc * plane + i];
    out[bc] = acc / static_cast<double>(plane);
  }
  return make_result({batch, channels, 1, 1}, std::move(out), {x}, [plane](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t bc = 0; bc < self.grad.size(); ++bc)
      for (std::size_t i = 0; i < plane; ++i) g[bc * plane + i] += self.grad[bc] * inv;
  });
}

Tensor scale_channels(const Tensor& x, const Tensor& s) {
  require_rank(x, 4, "scale_channels");
  if (s.shape() != Shape{x.dim(0), x.dim(1), 1, 1}) {
    throw ShapeError("scale_channels: scale shape " + shape_string(s.shape()) + " does not match " +
                     shape_string(x.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * static_cast<std::size_t>(x.dim(3));
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  const auto sv = s.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * sv[i / plane];
  return make_result(x.shape(), std::move(out), {x, s}, [plane](Node& self) {
    Node& px = *self.parents[0];
    Node& ps = *self.parents[1];
    if (px.requires_grad) {
      auto& g = px.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * ps.value[i / plane];
    }
    if (ps.requires_grad) {
      auto& g = ps.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i / plane] += self.grad[i] * px.value[i];
    }
  });
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  for (const auto& p : parts) require_rank(p, 4, "concat_channels");
  const int batch = parts[0].dim(0), height = parts[0].dim(2), width = parts[0].dim(3);
  int channels = 0;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    if (p.dim(0) != batch || p.dim(2) != height || p.dim(3) != width) {
      throw ShapeError("concat_channels: mismatched shape " + shape_string(p.shape()));
    }
    offsets.push_back(channels);
    channels += p.dim(1);
  }
  const std::size_t plane = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  std::vector<double> out(static_cast<std::size_t>(batch) * channels * plane);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    const std::size_t chunk = static_cast<std::size_t>(parts[p].dim(1)) * plane;
    for (int b = 0; b < batch; ++b) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(b * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(b) * channels + offsets[p]) * plane));
    }
  }
  return make_result({batch, channels, height, width}, std::move(out),
                     std::vector<Tensor>(parts.begin(), parts.end()),
                     [=](Node& self) {
                       for (std::size_t p = 0; p < self.parents.size(); ++p) {
                         Node& parent = *self.parents[p];
                         if (!parent.requires_grad) continue;
                         auto& g = parent.grad_buffer();
                         const std::size_t chunk = static_cast<std::size_t>(parent.shape[1]) * plane;
                         for (int b = 0; b < batch; ++b) {
                           const double* src = self.grad.data() +
                                               (static_cast<std::size_t>(b) * channels + offsets[p]) * plane;
                           for (std::size_t i = 0; i < chunk; ++i) g[b * chunk + i] += src[i];
                         }
                       }
                     });
}

Tensor mean_over(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("mean_over: no inputs");
  for (const auto& p : parts) require_same_shape(parts[0], p, "mean_over");
  if (parts.size() == 1) return parts[0];
  const double inv = 1.0 / static_cast<double>(parts.size());
  std::vector<double> out(parts[0].numel(), 0.0);
  for (const auto& p : parts) {
    const auto v = p.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  for (auto& v : out) v *= inv;
  return make_result(parts[0].shape(), std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                     [inv](Node& self) {
                       for (auto& parent : self.parents) {
                         if (!parent->requires_grad) continue;
                         auto& g = parent->grad_buffer();
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * inv;
                       }
                     });
}

Tensor l1_loss(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "l1_loss");
  const auto p = prediction.values();
  const auto t = target.values();
  if (p.empty()) throw ShapeError("l1_loss: empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
  const double inv = 1.0 / static_cast<double>(p.size());
  return make_result({1}, {acc * inv}, {prediction, target}, [inv](Node& self) {
    Node& pp = *self.parents[0];
    Node& pt = *self.parents[1];
    const double g0 = self.grad[0] * inv;
    for (std::size_t i = 0; i < pp.value.size(); ++i) {
      const double diff = pp.value[i] - pt.value[i];
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      if (pp.requires_grad) pp.grad_buffer()[i] += g0 * sgn;
      if (pt.requires_grad) pt.grad_buffer()[i] -= g0 * sgn;
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias) {
  require_rank(x, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  const int rows = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError("linear: weight " + shape_string(weight.shape()) + " vs input " + shape_string(x.shape()));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != out_dim)) throw ShapeError("linear: bias size mismatch");
  std::vector<double> out(static_cast<std::size_t>(rows) * out_dim);
  const double* xv = x.values().data();
  const double* wv = weight.values().data();
  for (int r = 0; r < rows; ++r) {
    for (int o = 0; o < out_dim; ++o) {
      double acc = bias ? bias->values()[static_cast<std::size_t>(o)] : 0.0;
      const double* wr = wv + static_cast<std::size_t>(o) * in;
      const double* xr = xv + static_cast<std::size_t>(r) * in;
      for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
      out[static_cast<std::size_t>(r) * out_dim + o] = acc;
    }
  }
  std::vector<Tensor> parents{x, weight};
  if (bias) parents.push_back(*bias);
  return make_result({rows, out_dim}, std::move(out), std::move(parents), [=](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    const double* g = self.grad.data();
    if (px.requires_grad) {
      auto& gx = px.grad_buffer();
      for (int r = 0; r < rows; ++r)
        for (int o = 0; o < out_dim; ++o) {
          const double go = g[static_cast<std::size_t>(r) * out_dim + o];
          const double* wr = pw.value.data() + static_cast<std::size_t>(o) * in;
          double* gr = gx.data() + static_cast<std::size_t>(r) * in;
          for (int i = 0; i < in; ++i) gr[i] += go * wr[i];
        }
    }
    if (pw.requires_grad) {
      auto& gw = pw.grad_buffer();
      for (int r = 0; r < rows; ++r)
        for (int o = 0; o < out_dim; ++o) {
          const double go = g[static_cast<std::size_t>(r) * out_dim + o];
          const double* xr = px.value.data() + static_cast<std::size_t>(r) * in;
          double* gr = gw.data() + static_cast<std::size_t>(o) * in;
          for (int i = 0; i < in; ++i) gr[i] += go * xr[i];
        }
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      auto& gb = self.parents[2]->grad_buffer();
      for (int r = 0; r < rows; ++r)
        for (int o = 0; o < out_dim; ++o) gb[static_cast<std::size_t>(o)] += g[static_cast<std::size_t>(r) * out_dim + o];
    }
  });
}

Tensor slice_cols(const Tensor& x, int start, int count) {
  require_rank(x, 2, "slice_cols");
  const int rows = x.dim(0), cols = x.dim(1);
  if (start < 0 || count < 0 || start + count > cols) throw ShapeError("slice_cols: range out of bounds");
  std::vector<double> out(static_cast<std::size_t>(rows) * count);
  const auto v = x.values();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < count; ++c)
      out[static_cast<std::size_t>(r) * count + c] = v[static_cast<std::size_t>(r) * cols + start + c];
  return make_result({rows, count}, std::move(out), {x}, [=](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < count; ++c)
        g[static_cast<std::size_t>(r) * cols + start + c] += self.grad[static_cast<std::size_t>(r) * count + c];
  });
}

Tensor embedding_sum(const Tensor& table, std::span<const int> rows) {
  require_rank(table, 2, "embedding_sum");
  const int vocab = table.dim(0), width = table.dim(1);
  std::vector<int> picked(rows.begin(), rows.end());
  std::vector<double> out(static_cast<std::size_t>(width), 0.0);
  const auto v = table.values();
  for (int row : picked) {
    if (row < 0 || row >= vocab) throw ShapeError("embedding_sum: row " + std::to_string(row) + " out of range");
    for (int c = 0; c < width; ++c) out[static_cast<std::size_t>(c)] += v[static_cast<std::size_t>(row) * width + c];
  }
  return make_result({1, width}, std::move(out), {table}, [picked, width](Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int row : picked)
      for (int c = 0; c < width; ++c) g[static_cast<std::size_t>(row) * width + c] += self.grad[static_cast<std::size_t>(c)];
  });
}

Tensor bernoulli_log_prob(const Tensor& logits, std::span<const std::uint8_t> bits) {
  if (bits.size() != logits.numel()) throw ShapeError("bernoulli_log_prob: one bit per logit required");
  std::vector<double> target(bits.begin(), bits.end());
  std::vector<double> out(logits.numel());
  const auto z = logits.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = target[i] > 0.5 ? -softplus(-z[i]) : -softplus(z[i]);
  return make_result(logits.shape(), std::move(out), {logits}, [target = std::move(target)](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (target[i] - stable_sigmoid(p.value[i]));
  });
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& input, const Tensor& hidden, const Tensor& cell,
                                    const LstmParams& params) {
  require_rank(hidden, 2, "lstm hidden");
  const int h = hidden.dim(1);
  if (cell.shape() != hidden.shape()) throw ShapeError("lstm_cell: cell and hidden shapes differ");
  if (params.input_weight.dim(0) != 4 * h || params.hidden_weight.shape() != Shape{4 * h, h}) {
    throw ShapeError("lstm_cell: weights do not match hidden size " + std::to_string(h));
  }
  const Tensor gates = add(linear(input, params.input_weight, params.bias), linear(hidden, params.hidden_weight));
  const Tensor in_gate = sigmoid(slice_cols(gates, 0, h));
  const Tensor forget_gate = sigmoid(slice_cols(gates, h, h));
  const Tensor candidate = nc::tanh(slice_cols(gates, 2 * h, h));
  const Tensor out_gate = sigmoid(slice_cols(gates, 3 * h, h));
  Tensor next_cell = add(mul(forget_gate, cell), mul(in_gate, candidate));
  Tensor next_hidden = mul(out_gate, nc::tanh(next_cell));
  return {std::move(next_hidden), std::move(next_cell)};
}

}  // namespace deconas::nc
