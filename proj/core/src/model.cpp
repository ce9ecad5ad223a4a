#include "unicat/model.hpp"

#include <cmath>
#include <utility>

#include <fmt/core.h>

#include "unicat/errors.hpp"

namespace unicat {

std::size_t ModelParams::fused_dim() const {
  if (streams.empty()) return 0;
  if (fusion_operator(strategy) == FusionOperator::Average) return streams.front().embed_dim();
  std::size_t d = 0;
  for (const auto& s : streams) d += s.embed_dim();
  return d;
}

namespace {

Matrix kaiming(Rng& rng, std::size_t out, std::size_t in) {
  Matrix w = rng_normal(rng, out, in);
  const double scale = std::sqrt(2.0 / static_cast<double>(in));
  for (double& v : w.data()) v *= scale;
  return w;
}

}  // namespace

Head init_head(std::size_t dim, std::size_t num_classes, const ArchConfig& arch, Rng& rng) {
  if (dim == 0) throw ConfigError("init_head: dim must be >= 1");
  Head h;
  h.neck.gamma.assign(dim, 1.0);
  h.neck.running_mean.assign(dim, 0.0);
  h.neck.running_var.assign(dim, 1.0);
  h.neck.eps = arch.bn_eps;
  h.neck.momentum = arch.bn_momentum;
  h.classifier = num_classes == 0 ? Matrix(0, dim) : kaiming(rng, num_classes, dim);
  return h;
}

StreamParams init_stream(std::string name, std::size_t input_dim, const ArchConfig& arch,
                         std::size_t num_classes, Rng& rng) {
  if (input_dim == 0 || arch.embed_dim == 0) throw ConfigError("init_stream: dims must be >= 1");
  StreamParams p;
  p.name = std::move(name);
  std::size_t fan_in = input_dim;
  auto add_layer = [&](std::size_t width) {
    if (width == 0) throw ConfigError("init_stream: layer widths must be >= 1");
    p.layers.push_back({kaiming(rng, width, fan_in), std::vector<double>(width, 0.0)});
    fan_in = width;
  };
  for (std::size_t w : arch.hidden) add_layer(w);
  add_layer(arch.embed_dim);
  p.head = init_head(arch.embed_dim, num_classes, arch, rng);
  return p;
}

ModelParams init_model(Strategy strategy, std::span<const std::string> stream_names,
                       std::span<const std::size_t> input_dims, const ArchConfig& arch,
                       std::size_t num_classes, std::uint64_t seed) {
  if (stream_names.size() != input_dims.size() || stream_names.empty()) {
    throw ConfigError("init_model: need one input dim per stream and at least one stream");
  }
  ModelParams m;
  m.strategy = strategy;
  const bool per_stream_classifier = !has_fused_head(strategy);
  for (std::size_t i = 0; i < stream_names.size(); ++i) {
    Rng rng = split(seed, "init/stream/" + stream_names[i]);
    m.streams.push_back(init_stream(stream_names[i], input_dims[i], arch,
                                    per_stream_classifier ? num_classes : 0, rng));
  }
  if (has_fused_head(strategy)) {
    Rng rng = split(seed, "init/fused-head");
    m.fused = init_head(m.fused_dim(), num_classes, arch, rng);
  }
  return m;
}

HeadOutput head_forward(const Head& head, const Matrix& z, Mode mode) {
  const BnNeck& bn = head.neck;
  const std::size_t b = z.rows();
  const std::size_t d = z.cols();
  if (d != bn.dim()) {
    throw ShapeError(fmt::format("head_forward: input width {} but neck width {}", d, bn.dim()));
  }
  HeadOutput out;
  out.mode = mode;
  out.z_bn = Matrix(b, d);
  if (mode == Mode::Train) {
    if (b < 2) throw BatchError("head_forward: train mode needs a batch of at least 2");
    out.batch_mean.assign(d, 0.0);
    out.batch_var.assign(d, 0.0);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t j = 0; j < d; ++j) out.batch_mean[j] += z(r, j);
    for (double& m : out.batch_mean) m /= static_cast<double>(b);
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        const double c = z(r, j) - out.batch_mean[j];
        out.batch_var[j] += c * c;
      }
    }
    for (double& v : out.batch_var) v /= static_cast<double>(b);
    out.x_hat = Matrix(b, d);
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        const double xh = (z(r, j) - out.batch_mean[j]) / std::sqrt(out.batch_var[j] + bn.eps);
        out.x_hat(r, j) = xh;
        out.z_bn(r, j) = bn.gamma[j] * xh;
      }
    }
  } else {
    for (std::size_t r = 0; r < b; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        out.z_bn(r, j) = bn.gamma[j] * (z(r, j) - bn.running_mean[j]) /
                         std::sqrt(bn.running_var[j] + bn.eps);
      }
    }
  }
  out.logits = head.num_classes() == 0 ? Matrix(b, 0) : matmul_bt(out.z_bn, head.classifier);
  return out;
}

StreamOutput forward(const StreamParams& params, const Matrix& x, Mode mode) {
  if (x.cols() != params.input_dim()) {
    throw ShapeError(fmt::format("forward: stream '{}' expects {} inputs, got {}", params.name,
                                 params.input_dim(), x.cols()));
  }
  StreamOutput out;
  out.mode = mode;
  Matrix h = x;
  const std::size_t num_layers = params.layers.size();
  for (std::size_t l = 0; l < num_layers; ++l) {
    const Linear& layer = params.layers[l];
    Matrix pre = matmul_bt(h, layer.weight);
    for (std::size_t r = 0; r < pre.rows(); ++r) {
      auto row = pre.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
    }
    out.layer_inputs.push_back(std::move(h));
    if (l + 1 == num_layers) {
      h = std::move(pre);
    } else {
      h = pre;
      for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
      out.pre_activations.push_back(std::move(pre));
    }
  }
  out.z = std::move(h);
  out.head = head_forward(params.head, out.z, mode);
  return out;
}

void commit_batch_stats(BnNeck& neck, const HeadOutput& out) {
  if (out.mode != Mode::Train) throw StateError("commit_batch_stats: output is not train-mode");
  const double b = static_cast<double>(out.z_bn.rows());
  const double m = neck.momentum;
  for (std::size_t j = 0; j < neck.dim(); ++j) {
    neck.running_mean[j] = (1.0 - m) * neck.running_mean[j] + m * out.batch_mean[j];
    neck.running_var[j] = (1.0 - m) * neck.running_var[j] + m * out.batch_var[j] * b / (b - 1.0);
  }
}

StreamOutput forward_train(StreamParams& params, const Matrix& x) {
  StreamOutput out = forward(params, x, Mode::Train);
  commit_batch_stats(params.head.neck, out.head);
  return out;
}

HeadGrads head_backward(const Head& head, const HeadOutput& out, const Matrix& grad_logits) {
  if (out.mode != Mode::Train) throw StateError("head_backward: needs a train-mode forward cache");
  const std::size_t b = out.z_bn.rows();
  const std::size_t d = out.z_bn.cols();
  HeadGrads g;
  g.gamma.assign(d, 0.0);
  g.input = Matrix(b, d);
  if (grad_logits.empty() || head.num_classes() == 0) {
    g.classifier = Matrix(head.num_classes(), d);
    return g;
  }
  if (grad_logits.rows() != b || grad_logits.cols() != head.num_classes()) {
    throw ShapeError("head_backward: grad_logits shape does not match logits");
  }
  g.classifier = matmul_at(grad_logits, out.z_bn);
  const Matrix grad_zbn = matmul(grad_logits, head.classifier);

  const BnNeck& bn = head.neck;
  const double bd = static_cast<double>(b);
  for (std::size_t j = 0; j < d; ++j) {
    double sum_dxh = 0.0;
    double sum_dxh_xh = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
      g.gamma[j] += grad_zbn(r, j) * out.x_hat(r, j);
      const double dxh = grad_zbn(r, j) * bn.gamma[j];
      sum_dxh += dxh;
      sum_dxh_xh += dxh * out.x_hat(r, j);
    }
    const double inv_std = 1.0 / std::sqrt(out.batch_var[j] + bn.eps);
    for (std::size_t r = 0; r < b; ++r) {
      const double dxh = grad_zbn(r, j) * bn.gamma[j];
      g.input(r, j) = inv_std / bd * (bd * dxh - sum_dxh - out.x_hat(r, j) * sum_dxh_xh);
    }
  }
  return g;
}

StreamGrads mlp_backward(const StreamParams& params, const StreamOutput& out,
                         const Matrix& grad_z) {
  if (out.mode != Mode::Train) throw StateError("backward: needs a train-mode forward cache");
  if (grad_z.rows() != out.z.rows() || grad_z.cols() != out.z.cols()) {
    throw ShapeError("backward: grad_z shape does not match z");
  }
  const std::size_t num_layers = params.layers.size();
  StreamGrads g;
  g.layers.resize(num_layers);
  Matrix grad = grad_z;
  for (std::size_t l = num_layers; l-- > 0;) {
    if (l + 1 < num_layers) {
      const Matrix& pre = out.pre_activations[l];
      auto gd = grad.data();
      auto pd = pre.data();
      for (std::size_t k = 0; k < gd.size(); ++k)
        if (!(pd[k] > 0.0)) gd[k] = 0.0;
    }
    const Linear& layer = params.layers[l];
    g.layers[l].weight = matmul_at(grad, out.layer_inputs[l]);
    g.layers[l].bias.assign(layer.bias.size(), 0.0);
    for (std::size_t r = 0; r < grad.rows(); ++r) {
      const auto row = grad.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) g.layers[l].bias[j] += row[j];
    }
    grad = matmul(grad, layer.weight);
  }
  g.input = std::move(grad);
  g.gamma.assign(params.head.neck.dim(), 0.0);
  g.classifier = Matrix(params.head.num_classes(), params.head.neck.dim());
  return g;
}

StreamGrads backward(const StreamParams& params, const StreamOutput& out, const Matrix& grad_z,
                     const Matrix& grad_logits) {
  if (out.mode != Mode::Train) throw StateError("backward: needs a train-mode forward cache");
  HeadGrads hg = head_backward(params.head, out.head, grad_logits);
  Matrix total = std::move(hg.input);
  if (!grad_z.empty()) {
    if (grad_z.rows() != total.rows() || grad_z.cols() != total.cols()) {
      throw ShapeError("backward: grad_z shape does not match z");
    }
    auto dst = total.data();
    auto src = grad_z.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  StreamGrads g = mlp_backward(params, out, total);
  g.gamma = std::move(hg.gamma);
  g.classifier = std::move(hg.classifier);
  return g;
}

namespace {

void append_head(std::vector<std::span<double>>& v, std::vector<double>& gamma, Matrix& cls) {
  v.emplace_back(gamma);
  if (cls.rows() > 0) v.push_back(cls.data());
}

}  // namespace

std::vector<std::span<double>> parameter_views(ModelParams& params) {
  std::vector<std::span<double>> v;
  for (auto& s : params.streams) {
    for (auto& l : s.layers) {
      v.push_back(l.weight.data());
      v.emplace_back(l.bias);
    }
    append_head(v, s.head.neck.gamma, s.head.classifier);
  }
  if (params.fused) append_head(v, params.fused->neck.gamma, params.fused->classifier);
  return v;
}

std::vector<std::span<double>> gradient_views(ModelGrads& grads) {
  std::vector<std::span<double>> v;
  for (auto& s : grads.streams) {
    for (auto& l : s.layers) {
      v.push_back(l.weight.data());
      v.emplace_back(l.bias);
    }
    append_head(v, s.gamma, s.classifier);
  }
  if (grads.fused) append_head(v, grads.fused->gamma, grads.fused->classifier);
  return v;
}

ModelGrads zero_grads(const ModelParams& params) {
  ModelGrads g;
  for (const auto& s : params.streams) {
    StreamGrads sg;
    for (const auto& l : s.layers) {
      sg.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()),
                           std::vector<double>(l.bias.size(), 0.0)});
    }
    sg.gamma.assign(s.head.neck.dim(), 0.0);
    sg.classifier = Matrix(s.head.num_classes(), s.head.neck.dim());
    g.streams.push_back(std::move(sg));
  }
  if (params.fused) {
    HeadGrads hg;
    hg.gamma.assign(params.fused->neck.dim(), 0.0);
    hg.classifier = Matrix(params.fused->num_classes(), params.fused->neck.dim());
    g.fused = std::move(hg);
  }
  return g;
}

EmbeddingSet embed_dataset(const ModelParams& params, const MultimodalDataset& ds, Split split,
                           EmbedTarget target, const InferenceOptions& options) {
  if (ds.num_modalities() != params.streams.size()) {
    throw ShapeError(fmt::format("embed_dataset: model has {} streams, dataset {} modalities",
                                 params.streams.size(), ds.num_modalities()));
  }
  const std::vector<std::size_t> rows = ds.indices(split);
  EmbeddingSet set;
  set.tag = split;
  for (std::size_t r : rows) {
    set.ids.push_back(ds.ids[r]);
    set.view_ids.push_back(ds.view_ids[r]);
  }

  auto stream_output = [&](std::size_t i) {
    return forward(params.streams[i], select_rows(ds.features[i], rows), Mode::Eval);
  };

  if (!target.fused) {
    if (target.stream_index >= params.streams.size()) {
      throw IndexError(fmt::format("embed_dataset: stream {} out of {}", target.stream_index,
                                   params.streams.size()));
    }
    set.features = std::move(stream_output(target.stream_index).head.z_bn);
    return set;
  }

  const bool normalize =
      options.normalize_before_fusion.value_or(default_normalize_before_fusion(params.strategy));
  std::vector<Matrix> parts;
  for (std::size_t i = 0; i < params.streams.size(); ++i) {
    StreamOutput o = stream_output(i);
    parts.push_back(has_fused_head(params.strategy) ? std::move(o.z) : std::move(o.head.z_bn));
  }
  Matrix fused = fuse(parts, fusion_operator(params.strategy), normalize);
  if (has_fused_head(params.strategy)) {
    if (!params.fused) throw ConfigError("embed_dataset: fusion strategy without a fused head");
    set.features = std::move(head_forward(*params.fused, fused, Mode::Eval).z_bn);
  } else {
    set.features = std::move(fused);
  }
  return set;
}

void validate(const EmbeddingSet& set) {
  if (set.ids.size() != set.features.rows() || set.view_ids.size() != set.features.rows()) {
    throw DataError("embedding set: label arrays not aligned with feature rows");
  }
  for (std::size_t r = 0; r < set.features.rows(); ++r) {
    if (l2_norm(set.features.row(r)) == 0.0) {
      throw EvaluationError(fmt::format("embedding set: row {} has zero norm", r));
    }
  }
}

}  // namespace unicat
