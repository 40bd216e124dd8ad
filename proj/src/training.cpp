#include "hypstruct/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hypstruct/detail/geometry_kernels.hpp"
#include "hypstruct/detail/objective_kernels.hpp"
#include "hypstruct/error.hpp"
#include "hypstruct/parallel.hpp"
#include "json.hpp"

namespace hypstruct::training {

using objective::FlatLoss;
using objective::ObjectiveConfig;
using Json = nlohmann::json;

void EncoderSpec::validate() const {
  if (input_dim == 0 || output_dim == 0 || (kind == EncoderKind::mlp_1hidden && hidden_dim == 0)) {
    throw Error(ErrorCode::InvalidArgument, "encoder dimensions must be positive");
  }
}

void TrainConfig::validate(std::size_t dataset_size) const {
  if (epochs == 0 || batch_size == 0) throw Error(ErrorCode::InvalidArgument, "epochs and batch_size must be positive");
  if (batch_size > dataset_size) throw Error(ErrorCode::InvalidArgument, "batch_size exceeds the dataset size");
  if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw Error(ErrorCode::InvalidArgument, "lr0 must be finite and nonnegative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::InvalidArgument, "momentum must lie in [0, 1)");
  if (!(view_noise >= 0.0)) throw Error(ErrorCode::InvalidArgument, "view_noise must be nonnegative");
}

double learning_rate(const TrainConfig& tc, std::size_t epoch) {
  if (tc.schedule == Schedule::constant || tc.epochs <= 1) return tc.lr0;
  const double e = static_cast<double>(std::min(epoch, tc.epochs - 1));
  return 0.5 * tc.lr0 * (1.0 + std::cos(M_PI * e / static_cast<double>(tc.epochs - 1)));
}

// ---------------------------------------------------------------------------
// Synthetic data

void SyntheticSpec::validate() const {
  if (dim == 0 || n_per_leaf == 0) throw Error(ErrorCode::InvalidArgument, "dim and n_per_leaf must be positive");
  if (!(coarse_spread >= 0.0) || !(fine_spread >= 0.0) || !(noise_sigma >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "spreads and noise must be nonnegative");
  }
}

std::vector<std::string> SyntheticSpec::warnings() const {
  std::vector<std::string> out;
  if (!(coarse_spread > fine_spread)) out.push_back("coarse_spread is not above fine_spread");
  if (!(fine_spread > noise_sigma)) out.push_back("fine_spread is not above noise_sigma");
  return out;
}

namespace {

std::vector<double> random_direction(std::mt19937_64& eng, std::size_t dim) {
  std::normal_distribution<double> normal;
  std::vector<double> v(dim);
  double n2 = 0.0;
  while (n2 == 0.0) {
    for (auto& x : v) x = normal(eng);
    n2 = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

}  // namespace

Matrix vertex_centers(const SyntheticSpec& spec) {
  spec.validate();
  const auto& tree = spec.tree;
  std::seed_seq center_seq{spec.seed, std::uint64_t{0}};
  std::mt19937_64 center_eng(center_seq);

  Matrix centers(tree.vertex_count(), spec.dim, 0.0);
  std::vector<hierarchy::VertexId> stack{tree.root()};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    const auto kids = tree.children(v);
    for (auto child : kids) {
      const double spread = tree.depth(child) == 1 ? spec.coarse_spread : spec.fine_spread;
      const auto dir = random_direction(center_eng, spec.dim);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        centers(static_cast<std::size_t>(child), j) = centers(static_cast<std::size_t>(v), j) + spread * dir[j];
      }
    }
    // Children are visited in id order so the draws do not depend on the
    // stack discipline.
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return centers;
}

LabeledDataset generate_hierarchical_gaussians(const SyntheticSpec& spec) {
  const Matrix centers = vertex_centers(spec);
  const auto& tree = spec.tree;
  std::seed_seq noise_seq{spec.noise_seed.value_or(spec.seed), std::uint64_t{1}};
  std::mt19937_64 noise_eng(noise_seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t leaves = tree.leaf_count();
  LabeledDataset data;
  data.features = Matrix(leaves * spec.n_per_leaf, spec.dim);
  data.labels.reserve(leaves * spec.n_per_leaf);
  std::size_t row = 0;
  for (std::size_t cls = 0; cls < leaves; ++cls) {
    const auto center = centers.row(static_cast<std::size_t>(tree.leaves()[cls]));
    for (std::size_t s = 0; s < spec.n_per_leaf; ++s, ++row) {
      for (std::size_t j = 0; j < spec.dim; ++j) data.features(row, j) = center[j] + spec.noise_sigma * normal(noise_eng);
      data.labels.push_back(static_cast<int>(cls));
    }
  }
  return data;
}

Matrix generate_ood(const SyntheticSpec& id, const OodSpec& ood) {
  if (ood.n == 0) throw Error(ErrorCode::EmptyInput, "OOD sample count must be positive");
  if (ood.kind == OodKind::in_distribution) {
    SyntheticSpec fresh = id;
    fresh.noise_seed = ood.seed;
    fresh.n_per_leaf = (ood.n + id.tree.leaf_count() - 1) / id.tree.leaf_count();
    Matrix all = generate_hierarchical_gaussians(fresh).features;
    Matrix out(ood.n, id.dim);
    std::copy_n(all.data().begin(), ood.n * id.dim, out.data().begin());
    return out;
  }
  const Matrix centers = vertex_centers(id);
  std::seed_seq seq{ood.seed, std::uint64_t{2}};
  std::mt19937_64 eng(seq);
  const auto dir = random_direction(eng, id.dim);
  std::vector<double> center(id.dim);
  if (ood.kind == OodKind::novel_leaf) {
    const auto parent = id.tree.parent(id.tree.leaves().back());
    for (std::size_t j = 0; j < id.dim; ++j) center[j] = centers(static_cast<std::size_t>(parent), j) + id.fine_spread * dir[j];
  } else {
    double reach = 0.0;
    for (std::size_t v = 0; v < centers.rows(); ++v) {
      const auto row = centers.row(v);
      reach = std::max(reach, std::sqrt(std::inner_product(row.begin(), row.end(), row.begin(), 0.0)));
    }
    const double radius = reach + ood.far_sigmas * id.noise_sigma;
    for (std::size_t j = 0; j < id.dim; ++j) center[j] = radius * dir[j];
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(ood.n, id.dim);
  for (std::size_t i = 0; i < ood.n; ++i)
    for (std::size_t j = 0; j < id.dim; ++j) out(i, j) = center[j] + id.noise_sigma * normal(eng);
  return out;
}

// ---------------------------------------------------------------------------
// Model

namespace {

Dense make_dense(std::size_t in, std::size_t out, std::mt19937_64& eng) {
  Dense d{Matrix(out, in), std::vector<double>(out, 0.0)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& w : d.w.data()) w = dist(eng);
  return d;
}

struct StackTrace {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activation output of each layer
};

Matrix affine(const Dense& layer, const Matrix& x) {
  if (x.cols() != layer.in()) throw Error(ErrorCode::DimensionMismatch, "layer input dimension differs");
  Matrix y(x.rows(), layer.out());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    auto yi = y.row(i);
    for (std::size_t o = 0; o < layer.out(); ++o) {
      const auto wo = layer.w.row(o);
      double s = layer.b[o];
      for (std::size_t k = 0; k < xi.size(); ++k) s += wo[k] * xi[k];
      yi[o] = s;
    }
  }
  return y;
}

// ReLU between layers, none after the last.
Matrix forward(const std::vector<Dense>& layers, const Matrix& x, StackTrace* trace) {
  Matrix h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix y = affine(layers[l], h);
    if (trace) {
      trace->inputs.push_back(std::move(h));
      trace->pre.push_back(y);
    }
    if (l + 1 < layers.size()) {
      for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
    }
    h = std::move(y);
  }
  return h;
}

std::size_t stack_size(const std::vector<Dense>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.data().size() + l.b.size();
  return n;
}

// Writes the parameter gradient into `grad` (stack layout) and returns dL/dx.
Matrix backward(const std::vector<Dense>& layers, const StackTrace& tr, Matrix dy, std::span<double> grad) {
  std::vector<std::size_t> offset(layers.size());
  std::size_t pos = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    offset[l] = pos;
    pos += layers[l].w.data().size() + layers[l].b.size();
  }
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Dense& layer = layers[l];
    if (l + 1 < layers.size()) {
      const auto& pre = tr.pre[l].data();
      auto& d = dy.data();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(pre[i] > 0.0)) d[i] = 0.0;
      }
    }
    const Matrix& x = tr.inputs[l];
    double* gw = grad.data() + offset[l];
    double* gb = gw + layer.w.data().size();
    Matrix dx(x.rows(), layer.in(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto xi = x.row(i);
      const auto di = dy.row(i);
      auto dxi = dx.row(i);
      for (std::size_t o = 0; o < layer.out(); ++o) {
        const double g = di[o];
        if (g == 0.0) continue;
        gb[o] += g;
        const auto wo = layer.w.row(o);
        double* gwo = gw + o * layer.in();
        for (std::size_t k = 0; k < xi.size(); ++k) {
          gwo[k] += g * xi[k];
          dxi[k] += g * wo[k];
        }
      }
    }
    dy = std::move(dx);
  }
  return dy;
}

void append_params(const std::vector<Dense>& layers, std::vector<double>& out) {
  for (const auto& l : layers) {
    out.insert(out.end(), l.w.data().begin(), l.w.data().end());
    out.insert(out.end(), l.b.begin(), l.b.end());
  }
}

std::size_t assign_params(std::vector<Dense>& layers, std::span<const double> p, std::size_t pos) {
  for (auto& l : layers) {
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(pos), l.w.data().size(), l.w.data().begin());
    pos += l.w.data().size();
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(pos), l.b.size(), l.b.begin());
    pos += l.b.size();
  }
  return pos;
}

}  // namespace

Matrix Model::encode(const Matrix& x) const { return forward(encoder, x, nullptr); }

Matrix Model::head_outputs(const Matrix& z) const { return forward(head, z, nullptr); }

std::size_t Model::parameter_count() const { return stack_size(encoder) + stack_size(head); }

std::vector<double> Model::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  append_params(encoder, out);
  append_params(head, out);
  return out;
}

void Model::set_parameters(std::span<const double> params) {
  if (params.size() != parameter_count()) throw Error(ErrorCode::LengthMismatch, "parameter count differs");
  assign_params(head, params, assign_params(encoder, params, 0));
}

Model init_model(const EncoderSpec& spec, FlatLoss flat_loss, std::size_t num_classes) {
  spec.validate();
  if (num_classes == 0) throw Error(ErrorCode::InvalidArgument, "num_classes must be positive");
  std::mt19937_64 eng(spec.seed);
  Model m;
  m.spec = spec;
  m.flat_loss = flat_loss;
  m.num_classes = num_classes;
  if (spec.kind == EncoderKind::linear) {
    m.encoder.push_back(make_dense(spec.input_dim, spec.output_dim, eng));
  } else {
    m.encoder.push_back(make_dense(spec.input_dim, spec.hidden_dim, eng));
    m.encoder.push_back(make_dense(spec.hidden_dim, spec.output_dim, eng));
  }
  if (flat_loss == FlatLoss::cross_entropy) {
    m.head.push_back(make_dense(spec.output_dim, num_classes, eng));
  } else {
    m.head.push_back(make_dense(spec.output_dim, spec.output_dim, eng));
    m.head.push_back(make_dense(spec.output_dim, std::min<std::size_t>(spec.output_dim, 128), eng));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Objective and gradient

namespace {

template <class T>
BasicMatrix<T> normalized_rows(const BasicMatrix<T>& h) {
  using std::sqrt;
  BasicMatrix<T> out(h.rows(), h.cols());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    const auto row = h.row(i);
    const T n2 = geometry::detail::squared_norm(row);
    // A zero projection has no direction; pin it to the first axis.
    if (ad::value(n2) == 0.0) {
      for (std::size_t j = 0; j < h.cols(); ++j) out(i, j) = T(j == 0 ? 1.0 : 0.0);
      continue;
    }
    const T n = sqrt(n2);
    for (std::size_t j = 0; j < h.cols(); ++j) out(i, j) = row[j] / n;
  }
  return out;
}

void check_batch(const Matrix& x, std::span<const int> labels) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyBatch, "empty batch");
  if (labels.size() != x.rows()) throw Error(ErrorCode::LengthMismatch, "one label per row");
}

}  // namespace

BatchGradient loss_and_gradient(const Model& model, const Matrix& x, std::span<const int> labels,
                                const LabelTree& tree, const ObjectiveConfig& cfg) {
  cfg.validate();
  check_batch(x, labels);
  StackTrace enc_tr, head_tr;
  const Matrix z = forward(model.encoder, x, &enc_tr);
  const Matrix h = forward(model.head, z, &head_tr);

  std::vector<double> inputs(z.data());
  inputs.insert(inputs.end(), h.data().begin(), h.data().end());
  objective::ObjectiveValue value;
  const auto closure = [&](std::span<const ad::Var> p) {
    using ad::Var;
    BasicMatrix<Var> zv(z.rows(), z.cols(), std::vector<Var>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(z.data().size())));
    BasicMatrix<Var> hv(h.rows(), h.cols(), std::vector<Var>(p.begin() + static_cast<std::ptrdiff_t>(z.data().size()), p.end()));
    const auto flat_in = model.flat_loss == FlatLoss::supcon ? normalized_rows(hv) : hv;
    const auto b = objective::detail::composite(zv, labels, tree, cfg, flat_in);
    value.total = b.total.value();
    value.flat = b.flat.value();
    if (b.cpcc) value.cpcc = b.cpcc->value();
    value.center = b.center.value();
    value.cpcc_skipped = b.cpcc_skipped;
    return b.total;
  };
  const auto g = objective::gradient(closure, inputs);

  BatchGradient out;
  out.value = value;
  out.grad.assign(model.parameter_count(), 0.0);
  const std::size_t enc_size = stack_size(model.encoder);
  Matrix dz(z.rows(), z.cols(), std::vector<double>(g.grad.begin(), g.grad.begin() + static_cast<std::ptrdiff_t>(z.data().size())));
  Matrix dh(h.rows(), h.cols(), std::vector<double>(g.grad.begin() + static_cast<std::ptrdiff_t>(z.data().size()), g.grad.end()));
  const Matrix dz_head = backward(model.head, head_tr, std::move(dh), std::span<double>(out.grad).subspan(enc_size));
  for (std::size_t i = 0; i < dz.data().size(); ++i) dz.data()[i] += dz_head.data()[i];
  backward(model.encoder, enc_tr, std::move(dz), std::span<double>(out.grad).first(enc_size));
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

EpochRecord evaluate(const Model& model, const LabeledDataset& data, const LabelTree& tree,
                     const ObjectiveConfig& obj) {
  check_batch(data.features, data.labels);
  EpochRecord r;
  objective::Batch batch{model.encode(data.features), data.labels};
  const Matrix h = model.head_outputs(batch.features);
  r.flat = model.flat_loss == FlatLoss::cross_entropy ? objective::cross_entropy(h, data.labels)
                                                      : objective::supcon_loss(normalized_rows(h), data.labels, obj.tau);
  try {
    r.cpcc = obj.cpcc_geometry == objective::CpccGeometry::hyperbolic ? objective::hypcpcc_loss(batch, tree, obj)
                                                                      : objective::l2_cpcc_loss(batch, tree, obj);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientVertices && e.code() != ErrorCode::DegenerateVariance) throw;
  }
  r.center = objective::centering_loss(batch, obj);
  return r;
}

TrainResult train(const LabeledDataset& data, const LabelTree& tree, const EncoderSpec& enc,
                  const ObjectiveConfig& obj, const TrainConfig& tc) {
  obj.validate();
  check_batch(data.features, data.labels);
  tc.validate(data.size());
  if (enc.input_dim != data.dim()) throw Error(ErrorCode::DimensionMismatch, "encoder input_dim differs from the data");

  TrainResult result;
  result.model = init_model(enc, obj.flat_loss, tree.leaf_count());
  Model& model = result.model;
  auto record = [&](std::size_t epoch, double lr) {
    EpochRecord r = evaluate(model, data, tree, obj);
    r.epoch = epoch;
    r.lr = lr;
    result.history.push_back(r);
  };
  record(0, learning_rate(tc, 0));

  std::mt19937_64 eng(tc.seed);
  std::normal_distribution<double> view_noise(0.0, tc.view_noise);
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<double> params = model.parameters();
  std::vector<double> velocity(params.size(), 0.0);
  const std::size_t dim = data.dim();
  const bool views = obj.flat_loss == FlatLoss::supcon;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = learning_rate(tc, epoch);
    std::shuffle(perm.begin(), perm.end(), eng);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < perm.size(); start += tc.batch_size, ++batch_index) {
      const std::size_t end = std::min(perm.size(), start + tc.batch_size);
      const std::size_t b = end - start;
      const std::size_t copies = views ? 2 : 1;
      Matrix x(b * copies, dim);
      std::vector<int> labels(b * copies);
      for (std::size_t v = 0; v < copies; ++v) {
        for (std::size_t i = 0; i < b; ++i) {
          const auto src = data.features.row(perm[start + i]);
          auto dst = x.row(v * b + i);
          for (std::size_t j = 0; j < dim; ++j) dst[j] = src[j] + (views ? view_noise(eng) : 0.0);
          labels[v * b + i] = data.labels[perm[start + i]];
        }
      }
      const auto lg = loss_and_gradient(model, x, labels, tree, obj);
      const auto where = "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch_index);
      if (!std::isfinite(lg.value.total)) throw Error(ErrorCode::Diverged, "non-finite loss at " + where);
      if (lg.value.cpcc_skipped) ++result.skipped_cpcc_batches;
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p] = tc.momentum * velocity[p] + lg.grad[p];
        params[p] -= lr * velocity[p];
        if (!std::isfinite(params[p])) throw Error(ErrorCode::Diverged, "non-finite parameters at " + where);
      }
      model.set_parameters(params);
    }
    record(epoch + 1, lr);
  }
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,flat,cpcc,center,lr\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : history) {
    out << r.epoch << ',' << num(r.flat) << ',' << (r.cpcc ? num(*r.cpcc) : "") << ',' << num(r.center) << ','
        << num(r.lr) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

Json stack_json(const std::vector<Dense>& layers) {
  Json arr = Json::array();
  for (const auto& l : layers) {
    Json w = Json::array();
    for (std::size_t o = 0; o < l.out(); ++o) {
      const auto row = l.w.row(o);
      w.push_back(std::vector<double>(row.begin(), row.end()));
    }
    arr.push_back({{"weight", w}, {"bias", l.b}});
  }
  return arr;
}

std::vector<Dense> stack_from_json(const Json& arr) {
  std::vector<Dense> layers;
  for (const auto& l : arr) {
    const auto rows = l.at("weight").get<std::vector<std::vector<double>>>();
    const auto bias = l.at("bias").get<std::vector<double>>();
    if (rows.empty() || rows.size() != bias.size()) throw Error(ErrorCode::ValidationError, "weight/bias shape mismatch");
    Dense d{Matrix(rows.size(), rows.front().size()), bias};
    for (std::size_t o = 0; o < rows.size(); ++o) {
      if (rows[o].size() != d.in()) throw Error(ErrorCode::ValidationError, "ragged weight matrix");
      std::copy(rows[o].begin(), rows[o].end(), d.w.row(o).begin());
    }
    layers.push_back(std::move(d));
  }
  return layers;
}

}  // namespace

std::string checkpoint_json(const Model& model, std::string_view config_echo) {
  Json j;
  j["encoder"] = {{"kind", model.spec.kind == EncoderKind::linear ? "linear" : "mlp_1hidden"},
                  {"input_dim", model.spec.input_dim},
                  {"hidden_dim", model.spec.hidden_dim},
                  {"output_dim", model.spec.output_dim},
                  {"seed", model.spec.seed}};
  j["flat_loss"] = model.flat_loss == FlatLoss::cross_entropy ? "cross_entropy" : "supcon";
  j["num_classes"] = model.num_classes;
  j["parameters"] = {{"encoder", stack_json(model.encoder)}, {"head", stack_json(model.head)}};
  j["config"] = Json::parse(config_echo);
  return j.dump(2);
}

Model parse_checkpoint(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::ParseError, std::string("checkpoint: ") + e.what());
  }
  try {
    Model m;
    const auto& e = j.at("encoder");
    const auto kind = e.at("kind").get<std::string>();
    if (kind != "linear" && kind != "mlp_1hidden") throw Error(ErrorCode::ValidationError, "unknown encoder kind " + kind);
    m.spec.kind = kind == "linear" ? EncoderKind::linear : EncoderKind::mlp_1hidden;
    m.spec.input_dim = e.at("input_dim").get<std::size_t>();
    m.spec.hidden_dim = e.at("hidden_dim").get<std::size_t>();
    m.spec.output_dim = e.at("output_dim").get<std::size_t>();
    m.spec.seed = e.at("seed").get<std::uint64_t>();
    const auto loss = j.at("flat_loss").get<std::string>();
    if (loss != "cross_entropy" && loss != "supcon") throw Error(ErrorCode::ValidationError, "unknown flat loss " + loss);
    m.flat_loss = loss == "supcon" ? FlatLoss::supcon : FlatLoss::cross_entropy;
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.encoder = stack_from_json(j.at("parameters").at("encoder"));
    m.head = stack_from_json(j.at("parameters").at("head"));

    const Model shape = init_model(m.spec, m.flat_loss, m.num_classes);
    auto same_shape = [](const std::vector<Dense>& a, const std::vector<Dense>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t l = 0; l < a.size(); ++l) {
        if (a[l].in() != b[l].in() || a[l].out() != b[l].out()) return false;
      }
      return true;
    };
    if (!same_shape(m.encoder, shape.encoder) || !same_shape(m.head, shape.head)) {
      throw Error(ErrorCode::ValidationError, "parameter shapes do not match the encoder description");
    }
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Direct tree embedding

std::vector<double> embedded_pair_distances(const Matrix& coords, EmbedMode mode, geometry::Curvature c) {
  const std::size_t n = coords.rows();
  std::vector<double> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (mode == EmbedMode::poincare) {
        out.push_back(geometry::detail::poincare_distance(coords.row(i), coords.row(j), c.value()));
      } else {
        double s = 0.0;
        for (std::size_t k = 0; k < coords.cols(); ++k) {
          const double d = coords(i, k) - coords(j, k);
          s += d * d;
        }
        out.push_back(std::sqrt(s));
      }
    }
  }
  return out;
}

namespace {

struct Ascent {
  double cpcc = 0.0;
  std::vector<double> grad;
};

// Pearson correlation and its derivative with respect to each distance.
double pearson_with_slope(std::span<const double> t, std::span<const double> d, std::vector<double>& slope) {
  const double n = static_cast<double>(t.size());
  const double tm = std::accumulate(t.begin(), t.end(), 0.0) / n;
  const double dm = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double a = t[k] - tm, b = d[k] - dm;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(ErrorCode::DegenerateVariance, "constant distances");
  const double root = std::sqrt(saa * sbb);
  const double r = sab / root;
  slope.resize(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) slope[k] = (t[k] - tm) / root - r * (d[k] - dm) / sbb;
  return r;
}

// Internal vertices are the mean of their descendant leaves: C = M x.
Ascent l2_ascent(std::span<const double> t, const Matrix& mean_of, const std::vector<double>& x, std::size_t dim) {
  const std::size_t n = mean_of.rows(), leaves = mean_of.cols();
  std::vector<double> c(n * dim, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t l = 0; l < leaves; ++l) {
      const double w = mean_of(v, l);
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < dim; ++k) c[v * dim + k] += w * x[l * dim + k];
    }
  std::vector<double> d;
  d.reserve(t.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = c[i * dim + k] - c[j * dim + k];
        s += diff * diff;
      }
      d.push_back(std::sqrt(s));
    }
  }
  std::vector<double> slope;
  Ascent out;
  out.cpcc = pearson_with_slope(t, d, slope);
  std::vector<double> gc(c.size(), 0.0);
  std::size_t p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++p) {
      if (d[p] == 0.0) continue;
      const double s = slope[p] / d[p];
      for (std::size_t k = 0; k < dim; ++k) {
        const double g = s * (c[i * dim + k] - c[j * dim + k]);
        gc[i * dim + k] += g;
        gc[j * dim + k] -= g;
      }
    }
  }
  out.grad.assign(x.size(), 0.0);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t l = 0; l < leaves; ++l) {
      const double w = mean_of(v, l);
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < dim; ++k) out.grad[l * dim + k] += w * gc[v * dim + k];
    }
  return out;
}

Ascent poincare_ascent(const LabelTree& tree, std::span<const int> labels, const ObjectiveConfig& cfg,
                       const std::vector<double>& x, std::size_t dim) {
  const auto closure = [&](std::span<const ad::Var> v) {
    BasicMatrix<ad::Var> z(labels.size(), dim, std::vector<ad::Var>(v.begin(), v.end()));
    return objective::detail::cpcc_term(z, labels, tree, cfg);
  };
  auto g = objective::gradient(closure, x);
  return {g.value, std::move(g.grad)};
}

ObjectiveConfig embedding_objective(EmbedMode mode, geometry::Curvature c) {
  ObjectiveConfig cfg;
  cfg.c = c;
  cfg.tree_scope = objective::TreeScope::full_tree;
  cfg.centroid_mode = objective::CentroidMode::klein_average;
  cfg.cpcc_geometry = mode == EmbedMode::poincare ? objective::CpccGeometry::hyperbolic : objective::CpccGeometry::euclidean;
  return cfg;
}

}  // namespace

EmbedResult embed_tree_direct(const LabelTree& tree, std::size_t dim, EmbedMode mode, const EmbedConfig& cfg) {
  if (dim < 2) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be at least 2");
  const std::size_t n = tree.vertex_count();
  if (n < 3) throw Error(ErrorCode::InsufficientVertices, "need at least three vertices for CPCC");
  if (cfg.restarts == 0) throw Error(ErrorCode::InvalidArgument, "restarts must be positive");
  const std::size_t leaves = tree.leaf_count();
  const Matrix tm = hierarchy::tree_metric(tree).dist;
  std::vector<double> t;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) t.push_back(tm(i, j));
  std::vector<int> labels(leaves);
  std::iota(labels.begin(), labels.end(), 0);
  Matrix mean_of(n, leaves, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    const auto under = tree.classes_under(static_cast<hierarchy::VertexId>(v));
    for (int l : under) mean_of(v, static_cast<std::size_t>(l)) = 1.0 / static_cast<double>(under.size());
  }
  const ObjectiveConfig obj = embedding_objective(mode, cfg.c);

  std::vector<double> best_cpcc(cfg.restarts, -2.0);
  std::vector<std::vector<double>> best_x(cfg.restarts);
  parallel_for(cfg.restarts, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(r)};
      std::mt19937_64 eng(seq);
      std::uniform_real_distribution<double> init(-cfg.init_scale, cfg.init_scale);
      std::vector<double> x(leaves * dim);
      for (auto& v : x) v = init(eng);
      for (std::size_t step = 0; step <= cfg.steps; ++step) {
        Ascent a;
        try {
          a = mode == EmbedMode::l2 ? l2_ascent(t, mean_of, x, dim) : poincare_ascent(tree, labels, obj, x, dim);
        } catch (const Error& e) {
          // Collapsed or saturated coordinates end this restart.
          if (e.code() != ErrorCode::DegenerateVariance) throw;
          break;
        }
        if (a.cpcc > best_cpcc[r]) {
          best_cpcc[r] = a.cpcc;
          best_x[r] = x;
        }
        if (step == cfg.steps) break;
        for (std::size_t k = 0; k < x.size(); ++k) x[k] += cfg.lr * a.grad[k];
      }
    }
  });

  const std::size_t winner =
      static_cast<std::size_t>(std::max_element(best_cpcc.begin(), best_cpcc.end()) - best_cpcc.begin());
  EmbedResult out;
  out.cpcc = best_cpcc[winner];
  out.restart_cpcc = best_cpcc;
  out.coords = Matrix(n, dim);
  objective::Batch leaf_batch{Matrix(leaves, dim, best_x[winner]), labels};
  if (mode == EmbedMode::poincare) {
    const auto protos = objective::hyp_prototypes(leaf_batch, tree, obj);
    for (std::size_t v = 0; v < n; ++v) {
      const auto& p = protos.at(static_cast<hierarchy::VertexId>(v)).coords();
      std::copy(p.begin(), p.end(), out.coords.row(v).begin());
    }
  } else {
    out.coords = objective::euclidean_prototypes(leaf_batch, tree, obj.tree_scope).second;
  }
  return out;
}

}  // namespace hypstruct::training
