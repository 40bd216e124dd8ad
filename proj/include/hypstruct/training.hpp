#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypstruct/hierarchy.hpp"
#include "hypstruct/matrix.hpp"
#include "hypstruct/objective.hpp"

namespace hypstruct::training {

using hierarchy::LabeledDataset;
using hierarchy::LabelTree;

enum class EncoderKind { linear, mlp_1hidden };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::mlp_1hidden;
  std::size_t input_dim = 16;
  std::size_t hidden_dim = 64;
  std::size_t output_dim = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Schedule { constant, cosine };

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double lr0 = 0.05;
  double momentum = 0.9;
  Schedule schedule = Schedule::cosine;
  std::uint64_t seed = 0;
  /// Std. dev. of the fresh noise that makes each SupCon view.
  double view_noise = 0.5;

  void validate(std::size_t dataset_size) const;
};

/// lr for 0-based epoch e of E: lr0, or 0.5 lr0 (1 + cos(pi e / (E - 1))).
double learning_rate(const TrainConfig& tc, std::size_t epoch);

struct SyntheticSpec {
  LabelTree tree;
  std::size_t dim = 16;
  double coarse_spread = 6.0;
  double fine_spread = 2.0;
  double noise_sigma = 1.0;
  std::size_t n_per_leaf = 50;
  /// Draws the vertex centers.
  std::uint64_t seed = 0;
  /// Draws the sample noise; defaults to `seed`. Two specs that differ only
  /// here share their class centers (a train/test split).
  std::optional<std::uint64_t> noise_seed;

  /// Throws InvalidArgument on zero sizes or negative spreads.
  void validate() const;
  /// Notes when coarse_spread > fine_spread > noise_sigma does not hold.
  std::vector<std::string> warnings() const;
};

/// Depth-1 vertices sit at a random direction times coarse_spread from the
/// origin, deeper vertices at fine_spread from their parent; each leaf
/// receives n_per_leaf samples of its center plus N(0, noise_sigma^2 I).
LabeledDataset generate_hierarchical_gaussians(const SyntheticSpec& spec);

/// Center of every tree vertex (rows in vertex-id order) as drawn by
/// generate_hierarchical_gaussians.
Matrix vertex_centers(const SyntheticSpec& spec);

enum class OodKind {
  /// An unseen sibling class: a new center at fine_spread from the parent of
  /// the last leaf.
  novel_leaf,
  /// A cluster at least `far_sigmas * noise_sigma` away from every center.
  far_cluster,
  /// Fresh draws from the in-distribution classes.
  in_distribution,
};

struct OodSpec {
  OodKind kind = OodKind::novel_leaf;
  std::size_t n = 500;
  double far_sigmas = 10.0;
  std::uint64_t seed = 0;
};

/// Out-of-distribution samples (noise_sigma isotropic noise around the OOD
/// center) for the in-distribution data described by `id`.
Matrix generate_ood(const SyntheticSpec& id, const OodSpec& ood);

/// Fully connected layer y = W x + b with W stored out x in.
struct Dense {
  Matrix w;
  std::vector<double> b;

  std::size_t in() const noexcept { return w.cols(); }
  std::size_t out() const noexcept { return w.rows(); }
};

/// Encoder plus the head used by the flat loss: a linear classifier for
/// cross entropy, or a one-hidden-layer projection MLP for SupCon (hidden
/// width output_dim, output min(output_dim, 128)).
struct Model {
  EncoderSpec spec;
  objective::FlatLoss flat_loss = objective::FlatLoss::cross_entropy;
  std::size_t num_classes = 0;
  std::vector<Dense> encoder;
  std::vector<Dense> head;

  Matrix encode(const Matrix& x) const;
  /// Logits, or projections before normalization.
  Matrix head_outputs(const Matrix& z) const;

  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> params);
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
Model init_model(const EncoderSpec& spec, objective::FlatLoss flat_loss, std::size_t num_classes);

struct BatchGradient {
  objective::ObjectiveValue value;
  /// Same layout as Model::parameters().
  std::vector<double> grad;
};

/// Composite objective of a batch and its gradient with respect to every
/// model parameter.
BatchGradient loss_and_gradient(const Model& model, const Matrix& x, std::span<const int> labels,
                                const LabelTree& tree, const objective::ObjectiveConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double flat = 0.0;
  /// CPCC in the objective's geometry over the whole training set; empty
  /// when undefined.
  std::optional<double> cpcc;
  double center = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Model model;
  /// Epoch 0 is measured before any update.
  std::vector<EpochRecord> history;
  std::size_t skipped_cpcc_batches = 0;
};

/// Mini-batch SGD with momentum on the composite objective. Throws Diverged
/// naming the epoch and batch when the loss or the parameters stop being
/// finite.
TrainResult train(const LabeledDataset& data, const LabelTree& tree, const EncoderSpec& enc,
                  const objective::ObjectiveConfig& obj, const TrainConfig& tc);

/// Whole-dataset metrics of a model, as recorded in the history.
EpochRecord evaluate(const Model& model, const LabeledDataset& data, const LabelTree& tree,
                     const objective::ObjectiveConfig& obj);

/// CSV `epoch,flat,cpcc,center,lr`; an undefined CPCC is an empty field.
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

/// JSON with the encoder spec, head description, named parameter arrays and
/// `config_echo` (a JSON document) under "config".
std::string checkpoint_json(const Model& model, std::string_view config_echo = "{}");
/// Throws ParseError or ValidationError.
Model parse_checkpoint(std::string_view text);

enum class EmbedMode { l2, poincare };

struct EmbedConfig {
  std::size_t restarts = 8;
  std::size_t steps = 5000;
  double lr = 1.0;
  /// Initial coordinates are uniform in [-init_scale, init_scale].
  double init_scale = 0.5;
  geometry::Curvature c{};
  std::uint64_t seed = 0;
};

struct EmbedResult {
  /// One row per tree vertex (leaves and aggregates); ball coordinates in
  /// Poincare mode.
  Matrix coords;
  double cpcc = 0.0;
  std::vector<double> restart_cpcc;
};

/// Tree embedding by gradient ascent on the full-tree CPCC. Each leaf gets a
/// free coordinate vector; every internal vertex is the aggregate of the
/// leaves below it (their mean in l2 mode, the Einstein midpoint of the
/// exp-mapped leaves in Poincare mode), as with one sample per class.
/// Poincare mode optimizes tangent vectors at the origin. Returns the best
/// restart. Throws InvalidArgument for dim < 2 and InsufficientVertices for
/// trees with fewer than 3 vertices.
EmbedResult embed_tree_direct(const LabelTree& tree, std::size_t dim, EmbedMode mode, const EmbedConfig& cfg);

/// Embedded distances of every vertex pair (i < j, row-major order).
std::vector<double> embedded_pair_distances(const Matrix& coords, EmbedMode mode, geometry::Curvature c);

}  // namespace hypstruct::training
