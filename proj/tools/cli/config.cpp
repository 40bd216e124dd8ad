#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace hypstruct::cli {

Json& section(Json& node, const char* key) {
  auto it = node.find(key);
  if (it == node.end() || it->is_null()) {
    node[key] = Json::object();
    return node[key];
  }
  if (!it->is_object()) throw Error(ErrorCode::ValidationError, std::string("config key '") + key + "' must be an object");
  return *it;
}

Json& required(Json& node, const char* key) {
  auto it = node.find(key);
  if (it == node.end() || it->is_null()) throw Error(ErrorCode::ValidationError, std::string("missing config key '") + key + "'");
  return *it;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  const auto text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::ParseError, "config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ValidationError, "config must be a JSON object");
  return j;
}

hierarchy::LabelTree load_tree(Json& cfg) {
  const auto name = take<std::string>(cfg, "tree", "cifar10");
  if (name == "cifar10") return hierarchy::builtin_cifar10_tree();
  return hierarchy::parse_tree(read_file(name));
}

objective::ObjectiveConfig read_objective(Json& node, objective::ObjectiveConfig d) {
  using namespace objective;
  ObjectiveConfig o;
  o.alpha = take(node, "alpha", d.alpha);
  o.beta = take(node, "beta", d.beta);
  o.c = geometry::Curvature{take(node, "c", d.c.value())};
  o.tau = take(node, "tau", d.tau);
  o.tree_scope = take_enum(node, "tree_scope", d.tree_scope,
                           {{"leaf_only", TreeScope::leaf_only}, {"full_tree", TreeScope::full_tree}});
  o.centroid_mode = take_enum(node, "centroid_mode", d.centroid_mode,
                              {{"klein_average", CentroidMode::klein_average},
                               {"euclidean_then_map", CentroidMode::euclidean_then_map}});
  o.map_mode = take_enum(node, "map_mode", d.map_mode, {{"exp_map", MapMode::exp_map}, {"clip", MapMode::clip}});
  o.flat_loss = take_enum(node, "flat_loss", d.flat_loss,
                          {{"cross_entropy", FlatLoss::cross_entropy}, {"supcon", FlatLoss::supcon}});
  o.cpcc_geometry = take_enum(node, "cpcc_geometry", d.cpcc_geometry,
                              {{"hyperbolic", CpccGeometry::hyperbolic}, {"euclidean", CpccGeometry::euclidean}});
  o.clip_epsilon = take(node, "clip_epsilon", d.clip_epsilon);
  o.validate();
  return o;
}

training::SyntheticSpec read_synthetic(Json& node, const hierarchy::LabelTree& tree, std::uint64_t seed,
                                       std::optional<std::uint64_t> noise_seed) {
  training::SyntheticSpec s{.tree = tree};
  s.dim = take(node, "dim", s.dim);
  s.coarse_spread = take(node, "coarse_spread", s.coarse_spread);
  s.fine_spread = take(node, "fine_spread", s.fine_spread);
  s.noise_sigma = take(node, "noise_sigma", s.noise_sigma);
  s.n_per_leaf = take(node, "n_per_leaf", s.n_per_leaf);
  s.seed = take(node, "seed", seed);
  s.noise_seed = take(node, "noise_seed", noise_seed.value_or(s.seed));
  s.validate();
  return s;
}

DatasetSource load_dataset(Json& node, const hierarchy::LabelTree& tree, std::uint64_t seed,
                           std::optional<std::uint64_t> noise_seed) {
  if (!node.is_object()) throw Error(ErrorCode::ValidationError, "a dataset must be an object");
  DatasetSource src;
  if (node.contains("csv")) {
    const auto path = take<std::string>(node, "csv", "");
    src.data = hierarchy::read_dataset_csv_file(path, tree);
    return src;
  }
  auto spec = read_synthetic(section(node, "synthetic"), tree, seed, noise_seed);
  src.data = training::generate_hierarchical_gaussians(spec);
  src.synthetic = std::move(spec);
  return src;
}

training::Model load_checkpoint(const std::filesystem::path& path) {
  return training::parse_checkpoint(read_file(path));
}

namespace {

bool parse_row(const std::string& line, std::vector<double>& row) {
  row.clear();
  const char* p = line.data();
  const char* end = p + line.size();
  while (end > p && (end[-1] == '\r' || end[-1] == ' ')) --end;
  while (p <= end) {
    while (p < end && *p == ' ') ++p;
    double v = 0.0;
    const auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) return false;
    row.push_back(v);
    p = next;
    while (p < end && *p == ' ') ++p;
    if (p == end) return true;
    if (*p != ',') return false;
    ++p;
  }
  return true;
}

}  // namespace

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<double> values, row;
  std::string line;
  std::size_t cols = 0, rows = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (!parse_row(line, row)) {
      if (line_no == 1) continue;
      throw ParseError(line_no, 1, "non-numeric cell in '" + path.string() + "'");
    }
    if (rows == 0) cols = row.size();
    if (row.size() != cols) throw ParseError(line_no, 1, "ragged row in '" + path.string() + "'");
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  return Matrix(rows, cols, std::move(values));
}

}  // namespace hypstruct::cli
